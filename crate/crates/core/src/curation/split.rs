use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::sampling::SplitMix64;

const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            validation,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("validation", self.validation), ("test", self.test)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("{name} ratio {r} must lie in (0, 1)")));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > RATIO_TOLERANCE {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, validation, test)` sizes for `n` sentences.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon keeps exact products such as 10 * 0.1 from flooring to 0
        // when the float lands just below the integer.
        let part = |r: f64| ((n as f64) * r + RATIO_TOLERANCE).floor() as usize;
        let validation = part(self.validation);
        let test = part(self.test);
        (n - validation - test, validation, test)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

pub struct Split {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

/// Shuffle with SplitMix64 seeded from `spec.seed`, then cut validation,
/// test and train in that order of the shuffled sequence.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config("cannot split an empty corpus".into()));
    }
    let mut sentences = corpus.sentences().to_vec();
    sentences.shuffle(&mut SplitMix64::new(spec.seed));

    let (_, n_val, n_test) = spec.sizes(sentences.len());
    let train = sentences.split_off(n_val + n_test);
    let test = sentences.split_off(n_val);
    let validation = sentences;

    let labels = corpus.labelset();
    Ok(Split {
        train: Corpus::new(train, labels.clone())?,
        validation: Corpus::new(validation, labels.clone())?,
        test: Corpus::new(test, labels.clone())?,
    })
}
