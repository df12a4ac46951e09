//! Decoding math: temperature softmax, nucleus (top-p) truncation and
//! inverse-CDF token sampling driven by an explicit SplitMix64 state.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("logit vector is empty")]
    EmptyLogits,
    #[error("logit {index} is not finite ({value})")]
    NonFiniteLogit { index: usize, value: f64 },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("top_p must lie in (0, 1], got {0}")]
    InvalidTopP(f64),
    #[error("max_tokens must be positive")]
    InvalidMaxTokens,
    #[error("not a probability vector: {0}")]
    InvalidProbabilities(String),
}

type Result<T> = std::result::Result<T, SamplingError>;

/// SplitMix64 generator. The whole state is one `u64`, so streams can be
/// stored, passed around and resumed bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    pub const fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` from the top 53 bits of the next output.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl rand_core::RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (SplitMix64::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        SplitMix64::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

/// Unnormalized token scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SamplingError::EmptyLogits);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SamplingError::NonFiniteLogit { index, value });
        }
        Ok(LogitVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Probability distribution over token indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SamplingError::InvalidProbabilities("empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SamplingError::InvalidProbabilities(format!(
                "entry {v} outside [0, 1]"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > sum_tolerance(values.len()) {
            return Err(SamplingError::InvalidProbabilities(format!(
                "sums to {sum}"
            )));
        }
        Ok(ProbVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

// 1e-12 plus the rounding a length-n summation can accumulate.
fn sum_tolerance(n: usize) -> f64 {
    1e-12 + n as f64 * f64::EPSILON
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl SamplingParams {
    pub fn new(temperature: f64, top_p: f64, max_tokens: u32, seed: u64) -> Result<Self> {
        let params = SamplingParams {
            temperature,
            top_p,
            max_tokens,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature)?;
        check_top_p(self.top_p)?;
        if self.max_tokens == 0 {
            return Err(SamplingError::InvalidMaxTokens);
        }
        Ok(())
    }
}

fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(SamplingError::InvalidTemperature(tau))
    }
}

fn check_top_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(SamplingError::InvalidTopP(p))
    }
}

/// `exp(l_i / tau) / sum_j exp(l_j / tau)`, evaluated after subtracting
/// `max_j(l_j / tau)` from every exponent.
pub fn tempered_softmax(logits: &LogitVector, temperature: f64) -> Result<ProbVector> {
    check_temperature(temperature)?;
    let scaled: Vec<f64> = logits.0.iter().map(|l| l / temperature).collect();
    if let Some((index, _)) = scaled.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SamplingError::NonFiniteLogit {
            index,
            value: logits.0[index],
        });
    }
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbVector(exps.into_iter().map(|e| e / total).collect()))
}

// Prefix masses that reach p exactly can sum a few ulps short in floating point.
const TOP_P_SLACK: f64 = 1e-12;

/// Keep the smallest highest-probability prefix whose mass reaches `p`,
/// zero everything else and renormalize. Ties sort by ascending index.
/// Mass within `1e-12` below `p` counts as reaching it.
pub fn top_p_filter(probs: &ProbVector, p: f64) -> Result<ProbVector> {
    check_top_p(p)?;
    if p == 1.0 {
        return Ok(probs.clone());
    }
    let values = &probs.0;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut cumulative = 0.0;
    let mut keep = order.len();
    for (rank, &i) in order.iter().enumerate() {
        cumulative += values[i];
        if cumulative >= p - TOP_P_SLACK {
            keep = rank + 1;
            break;
        }
    }

    let kept = &order[..keep];
    let mass: f64 = kept.iter().map(|&i| values[i]).sum();
    let mut out = vec![0.0; values.len()];
    for &i in kept {
        out[i] = values[i] / mass;
    }
    Ok(ProbVector(out))
}

/// Inverse-CDF draw: the smallest index whose cumulative probability exceeds
/// a uniform `u` taken from `state`. Returns the index and the advanced state.
pub fn sample_token(probs: &ProbVector, state: u64) -> (usize, u64) {
    let mut rng = SplitMix64::new(state);
    let u = rng.next_f64();
    (inverse_cdf(probs, u), rng.state())
}

pub(crate) fn inverse_cdf(probs: &ProbVector, u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.0.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        cumulative += p;
        if cumulative > u {
            return i;
        }
    }
    // Rounding left the total just under u.
    last_nonzero
}

/// One full decoding step: temperature, nucleus truncation, then a draw.
pub fn decode_step(logits: &LogitVector, params: &SamplingParams, state: u64) -> Result<(usize, u64)> {
    let probs = tempered_softmax(logits, params.temperature)?;
    let nucleus = top_p_filter(&probs, params.top_p)?;
    Ok(sample_token(&nucleus, state))
}
