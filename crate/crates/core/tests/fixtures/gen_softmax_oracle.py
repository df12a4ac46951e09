"""Reference values for the tempered softmax, computed at 50 significant digits.

Usage: python3 gen_softmax_oracle.py > softmax_oracle.json
"""
import json
import random

from mpmath import mp, mpf, exp, fsum

mp.dps = 50
rng = random.Random(20230125)

cases = []
for _ in range(100):
    n = rng.randint(1, 64)
    scale = rng.choice([0.1, 1.0, 5.0, 30.0])
    logits = [rng.uniform(-scale, scale) for _ in range(n)]
    tau = rng.choice([0.05, 0.3, 0.5, 0.8, 0.9, 1.0, 1.7, 4.0])
    scaled = [mpf(l) / mpf(tau) for l in logits]
    m = max(scaled)
    weights = [exp(s - m) for s in scaled]
    z = fsum(weights)
    probs = [mp.nstr(w / z, 30) for w in weights]
    cases.append({"logits": logits, "temperature": tau, "probs": probs})

print(json.dumps({"cases": cases}, indent=1))
