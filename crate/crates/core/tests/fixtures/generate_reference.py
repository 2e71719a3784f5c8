"""Regenerates the reference values used by the stats tests.

Independent oracle: scipy.stats for F quantiles and statsmodels MANOVA for the
two-group statistics and p-values. Run from this directory:

    python3 generate_reference.py
"""
import json

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.multivariate.manova import MANOVA

rng = np.random.default_rng(20240611)

quantiles = []
for d1, d2, p in [
    (1, 1, 0.5), (1, 5, 0.9), (2, 3, 0.95), (2, 10, 0.99), (2, 97, 0.5),
    (3, 7, 0.1), (4, 4, 0.75), (5, 2, 0.3), (2, 1000, 0.999), (10, 20, 0.05),
    (1, 30, 0.995), (2, 6, 0.01), (6, 60, 0.6), (2, 2, 0.2), (8, 3, 0.85),
    (2, 47, 0.9999), (20, 20, 0.5), (3, 150, 0.97), (1, 2, 0.66), (2, 9997, 0.25),
]:
    quantiles.append({"d1": d1, "d2": d2, "p": p, "x": float(stats.f.ppf(p, d1, d2))})

cases = []
for i in range(20):
    n1 = int(rng.integers(4, 60))
    n2 = int(rng.integers(4, 60))
    shift = rng.uniform(-0.8, 0.8, size=2)
    cov = np.array([[1.0, rng.uniform(-0.6, 0.6)], [0.0, rng.uniform(0.3, 1.5)]])
    a = rng.normal(size=(n1, 2)) @ cov
    b = rng.normal(size=(n2, 2)) @ cov + shift
    a = np.round(a * 1000.0, 3)
    b = np.round(b * 1000.0, 3)
    df = pd.DataFrame(np.vstack([a, b]), columns=["x", "y"])
    df["g"] = ["a"] * n1 + ["b"] * n2
    res = MANOVA.from_formula("x + y ~ g", data=df).mv_test().results["g"]["stat"]
    cases.append({
        "a": a.tolist(),
        "b": b.tolist(),
        "wilks": float(res.loc["Wilks' lambda", "Value"]),
        "wilks_p": float(res.loc["Wilks' lambda", "Pr > F"]),
        "pillai": float(res.loc["Pillai's trace", "Value"]),
        "pillai_p": float(res.loc["Pillai's trace", "Pr > F"]),
        "hotelling": float(res.loc["Hotelling-Lawley trace", "Value"]),
        "hotelling_p": float(res.loc["Hotelling-Lawley trace", "Pr > F"]),
        "roy": float(res.loc["Roy's greatest root", "Value"]),
        "roy_p": float(res.loc["Roy's greatest root", "Pr > F"]),
    })

with open("f_quantiles.json", "w") as f:
    json.dump(quantiles, f, indent=1)
with open("manova_reference.json", "w") as f:
    json.dump(cases, f)
