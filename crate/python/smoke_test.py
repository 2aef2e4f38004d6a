"""Smoke test for the affdim extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/affdim-*.whl
    python python/smoke_test.py
"""

import json
import math
import sys

import affdim


def bg(n, alpha="1/2"):
    coord = {
        "alpha": alpha,
        "continuous": {"kind": "gaussian", "mean": 0.0, "variance": 1.0},
        "atoms": [{"value": "0", "prob": "1"}],
    }
    return json.dumps({"n": n, "coordinates": [coord] * n})


TILDE_A = [[1, 1, 0], [0, 1, 1], [1, 0, -1]]
A = [["1", "-1", "0.3"], ["1", "0.5", "1"], ["0.5", "-1", "0.5"]]


def check(name, cond, detail=""):
    print(f"{'ok  ' if cond else 'FAIL'} {name} {detail}")
    return cond


def main():
    results = []

    r = affdim.rid_linear(bg(3), A)
    results.append(check("rid A", r["value"] == "3/2" and r["exact"], r["value"]))

    r = affdim.rid_linear(bg(3), TILDE_A)
    results.append(check("rid A~", r["value"] == "11/8", r["value"]))

    r = affdim.rid_linear(bg(3), TILDE_A, mc=20000, seed=1)
    lo, hi = r["ci95"]
    results.append(check("rid A~ Monte Carlo", lo - 0.02 <= 1.375 <= hi + 0.02, f"{r['value']:.4f}"))

    d = affdim.decompose(bg(3), TILDE_A)
    results.append(check("decompose A~", len(d["components"]) == 5 and d["rid"] == "11/8"))

    b = affdim.drb_linear(bg(1), [[1]])
    results.append(check("drb BG(1/2,1)", abs(b["drb_bits"] - 1.7735) < 1e-3, f"{b['drb_bits']:.4f}"))

    results.append(check("rank/spark", affdim.rank(TILDE_A) == 2 and affdim.spark(TILDE_A) == 3))

    bid = affdim.ma_bid("-2,0.5,1", "7/10", [1, 2], l1=1)
    results.append(check("ma m=1", bid["rows"][0]["per_symbol_exact"] == "973/1000"))

    kl = affdim.kl_bernoulli(0.65, 0.7)
    results.append(check("kl", math.isclose(kl, 0.0057826, rel_tol=1e-4), f"{kl:.7f}"))

    above, below = affdim.sample_size_threshold(0.1, 0.1, 0.7, 1, 1)
    results.append(check("thresholds", above > 0 and below > 0, f"{above:.2f} {below:.2f}"))

    try:
        affdim.rid_linear(bg(3, alpha="3/2"), TILDE_A)
        results.append(check("invalid source raises", False))
    except ValueError as e:
        results.append(check("invalid source raises", "NuJointPMF" in str(e), str(e)))

    e = affdim.empirical_rid(bg(1), [[1]], [16, 32, 64, 128], samples=200000, seed=3)
    results.append(check("empirical BG", abs(e["slope"] - 0.5) < 0.05, f"{e['slope']:.4f}"))

    failed = results.count(False)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
