#!/usr/bin/env python3
"""Smoke test for the copula_smooth_py extension module.

Builds are produced by cargo (no wheel packaging); this script locates the
compiled cdylib under target/, copies it next to a temp dir under the
importable name, and exercises the bound functions end to end.

Usage:
    cargo build -p copula-smooth-py [--release]
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libcopula_smooth_py.so", "copula_smooth_py.so", "libcopula_smooth_py.dylib")
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit("extension not found; run `cargo build -p copula-smooth-py` first")


def check(label: str, ok: bool, detail: str = "") -> None:
    if not ok:
        sys.exit(f"FAIL {label}: {detail}")
    print(f"ok {label}" + (f" ({detail})" if detail else ""))


def main() -> None:
    lib = locate_cdylib()
    workdir = Path(tempfile.mkdtemp(prefix="copula-smooth-py-"))
    shutil.copy(lib, workdir / "copula_smooth_py.so")
    sys.path.insert(0, str(workdir))
    import copula_smooth_py as cs

    h = cs.silverman_h(2, 25)
    check("silverman_h", abs(h - 0.341995) < 1e-6, f"h={h:.6f}")

    c = cs.copula_cdf("clayton:2", [0.5, 0.5])
    check("copula_cdf", abs(c - 1 / math.sqrt(7)) < 1e-12, f"C(.5,.5)={c:.6f}")

    check("true_tau", abs(cs.true_tau("clayton:2") - 0.5) < 1e-12)
    rho = cs.true_rho_s("gaussian:0.5")
    check("true_rho_s", abs(rho - 6 / math.pi * math.asin(0.25)) < 1e-9, f"rho_s={rho:.6f}")

    data = cs.sample_copula("clayton:2", 20000, seed=1)
    tau = cs.kendall_tau(data)
    check("kendall_tau", abs(tau - 0.5) < 0.03, f"tau_hat={tau:.4f}")
    rho_hat = cs.spearman_rho(data)
    rho_true = cs.true_rho_s("clayton:2")
    check(
        "spearman_rho",
        abs(rho_hat - rho_true) < 0.03,
        f"rho_hat={rho_hat:.4f} vs {rho_true:.4f}",
    )

    po = cs.pseudo_observations([[1.0, 10.0], [3.0, 30.0], [2.0, 20.0]])
    check(
        "pseudo_observations",
        po == [[0.25, 0.25], [0.75, 0.75], [0.5, 0.5]],
        repr(po),
    )

    small = cs.sample_copula("clayton:2", 25, seed=2)
    boot = cs.smooth_bootstrap(small, m=2000, seed=3)
    check("smooth_bootstrap shape", len(boot) == 2000 and len(boot[0]) == 2)
    flat_ok = all(0.0 < x < 1.0 for row in boot for x in row)
    check("smooth_bootstrap range", flat_ok)
    means = [sum(row[j] for row in boot) / len(boot) for j in range(2)]
    check(
        "smooth_bootstrap margins",
        all(abs(mu - 0.5) < 0.05 for mu in means),
        f"column means {means[0]:.3f}, {means[1]:.3f}",
    )

    reps = cs.bootstrap_distribution(small, stat="tau", b=50, seed=4)
    check("bootstrap_distribution", len(reps) == 50 and all(-1 <= r <= 1 for r in reps))

    d = cs.hausdorff([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.1], [1.0, 0.1]])
    check("hausdorff", abs(d - 0.1) < 1e-12, f"d={d}")

    truth = cs.clayton_level_boundary(2.0, 0.3, 500)
    est = cs.level_boundary(cs.sample_copula("clayton:2", 500, seed=5), 0.3)
    gap = cs.hausdorff([list(v) for v in est], [list(v) for v in truth])
    check("level_boundary", 0.0 < gap < 0.2, f"hausdorff to truth {gap:.4f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
