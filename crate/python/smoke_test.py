"""Smoke test for the levylab_py extension module.

Build first with `cargo build --release -p levylab-py`; the script copies the
shared library next to itself as levylab_py.so and imports it.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
TARGET = HERE.parent / "target"


def load():
    for profile in ("release", "debug"):
        for name in ("liblevylab_py.so", "liblevylab_py.dylib"):
            lib = TARGET / profile / name
            if lib.exists():
                shutil.copy(lib, HERE / "levylab_py.so")
                sys.path.insert(0, str(HERE))
                import levylab_py

                return levylab_py
    sys.exit("build the extension first: cargo build --release -p levylab-py")


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    lp = load()
    assert "quadratic_cauchy" in lp.catalog_names()

    t = lp.Target("quadratic_cauchy")
    close(t.density(0.0), 2.0 / math.pi, 1e-12)
    close(t.variance(), 1.0, 1e-9)
    close(t.oracle_potential(0.0), -1.0, 1e-12)
    close(t.cdf(t.quantile(0.3)), 0.3, 1e-10)

    xs = lp.sample_stable(1.0, 20000, seed=7)
    assert xs == lp.sample_stable(1.0, 20000, seed=7)
    frac = sum(abs(x) > 1.0 for x in xs) / len(xs)
    close(frac, 0.5, 0.02)

    # Cauchy density maps to 1/pi (1 - x^2) / (1 + x^2)^2
    n, a = 4001, 40.0
    grid = [-a + 2 * a * i / (n - 1) for i in range(n)]
    f = [1.0 / (math.pi * (1 + x * x)) for x in grid]
    g = lp.fractional_laplacian(-a, a, f, 1.0, tail="power:2")
    mid = n // 2
    close(g[mid], 1.0 / math.pi, 1e-4)

    a4 = lp.Target("cauchy_alpha4")
    close(a4.oracle_drift(1.0), -6.0, 1e-12)
    r = lp.reconstruct(a4)
    i1 = min(range(len(r["x"])), key=lambda i: abs(r["x"][i] - 1.0))
    close(r["drift"][i1], -6.0, 1e-2)
    assert r["residual_norm"] < 1e-3

    ouc = lp.Target("cauchy_ouc")
    s = lp.langevin_ensemble(ouc, paths=2000, t_final=2.0, dt=0.01, snapshots=4, seed=3)
    assert len(s["t"]) == 5 and s["variance"] is None
    k = lp.semigroup_ensemble(ouc, paths=500, t_final=1.0, snapshots=2, seed=3)
    assert k["jumps"] > 0

    p = lp.solve_fpe(t, t_final=0.5, snapshots=1)
    close(p["mass"][-1], 1.0, 1e-6)

    assert lp.run_cli(["sample", "--mu", "7"]) == 2
    print("levylab_py smoke test passed")


if __name__ == "__main__":
    main()
