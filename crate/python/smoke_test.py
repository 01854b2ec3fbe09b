"""Smoke test of the fracspec_py extension module.

Build the module first:

    cargo build --release -p fracspec-python --features extension-module

then run `python3 python/smoke_test.py`. The script copies the built
library next to a temporary import path when the module is not installed.
"""

import importlib
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("fracspec_py")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libfracspec_py.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "fracspec_py.so")
            sys.path.insert(0, str(tmp))
            return importlib.import_module("fracspec_py")
    sys.exit("fracspec_py not found; build it with --features extension-module")


def main():
    fs = load()

    bm = fs.oracle_eigs(0.5, 0.0, 10, grid=400)
    assert len(bm) == 10
    for n, lam in enumerate(bm.lambdas, start=1):
        exact = 1.0 / ((n - 0.5) * math.pi) ** 2
        assert abs(lam / exact - 1.0) < 1e-3, (n, lam, exact)

    first = fs.first_order_eigs(0.7, -1.0, 20)
    assert first.method == "first_order" and len(first.nus) == 20
    oracle = fs.oracle_eigs(0.7, -1.0, 20, grid=600)
    assert abs(first.lambdas[-1] / oracle.lambdas[-1] - 1.0) < 0.05

    nu, lam, phi1 = fs.refined_eig(0.5, 0.0, 4)
    assert abs(nu - 3.5 * math.pi) < 1e-8 and abs(lam * nu * nu - 1.0) < 1e-8

    rows = fs.mse(0.5, 0.0, [1e-4], [1.0], grid=400)
    assert len(rows) == 1 and abs(rows[0].ratio - 1.0) < 0.02, rows
    assert abs(fs.mse_asymptote(0.5, 1e-4, 1.0) - 1e-2) < 1e-15

    b_alpha, eta_h, modulus, arg = fs.special_constants(0.7)
    assert b_alpha > 0 and modulus > 0

    try:
        fs.oracle_eigs(1.5, 0.0, 5)
    except ValueError:
        pass
    else:
        raise AssertionError("H = 1.5 accepted")

    verdicts = fs.validate(checks=[7])
    assert verdicts[0][2], verdicts

    print(f"fracspec_py {fs.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
