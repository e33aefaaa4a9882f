#!/usr/bin/env python3
"""Smoke test for the buckling_eigen_py extension module.

Builds nothing itself: run `cargo build -p buckling-eigen-python` first (or
pass --release and build in release mode). The script locates the cdylib in
the cargo target directory, stages it under an importable name, and checks
the main entry points against known answers.
"""

import argparse
import math
import shutil
import sys
import tempfile
from pathlib import Path


def locate_module(profile: str) -> Path:
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / "libbuckling_eigen_py.so",
        root / "target" / profile / "libbuckling_eigen_py.dylib",
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        f"extension not found (looked at {candidates[0]}); "
        "run `cargo build -p buckling-eigen-python` first"
    )


def stage(module_path: Path, stage_dir: Path) -> None:
    target = stage_dir / "buckling_eigen_py.so"
    shutil.copyfile(module_path, target)
    sys.path.insert(0, str(stage_dir))


def approx(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(b))


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--profile", default="debug", choices=["debug", "release"])
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        stage(locate_module(args.profile), Path(tmp))
        import buckling_eigen_py as be

        # the 3x3 singular pencil: K = diag(1,0,0), K_G = diag(2,-1,0)
        pencil = be.Pencil.singular(1, 1, 1, [2.0], [-1.0], seed=3)
        assert pencil.dim == 3
        assert pencil.common_null_dim == 1
        assert pencil.validate()

        result = pencil.solve(1.0, nev=1)
        [lam] = result.converged_eigenvalues()
        assert approx(lam, 0.5), lam
        assert max(result.etas) <= 1e-12
        assert max(result.cos_angles) <= 1e-12
        print(f"tiny pencil: lambda = {lam} (eta {max(result.etas):.2e})")

        assert pencil.count(0.0, 1.0) == 1
        assert pencil.count(-1.0, 1.0, method="augmented") == 1

        # interval-validated solve reports MATCH
        result = pencil.solve(1.0, interval=(0.0, 1.0))
        assert result.verdict == "MATCH", result.verdict
        assert result.count == 1
        print(f"interval solve: {result!r}")

        # canonical form of the reversed pencil
        form = pencil.canonical(reverse=True)
        assert (form["n0"], form["n1"], form["n2"], form["n3"]) == (0, 1, 1, 1)
        assert form["simultaneously_diagonalizable"]
        assert approx(form["lambda1"][0], 2.0)

        # eigenvalue maps are mutually inverse
        mu = be.lambda_to_mu(2.0, 1.0)
        assert approx(be.mu_to_lambda(mu, 1.0), 2.0)

        # a larger generated pencil: converged eigenvalues are planted ones
        pencil = be.Pencil.singular(
            8, 2, 2,
            [2.0, -0.5, 1.0 / 3.0, 4.0, -2.0, 0.7, -1.3, 2.5],
            [1.0, -2.0],
            seed=42,
        )
        result = pencil.solve(0.9, nev=4, tol=1e-8, maxit=80)
        truth = pencil.truth
        for lam in result.converged_eigenvalues():
            gap = min(abs(lam - t) / max(abs(t), 1e-300) for t in truth)
            assert gap <= 1e-8, (lam, gap)
        print(f"generated pencil: {result!r}")

        # the regular example pencil: eigenvalues (-1)^k k
        pencil = be.Pencil.example1(40, 1, seed=1)
        result = pencil.solve(-0.6, nev=3)
        lams = sorted(result.converged_eigenvalues(), key=abs)[:3]
        assert approx(lams[0], -1.0, 1e-9) and approx(abs(lams[1]), 2.0, 1e-9), lams
        assert math.isfinite(result.orth_residual)
        print(f"example1: nearest eigenvalues {lams}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
