"""Eigenvalue counting vs. the Weyl law |Omega| * (b - a) for random boundary matrices.

    python3 scripts/weyl_density.py --samples 10 --hi 200
"""
import argparse
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from unionspec.geometry import IntervalUnion
from unionspec.spectral import count_spectrum


@dataclass
class Config:
    samples: int = 10
    n: int = 3
    hi: float = 100.0
    seed: int = 0


def haar(rng, n):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_union(rng, n, den=8):
    ends, x = [], Fraction(0)
    for _ in range(n):
        x += Fraction(int(rng.integers(1, 4)), den)
        ends.append(x)
        x += Fraction(int(rng.integers(1, 2 * den)), den)
        ends.append(x)
    return IntervalUnion(ends)


def main(cfg: Config):
    rng = np.random.default_rng(cfg.seed)
    print("sample,measure,count,weyl,deviation")
    for i in range(cfg.samples):
        omega = random_union(rng, cfg.n)
        B = haar(rng, cfg.n)
        N = count_spectrum(omega, B, 0, cfg.hi)
        w = float(omega.measure) * cfg.hi
        print(f"{i},{float(omega.measure):.6g},{N},{w:.6g},{N - w:+.4f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in vars(Config()).items():
        ap.add_argument(f"--{name}", type=type(val), default=val)
    main(Config(**vars(ap.parse_args())))
