"""Ray-traced vs. truncated spectral evolution of a bump on (0,1/2) u (1,3/2).

Prints the L^2 gap between the two propagators for each truncation N and time t.
"""
import argparse
from dataclasses import dataclass, field
from fractions import Fraction as F

import numpy as np

from unionspec.evolution import EigenBasisTruncation, evolve_ray_function, evolve_spectral
from unionspec.funcspace import bump
from unionspec.geometry import IntervalUnion

B = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]) / 2


@dataclass
class Config:
    truncations: list = field(default_factory=lambda: [25, 50, 100, 200, 400])
    times: list = field(default_factory=lambda: [0.2, 0.7, 1.3])
    q: int = 256


def main(cfg: Config):
    omega = IntervalUnion([0, F(1, 2), 1, F(3, 2)])
    f = bump(omega, 0)
    rays = {t: evolve_ray_function(omega, B, f, t, cfg.q) for t in cfg.times}
    print("N," + ",".join(f"t={t}" for t in cfg.times))
    for N in cfg.truncations:
        basis = EigenBasisTruncation.build(omega, B, N)
        gaps = [(rays[t] - evolve_spectral(f, t, basis, cfg.q)).norm() for t in cfg.times]
        print(f"{N}," + ",".join(f"{g:.3e}" for g in gaps))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--truncations", type=int, nargs="+", default=Config().truncations)
    ap.add_argument("--times", type=float, nargs="+", default=Config().times)
    ap.add_argument("--q", type=int, default=Config.q)
    main(Config(**vars(ap.parse_args())))
