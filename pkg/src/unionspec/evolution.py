"""The unitary group U(t) = exp(2 pi i t A_B), two independent ways.

* Spectral: expand in a truncated orthonormal eigenbasis and multiply by
  exp(2 pi i lam t).
* Ray tracing: (U(t) f)(x) = f(x + t) while x + t stays in J_k; when it
  passes beta_k the value is sum_j B[k, j] (U(s) f)(alpha_j) with
  s = x + t - beta_k, applied recursively.  Times are exact rationals, so
  states (interval, remaining time) merge exactly.

Pointwise values at the measure-zero coincidences x + t = beta_k use the
left limit (f(beta_k)), matching the trace conventions in funcspace.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .boundary import BoundaryMatrix
from .funcspace import (
    DEFAULT_ORDER,
    PiecewiseExp,
    QuadGrid,
    SampledFunction,
    exp_interval_integrals,
    sample,
)
from .geometry import IntervalUnion
from .io import atomic_write, fmt, write_json
from .spectral import Eigenpair, find_spectrum

__all__ = [
    "MAX_STATES",
    "RayOverflowError",
    "EigenBasisTruncation",
    "RayTraceResult",
    "RayEvolved",
    "evolve_spectral",
    "evolve_ray",
    "evolve_ray_function",
    "group_law_defect",
    "write_frames",
]

MAX_STATES = 10**6
MAX_PATHS = 10**5
TWO_PI_I = 2j * np.pi


class RayOverflowError(RuntimeError):
    """The memo table outgrew its budget; use the spectral propagator instead."""


def _exact(x) -> Fraction:
    # floats convert through their binary value, so float(x + t) is the IEEE sum
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class EigenBasisTruncation:
    """Orthonormal eigenfunctions of A_B with |lam| <= N.

    ``lams[j]`` and ``C[j]`` describe basis function j (eigenspaces of
    dimension > 1 contribute several rows).
    """

    omega: IntervalUnion
    eigenpairs: tuple[Eigenpair, ...]
    N: float
    lams: np.ndarray = field(init=False, repr=False)
    C: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lams = [ep.lam for ep in self.eigenpairs for _ in ep.cvectors]
        C = [c for ep in self.eigenpairs for c in ep.cvectors]
        object.__setattr__(self, "lams", np.array(lams, dtype=float))
        object.__setattr__(self, "C", np.array(C, dtype=complex).reshape(len(lams), self.omega.n))
        d = self.gram_defect()
        if d > 1e-9:
            raise ValueError(f"eigenbasis is not orthonormal: Gram defect {d:.2e}")

    @classmethod
    def build(cls, omega: IntervalUnion, B, N: float, tol: float = 1e-12, threads: int = 1):
        sw = find_spectrum(omega, B, (-N, N), tol=tol, threads=threads)
        return cls(omega, sw.eigenpairs, N)

    @property
    def size(self) -> int:
        return len(self.lams)

    def gram(self) -> np.ndarray:
        I = exp_interval_integrals(self.omega, np.subtract.outer(self.lams, self.lams))
        return np.einsum("ik,jk,ijk->ij", self.C, self.C.conj(), I)

    def gram_defect(self) -> float:
        if not self.size:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(self.size))))

    def quadrature_order(self, q: int = DEFAULT_ORDER) -> int:
        """Smallest order >= q that resolves every basis function on each interval."""
        if not self.size:
            return q
        wmax = float(np.max(np.abs(self.lams))) * float(np.max(self.omega.ell))
        return max(int(q), int(np.ceil(2 * wmax)) + 32)

    def coefficients(self, f, q: int | None = None) -> np.ndarray:
        """<f, eps_j> for every basis function.

        Quadrature runs at ``quadrature_order``; sampled input is carried
        there by its Legendre interpolant.
        """
        if isinstance(f, PiecewiseExp):
            I = exp_interval_integrals(self.omega, f.lam - self.lams)
            return np.sum(f.coeffs[None, :] * self.C.conj() * I, axis=1)
        if isinstance(f, SampledFunction):
            fs = f.resample(max(f.q, self.quadrature_order(f.q)))
        else:
            fs = sample(f, self.quadrature_order(q or DEFAULT_ORDER))
        x, w = fs.grid.nodes, fs.grid.weights
        # F[j, k] = sum_m w f exp(-2 pi i lam_j x_km)
        E = np.exp(-TWO_PI_I * self.lams[:, None, None] * x[None, :, :])
        F = np.sum(E * (w * fs.values)[None, :, :], axis=2)
        return np.sum(self.C.conj() * F, axis=1)

    def synthesize(self, coeffs: np.ndarray, grid: QuadGrid) -> SampledFunction:
        """sum_j coeffs[j] eps_j on ``grid``, with exact traces."""
        x = grid.nodes
        E = np.exp(TWO_PI_I * self.lams[:, None, None] * x[None, :, :])
        vals = np.einsum("j,jk,jkm->km", coeffs, self.C, E)
        ta = np.exp(TWO_PI_I * np.multiply.outer(self.lams, self.omega.alpha))
        tb = np.exp(TWO_PI_I * np.multiply.outer(self.lams, self.omega.beta))
        at_alpha = np.einsum("j,jk,jk->k", coeffs, self.C, ta)
        at_beta = np.einsum("j,jk,jk->k", coeffs, self.C, tb)
        return SampledFunction(grid, vals, at_alpha, at_beta)


    def evaluate(self, coeffs: np.ndarray, k: int, x) -> np.ndarray:
        """Pointwise value of sum_j coeffs[j] eps_j at points ``x`` of J_k."""
        x = np.asarray(x, dtype=float)
        E = np.exp(TWO_PI_I * np.multiply.outer(x, self.lams))
        return E @ (coeffs * self.C[:, k])


def evolve_spectral(f, t: float, basis: EigenBasisTruncation, q: int | None = None) -> SampledFunction:
    """Truncated U(t) f = sum exp(2 pi i lam t) <f, eps> eps on f's grid (or order ``q``)."""
    if isinstance(f, SampledFunction):
        grid = f.grid if q is None else QuadGrid(f.omega, q)
    else:
        grid = QuadGrid(basis.omega, q or DEFAULT_ORDER)
    a = basis.coefficients(f, grid.q)
    return basis.synthesize(np.exp(TWO_PI_I * basis.lams * float(t)) * a, grid)


@dataclass(frozen=True)
class RayTraceResult:
    """Value of (U(t) f)(x) with its origin decomposition.

    ``origins`` lists (interval j, point alpha_j + s, total amplitude) with
    value = sum amplitude * f(point).  ``paths`` (only when requested) lists
    (visited intervals, amplitude product, origin point).
    """

    value: complex
    origins: tuple[tuple[int, Fraction, complex], ...]
    paths: tuple | None = None
    states: int = 0

    @property
    def amplitude_l1(self) -> float:
        return float(sum(abs(a) for _, _, a in self.origins))

    @property
    def amplitude_l2(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for _, _, a in self.origins)))


def _origins(omega: IntervalUnion, Bm: np.ndarray, k: int, x: Fraction, t: Fraction, side: int, max_states: int):
    """Origin amplitudes {(j, s): amp} for (U(t) f)(x), x in closure of J_k."""
    alphas, betas, lengths = omega.alphas, omega.betas, omega.lengths
    y = x + t
    if y < betas[k] or (y == betas[k] and side < 0):
        return {(k, y - alphas[k]): 1.0 + 0j}, 1
    s0 = y - betas[k]
    pending: dict[tuple[int, Fraction], complex] = {}
    heap: list[tuple[Fraction, int]] = []
    for j in range(omega.n):
        if Bm[k, j] != 0:
            pending[(j, s0)] = pending.get((j, s0), 0) + Bm[k, j]
            heapq.heappush(heap, (-s0, j))
    leaves: dict[tuple[int, Fraction], complex] = {}
    seen = len(pending)
    while heap:
        neg_s, j = heapq.heappop(heap)
        s = -neg_s
        key = (j, s)
        if key not in pending:
            continue
        amp = pending.pop(key)
        if s < lengths[j] or (s == lengths[j] and side < 0):
            leaves[key] = leaves.get(key, 0) + amp
            continue
        s1 = s - lengths[j]
        for m in range(omega.n):
            if Bm[j, m] == 0:
                continue
            child = (m, s1)
            if child not in pending:
                seen += 1
                if seen > max_states:
                    raise RayOverflowError(
                        f"ray memo table exceeded {max_states} states at t={float(t)}"
                    )
                heapq.heappush(heap, (-s1, m))
                pending[child] = 0
            pending[child] += amp * Bm[j, m]
    return leaves, seen


def _paths(omega, Bm, k, x, t, side):
    """Explicit path enumeration (exponential; diagnostics only)."""
    alphas, betas, lengths = omega.alphas, omega.betas, omega.lengths
    y = x + t
    if y < betas[k] or (y == betas[k] and side < 0):
        return [((k,), 1.0 + 0j, y)]
    out = []
    stack = [((k, j), Bm[k, j], j, y - betas[k]) for j in range(omega.n) if Bm[k, j] != 0]
    while stack:
        visited, amp, j, s = stack.pop()
        if s < lengths[j] or (s == lengths[j] and side < 0):
            out.append((visited, amp, alphas[j] + s))
            if len(out) > MAX_PATHS:
                raise RayOverflowError(f"more than {MAX_PATHS} ray paths")
            continue
        for m in range(omega.n):
            if Bm[j, m] != 0:
                stack.append((visited + (m,), amp * Bm[j, m], m, s - lengths[j]))
    return out


def _check_B(B) -> np.ndarray:
    if not isinstance(B, BoundaryMatrix):
        B = BoundaryMatrix.unitary(B)
    if not B.is_unitary:
        raise ValueError("the unitary group needs a unitary boundary matrix")
    return B.entries


def _ray_value(omega, Bm, f, k, x, t, side, max_states):
    leaves, seen = _origins(omega, Bm, k, x, t, side, max_states)
    alphas = omega.alphas
    total = 0j
    origins = []
    for (j, s), amp in sorted(leaves.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        p = alphas[j] + s
        total += amp * f.at(j, p, side)
        origins.append((j, p, complex(amp)))
    return total, origins, seen


def evolve_ray(
    omega: IntervalUnion,
    B,
    f,
    t,
    x,
    record_paths: bool = False,
    max_states: int = MAX_STATES,
) -> RayTraceResult:
    """(U(t) f)(x) for t >= 0 and interior x, by exact ray recursion."""
    Bm = _check_B(B)
    t, x = _exact(t), _exact(x)
    if t < 0:
        raise ValueError("ray propagation is forward only (t >= 0); use evolve_spectral for t < 0")
    loc = omega.locate(x)
    if loc.kind != "interior":
        raise ValueError(f"x={float(x)} is not an interior point of Omega ({loc.kind})")
    value, origins, seen = _ray_value(omega, Bm, f, loc.index, x, t, -1, max_states)
    paths = None
    if record_paths:
        paths = tuple(_paths(omega, Bm, loc.index, x, t, -1))
    return RayTraceResult(complex(value), tuple(origins), paths, seen)


@dataclass(frozen=True, eq=False)
class RayEvolved:
    """U(t) f as a lazily evaluated, point-evaluable function."""

    omega: IntervalUnion
    B: object
    f: object
    t: Fraction
    max_states: int = MAX_STATES

    def __post_init__(self):
        object.__setattr__(self, "t", _exact(self.t))
        if self.t < 0:
            raise ValueError("ray propagation is forward only (t >= 0)")

    def at(self, k: int, x, side: int = -1) -> complex:
        Bm = _check_B(self.B)
        return complex(_ray_value(self.omega, Bm, self.f, k, _exact(x), self.t, side, self.max_states)[0])

    @property
    def at_alpha(self) -> np.ndarray:
        return np.array([self.at(k, self.omega.alphas[k], +1) for k in range(self.omega.n)])

    @property
    def at_beta(self) -> np.ndarray:
        return np.array([self.at(k, self.omega.betas[k], -1) for k in range(self.omega.n)])

    def sample(self, q: int = DEFAULT_ORDER) -> SampledFunction:
        grid = QuadGrid(self.omega, q)
        vals = np.array(
            [[self.at(k, _exact(float(xx))) for xx in grid.nodes[k]] for k in range(self.omega.n)]
        )
        return SampledFunction(grid, vals, self.at_alpha, self.at_beta)


def evolve_ray_function(omega: IntervalUnion, B, f, t, q: int = DEFAULT_ORDER) -> SampledFunction:
    """Ray propagator evaluated on the order-``q`` grid.

    Traces are one-sided limits of the recursion: from the right at
    alpha_k, from the left at beta_k.
    """
    _check_B(B)
    return RayEvolved(omega, B, f, t).sample(q)


def group_law_defect(
    omega: IntervalUnion,
    B,
    f,
    s,
    t,
    propagator: str = "ray",
    basis: EigenBasisTruncation | None = None,
    q: int = DEFAULT_ORDER,
) -> float:
    """L^2 distance between U(s + t) f and U(s) U(t) f."""
    if propagator == "ray":
        lhs = evolve_ray_function(omega, B, f, _exact(s) + _exact(t), q)
        rhs = evolve_ray_function(omega, B, RayEvolved(omega, B, f, t), s, q)
    elif propagator == "spectral":
        if basis is None:
            raise ValueError("spectral propagator needs an eigenbasis")
        lhs = evolve_spectral(f, float(s) + float(t), basis, q)
        # the intermediate state must resolve the whole truncation
        mid = evolve_spectral(f, float(t), basis, basis.quadrature_order(q))
        rhs = evolve_spectral(mid, float(s), basis, q)
    else:
        raise ValueError(f"unknown propagator {propagator!r}")
    return (lhs - rhs).norm()


def write_frames(outdir, times, frames) -> None:
    """frame_{i}.csv (node,value_re,value_im) per time plus manifest.json."""
    from pathlib import Path

    outdir = Path(outdir)
    names = []
    for i, fr in enumerate(frames):
        lines = ["node,value_re,value_im"]
        for x, v in zip(fr.grid.nodes.ravel(), fr.values.ravel()):
            lines.append(f"{fmt(x)},{fmt(v.real)},{fmt(v.imag)}")
        name = f"frame_{i}.csv"
        atomic_write(outdir / name, "\n".join(lines) + "\n")
        names.append(name)
    write_json(
        outdir / "manifest.json",
        {
            "t": [float(fmt(t)) for t in times],
            "norms": [float(fmt(fr.norm())) for fr in frames],
            "files": names,
        },
    )
