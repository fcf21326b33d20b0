"""Concrete elements of L^2(Omega).

Three kinds of functions are supported:

* :class:`PiecewiseExp` -- ``exp(2 pi i lam x) * c_i`` on interval ``J_i``,
  handled in closed form;
* :class:`SampledFunction` -- values on a per-interval Gauss-Legendre grid,
  with explicitly declared (or absent) boundary traces;
* :class:`PointFunction` -- a vectorised callable, for exact point
  evaluation (used by the ray propagator).

Plain Lebesgue measure is used throughout; the normalised exponential basis
is ``e_lam / sqrt(|Omega|)``.

All point-evaluable types implement ``at(k, x, side)``: the value at ``x`` in
the closure of interval ``k``.  At an endpoint the declared trace is
returned (right limit at alpha_k, left limit at beta_k); ``side`` only
matters for lazily evolved functions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as L

from .geometry import IntervalUnion
from .io import atomic_write, complex_pair, fmt

__all__ = [
    "DEFAULT_ORDER",
    "GridMismatchError",
    "QuadGrid",
    "PiecewiseExp",
    "SampledFunction",
    "PointFunction",
    "exp_interval_integrals",
    "exp_inner_product",
    "inner_product",
    "norm",
    "fourier_coeffs",
    "parseval_defect",
    "domain_energy",
    "integrate",
    "sample",
    "bump",
    "indicator",
    "exponential",
    "momentum",
    "write_sampled_csv",
    "read_sampled_csv",
]

DEFAULT_ORDER = 32
TWO_PI_I = 2j * np.pi


class GridMismatchError(ValueError):
    pass


@lru_cache(maxsize=None)
def _legendre_tools(q: int):
    """Reference-interval operators for order ``q`` on [-1, 1].

    Returns nodes, weights, the values->Legendre-coefficients map, and the
    cumulative-integral matrix ``C`` with ``(C v)_j = int_{-1}^{x_j} p``
    where ``p`` interpolates ``v``.
    """
    x, w = L.leggauss(q)
    V = L.legvander(x, q - 1)
    T = ((2 * np.arange(q) + 1) / 2)[:, None] * V.T * w[None, :]
    anti = L.legint(np.eye(q), lbnd=-1)
    C = L.legval(x, anti).T @ T
    for arr in (x, w, T, C):
        arr.setflags(write=False)
    return x, w, T, C


@dataclass(frozen=True, eq=False)
class QuadGrid:
    """Gauss-Legendre nodes and weights of order ``q`` on every interval."""

    omega: IntervalUnion
    q: int = DEFAULT_ORDER

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"quadrature order must be an integer >= 2, got {self.q}")

    @property
    def nodes(self) -> np.ndarray:
        x = _legendre_tools(self.q)[0]
        a, l = self.omega.alpha, self.omega.ell
        return a[:, None] + (x[None, :] + 1) * (l[:, None] / 2)

    @property
    def weights(self) -> np.ndarray:
        w = _legendre_tools(self.q)[1]
        return w[None, :] * (self.omega.ell[:, None] / 2)

    def same_as(self, other: "QuadGrid") -> bool:
        return self.q == other.q and self.omega == other.omega


# -- closed forms ---------------------------------------------------------

def exp_interval_integrals(omega: IntervalUnion, d) -> np.ndarray:
    """int_{J_k} exp(2 pi i d x) dx for every interval k.

    ``d`` may be an array; the interval axis is appended last.
    """
    d = np.asarray(d, dtype=complex)[..., None]
    a, l = omega.alpha, omega.ell
    z = TWO_PI_I * d * l
    small = np.abs(z) < 1e-300
    safe = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0, np.expm1(safe) / safe)
    return np.exp(TWO_PI_I * d * a) * l * ratio


def exp_inner_product(omega: IntervalUnion, lam, mu) -> complex:
    """<e_lam, e_mu> over Omega (plain Lebesgue measure)."""
    lam, mu = complex(lam), complex(mu)
    if lam == mu.conjugate():
        return complex(float(omega.measure))
    return complex(np.sum(exp_interval_integrals(omega, lam - mu.conjugate())))


@dataclass(frozen=True, eq=False)
class PiecewiseExp:
    """f(x) = exp(2 pi i lam x) * coeffs[k] for x in J_k."""

    omega: IntervalUnion
    lam: complex
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.shape != (self.omega.n,):
            raise ValueError(f"need {self.omega.n} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def at_alpha(self) -> np.ndarray:
        return self.coeffs * np.exp(TWO_PI_I * self.lam * self.omega.alpha)

    @property
    def at_beta(self) -> np.ndarray:
        return self.coeffs * np.exp(TWO_PI_I * self.lam * self.omega.beta)

    def at(self, k: int, x, side: int = -1) -> complex:
        return complex(self.coeffs[k] * np.exp(TWO_PI_I * self.lam * float(x)))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for k, (a, b) in enumerate(zip(self.omega.alpha, self.omega.beta)):
            m = (x > a) & (x < b)
            out[m] = self.coeffs[k] * np.exp(TWO_PI_I * self.lam * x[m])
        return out

    def sample(self, q: int = DEFAULT_ORDER) -> "SampledFunction":
        g = QuadGrid(self.omega, q)
        vals = self.coeffs[:, None] * np.exp(TWO_PI_I * self.lam * g.nodes)
        return SampledFunction(g, vals, self.at_alpha, self.at_beta)

    def norm(self) -> float:
        return float(np.sqrt(abs(exp_pair(self, self))))


def exp_pair(f: PiecewiseExp, g: PiecewiseExp) -> complex:
    if f.omega != g.omega:
        raise GridMismatchError("functions live on different sets")
    I = exp_interval_integrals(f.omega, f.lam - np.conj(g.lam))
    return complex(np.sum(f.coeffs * np.conj(g.coeffs) * I))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a function on a :class:`QuadGrid`, plus optional traces.

    ``at_alpha``/``at_beta`` are ``None`` when the traces are unknown (rough
    data); domain checks are then unavailable.
    """

    grid: QuadGrid
    values: np.ndarray
    at_alpha: np.ndarray | None = None
    at_beta: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        shape = (self.grid.omega.n, self.grid.q)
        if v.shape != shape:
            raise ValueError(f"values must have shape {shape}, got {v.shape}")
        object.__setattr__(self, "values", v)
        for name in ("at_alpha", "at_beta"):
            t = getattr(self, name)
            if t is not None:
                t = np.array(t, dtype=complex).ravel()
                if t.shape != (shape[0],):
                    raise ValueError(f"{name} must have length {shape[0]}")
                object.__setattr__(self, name, t)

    @property
    def omega(self) -> IntervalUnion:
        return self.grid.omega

    @property
    def q(self) -> int:
        return self.grid.q

    @property
    def has_traces(self) -> bool:
        return self.at_alpha is not None and self.at_beta is not None

    def legendre_coeffs(self) -> np.ndarray:
        T = _legendre_tools(self.q)[2]
        return self.values @ T.T

    def resample(self, q: int) -> "SampledFunction":
        """The Legendre interpolant evaluated on the order-``q`` grid."""
        if q == self.q:
            return self
        x = _legendre_tools(q)[0]
        vals = L.legval(x, self.legendre_coeffs().T)
        return SampledFunction(QuadGrid(self.omega, q), vals, self.at_alpha, self.at_beta)

    def at(self, k: int, x, side: int = -1) -> complex:
        a, b = self.omega.alphas[k], self.omega.betas[k]
        if self.at_alpha is not None and x == a:
            return complex(self.at_alpha[k])
        if self.at_beta is not None and x == b:
            return complex(self.at_beta[k])
        s = 2 * (float(x) - float(a)) / float(b - a) - 1
        c = self.values[k] @ _legendre_tools(self.q)[2].T
        return complex(L.legval(s, c))

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self, other)
        return SampledFunction(
            self.grid,
            self.values + other.values,
            _combine(self.at_alpha, other.at_alpha, 1),
            _combine(self.at_beta, other.at_beta, 1),
        )

    def __sub__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self, other)
        return SampledFunction(
            self.grid,
            self.values - other.values,
            _combine(self.at_alpha, other.at_alpha, -1),
            _combine(self.at_beta, other.at_beta, -1),
        )

    def scale(self, z) -> "SampledFunction":
        z = complex(z)
        return SampledFunction(
            self.grid,
            z * self.values,
            None if self.at_alpha is None else z * self.at_alpha,
            None if self.at_beta is None else z * self.at_beta,
        )

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))


def _combine(a, b, sign):
    if a is None or b is None:
        return None
    return a + sign * b


def _require_same_grid(f: SampledFunction, g: SampledFunction):
    if not f.grid.same_as(g.grid):
        raise GridMismatchError(
            f"grid mismatch: order {f.q} on {f.omega} vs order {g.q} on {g.omega}"
        )


@dataclass(frozen=True, eq=False)
class PointFunction:
    """A function given by a vectorised callable ``func(x)`` on Omega.

    Traces, if known, are passed explicitly; they are never extrapolated.
    """

    omega: IntervalUnion
    func: Callable[[np.ndarray], np.ndarray]
    at_alpha: np.ndarray | None = None
    at_beta: np.ndarray | None = None

    def at(self, k: int, x, side: int = -1) -> complex:
        if self.at_alpha is not None and x == self.omega.alphas[k]:
            return complex(self.at_alpha[k])
        if self.at_beta is not None and x == self.omega.betas[k]:
            return complex(self.at_beta[k])
        return complex(np.asarray(self.func(np.array([float(x)])))[0])

    def sample(self, q: int = DEFAULT_ORDER) -> SampledFunction:
        g = QuadGrid(self.omega, q)
        vals = np.asarray(self.func(g.nodes.ravel()), dtype=complex).reshape(g.nodes.shape)
        return SampledFunction(g, vals, self.at_alpha, self.at_beta)


def sample(f, q: int = DEFAULT_ORDER) -> SampledFunction:
    """Any supported function type -> SampledFunction of order ``q``."""
    if isinstance(f, SampledFunction):
        if f.q != q:
            raise GridMismatchError(f"function is sampled at order {f.q}, not {q}")
        return f
    return f.sample(q)


def _grid_of(*fs) -> QuadGrid | None:
    for f in fs:
        if isinstance(f, SampledFunction):
            return f.grid
    return None


def inner_product(f, g) -> complex:
    """<f, g> = int_Omega f conj(g).

    Closed form when both are :class:`PiecewiseExp`; otherwise quadrature on
    the grid of the sampled operand(s).
    """
    if isinstance(f, PiecewiseExp) and isinstance(g, PiecewiseExp):
        return exp_pair(f, g)
    grid = _grid_of(f, g)
    if grid is None:
        raise TypeError("inner product needs a sampled operand or two PiecewiseExp")
    fs, gs = sample(f, grid.q), sample(g, grid.q)
    _require_same_grid(fs, gs)
    return complex(np.sum(grid.weights * fs.values * np.conj(gs.values)))


def norm(f) -> float:
    return float(np.sqrt(abs(inner_product(f, f))))


def fourier_coeffs(f, lambdas: Sequence[float]) -> np.ndarray:
    """(<f, e_lam>)_lam for real frequencies ``lambdas``."""
    lambdas = np.asarray(lambdas, dtype=float)
    if isinstance(f, PiecewiseExp):
        I = exp_interval_integrals(f.omega, f.lam - lambdas)
        return I @ f.coeffs
    fs = f if isinstance(f, SampledFunction) else None
    if fs is None:
        raise TypeError("fourier_coeffs needs a PiecewiseExp or SampledFunction")
    nodes, w = fs.grid.nodes.ravel(), fs.grid.weights.ravel()
    E = np.exp(-TWO_PI_I * np.multiply.outer(lambdas, nodes))
    return E @ (w * fs.values.ravel())


def parseval_defect(f, lambdas: Sequence[float], omega: IntervalUnion | None = None) -> float:
    """||f||^2 - (1/|Omega|) sum |<f, e_lam>|^2 over the finite window."""
    omega = omega or f.omega
    if f.omega != omega:
        raise GridMismatchError("function lives on a different set")
    coeffs = fourier_coeffs(f, lambdas)
    return float(norm(f) ** 2 - np.sum(np.abs(coeffs) ** 2) / float(omega.measure))


def domain_energy(f, eigenpairs, N: float) -> float:
    """sum_{|lam| <= N} |lam|^2 |<f, eps>|^2 over an orthonormal eigenbasis.

    ``eigenpairs`` is any iterable of objects with ``lam`` and ``cvectors``
    (see :class:`unionspec.spectral.Eigenpair`).
    """
    total = 0.0
    for ep in eigenpairs:
        if abs(ep.lam) > N:
            continue
        for c in ep.cvectors:
            eps = PiecewiseExp(f.omega, ep.lam, c)
            total += ep.lam**2 * abs(inner_product(f, eps)) ** 2
    return float(total)


def integrate(omega: IntervalUnion, func: Callable, q: int = DEFAULT_ORDER) -> tuple[complex, float]:
    """Quadrature of ``func`` over Omega with an error estimate (order q vs q/2)."""
    def at(order):
        g = QuadGrid(omega, order)
        vals = np.asarray(func(g.nodes.ravel()), dtype=complex).reshape(g.nodes.shape)
        return complex(np.sum(g.weights * vals))

    hi = at(q)
    return hi, abs(hi - at(max(q // 2, 2)))


def momentum(f: SampledFunction) -> SampledFunction:
    """(1/2 pi i) f' by Legendre differentiation on each interval.

    The result carries no traces.
    """
    a = f.legendre_coeffs()
    x = _legendre_tools(f.q)[0]
    scale = 2 / f.omega.ell
    vals = np.empty_like(f.values)
    for k in range(f.omega.n):
        vals[k] = L.legval(x, L.legder(a[k])) * scale[k]
    return SampledFunction(f.grid, vals / TWO_PI_I)


def cumulative_integral(f: SampledFunction) -> np.ndarray:
    """int_{alpha_k}^{x} f at every node of interval k."""
    C = _legendre_tools(f.q)[3]
    return (f.values @ C.T) * (f.omega.ell[:, None] / 2)


# -- standard test functions ----------------------------------------------

def _bump_values(x, lo, hi):
    s = (2 * x - lo - hi) / (hi - lo)
    out = np.zeros(np.shape(x))
    m = np.abs(s) < 1
    out[m] = np.exp(1 - 1 / (1 - s[m] ** 2))
    return out


def bump(omega: IntervalUnion, k: int, margin: float | Fraction | None = None) -> PointFunction:
    """Smooth bump compactly supported in [alpha_k + margin, beta_k - margin].

    Peak value 1; traces are zero (the bump lies in D_0).  The default
    margin is a fifth of the interval length.
    """
    a, b = float(omega.alphas[k]), float(omega.betas[k])
    m = (b - a) / 5 if margin is None else float(margin)
    if not 0 < 2 * m < b - a:
        raise ValueError("margin must leave a non-empty support")
    lo, hi = a + m, b - m
    zero = np.zeros(omega.n, dtype=complex)
    return PointFunction(omega, lambda x: _bump_values(np.asarray(x, dtype=float), lo, hi), zero, zero)


def indicator(omega: IntervalUnion, k: int) -> PiecewiseExp:
    c = np.zeros(omega.n, dtype=complex)
    c[k] = 1
    return PiecewiseExp(omega, 0.0, c)


def exponential(omega: IntervalUnion, lam) -> PiecewiseExp:
    return PiecewiseExp(omega, lam, np.ones(omega.n))


# -- CSV exchange -----------------------------------------------------------

def write_sampled_csv(f: SampledFunction, path, traces_path=None) -> None:
    """CSV with columns interval_index,node,weight,value_re,value_im + JSON traces."""
    lines = ["interval_index,node,weight,value_re,value_im"]
    nodes, w = f.grid.nodes, f.grid.weights
    for k in range(f.omega.n):
        for j in range(f.q):
            v = f.values[k, j]
            lines.append(",".join([str(k), fmt(nodes[k, j]), fmt(w[k, j]), fmt(v.real), fmt(v.imag)]))
    atomic_write(path, "\n".join(lines) + "\n")
    if traces_path is not None:
        def enc(t):
            return None if t is None else [complex_pair(z) for z in t]

        meta = {
            "omega": f.omega.to_json(),
            "q": f.q,
            "at_alpha": enc(f.at_alpha),
            "at_beta": enc(f.at_beta),
        }
        atomic_write(traces_path, json.dumps(meta, indent=1) + "\n")


def read_sampled_csv(path, traces_path) -> SampledFunction:
    with open(traces_path) as fh:
        meta = json.load(fh)
    omega = IntervalUnion.from_json(meta["omega"])
    grid = QuadGrid(omega, int(meta["q"]))
    vals = np.zeros((omega.n, grid.q), dtype=complex)
    seen = np.zeros((omega.n, grid.q), dtype=int)
    nodes, weights = grid.nodes, grid.weights
    counters = [0] * omega.n
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["interval_index"])
            j = counters[k]
            if j >= grid.q:
                raise GridMismatchError(f"too many nodes for interval {k}")
            counters[k] += 1
            if abs(float(row["node"]) - nodes[k, j]) > 1e-12 or abs(float(row["weight"]) - weights[k, j]) > 1e-12:
                raise GridMismatchError(f"node {j} of interval {k} is not on the order-{grid.q} grid")
            vals[k, j] = float(row["value_re"]) + 1j * float(row["value_im"])
            seen[k, j] += 1
    if not np.all(seen == 1):
        raise GridMismatchError("sampled CSV does not cover the grid exactly once")

    def dec(t):
        return None if t is None else np.array([complex(r, i) for r, i in t])

    return SampledFunction(grid, vals, dec(meta["at_alpha"]), dec(meta["at_beta"]))
