"""Point spectrum of the extension A_B and its resolvent.

lam is an eigenvalue of A_B iff 1 is an eigenvalue of the unitary transfer
matrix M(lam) = E(lam beta)^{-1} B E(lam alpha).  Each eigenphase of M(lam)
decreases strictly in lam, and because det M(lam) = det B exp(-2 pi i lam
|Omega|) the phases sum to a linear function.  With phases wrapped into
[0, 2 pi) this gives an exact integer count of zero crossings:

    #crossings in (a, b] = |Omega| (b - a) + (S(b) - S(a)) / (2 pi),

where S is the sum of the wrapped phases.  Roots are located by bisection on
this count, so no branch matching is needed for correctness.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryMatrix, transfer_matrix
from .funcspace import (
    PiecewiseExp,
    SampledFunction,
    sample,
)
from .geometry import IntervalUnion
from .io import atomic_write, complex_pair, fmt, write_json

__all__ = [
    "NULLSPACE_TOL",
    "RESOLVENT_TOL",
    "MERGE_TOL",
    "MAX_GRID_POINTS",
    "EigenSolverError",
    "WindowTooLargeError",
    "OnSpectrumError",
    "SingularResolventError",
    "Eigenpair",
    "SpectrumWindow",
    "char_det",
    "eigenphases",
    "phase_sum",
    "track_eigenphases",
    "grid_step",
    "find_spectrum",
    "count_spectrum",
    "eigenfunction",
    "weighted_orthonormal_basis",
    "resolvent_apply",
]

TWO_PI = 2 * np.pi
NULLSPACE_TOL = 1e-7
RESOLVENT_TOL = 1e-6
MERGE_TOL = 1e-9
MAX_GRID_POINTS = 5_000_000
ENDPOINT_PHASE_TOL = 1e-9


class EigenSolverError(RuntimeError):
    def __init__(self, lam, detail):
        self.lam = lam
        super().__init__(f"eigen-solver failed at lambda={lam!r}: {detail}")


class WindowTooLargeError(ValueError):
    def __init__(self, points: int, parts: int):
        self.points = points
        self.parts = parts
        super().__init__(
            f"window needs {points} grid points (limit {MAX_GRID_POINTS}); "
            f"split it into at least {parts} sub-windows"
        )


class OnSpectrumError(ValueError):
    pass


class SingularResolventError(ArithmeticError):
    def __init__(self, lam, smin: float):
        self.lam = lam
        self.smallest_singular_value = smin
        super().__init__(
            f"lambda={lam!r} is too close to the spectrum: "
            f"smallest singular value of M-I is {smin:.3e}"
        )


def _unitary(B) -> BoundaryMatrix:
    if not isinstance(B, BoundaryMatrix):
        B = BoundaryMatrix.unitary(B)
    if not B.is_unitary:
        raise ValueError("spectral computations need a unitary boundary matrix")
    return B


@dataclass(frozen=True, eq=False)
class Eigenpair:
    """An eigenvalue with an l-weighted orthonormal basis of coefficient vectors.

    ``c`` in ``cvectors`` gives the eigenfunction exp(2 pi i lam x) c_k on J_k,
    of unit L^2(Omega) norm.
    """

    lam: float
    cvectors: tuple[np.ndarray, ...]
    singular_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def multiplicity(self) -> int:
        return len(self.cvectors)


@dataclass(frozen=True, eq=False)
class SpectrumWindow:
    lambda_min: float
    lambda_max: float
    eigenpairs: tuple[Eigenpair, ...]
    grid: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return sum(ep.multiplicity for ep in self.eigenpairs)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([ep.lam for ep in self.eigenpairs])

    def __iter__(self):
        return iter(self.eigenpairs)

    def __len__(self):
        return len(self.eigenpairs)

    def to_csv(self) -> str:
        """One row per eigenspace basis vector."""
        n = self.eigenpairs[0].cvectors[0].size if self.eigenpairs else 0
        head = ["lambda", "multiplicity"]
        head += [f"c_re_{i + 1}" for i in range(n)] + [f"c_im_{i + 1}" for i in range(n)]
        rows = [",".join(head)]
        for ep in self.eigenpairs:
            for c in ep.cvectors:
                rows.append(",".join([fmt(ep.lam), str(ep.multiplicity)] + [fmt(v) for v in c.real] + [fmt(v) for v in c.imag]))
        return "\n".join(rows) + "\n"

    def to_json(self) -> dict:
        return {
            "lambda_min": float(fmt(self.lambda_min)),
            "lambda_max": float(fmt(self.lambda_max)),
            "count": self.count,
            "eigenpairs": [
                {
                    "lambda": float(fmt(ep.lam)),
                    "multiplicity": ep.multiplicity,
                    "cvectors": [[complex_pair(z) for z in c] for c in ep.cvectors],
                }
                for ep in self.eigenpairs
            ],
        }

    @classmethod
    def from_json(cls, data) -> "SpectrumWindow":
        if isinstance(data, str):
            data = json.loads(data)
        pairs = []
        for e in data["eigenpairs"]:
            cs = tuple(np.array([complex(a, b) for a, b in c]) for c in e["cvectors"])
            if len(cs) != e["multiplicity"]:
                raise ValueError("multiplicity does not match the number of basis vectors")
            pairs.append(Eigenpair(float(e["lambda"]), cs))
        return cls(float(data["lambda_min"]), float(data["lambda_max"]), tuple(pairs), np.empty(0), np.empty((0, 0)))

    def write(self, csv_path, json_path) -> None:
        atomic_write(csv_path, self.to_csv())
        write_json(json_path, self.to_json())


def char_det(omega: IntervalUnion, B, lam) -> complex:
    """det(I - M(lam))."""
    M = transfer_matrix(omega, B, lam)
    return complex(np.linalg.det(np.eye(omega.n) - M))


def _wrapped_phases(omega, B, lams) -> np.ndarray:
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    M = transfer_matrix(omega, B, lams)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        bad = lams[0] if len(lams) == 1 else (lams[0], lams[-1])
        raise EigenSolverError(bad, f"{exc}; cond(M)={np.linalg.cond(M).max():.3e}") from exc
    th = np.mod(np.angle(ev), TWO_PI)
    th[th >= TWO_PI] = 0.0
    return np.sort(th, axis=-1)


def eigenphases(omega: IntervalUnion, B, lam: float) -> np.ndarray:
    """Sorted eigenphases of M(lam) in [0, 2 pi)."""
    B = _unitary(B)
    return _wrapped_phases(omega, B, [float(lam)])[0]


def phase_sum(omega: IntervalUnion, B, lam) -> np.ndarray:
    return _wrapped_phases(omega, _unitary(B), lam).sum(axis=-1)


def grid_step(omega: IntervalUnion) -> float:
    """Step that bounds each eigenphase's motion by pi/2."""
    return 1.0 / (4.0 * float(omega.ell.max()))


def _circ(a, b):
    d = np.abs(a - b) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def track_eigenphases(omega: IntervalUnion, B, lams, ambiguity: float = 1e-6, max_depth: int = 30) -> np.ndarray:
    """Continuously lifted eigenphase branches on the grid ``lams``.

    Branches are matched between consecutive points by greedy nearest
    phase.  When two candidates are within ``ambiguity`` of each other the
    step is halved locally.  Returns an array of shape (len(lams), n).
    """
    B = _unitary(B)
    lams = np.asarray(lams, dtype=float)
    out = np.empty((len(lams), omega.n))
    out[0] = _wrapped_phases(omega, B, lams[:1])[0]

    def match(prev, new):
        order = np.empty(len(prev), dtype=int)
        free = list(range(len(new)))
        # greedy on the globally closest pairs
        pairs = sorted(
            ((_circ(prev[i], new[j]), i, j) for i in range(len(prev)) for j in range(len(new))),
        )
        done = set()
        ambiguous = False
        for d, i, j in pairs:
            if i in done or j not in free:
                continue
            others = [_circ(prev[i], new[jj]) for jj in free if jj != j]
            if others and min(others) - d < ambiguity:
                ambiguous = True
            order[i] = j
            done.add(i)
            free.remove(j)
        return order, ambiguous

    def lift(prev_lifted, l0, l1, depth):
        new = _wrapped_phases(omega, B, [l1])[0]
        order, ambiguous = match(np.mod(prev_lifted, TWO_PI), new)
        if ambiguous and depth < max_depth:
            mid = 0.5 * (l0 + l1)
            return lift(lift(prev_lifted, l0, mid, depth + 1), mid, l1, depth + 1)
        step = new[order] - np.mod(prev_lifted, TWO_PI)
        step = (step + np.pi) % TWO_PI - np.pi
        return prev_lifted + step

    for k in range(1, len(lams)):
        out[k] = lift(out[k - 1], lams[k - 1], lams[k], 0)
    return out


def _crossings(omega, h, s0, s1):
    """Integer zero-crossing counts for steps of width ``h``."""
    raw = float(omega.measure) * h + (s1 - s0) / TWO_PI
    return np.rint(raw).astype(int)


def count_spectrum(omega: IntervalUnion, B, lam1: float, lam2: float) -> int:
    """Number of eigenvalues in [lam1, lam2], with multiplicity.

    Uses the total phase flux; the endpoints must not be eigenvalues.
    """
    B = _unitary(B)
    if not lam1 < lam2:
        raise ValueError("need lam1 < lam2")
    th = _wrapped_phases(omega, B, [lam1, lam2])
    near = np.minimum(th, TWO_PI - th).min(axis=1)
    if near.min() <= ENDPOINT_PHASE_TOL:
        raise OnSpectrumError(f"window endpoint lies on the spectrum (phase distance {near.min():.2e})")
    s = th.sum(axis=1)
    return int(_crossings(omega, lam2 - lam1, s[0], s[1]))


def weighted_orthonormal_basis(ell: np.ndarray, V: np.ndarray, k: int) -> list[np.ndarray]:
    """Canonical l-weighted orthonormal basis of span(V) of size ``k``.

    Projects the standard basis vectors onto span(V) (in the weighted inner
    product) and Gram-Schmidts them greedily by largest residual; the
    resulting vectors do not depend on the basis chosen for span(V).
    """
    W = np.sqrt(ell)[:, None] * V
    Q, _ = np.linalg.qr(W)
    Q = Q / np.sqrt(ell)[:, None]  # weighted-orthonormal basis of span(V)
    n = len(ell)
    cands = [Q @ (Q.conj().T @ (ell * np.eye(n)[j])) for j in range(n)]
    basis: list[np.ndarray] = []
    for _ in range(k):
        best, best_norm = None, -1.0
        for v in cands:
            r = v.copy()
            for b in basis:
                r -= b * np.sum(r * b.conj() * ell)
            nr = math.sqrt(float(np.sum(np.abs(r) ** 2 * ell)))
            if nr > best_norm + 1e-12:
                best, best_norm = r, nr
        basis.append(best / best_norm)
    return basis


def _polish(omega, B, lam, tol):
    """One Newton step on the eigenphase closest to 0 (simple roots only).

    d theta / d lam = -2 pi <v, diag(l) v> for a unit eigenvector v.
    """
    M = transfer_matrix(omega, B, lam)
    mu, V = np.linalg.eig(M)
    j = int(np.argmin(np.abs(mu - 1)))
    v = V[:, j] / np.linalg.norm(V[:, j])
    slope = -TWO_PI * float(np.sum(omega.ell * np.abs(v) ** 2))
    step = -float(np.angle(mu[j])) / slope
    return lam + step if abs(step) <= tol else lam


def _eigenpair(omega, B, lam, mult) -> Eigenpair:
    M = transfer_matrix(omega, B, lam)
    _, s, Vh = np.linalg.svd(M - np.eye(omega.n))
    k = max(mult, int(np.sum(s < NULLSPACE_TOL * omega.n)))
    k = min(max(k, 1), omega.n)
    V = Vh[-k:].conj().T
    return Eigenpair(float(lam), tuple(weighted_orthonormal_basis(omega.ell, V, k)), s)


def find_spectrum(
    omega: IntervalUnion,
    B,
    window: tuple[float, float],
    tol: float = 1e-12,
    threads: int = 1,
) -> SpectrumWindow:
    """All eigenvalues of A_B in the closed window, with eigenspaces.

    Each root is bracketed by bisection on the exact crossing count until the
    bracket is narrower than ``tol``.  ``threads > 1`` evaluates disjoint
    chunks of the scan grid concurrently; results do not depend on it.
    """
    B = _unitary(B)
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("window must satisfy lambda_1 < lambda_2")
    h_max = grid_step(omega)
    if not 0 < tol < h_max:
        raise ValueError(f"tolerance {tol} must lie in (0, grid step {h_max})")
    start, stop = lo - h_max, hi + h_max
    steps = int(math.ceil((stop - start) / h_max))
    if steps + 1 > MAX_GRID_POINTS:
        raise WindowTooLargeError(steps + 1, math.ceil((steps + 1) / MAX_GRID_POINTS))
    grid = np.linspace(start, stop, steps + 1)

    chunks = np.array_split(np.arange(len(grid)), max(1, int(threads)))
    chunks = [c for c in chunks if len(c)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _wrapped_phases(omega, B, grid[c]), chunks))
    else:
        parts = [_wrapped_phases(omega, B, grid[c]) for c in chunks]
    phases = np.concatenate(parts, axis=0)
    S = phases.sum(axis=1)
    counts = _crossings(omega, np.diff(grid), S[:-1], S[1:])

    def crossings_in(a, sa, x):
        sx = _wrapped_phases(omega, B, [x])[0].sum()
        return int(_crossings(omega, x - a, sa, sx))

    def refine(k):
        a, b = grid[k], grid[k + 1]
        roots = []
        for j in range(1, counts[k] + 1):
            l, r = a, b  # count(l) < j <= count(r)
            while r - l > tol:
                m = 0.5 * (l + r)
                if m <= l or m >= r:
                    break
                if crossings_in(a, S[k], m) >= j:
                    r = m
                else:
                    l = m
            roots.append(0.5 * (l + r))
        return roots

    active = [k for k in np.flatnonzero(counts > 0)]
    if threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(refine, active))
    else:
        found = [refine(k) for k in active]
    roots = sorted(r for rs in found for r in rs)

    clusters: list[list[float]] = []
    for r in roots:
        if clusters and r - clusters[-1][-1] <= MERGE_TOL:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    pairs = []
    eps = max(MERGE_TOL, tol)
    for cl in clusters:
        lam = float(np.mean(cl))
        if len(cl) == 1:
            lam = _polish(omega, B, lam, tol)
        if lo - eps <= lam <= hi + eps:
            pairs.append(_eigenpair(omega, B, lam, len(cl)))
    return SpectrumWindow(lo, hi, tuple(pairs), grid, phases)


def eigenfunction(omega: IntervalUnion, ep: Eigenpair, which: int = 0) -> PiecewiseExp:
    if not 0 <= which < ep.multiplicity:
        raise IndexError(f"eigenspace has dimension {ep.multiplicity}, no basis vector {which}")
    return PiecewiseExp(omega, ep.lam, ep.cvectors[which])


def _volterra(g: SampledFunction, lam: complex, from_right: bool) -> tuple[np.ndarray, np.ndarray]:
    """Kernel integrals of g's Legendre interpolant p on every interval.

    Returns I[k, j] = int p(t) exp(2 pi i lam (x_j - t)) dt over [alpha_k, x_j]
    (or over [x_j, beta_k] when ``from_right``), and the full-interval
    integrals F[k] = int_{J_k} p(t) exp(2 pi i lam (e_k - t)) dt with e_k the
    far endpoint.  The kernel is bounded by 1 on the range of integration
    whenever Im lam >= 0 (left) or Im lam <= 0 (right).
    """
    omega, q = g.omega, g.q
    coef = g.legendre_coeffs()
    r = q + 16 + int(np.ceil(np.pi * abs(lam) * float(omega.ell.max())))
    u, w = np.polynomial.legendre.leggauss(r)
    s_nodes = np.polynomial.legendre.leggauss(q)[0]
    I = np.empty((omega.n, q), dtype=complex)
    F = np.empty(omega.n, dtype=complex)
    for k in range(omega.n):
        a, l = omega.alpha[k], omega.ell[k]
        x = a + (s_nodes + 1) * l / 2
        lo, hi = (x, np.full(q, a + l)) if from_right else (np.full(q, a), x)
        t = lo[:, None] + (hi - lo)[:, None] * (u[None, :] + 1) / 2
        p = np.polynomial.legendre.legval(2 * (t - a) / l - 1, coef[k])
        kern = np.exp(2j * np.pi * lam * (x[:, None] - t))
        I[k] = (hi - lo) / 2 * np.sum(w * p * kern, axis=1)
        end = a if from_right else a + l
        tf = a + (u + 1) * l / 2
        pf = np.polynomial.legendre.legval(u, coef[k])
        F[k] = l / 2 * np.sum(w * pf * np.exp(2j * np.pi * lam * (end - tf)))
    return I, F


def resolvent_apply(omega: IntervalUnion, B, lam, g, q: int | None = None) -> SampledFunction:
    """f = (A_B - lam)^{-1} g, i.e. (1/2 pi i) f' - lam f = g with B f(alpha) = f(beta).

    On J_k, with D = diag(exp(2 pi i lam l_k)),

        f(x) = 2 pi i int_{alpha_k}^x g(t) exp(2 pi i lam (x - t)) dt + exp(2 pi i lam (x - alpha_k)) c_k,
        (B - D) c = D A,  A_k = 2 pi i int_{J_k} g(t) exp(-2 pi i lam (t - alpha_k)) dt,

    which is the integrating-factor solution c = (D^{-1} B - I)^{-1} A.  For
    Im lam < 0 the same solution is written from beta_k so that the kernel
    stays bounded.  For real lam the singular values of the system matrix
    are those of M(lam) - I; for Im lam != 0 they exceed
    1 - exp(-2 pi |Im lam| l_min) wherever Omega sits.
    """
    B = _unitary(B)
    lam = complex(lam)
    if not isinstance(g, SampledFunction):
        g = sample(g, q or 32)
    if g.omega != omega:
        raise ValueError("g lives on a different set")
    n = omega.n
    Bm = B.entries
    D = np.exp(2j * np.pi * lam * omega.ell)
    x = g.grid.nodes
    from_right = lam.imag < 0
    I, F = _volterra(g, lam, from_right)
    if not from_right:
        K = Bm - np.diag(D)
        rhs = 2j * np.pi * F  # f(beta) = D f(alpha) + 2 pi i F
    else:
        K = Bm / D[None, :] - np.eye(n)
        rhs = 2j * np.pi * (Bm @ F)  # from B f(alpha) = f(beta), f(alpha) = D^{-1} f(beta) - 2 pi i F
    smin = float(np.linalg.svd(K, compute_uv=False)[-1])
    if smin <= RESOLVENT_TOL:
        raise SingularResolventError(lam, smin)
    e = np.linalg.solve(K, rhs)
    if not from_right:
        # e = f(alpha)
        vals = 2j * np.pi * I + np.exp(2j * np.pi * lam * (x - omega.alpha[:, None])) * e[:, None]
        return SampledFunction(g.grid, vals, e, 2j * np.pi * F + D * e)
    # e = f(beta)
    vals = -2j * np.pi * I + np.exp(2j * np.pi * lam * (x - omega.beta[:, None])) * e[:, None]
    return SampledFunction(g.grid, vals, e / D - 2j * np.pi * F, e)
