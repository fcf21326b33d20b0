"""Spectral sets and the spectrum <-> tiling harness.

If Lambda is a spectrum for Omega there is a unique unitary B with
B e_lam(alpha) = e_lam(beta) for every lam in Lambda, and it is a
*spectral* boundary matrix: every eigenvector equation has only constant
solutions.  All verdicts here are over a finite window and are evidence,
not proof.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .boundary import BoundaryMatrix, polar_repair, unitarity_defect
from .funcspace import bump, exp_interval_integrals, exponential, indicator, parseval_defect
from .geometry import IntervalUnion, TranslationSet, tiles_by, to_fraction
from .io import complex_pair
from .spectral import find_spectrum

__all__ = [
    "CONSTANCY_TOL",
    "LambdaSet",
    "SpanDeficientError",
    "InconsistentError",
    "NonUnitaryBoundaryError",
    "BoundaryFit",
    "Classification",
    "SpectralVerdict",
    "HarnessReport",
    "gram_matrix",
    "construct_boundary_matrix",
    "build_boundary_matrix",
    "is_constant",
    "is_spectral_matrix",
    "default_test_functions",
    "fuglede_harness",
]

CONSTANCY_TOL = 1e-8
FIT_TOL = 1e-10
GRAM_TOL = 1e-10
ROUNDTRIP_TOL = 1e-8


@dataclass(frozen=True)
class LambdaSet:
    """A candidate spectrum: ``offsets + period*Z`` or an explicit finite list."""

    offsets: tuple[Fraction, ...] = ()
    period: Fraction | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(sorted(set(float(v) for v in self.values)))
            object.__setattr__(self, "values", vals)
            return
        if self.period is None:
            raise ValueError("need a period for a progression set")
        p = to_fraction(self.period)
        if p <= 0:
            raise ValueError("period must be positive")
        offs = tuple(to_fraction(a) for a in self.offsets)
        if not offs:
            raise ValueError("need at least one offset")
        if len({a % p for a in offs}) != len(offs):
            raise ValueError("offsets must be distinct mod the period")
        object.__setattr__(self, "period", p)
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def progressions(cls, offsets: Iterable, period) -> "LambdaSet":
        return cls(tuple(offsets), period)

    @classmethod
    def explicit(cls, values: Iterable[float]) -> "LambdaSet":
        return cls(values=tuple(values))

    def realize(self, lo, hi) -> np.ndarray:
        """Sorted members in the closed window [lo, hi]."""
        if self.values is not None:
            v = np.array(self.values)
            return v[(v >= float(lo)) & (v <= float(hi))]
        lo, hi = to_fraction(lo), to_fraction(hi)
        p = self.period
        pts = set()
        for a in self.offsets:
            k0 = -((a - lo) // p)  # ceil((lo - a)/p)
            k = k0
            while a + k * p <= hi:
                pts.add(a + k * p)
                k += 1
        return np.array([float(x) for x in sorted(pts)])

    def window(self, W) -> np.ndarray:
        return self.realize(-to_fraction(W), to_fraction(W))

    def shift(self, c) -> "LambdaSet":
        if self.values is not None:
            return LambdaSet.explicit(v + float(c) for v in self.values)
        c = to_fraction(c)
        return LambdaSet.progressions([a + c for a in self.offsets], self.period)

    def to_json(self) -> dict:
        if self.values is not None:
            return {"values": list(self.values)}
        return {
            "offsets": [[a.numerator, a.denominator] for a in self.offsets],
            "period": [self.period.numerator, self.period.denominator],
        }

    @classmethod
    def from_json(cls, data) -> "LambdaSet":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, dict):
            raise ValueError("lambda set JSON must be an object")
        if set(data) == {"values"}:
            return cls.explicit(data["values"])
        if set(data) == {"offsets", "period"}:
            return cls.progressions([to_fraction(a) for a in data["offsets"]], to_fraction(data["period"]))
        raise ValueError("lambda set JSON must be {offsets, period} or {values}")


class SpanDeficientError(ValueError):
    def __init__(self, rank: int, n: int, rank_growth):
        self.rank = rank
        self.n = n
        self.rank_growth = rank_growth
        super().__init__(
            f"span of e_lam(alpha) has rank {rank} < {n} in the window; "
            f"rank growth {rank_growth}"
        )


class InconsistentError(ValueError):
    def __init__(self, lam: float, residual: float):
        self.lam = lam
        self.residual = residual
        super().__init__(f"B e_lam(alpha) != e_lam(beta) at lambda={lam}: residual {residual:.2e}")


class NonUnitaryBoundaryError(ValueError):
    def __init__(self, defect: float, gram_mismatch: float):
        self.defect = defect
        self.gram_mismatch = gram_mismatch
        super().__init__(
            f"fitted B is not unitary (defect {defect:.2e}, Gram mismatch {gram_mismatch:.2e})"
        )


def gram_matrix(lambdas: Sequence[float], omega: IntervalUnion) -> tuple[np.ndarray, float]:
    """G[l, m] = <e_l, e_m> in closed form, and the largest off-diagonal modulus."""
    lam = np.asarray(lambdas, dtype=float)
    G = exp_interval_integrals(omega, np.subtract.outer(lam, lam)).sum(axis=-1)
    np.fill_diagonal(G, float(omega.measure))
    off = np.abs(G - np.diag(np.diag(G)))
    return G, float(off.max(initial=0.0))


def _traces(omega, lam):
    a = np.exp(2j * np.pi * np.multiply.outer(lam, omega.alpha))
    b = np.exp(2j * np.pi * np.multiply.outer(lam, omega.beta))
    return a, b


def _greedy_columns(A: np.ndarray, n: int, tol: float = 1e-8):
    """Pivoted Gram-Schmidt on the rows of A: indices of up to n spanning rows."""
    chosen: list[int] = []
    R = A.copy()
    while len(chosen) < n:
        norms = np.linalg.norm(R, axis=1)
        if chosen:
            norms[chosen] = -1
        j = int(np.argmax(norms))
        if norms[j] <= tol * np.sqrt(A.shape[1]):
            break
        chosen.append(j)
        qv = R[j] / norms[j]
        R = R - np.outer(R @ qv.conj(), qv)
    return chosen


def _rank_growth(A: np.ndarray, lam: np.ndarray, tol=1e-8):
    """Numerical rank of {e_lam(alpha) : |lam| <= W} for growing W."""
    radii = sorted(set(np.abs(lam)))
    marks = [radii[int(round(f * (len(radii) - 1)))] for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    out = []
    for W in sorted(set(marks)):
        sub = A[np.abs(lam) <= W]
        s = np.linalg.svd(sub, compute_uv=False)
        out.append((float(W), int(np.sum(s > tol * max(1.0, s[0])))))
    return out


@dataclass(frozen=True, eq=False)
class BoundaryFit:
    matrix: BoundaryMatrix
    lambdas: np.ndarray
    selected: tuple[float, ...]
    residual: float
    unitarity_defect: float
    rank_growth: tuple

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.to_json(),
            "selected": list(self.selected),
            "residual": self.residual,
            "unitarity_defect": self.unitarity_defect,
            "rank_growth": [list(r) for r in self.rank_growth],
        }


def construct_boundary_matrix(
    lam_set: LambdaSet, omega: IntervalUnion, W: float = 10.0, tol: float = FIT_TOL
) -> BoundaryFit:
    """Solve B e_lam(alpha) = e_lam(beta) on a spanning subset; verify on the rest."""
    lam = lam_set.window(W)
    n = omega.n
    if len(lam) == 0:
        raise SpanDeficientError(0, n, ())
    A, Bt = _traces(omega, lam)
    growth = tuple(_rank_growth(A, lam))
    idx = _greedy_columns(A, n)
    if len(idx) < n:
        raise SpanDeficientError(len(idx), n, growth)
    Asel, Bsel = A[idx].T, Bt[idx].T  # columns e_lam(alpha), e_lam(beta)
    X, *_ = np.linalg.lstsq(Asel.T, Bsel.T, rcond=None)
    Bm = X.T
    d = unitarity_defect(Bm)
    if d > tol:
        gm = float(np.max(np.abs(Asel.conj().T @ Asel - Bsel.conj().T @ Bsel)))
        raise NonUnitaryBoundaryError(d, gm)
    Bm = polar_repair(Bm)
    res = np.linalg.norm(A @ Bm.T - Bt, axis=1)
    worst = int(np.argmax(res))
    if res[worst] > tol:
        raise InconsistentError(float(lam[worst]), float(res[worst]))
    return BoundaryFit(
        BoundaryMatrix.unitary(Bm),
        lam,
        tuple(float(lam[i]) for i in idx),
        float(res.max()),
        d,
        growth,
    )


def build_boundary_matrix(lam_set: LambdaSet, omega: IntervalUnion, W: float = 10.0, tol: float = FIT_TOL) -> BoundaryMatrix:
    return construct_boundary_matrix(lam_set, omega, W, tol).matrix


class Classification(str, enum.Enum):
    SPECTRAL_EVIDENCE = "spectral_evidence"
    NOT_SPECTRAL = "not_spectral"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SpectralVerdict:
    classification: Classification
    window: tuple[float, float]
    witness: dict | None = None
    reason: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_evidence(self) -> bool:
        return self.classification is Classification.SPECTRAL_EVIDENCE

    def to_json(self) -> dict:
        return {
            "classification": self.classification.value,
            "window": list(self.window),
            "witness": self.witness,
            "reason": self.reason,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, data) -> "SpectralVerdict":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(
            Classification(data["classification"]),
            tuple(float(w) for w in data["window"]),
            data.get("witness"),
            data.get("reason"),
            dict(data.get("diagnostics", {})),
        )


def is_constant(c: np.ndarray, tol: float = CONSTANCY_TOL) -> bool:
    c = np.asarray(c)
    return bool(np.max(np.abs(c - c.mean())) <= tol * np.linalg.norm(c))


def is_spectral_matrix(omega: IntervalUnion, B, window: tuple[float, float], tol: float = 1e-12) -> SpectralVerdict:
    """Check, over the window, that every eigenspace is spanned by a constant vector."""
    sw = find_spectrum(omega, B, window, tol=tol)
    window = (float(window[0]), float(window[1]))
    diag = {"eigenvalues": len(sw), "count": sw.count}
    if not len(sw):
        return SpectralVerdict(Classification.INCONCLUSIVE, window, reason="no eigenvalues in window", diagnostics=diag)
    for ep in sw:
        if ep.multiplicity > 1:
            return SpectralVerdict(
                Classification.NOT_SPECTRAL,
                window,
                witness={"lambda": ep.lam, "multiplicity": ep.multiplicity, "kind": "multiplicity"},
                diagnostics=diag,
            )
        c = ep.cvectors[0]
        if not is_constant(c):
            return SpectralVerdict(
                Classification.NOT_SPECTRAL,
                window,
                witness={"lambda": ep.lam, "c": [complex_pair(z) for z in c], "kind": "non_constant"},
                diagnostics=diag,
            )
    return SpectralVerdict(Classification.SPECTRAL_EVIDENCE, window, diagnostics=diag)


def _non_orthogonal_pair(G, lam, tol):
    off = np.abs(G - np.diag(np.diag(G)))
    if off.size == 0 or off.max() <= tol:
        return None
    i, j = np.unravel_index(int(np.argmax(off)), off.shape)
    return {"kind": "non_orthogonal", "pair": [float(lam[i]), float(lam[j])], "inner_product": complex_pair(G[i, j])}


def default_test_functions(omega: IntervalUnion, lam_set: LambdaSet, q: int = 64):
    """Per-interval bumps and indicators, plus e_mu for some mu outside Lambda."""
    fs = []
    for k in range(omega.n):
        fs.append((f"bump_{k}", bump(omega, k).sample(q)))
    for k in range(omega.n):
        fs.append((f"indicator_{k}", indicator(omega, k)))
    members = lam_set.window(2)
    mu = 0.37
    while np.any(np.abs(members - mu) < 1e-3):
        mu += 0.113
    fs.append((f"exp_{mu:.3f}", exponential(omega, mu)))
    return fs


@dataclass(frozen=True)
class HarnessReport:
    omega: IntervalUnion
    lam_set: LambdaSet
    gamma: TranslationSet
    window: float
    gram_max_offdiag: float
    parseval: list
    b_matrix: dict
    spectral_verdict: dict
    spectral_evidence: bool
    tiling: dict

    @property
    def tiles(self) -> bool:
        return self.tiling["tiles"]

    @property
    def agreement(self) -> bool:
        return self.spectral_evidence == self.tiles

    def to_json(self) -> dict:
        return {
            "omega": self.omega.to_json(),
            "lambda": self.lam_set.to_json(),
            "gamma": self.gamma.to_json(),
            "window": self.window,
            "gram_max_offdiag": self.gram_max_offdiag,
            "parseval": self.parseval,
            "b_matrix": self.b_matrix,
            "spectral_verdict": self.spectral_verdict,
            "spectral_evidence": self.spectral_evidence,
            "tiles": self.tiles,
            "tiling_defects": self.tiling["defects"],
            "agreement": self.agreement,
        }

    def summary(self) -> str:
        lines = [
            f"Omega            : {self.omega}",
            f"window           : |lambda| <= {self.window}",
            f"gram max offdiag : {self.gram_max_offdiag:.3e}",
            f"boundary matrix  : {self.b_matrix['status']}",
            f"spectral verdict : {self.spectral_verdict.get('classification', 'n/a')}",
            f"spectral evidence: {self.spectral_evidence}",
            f"tiles            : {self.tiles}",
            f"agreement        : {self.agreement}",
        ]
        for p in self.parseval:
            lines.append(f"parseval {p['name']:<12}: {p['defect']:.3e}")
        return "\n".join(lines)


def fuglede_harness(
    omega: IntervalUnion,
    lam_set: LambdaSet,
    gamma: TranslationSet,
    W: float = 10.0,
    test_functions=None,
    q: int = 64,
) -> HarnessReport:
    """Collect spectral evidence for (Omega, Lambda) and the tiling fact for (Omega, Gamma)."""
    lam = lam_set.window(W)
    G, gmax = gram_matrix(lam, omega)
    tests = test_functions if test_functions is not None else default_test_functions(omega, lam_set, q)
    parseval = [{"name": name, "defect": parseval_defect(f, lam, omega)} for name, f in tests]

    window = (-float(W), float(W))
    gram_witness = _non_orthogonal_pair(G, lam, GRAM_TOL * max(1.0, float(omega.measure)))
    try:
        fit = construct_boundary_matrix(lam_set, omega, W)
    except SpanDeficientError as exc:
        b_info = {"status": "SpanDeficient", "message": str(exc), "rank_growth": [list(r) for r in exc.rank_growth]}
        v = SpectralVerdict(Classification.INCONCLUSIVE, window, reason="span deficient: Lambda too sparse or window too small")
    except InconsistentError as exc:
        b_info = {"status": "Inconsistent", "message": str(exc)}
        v = SpectralVerdict(
            Classification.NOT_SPECTRAL, window,
            witness={"kind": "inconsistent", "lambda": exc.lam, "residual": exc.residual},
        )
    except NonUnitaryBoundaryError as exc:
        b_info = {"status": "NonUnitary", "message": str(exc)}
        v = SpectralVerdict(
            Classification.NOT_SPECTRAL, window,
            witness=gram_witness or {"kind": "non_unitary", "defect": exc.defect},
        )
    else:
        b_info = {"status": "ok", **fit.to_json()}
        v = is_spectral_matrix(omega, fit.matrix, window)
        found = find_spectrum(omega, fit.matrix, window).lambdas
        extra = [float(x) for x in found if np.min(np.abs(lam - x), initial=np.inf) > ROUNDTRIP_TOL]
        missing = [float(x) for x in lam if np.min(np.abs(found - x), initial=np.inf) > ROUNDTRIP_TOL]
        if v.is_evidence and (extra or missing):
            v = SpectralVerdict(
                Classification.NOT_SPECTRAL, window,
                witness={"kind": "roundtrip", "extra": extra, "missing": missing},
                diagnostics=v.diagnostics,
            )
    if gram_witness is not None and v.classification is not Classification.NOT_SPECTRAL:
        v = SpectralVerdict(Classification.NOT_SPECTRAL, window, witness=gram_witness, diagnostics=v.diagnostics)
    evidence = v.is_evidence
    verdict = v.to_json()
    tiling = tiles_by(omega, gamma).to_json()
    return HarnessReport(omega, lam_set, gamma, float(W), gmax, parseval, b_info, verdict, bool(evidence), tiling)
