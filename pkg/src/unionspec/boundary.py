"""Boundary matrices, phase matrices and the transfer matrix.

A self-adjoint extension of the momentum operator on Omega is fixed by a
unitary B with B f(alpha) = f(beta).  Closed symmetric extensions correspond
to partial isometries between subspaces B_l -> B_r.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geometry import IntervalUnion

__all__ = [
    "UNITARY_TOL",
    "TRACE_TOL",
    "NonUnitaryError",
    "BoundaryMatrix",
    "BoundaryTraces",
    "unitarity_defect",
    "polar_repair",
    "phase_matrix",
    "transfer_matrix",
    "check_selfadjoint_domain",
    "check_adjoint_domain",
]

UNITARY_TOL = 1e-12
TRACE_TOL = 1e-9
TWO_PI_I = 2j * np.pi


class NonUnitaryError(ValueError):
    def __init__(self, defect: float, message: str | None = None):
        self.defect = defect
        super().__init__(message or f"matrix is not unitary: max|B*B - I| = {defect:.3e}")


def unitarity_defect(B) -> float:
    B = np.asarray(B, dtype=complex)
    return float(np.max(np.abs(B.conj().T @ B - np.eye(B.shape[0]))))


def polar_repair(B) -> np.ndarray:
    """Nearest unitary matrix (unitary polar factor) to ``B``."""
    U, _ = scipy.linalg.polar(np.asarray(B, dtype=complex))
    return U


def _orthonormal_columns(Q, name, tol):
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim == 1:
        Q = Q[:, None]
    k = Q.shape[1]
    if k and np.max(np.abs(Q.conj().T @ Q - np.eye(k))) > tol:
        raise ValueError(f"{name} columns are not orthonormal")
    return Q


@dataclass(frozen=True, eq=False)
class BoundaryMatrix:
    """An n x n boundary matrix.

    ``mode`` is ``"unitary"`` or ``"partial"``.  In partial mode
    ``domain_basis``/``range_basis`` hold orthonormal column bases of B_l and
    B_r; B must be isometric on B_l and vanish on its orthogonal complement.
    Use :meth:`unitary` / :meth:`partial` to construct.
    """

    entries: np.ndarray
    mode: str = "unitary"
    domain_basis: np.ndarray | None = None
    range_basis: np.ndarray | None = None
    tol: float = field(default=UNITARY_TOL, repr=False)

    def __post_init__(self):
        B = np.array(self.entries, dtype=complex)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
            raise ValueError(f"boundary matrix must be square and non-empty, got shape {B.shape}")
        if not np.all(np.isfinite(B)):
            raise ValueError("boundary matrix has non-finite entries")
        B.setflags(write=False)
        object.__setattr__(self, "entries", B)
        n = B.shape[0]
        if self.mode == "unitary":
            d = unitarity_defect(B)
            if d > self.tol:
                raise NonUnitaryError(d)
            eye = np.eye(n, dtype=complex)
            object.__setattr__(self, "domain_basis", eye)
            object.__setattr__(self, "range_basis", eye)
        elif self.mode == "partial":
            if self.domain_basis is None or self.range_basis is None:
                raise ValueError("partial isometry needs domain_basis and range_basis")
            L = _orthonormal_columns(self.domain_basis, "domain_basis", 1e-10)
            R = _orthonormal_columns(self.range_basis, "range_basis", 1e-10)
            if L.shape[0] != n or R.shape[0] != n:
                raise ValueError("subspace bases must live in C^n")
            if L.shape[1] != R.shape[1]:
                raise ValueError("dim B_l must equal dim B_r")
            BL = B @ L
            k = L.shape[1]
            if k and np.max(np.abs(BL.conj().T @ BL - np.eye(k))) > 1e-10:
                raise ValueError("B is not isometric on B_l")
            if k and np.max(np.abs(BL - R @ (R.conj().T @ BL))) > 1e-10:
                raise ValueError("B maps B_l outside B_r")
            P_perp = np.eye(n) - L @ L.conj().T
            if np.max(np.abs(B @ P_perp), initial=0.0) > 1e-10:
                raise ValueError("B must vanish on the orthogonal complement of B_l")
            object.__setattr__(self, "domain_basis", L)
            object.__setattr__(self, "range_basis", R)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def unitary(cls, B, tol: float = UNITARY_TOL) -> "BoundaryMatrix":
        return cls(np.asarray(B, dtype=complex), "unitary", tol=tol)

    @classmethod
    def partial(cls, B, domain_basis, range_basis) -> "BoundaryMatrix":
        return cls(np.asarray(B, dtype=complex), "partial", domain_basis, range_basis)

    @classmethod
    def repaired(cls, B) -> "BoundaryMatrix":
        """Project ``B`` onto the unitary group before constructing."""
        return cls.unitary(polar_repair(B))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def defect(self) -> float:
        return unitarity_defect(self.entries)

    @property
    def is_unitary(self) -> bool:
        return self.mode == "unitary"

    def to_json(self) -> dict:
        def enc(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(M)]

        out = {"mode": self.mode, "entries": enc(self.entries)}
        if self.mode == "partial":
            out["domain_basis"] = enc(self.domain_basis)
            out["range_basis"] = enc(self.range_basis)
        return out

    @classmethod
    def from_json(cls, data, repair: bool = False) -> "BoundaryMatrix":
        """Load a serialized matrix.

        ``repair=True`` applies the polar projection to a unitary-mode matrix
        whose defect exceeds the construction tolerance.
        """
        if isinstance(data, str):
            data = json.loads(data)

        def dec(rows):
            arr = np.array(rows, dtype=float)
            if arr.ndim != 3 or arr.shape[-1] != 2:
                raise ValueError("matrix JSON must be an array of rows of [re, im] pairs")
            return arr[..., 0] + 1j * arr[..., 1]

        allowed = {"mode", "entries", "domain_basis", "range_basis"}
        if not isinstance(data, dict) or not set(data) <= allowed or "entries" not in data:
            raise ValueError("boundary JSON must be {mode, entries[, domain_basis, range_basis]}")
        mode = data.get("mode", "unitary")
        B = dec(data["entries"])
        if mode == "unitary":
            if repair and unitarity_defect(B) > UNITARY_TOL:
                return cls.repaired(B)
            return cls.unitary(B)
        return cls.partial(B, dec(data["domain_basis"]), dec(data["range_basis"]))


@dataclass(frozen=True, eq=False)
class BoundaryTraces:
    """Boundary values f(alpha) and f(beta) of a function in D_max."""

    at_alpha: np.ndarray
    at_beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.at_alpha, dtype=complex).ravel()
        b = np.asarray(self.at_beta, dtype=complex).ravel()
        if a.shape != b.shape:
            raise ValueError("trace vectors must have the same length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("traces must be finite")
        object.__setattr__(self, "at_alpha", a)
        object.__setattr__(self, "at_beta", b)


def phase_matrix(z) -> np.ndarray:
    """diag(exp(2 pi i z_1), ..., exp(2 pi i z_n))."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return np.diag(np.exp(TWO_PI_I * z))


def _matrix(B):
    return B.entries if isinstance(B, BoundaryMatrix) else np.asarray(B, dtype=complex)


def transfer_matrix(omega: IntervalUnion, B, lam) -> np.ndarray:
    """M(lam) = E(lam beta)^{-1} B E(lam alpha).

    ``lam`` may be a scalar or a 1-d array, in which case a stack of
    matrices with shape (len(lam), n, n) is returned.
    """
    Bm = _matrix(B)
    lam = np.asarray(lam, dtype=complex)
    left = np.exp(-TWO_PI_I * np.multiply.outer(lam, omega.beta))
    right = np.exp(TWO_PI_I * np.multiply.outer(lam, omega.alpha))
    return left[..., :, None] * Bm * right[..., None, :]


def check_selfadjoint_domain(traces: BoundaryTraces, B: BoundaryMatrix, tol: float = TRACE_TOL) -> bool:
    """True iff B f(alpha) = f(beta) within ``tol``."""
    if not B.is_unitary:
        raise ValueError("self-adjoint domain check needs a unitary boundary matrix")
    r = B.entries @ traces.at_alpha - traces.at_beta
    return bool(np.linalg.norm(r) <= tol)


def check_adjoint_domain(traces: BoundaryTraces, B: BoundaryMatrix, tol: float = TRACE_TOL) -> bool:
    """True iff (B* f(beta) - f(alpha)) is orthogonal to B_l within ``tol``."""
    r = B.entries.conj().T @ traces.at_beta - traces.at_alpha
    L = B.domain_basis
    if L.shape[1] == 0:
        return True
    return bool(np.linalg.norm(L.conj().T @ r) <= tol)
