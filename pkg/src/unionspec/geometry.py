"""Finite unions of open intervals with rational endpoints, and translation tilings.

Everything in this module is exact (``fractions.Fraction``).  Floating point
views of the endpoints are exposed for the analytic modules.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "to_fraction",
    "IntervalUnion",
    "Location",
    "TranslationSet",
    "Defect",
    "TilingReport",
    "total_measure",
    "locate",
    "tiles_by",
    "coverage",
]


def to_fraction(x) -> Fraction:
    """Convert ``x`` to an exact rational.

    Accepts ints, Fractions, decimal strings ("0.25", "1/4"), ``[num, den]``
    pairs and finite floats (read through their shortest decimal repr, so
    ``0.1`` becomes ``1/10``).
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not endpoints")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"rational pair must be [num, den], got {x!r}")
        num, den = x
        if not (isinstance(num, int) and isinstance(den, int)):
            raise ValueError(f"rational pair must hold integers, got {x!r}")
        if den == 0:
            raise ValueError("zero denominator")
        return Fraction(num, den)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"endpoint must be finite, got {x!r}")
        return Fraction(repr(float(x)))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def _pair(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


class Location(NamedTuple):
    """Result of :func:`locate`.

    ``kind`` is ``"interior"``, ``"boundary"`` or ``"outside"``.  ``index`` is
    the 0-based interval index (``None`` when outside) and ``side`` is
    ``"alpha"``/``"beta"`` for boundary points.
    """

    kind: str
    index: int | None = None
    side: str | None = None


@dataclass(frozen=True)
class IntervalUnion:
    """Omega = (a_0, b_0) u ... u (a_{n-1}, b_{n-1}) with a_0 < b_0 < a_1 < ..."""

    endpoints: tuple[Fraction, ...]

    def __init__(self, endpoints: Iterable):
        pts = tuple(to_fraction(e) for e in endpoints)
        if len(pts) < 2 or len(pts) % 2:
            raise ValueError(f"need an even, positive number of endpoints, got {len(pts)}")
        for lo, hi in zip(pts, pts[1:]):
            if not lo < hi:
                raise ValueError(f"endpoints must strictly interleave; {lo} >= {hi}")
        object.__setattr__(self, "endpoints", pts)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Sequence]) -> "IntervalUnion":
        return cls([e for iv in intervals for e in iv])

    @property
    def n(self) -> int:
        return len(self.endpoints) // 2

    @property
    def alphas(self) -> tuple[Fraction, ...]:
        return self.endpoints[0::2]

    @property
    def betas(self) -> tuple[Fraction, ...]:
        return self.endpoints[1::2]

    @property
    def lengths(self) -> tuple[Fraction, ...]:
        return tuple(b - a for a, b in zip(self.alphas, self.betas))

    @property
    def measure(self) -> Fraction:
        return sum(self.lengths, Fraction(0))

    # float views used by the analytic code
    @property
    def alpha(self) -> np.ndarray:
        return np.array([float(a) for a in self.alphas])

    @property
    def beta(self) -> np.ndarray:
        return np.array([float(b) for b in self.betas])

    @property
    def ell(self) -> np.ndarray:
        return np.array([float(l) for l in self.lengths])

    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        return list(zip(self.alphas, self.betas))

    def translate(self, c) -> "IntervalUnion":
        c = to_fraction(c)
        return IntervalUnion([e + c for e in self.endpoints])

    def locate(self, x) -> Location:
        return locate(self, x)

    def to_json(self) -> list[list[int]]:
        return [_pair(e) for e in self.endpoints]

    @classmethod
    def from_json(cls, data) -> "IntervalUnion":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, list):
            raise ValueError("interval union JSON must be an array of [num, den] pairs")
        return cls([to_fraction(e) for e in data])

    def __str__(self) -> str:
        return " u ".join(f"({a}, {b})" for a, b in self.intervals())


def total_measure(omega: IntervalUnion) -> Fraction:
    return omega.measure


def locate(omega: IntervalUnion, x) -> Location:
    x = to_fraction(x)
    for i, (a, b) in enumerate(omega.intervals()):
        if x == a:
            return Location("boundary", i, "alpha")
        if x == b:
            return Location("boundary", i, "beta")
        if a < x < b:
            return Location("interior", i)
    return Location("outside")


@dataclass(frozen=True)
class TranslationSet:
    """Gamma = {g_1, ..., g_m} + p Z with 0 <= g_1 < ... < g_m < p."""

    offsets: tuple[Fraction, ...]
    period: Fraction

    def __init__(self, offsets: Iterable, period):
        p = to_fraction(period)
        if p <= 0:
            raise ValueError(f"period must be positive, got {p}")
        offs = tuple(to_fraction(g) for g in offsets)
        if not offs:
            raise ValueError("translation set needs at least one offset")
        for g in offs:
            if not 0 <= g < p:
                raise ValueError(f"offset {g} not in [0, {p})")
        for g, h in zip(offs, offs[1:]):
            if not g < h:
                raise ValueError("offsets must be strictly increasing")
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "period", p)

    @classmethod
    def normalized(cls, offsets: Iterable, period) -> "TranslationSet":
        """Reduce offsets mod ``period``, sort and deduplicate."""
        p = to_fraction(period)
        offs = sorted({to_fraction(g) % p for g in offsets})
        return cls(offs, p)

    @property
    def m(self) -> int:
        return len(self.offsets)

    def shift(self, c) -> "TranslationSet":
        c = to_fraction(c)
        return TranslationSet.normalized([g + c for g in self.offsets], self.period)

    def to_json(self) -> dict:
        return {"offsets": [_pair(g) for g in self.offsets], "period": _pair(self.period)}

    @classmethod
    def from_json(cls, data) -> "TranslationSet":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, dict) or set(data) != {"offsets", "period"}:
            raise ValueError("translation set JSON must be {offsets: [...], period: [num, den]}")
        return cls([to_fraction(g) for g in data["offsets"]], to_fraction(data["period"]))


@dataclass(frozen=True)
class Defect:
    """A failure of the tiling property.

    ``kind == "coverage"``: the open piece (lo, hi) of [0, p) is covered
    ``multiplicity`` times.  ``kind == "measure"``: m*|Omega| != p.
    """

    kind: str
    lo: Fraction | None = None
    hi: Fraction | None = None
    multiplicity: int | None = None
    detail: str = ""

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "coverage":
            out.update(lo=_pair(self.lo), hi=_pair(self.hi), multiplicity=self.multiplicity)
        if self.detail:
            out["detail"] = self.detail
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Defect":
        kind = data["kind"]
        if kind == "coverage":
            return cls(kind, to_fraction(data["lo"]), to_fraction(data["hi"]), int(data["multiplicity"]), data.get("detail", ""))
        if kind == "measure":
            return cls(kind, detail=data.get("detail", ""))
        raise ValueError(f"unknown defect kind {kind!r}")


@dataclass(frozen=True)
class TilingReport:
    tiles: bool
    defects: tuple[Defect, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {"tiles": self.tiles, "defects": [d.to_json() for d in self.defects]}

    @classmethod
    def from_json(cls, data) -> "TilingReport":
        if isinstance(data, str):
            data = json.loads(data)
        defects = tuple(Defect.from_json(d) for d in data["defects"])
        if bool(data["tiles"]) != (not defects):
            raise ValueError("tiles flag disagrees with the defect list")
        return cls(bool(data["tiles"]), defects)


def coverage(omega: IntervalUnion, gamma: TranslationSet) -> list[tuple[Fraction, Fraction, int]]:
    """Coverage multiplicity of {Omega + g : g in Gamma} folded into [0, p).

    Returns the maximal open pieces (lo, hi, multiplicity) partitioning
    [0, p); breakpoints are folded endpoints only.
    """
    p = gamma.period
    events: dict[Fraction, int] = {Fraction(0): 0, p: 0}
    for g in gamma.offsets:
        for a, b in omega.intervals():
            start = (a + g) % p
            remaining = b - a
            while remaining > 0:
                stop = min(p, start + remaining)
                events[start] = events.get(start, 0) + 1
                events[stop] = events.get(stop, 0) - 1
                remaining -= stop - start
                start = Fraction(0)
    pts = sorted(events)
    pieces: list[tuple[Fraction, Fraction, int]] = []
    level = 0
    for lo, hi in zip(pts, pts[1:]):
        level += events[lo]
        if pieces and pieces[-1][2] == level:
            pieces[-1] = (pieces[-1][0], hi, level)
        else:
            pieces.append((lo, hi, level))
    return pieces


def tiles_by(omega: IntervalUnion, gamma: TranslationSet) -> TilingReport:
    """Decide exactly whether Omega + Gamma tiles the line up to measure zero."""
    defects: list[Defect] = []
    covered = gamma.m * omega.measure
    if covered != gamma.period:
        defects.append(
            Defect("measure", detail=f"m*|Omega| = {covered} != p = {gamma.period}")
        )
    for lo, hi, mult in coverage(omega, gamma):
        if mult != 1:
            defects.append(Defect("coverage", lo, hi, mult))
    return TilingReport(not defects, tuple(defects))
