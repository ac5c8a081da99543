"""Lower bounds on the KL divergence as a function of the error mismatch.

All bounds are returned in nats unless a ``base`` of 2 is requested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import KL, NATURAL, GeneratorLike, as_generator, log_divisor
from .errors import MissingConstraintError, OutOfRangeError

RANGE_TOL = 1e-12

KINDS = ("local_f", "nussbaum", "refined", "pinsker_comparison")


def _unit(u: float, name: str = "delta") -> float:
    u = float(u)
    if not (-RANGE_TOL <= u <= 1.0 + RANGE_TOL):
        raise OutOfRangeError(f"{name} = {u!r} outside [0, 1]")
    return min(max(u, 0.0), 1.0)


def _threshold(t: float) -> float:
    t = float(t)
    if not (0.0 < t < 0.5):
        raise OutOfRangeError(f"t = {t!r} outside (0, 0.5)")
    return t


def _b_nats(u: float) -> float:
    plus = (1.0 + u) * math.log1p(u)
    rest = 1.0 - u
    minus = 0.0 if rest < 1e-300 else rest * math.log1p(-u)
    return 0.5 * (plus + minus)


def b_function(u: float, base: float = NATURAL) -> float:
    """``B(u) = ((1+u) log(1+u) + (1-u) log(1-u)) / 2`` on ``[0, 1]``."""
    return _b_nats(_unit(u, "u")) / log_divisor(base)


def local_f_bound(delta: float, f: GeneratorLike = KL) -> float:
    """``(f(1 + delta) + f(1 - delta)) / 2``, the tight local f-divergence bound."""
    d = _unit(delta)
    gen = as_generator(f)
    return 0.5 * (gen(1.0 + d) + gen(1.0 - d))


def nussbaum_bound(delta: float, base: float = NATURAL) -> float:
    return b_function(delta, base)


def _refined_nats(d: float, t: float) -> float:
    if d >= 1.0 - 2.0 * t:
        return _b_nats(d)
    s = d + 2.0 * t
    return s * _b_nats(d / s)


def refined_bound(delta: float, t: float, base: float = NATURAL) -> float:
    """Bound under the constraint ``E* <= t < 0.5``.

    ``(delta + 2t) B(delta / (delta + 2t))`` below ``1 - 2t`` and ``B(delta)``
    from there on; the junction itself belongs to the second piece.
    """
    return _refined_nats(_unit(delta), _threshold(t)) / log_divisor(base)


def pinsker_comparison(delta: float, base: float = NATURAL) -> float:
    """``delta**2 / 2``: Pinsker's ``KL >= 2 V**2`` combined with ``delta <= 2V``."""
    d = _unit(delta)
    return 0.5 * d * d / log_divisor(base)


@dataclass(frozen=True)
class BoundKind:
    tag: str
    constraint_t: Optional[float] = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown bound kind {self.tag!r}; expected one of {KINDS}")
        if self.tag == "refined":
            if self.constraint_t is None:
                raise MissingConstraintError("the refined bound needs a constraint t")
            _threshold(self.constraint_t)

    @classmethod
    def parse(cls, tag: str, t: Optional[float] = None) -> "BoundKind":
        return cls(tag, t if tag == "refined" else None)

    @property
    def label(self) -> str:
        if self.tag == "refined":
            return f"refined (t={self.constraint_t:g})"
        return self.tag


def evaluate(kind: BoundKind, delta: float, base: float = NATURAL) -> float:
    if kind.tag == "refined":
        return refined_bound(delta, kind.constraint_t, base)
    if kind.tag == "pinsker_comparison":
        return pinsker_comparison(delta, base)
    if kind.tag == "local_f":
        return local_f_bound(delta, KL) / log_divisor(base)
    return nussbaum_bound(delta, base)


def evaluate_array(kind: BoundKind, deltas, base: float = NATURAL) -> np.ndarray:
    """Vectorized :func:`evaluate` for arrays of mismatches."""
    d = np.clip(np.asarray(deltas, dtype=np.float64), 0.0, 1.0)
    scale = log_divisor(base)
    if kind.tag == "pinsker_comparison":
        return 0.5 * d * d / scale
    b = _b_array(d)
    if kind.tag != "refined":
        return b / scale
    t = kind.constraint_t
    s = d + 2.0 * t
    first = s * _b_array(d / s)
    return np.where(d >= 1.0 - 2.0 * t, b, first) / scale


def _b_array(u: np.ndarray) -> np.ndarray:
    rest = 1.0 - u
    with np.errstate(divide="ignore", invalid="ignore"):
        minus = np.where(rest < 1e-300, 0.0, rest * np.log1p(-np.minimum(u, 1.0 - 1e-300)))
    return 0.5 * ((1.0 + u) * np.log1p(u) + minus)


@dataclass(frozen=True)
class BoundCurve:
    kind: BoundKind
    deltas: np.ndarray
    values: np.ndarray

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.deltas.tolist(), self.values.tolist()))


def bound_curve(kind: BoundKind, grid_size: int, base: float = NATURAL) -> BoundCurve:
    if grid_size < 2:
        raise OutOfRangeError(f"grid_size must be >= 2, got {grid_size}")
    deltas = np.linspace(0.0, 1.0, int(grid_size))
    values = np.array([evaluate(kind, d, base) for d in deltas])
    return BoundCurve(kind, deltas, values)
