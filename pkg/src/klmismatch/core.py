"""Joint distributions, decision rules, error mismatch and divergences.

A joint distribution is a ``(num_classes, num_obs)`` matrix ``probs[c, x]``.
All expectations are taken under the *true* distribution ``pr``; the model
distribution ``q`` only enters through its decision rule and the
divergences. Observations with zero true mass are excluded from every
expectation (the ``0 f(0/0) = 0`` convention).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidGeneratorError,
    LengthMismatchError,
    NegativeEntryError,
    NotNormalizedError,
    TooSmallError,
    UndefinedColumnError,
)

BUILD_TOL = 1e-12
INGEST_TOL = 1e-9
TIE_TOL = 1e-12
INEQ_SLACK = 1e-12

NATURAL = math.e
TWO = 2.0


def log_divisor(base: float) -> float:
    """Divisor turning nats into units of ``base`` (only e and 2 are accepted)."""
    if base == NATURAL:
        return 1.0
    if base == TWO:
        return math.log(2.0)
    raise ValueError(f"unsupported log base {base!r}; use math.e or 2")


def parse_base(value: str | float | None) -> float:
    """Map user-facing names (``natural``, ``e``, ``two``, ``2``) to a base."""
    if value is None:
        return NATURAL
    if isinstance(value, (int, float)):
        log_divisor(float(value))
        return float(value)
    key = value.strip().lower()
    if key in {"natural", "e", "nat", "nats", "ln"}:
        return NATURAL
    if key in {"two", "2", "bits", "bit"}:
        return TWO
    raise ValueError(f"unsupported log base {value!r}; use 'natural' or 'two'")


# --------------------------------------------------------------------------
# Distributions


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Validated joint probability matrix indexed ``(class, observation)``."""

    probs: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def num_obs(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    def __repr__(self) -> str:
        return f"JointDistribution({self.num_classes}x{self.num_obs})"


def build_joint(matrix) -> JointDistribution:
    """Validate ``matrix`` as a joint distribution.

    Totals within ``1e-9`` of one are renormalized; anything further off is
    rejected rather than silently rescaled.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise TooSmallError(
            f"need at least 2 classes and 2 observations, got shape {a.shape}"
        )
    if not np.all(np.isfinite(a)):
        raise NotNormalizedError("matrix contains non-finite entries")
    if np.any(a < 0):
        c, x = np.argwhere(a < 0)[0]
        raise NegativeEntryError(f"entry ({c}, {x}) = {a[c, x]} is negative")
    total = a.sum()
    if abs(total - 1.0) > INGEST_TOL:
        raise NotNormalizedError(f"entries sum to {total!r}, not 1")
    if total != 1.0:
        a = a / total
    return JointDistribution(_readonly(a))


def joint_from_conditionals(marginal, conditionals) -> JointDistribution:
    """Form ``pr(c, x) = pr(x) pr(c|x)``; ``conditionals`` has shape (C, X)."""
    m = np.asarray(marginal, dtype=np.float64)
    cond = np.asarray(conditionals, dtype=np.float64)
    if cond.ndim != 2 or m.shape != (cond.shape[1],):
        raise DimensionMismatchError(
            f"marginal {m.shape} incompatible with conditionals {cond.shape}"
        )
    return build_joint(cond * m[None, :])


@dataclass(frozen=True, eq=False)
class ConditionalDecomposition:
    """``pr(x)`` and ``pr(c|x)``; columns with zero marginal are undefined."""

    marginal: np.ndarray
    conditionals: np.ndarray
    defined: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.conditionals.shape[0]

    @property
    def num_obs(self) -> int:
        return self.conditionals.shape[1]


def decompose(joint: JointDistribution) -> ConditionalDecomposition:
    p = joint.probs
    marginal = p.sum(axis=0)
    defined = marginal > 0
    cond = np.full_like(p, np.nan)
    cond[:, defined] = p[:, defined] / marginal[defined]
    return ConditionalDecomposition(
        _readonly(marginal), _readonly(cond), _readonly_bool(defined)
    )


def _readonly_bool(a) -> np.ndarray:
    a = np.array(a, dtype=bool, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DecisionMap:
    """Argmax class per observation.

    ``decisions[x]`` is ``-1`` where the source column is undefined; use
    :meth:`at` to get an error instead of the sentinel.
    """

    decisions: np.ndarray
    tie_flags: np.ndarray
    defined: np.ndarray

    def at(self, x: int) -> int:
        if not self.defined[x]:
            raise UndefinedColumnError(f"observation {x} has zero marginal mass")
        return int(self.decisions[x])


def argmax_with_ties(column: np.ndarray) -> tuple[int, bool]:
    """Lowest index within ``TIE_TOL`` of the maximum, plus a tie flag."""
    top = column.max()
    hits = np.flatnonzero(column >= top - TIE_TOL)
    return int(hits[0]), bool(hits.size > 1)


def decisions(cond: ConditionalDecomposition) -> DecisionMap:
    n = cond.num_obs
    dec = np.full(n, -1, dtype=np.int64)
    ties = np.zeros(n, dtype=bool)
    for x in range(n):
        if cond.defined[x]:
            dec[x], ties[x] = argmax_with_ties(cond.conditionals[:, x])
    dec.setflags(write=False)
    ties.setflags(write=False)
    return DecisionMap(dec, ties, cond.defined)


# --------------------------------------------------------------------------
# f-divergences


@dataclass(frozen=True)
class Generator:
    """Convex generator ``f`` with ``f(1) = 0`` and its boundary limits.

    ``at_zero`` is ``f(0+)``; ``slope_at_inf`` is ``lim_{u->inf} f(u)/u``,
    which gives the contribution ``p * slope_at_inf`` of an atom where the
    reference vector is zero.
    """

    name: str
    func: Callable[[float], float] = field(repr=False)
    at_zero: float
    slope_at_inf: float

    def __call__(self, u: float) -> float:
        if u == 0.0:
            return self.at_zero
        try:
            return self.func(u)
        except OverflowError:
            return math.inf


def _xlogx(u: float) -> float:
    return u * math.log(u) if u > 0 else 0.0


KL = Generator("kl", _xlogx, 0.0, math.inf)
TOTAL_VARIATION = Generator("tv", lambda u: 0.5 * abs(u - 1.0), 0.5, 0.5)
CHI_SQUARE = Generator("chi2", lambda u: (u - 1.0) ** 2, 1.0, math.inf)
HELLINGER = Generator("hellinger", lambda u: (math.sqrt(u) - 1.0) ** 2, 1.0, 1.0)

GeneratorLike = Union[Generator, Callable[[float], float]]


def as_generator(f: GeneratorLike) -> Generator:
    """Wrap a bare callable; its ``q = 0 < p`` limit is assumed to be +inf."""
    if isinstance(f, Generator):
        gen = f
    else:
        with np.errstate(all="ignore"):
            try:
                at_zero = float(f(0.0))
            except (ValueError, ZeroDivisionError):
                at_zero = float(f(1e-300))
        gen = Generator(getattr(f, "__name__", "custom"), f, at_zero, math.inf)
    if abs(gen(1.0)) > BUILD_TOL:
        raise InvalidGeneratorError(f"f(1) = {gen(1.0)!r}, expected 0")
    return gen


def f_divergence(p, q, f: GeneratorLike = KL) -> float:
    """``sum_c q_c f(p_c / q_c)`` with the usual boundary conventions.

    ``p`` plays the role of ``pr(c|x)`` and ``q`` of ``q(c|x)``; joint
    distributions are flattened. Returns ``math.inf`` when an atom of ``p``
    is missing from ``q`` and ``f`` grows superlinearly.
    """
    gen = as_generator(f)
    if isinstance(p, JointDistribution) and isinstance(q, JointDistribution):
        _check_pair(p, q)
        p, q = p.probs.ravel(), q.probs.ravel()
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise LengthMismatchError(f"vectors of shape {p.shape} and {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > BUILD_TOL:
            raise NotNormalizedError(f"{name} is not a probability vector")
    total = 0.0
    for pc, qc in zip(p.tolist(), q.tolist()):
        if qc == 0.0:
            if pc == 0.0:
                continue
            if math.isinf(gen.slope_at_inf):
                return math.inf
            total += pc * gen.slope_at_inf
        elif pc == 0.0:
            total += qc * gen.at_zero
        else:
            total += qc * gen(pc / qc)
    return total


def kl_divergence(p, q, base: float = NATURAL) -> float:
    """``KL(p || q)`` in units of ``base``."""
    return f_divergence(p, q, KL) / log_divisor(base)


# --------------------------------------------------------------------------
# Mismatch measures


def _check_pair(pr: JointDistribution, q: JointDistribution) -> None:
    if pr.shape != q.shape:
        raise DimensionMismatchError(f"pr is {pr.shape} but q is {q.shape}")


@dataclass(frozen=True)
class KLComponents:
    local: np.ndarray
    kl_conditional: float
    kl_marginal_term: float
    kl_joint: float


def _local_kl(pc: np.ndarray, qc: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(pc.tolist(), qc.tolist()):
        if a == 0.0:
            continue
        if b == 0.0:
            return math.inf
        r = a / b
        total += a * (math.log(r) if r < math.inf else math.log(a) - math.log(b))
    return total


def kl_components(
    pr: JointDistribution, q: JointDistribution, base: float = NATURAL
) -> KLComponents:
    """Chain-rule split of ``KL(pr || q)`` into conditional and marginal parts.

    ``local[x]`` is ``nan`` where ``pr(x) = 0``, and ``inf`` where
    ``pr(x) > 0`` but ``q(x) = 0`` (the model conditional is undefined there).
    """
    _check_pair(pr, q)
    dp, dq = decompose(pr), decompose(q)
    scale = log_divisor(base)
    local = np.full(pr.num_obs, np.nan)
    cond_sum = 0.0
    marg_sum = 0.0
    for x in np.flatnonzero(dp.defined):
        px = float(dp.marginal[x])
        qx = float(dq.marginal[x])
        if qx == 0.0:
            local[x] = math.inf
            cond_sum = math.inf
            marg_sum = math.inf
            continue
        local[x] = _local_kl(dp.conditionals[:, x], dq.conditionals[:, x]) / scale
        cond_sum += px * float(local[x])
        marg_sum += px * math.log(px / qx) / scale
    local.setflags(write=False)
    return KLComponents(local, cond_sum, marg_sum, cond_sum + marg_sum)


def kl_joint_direct(
    pr: JointDistribution, q: JointDistribution, base: float = NATURAL
) -> float:
    """``sum_{c,x} pr log(pr/q)`` straight from the joint entries."""
    _check_pair(pr, q)
    return _local_kl(pr.probs.ravel(), q.probs.ravel()) / log_divisor(base)


@dataclass(frozen=True)
class MismatchReport:
    bayes_error: float
    model_error: float
    delta_q: float
    total_variation: float
    kl_conditional: float
    kl_joint: float
    kl_marginal_term: float
    local_bayes_errors: np.ndarray
    local_model_errors: np.ndarray
    local_mismatches: np.ndarray
    local_kl: np.ndarray
    bayes_decisions: DecisionMap
    model_decisions: DecisionMap
    marginal: np.ndarray


def model_decisions_for(pr: JointDistribution, q: JointDistribution) -> DecisionMap:
    """Model decisions at every observation carrying true mass.

    Where ``q(x) = 0`` but ``pr(x) > 0`` the model column is all zeros, so
    every class ties and the lowest index is chosen with the tie flag set.
    """
    dq = decisions(decompose(q))
    defined_pr = decompose(pr).defined
    dec = np.array(dq.decisions)
    ties = np.array(dq.tie_flags)
    gap = defined_pr & ~dq.defined
    dec[gap] = 0
    ties[gap] = True
    dec.setflags(write=False)
    ties.setflags(write=False)
    return DecisionMap(dec, ties, _readonly_bool(dq.defined | gap))


def mismatch_report(
    pr: JointDistribution, q: JointDistribution, base: float = NATURAL
) -> MismatchReport:
    _check_pair(pr, q)
    dp = decompose(pr)
    bayes = decisions(dp)
    model = model_decisions_for(pr, q)
    n = pr.num_obs
    local_b = np.full(n, np.nan)
    local_m = np.full(n, np.nan)
    local_d = np.full(n, np.nan)
    e_star = e_q = delta = 0.0
    for x in np.flatnonzero(dp.defined):
        col = dp.conditionals[:, x]
        local_b[x] = 1.0 - col[bayes.decisions[x]]
        local_m[x] = 1.0 - col[model.decisions[x]]
        e_star += dp.marginal[x] * local_b[x]
        local_d[x] = col[bayes.decisions[x]] - col[model.decisions[x]]
        e_q += dp.marginal[x] * local_m[x]
        delta += dp.marginal[x] * local_d[x]
    tv = 0.5 * float(np.abs(pr.probs - q.probs).sum())
    kl = kl_components(pr, q, base)
    for a in (local_b, local_m, local_d):
        a.setflags(write=False)
    return MismatchReport(
        bayes_error=float(e_star),
        model_error=float(e_q),
        delta_q=float(delta),
        total_variation=tv,
        kl_conditional=kl.kl_conditional,
        kl_joint=kl.kl_joint,
        kl_marginal_term=kl.kl_marginal_term,
        local_bayes_errors=local_b,
        local_model_errors=local_m,
        local_mismatches=local_d,
        local_kl=kl.local,
        bayes_decisions=bayes,
        model_decisions=model,
        marginal=dp.marginal,
    )
