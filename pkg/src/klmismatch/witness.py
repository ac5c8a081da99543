"""Distribution pairs that attain the KL bounds as ``epsilon -> 0+``.

Both families put the model's decision on class 1 at the observations where
it matters, while the true distribution favours class 0, using
``q(c|x) = (0.5 - eps, 0.5 + eps, 0, ...)``. Unused classes and
observations get exactly zero mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import BoundKind, evaluate
from .core import NATURAL, JointDistribution, build_joint, mismatch_report
from .errors import InvalidSpecError

DEFAULT_EPSILON = 1e-6
FAMILIES = ("nussbaum", "refined")


@dataclass(frozen=True)
class WitnessSpec:
    family: str
    lam: float
    epsilon: float = DEFAULT_EPSILON
    t: Optional[float] = None
    num_classes: int = 2
    num_obs: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(f"unknown witness family {self.family!r}")
        if not (0.0 < self.epsilon < 0.25):
            raise InvalidSpecError(f"epsilon = {self.epsilon!r} outside (0, 0.25)")
        if self.num_classes < 2 or self.num_obs < 2:
            raise InvalidSpecError("need at least 2 classes and 2 observations")
        if self.family == "nussbaum":
            if not (0.5 < self.lam <= 1.0):
                raise InvalidSpecError(f"lambda = {self.lam!r} outside (0.5, 1]")
        else:
            if self.t is None or not (0.0 < self.t < 0.5):
                raise InvalidSpecError(f"refined family needs t in (0, 0.5), got {self.t!r}")
            if not (0.5 <= self.lam < 1.0 - self.t):
                raise InvalidSpecError(
                    f"lambda = {self.lam!r} outside [0.5, 1 - t) = [0.5, {1 - self.t!r})"
                )

    @property
    def expected_delta_q(self) -> float:
        if self.family == "nussbaum":
            return 2.0 * self.lam - 1.0
        return (2.0 * self.lam - 1.0) * self.t / (1.0 - self.lam)


def _columns(spec: WitnessSpec):
    tp = np.zeros(spec.num_classes)
    tp[0], tp[1] = spec.lam, 1.0 - spec.lam
    mq = np.zeros(spec.num_classes)
    mq[0], mq[1] = 0.5 - spec.epsilon, 0.5 + spec.epsilon
    return tp, mq


def nussbaum_witness(spec: WitnessSpec) -> tuple[JointDistribution, JointDistribution]:
    """Same conditional pair at every observation, uniform equal marginals."""
    if spec.family != "nussbaum":
        raise InvalidSpecError(f"expected a nussbaum spec, got {spec.family!r}")
    tp, mq = _columns(spec)
    marginal = np.full(spec.num_obs, 1.0 / spec.num_obs)
    pr = np.outer(tp, marginal)
    q = np.outer(mq, marginal)
    return build_joint(pr), build_joint(q)


def refined_witness(spec: WitnessSpec) -> tuple[JointDistribution, JointDistribution]:
    """Two live observations: a certain one where both agree, and a mismatched one.

    ``pr(x2) = t / (1 - lam)`` makes the Bayes error exactly ``t``.
    """
    if spec.family != "refined":
        raise InvalidSpecError(f"expected a refined spec, got {spec.family!r}")
    tp, mq = _columns(spec)
    w2 = spec.t / (1.0 - spec.lam)
    pr = np.zeros((spec.num_classes, spec.num_obs))
    q = np.zeros_like(pr)
    pr[0, 0] = q[0, 0] = 1.0 - w2
    pr[:, 1] = w2 * tp
    q[:, 1] = w2 * mq
    return build_joint(pr), build_joint(q)


def build_witness(spec: WitnessSpec) -> tuple[JointDistribution, JointDistribution]:
    if spec.family == "nussbaum":
        return nussbaum_witness(spec)
    return refined_witness(spec)


@dataclass(frozen=True)
class GapReport:
    delta_q: float
    kl_joint: float
    bound_value: float
    gap: float
    bayes_error: float


def witness_gap(
    pair: tuple[JointDistribution, JointDistribution],
    kind: BoundKind,
    base: float = NATURAL,
) -> GapReport:
    pr, q = pair
    rep = mismatch_report(pr, q, base)
    bound = evaluate(kind, rep.delta_q, base)
    return GapReport(rep.delta_q, rep.kl_joint, bound, rep.kl_joint - bound, rep.bayes_error)


def kind_for(spec: WitnessSpec) -> BoundKind:
    return BoundKind.parse(spec.family, spec.t)


GAP_HEADER = "family,lambda,t,epsilon,delta_q,kl_joint,bound,gap"


def gap_row(spec: WitnessSpec, report: GapReport) -> str:
    t = "" if spec.t is None or spec.family == "nussbaum" else f"{spec.t:.9g}"
    vals = (report.delta_q, report.kl_joint, report.bound_value, report.gap)
    body = ",".join(_fmt(v) for v in vals)
    return f"{spec.family},{spec.lam:.9g},{t},{spec.epsilon:.9g},{body}"


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.9g}"
