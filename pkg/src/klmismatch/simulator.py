"""Seeded Monte Carlo over constrained (pr, q) pairs.

Each sample index owns a Philox counter-based stream keyed by the master
seed, with the index placed in the top word of the 256-bit counter. A sample
is therefore a pure function of ``(master_seed, index)``, and results are
assembled by index, so any chunking or worker count gives the same output.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels as K
from .bounds import evaluate_array, BoundKind, refined_bound
from .core import INEQ_SLACK, JointDistribution, build_joint
from .errors import EmptyResultError, GridOutOfRangeError, InvalidSpecError, OutOfRangeError

Q_FLOOR = 1e-9
MAX_PERTURBATION = 0.2
WITNESS_EPS_RANGE = (1e-6, 1e-2)
GAMMA_FLOOR = 1e-300
SOURCES = ("random", "witness_perturbed")


@dataclass(frozen=True)
class SimConfig:
    num_classes: int = 4
    num_obs: int = 6
    t: float = 0.08
    num_samples: int = 100_000
    master_seed: int = 0
    witness_mix: float = 0.3
    concentration: float = 0.1

    def __post_init__(self):
        if self.num_classes < 2 or self.num_obs < 2:
            raise InvalidSpecError("need at least 2 classes and 2 observations")
        if not (0.0 < self.t < 0.5):
            raise OutOfRangeError(f"t = {self.t!r} outside (0, 0.5)")
        if self.num_samples < 0:
            raise InvalidSpecError("num_samples must be non-negative")
        if not (0 <= self.master_seed < 2**64):
            raise InvalidSpecError("master_seed must be a 64-bit unsigned integer")
        if not (0.0 <= self.witness_mix <= 1.0):
            raise InvalidSpecError(f"witness_mix = {self.witness_mix!r} outside [0, 1]")
        if not self.concentration > 0:
            raise InvalidSpecError("concentration must be positive")


def index_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for one sample index."""
    return np.random.Generator(np.random.Philox(key=master_seed, counter=int(index) << 192))


def _dirichlet(rng: np.random.Generator, alpha: float, shape) -> np.ndarray:
    """Symmetric Dirichlet along axis 0."""
    g = np.maximum(rng.gamma(alpha, size=shape), GAMMA_FLOOR)
    return g / g.sum(axis=0)


def _random_pair(rng, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    C, X, a = cfg.num_classes, cfg.num_obs, cfg.concentration
    pr = _dirichlet(rng, a, (C, X)) * _dirichlet(rng, a, X)[None, :]
    raw = _dirichlet(rng, a, (C, X)) * _dirichlet(rng, a, X)[None, :]
    # blending toward pr spreads samples from q ~ pr out to independent q
    w = rng.random()
    return pr, (1.0 - w) * pr + w * raw


def _witness_pair(rng, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    C, X, t = cfg.num_classes, cfg.num_obs, cfg.t
    lam = rng.uniform(0.5, 1.0 - t)
    lo, hi = np.log(WITNESS_EPS_RANGE)
    eps = float(np.exp(rng.uniform(lo, hi)))
    w2 = t / (1.0 - lam)
    pr = np.zeros((C, X))
    q = np.zeros((C, X))
    pr[0, 0] = q[0, 0] = 1.0 - w2
    pr[0, 1], pr[1, 1] = w2 * lam, w2 * (1.0 - lam)
    q[0, 1], q[1, 1] = w2 * (0.5 - eps), w2 * (0.5 + eps)
    spread = rng.uniform(0.0, MAX_PERTURBATION)
    pr = pr * rng.uniform(1.0 - spread, 1.0 + spread, size=(C, X))
    q = q * rng.uniform(1.0 - spread, 1.0 + spread, size=(C, X))
    return pr / pr.sum(), q / q.sum()


def draw_pair(cfg: SimConfig, index: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Raw (unfiltered) pair for ``index`` with the floored model.

    Returns ``(pr, q, source)`` where ``source`` indexes :data:`SOURCES`.
    """
    rng = index_stream(cfg.master_seed, index)
    if rng.random() < cfg.witness_mix:
        pr, q = _witness_pair(rng, cfg)
        source = 1
    else:
        pr, q = _random_pair(rng, cfg)
        source = 0
    q = np.maximum(q, Q_FLOOR)
    return pr / pr.sum(), q / q.sum(), source


class Rejected:
    """Marker for a draw whose Bayes error exceeds the constraint."""

    __slots__ = ("index", "bayes_error")

    def __init__(self, index: int, bayes_error: float):
        self.index = index
        self.bayes_error = bayes_error

    def __repr__(self):
        return f"Rejected(index={self.index}, bayes_error={self.bayes_error:.6g})"


def sample_pair(cfg: SimConfig, index: int):
    """``(pr, q)`` as joint distributions, or :class:`Rejected` when ``E* > t``."""
    if not (0 <= index < cfg.num_samples):
        raise OutOfRangeError(f"index {index} outside [0, {cfg.num_samples})")
    pr, q, _ = draw_pair(cfg, index)
    e_star = K.measure_batch(pr, q)[0, K.E_STAR]
    if e_star > cfg.t:
        return Rejected(index, float(e_star))
    return build_joint(pr), build_joint(q)


@dataclass(frozen=True)
class SimulationPoint:
    index: int
    source: str
    num_classes: int
    num_obs: int
    bayes_error: float
    model_error: float
    delta_q: float
    total_variation: float
    kl_conditional: float
    kl_joint: float
    bound_nussbaum: float
    bound_refined: float


@dataclass
class SimulationArrays:
    """Column-oriented simulation output for the accepted samples."""

    config: SimConfig
    index: np.ndarray
    source: np.ndarray
    measures: np.ndarray  # (n, kernels.NUM_FIELDS)
    bound_nussbaum: np.ndarray
    bound_refined: np.ndarray
    num_drawn: int

    def __len__(self) -> int:
        return self.index.size

    def column(self, field: int) -> np.ndarray:
        return self.measures[:, field]

    def points(self) -> list[SimulationPoint]:
        cfg, m = self.config, self.measures
        return [
            SimulationPoint(
                int(i),
                SOURCES[s],
                cfg.num_classes,
                cfg.num_obs,
                float(r[K.E_STAR]),
                float(r[K.E_Q]),
                float(r[K.DELTA_Q]),
                float(r[K.TV]),
                float(r[K.KL_COND]),
                float(r[K.KL_JOINT]),
                float(bn),
                float(br),
            )
            for i, s, r, bn, br in zip(
                self.index.tolist(),
                self.source.tolist(),
                m,
                self.bound_nussbaum.tolist(),
                self.bound_refined.tolist(),
            )
        ]


def _run_chunk(args) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cfg, start, stop = args
    n = stop - start
    pr = np.empty((n, cfg.num_classes, cfg.num_obs))
    q = np.empty_like(pr)
    src = np.empty(n, dtype=np.int8)
    for k, idx in enumerate(range(start, stop)):
        pr[k], q[k], src[k] = draw_pair(cfg, idx)
    out = K.measure_batch(pr, q)
    keep = out[:, K.E_STAR] <= cfg.t
    return np.arange(start, stop)[keep], src[keep], out[keep]


def simulate_arrays(
    cfg: SimConfig, workers: int = 1, chunk_size: int = 4096
) -> SimulationArrays:
    """Run the simulation and keep only samples with ``E* <= t``."""
    bounds = [(s, min(s + chunk_size, cfg.num_samples)) for s in range(0, cfg.num_samples, chunk_size)]
    jobs = [(cfg, a, b) for a, b in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    if parts:
        index = np.concatenate([p[0] for p in parts])
        source = np.concatenate([p[1] for p in parts])
        measures = np.concatenate([p[2] for p in parts])
    else:
        index = np.empty(0, dtype=np.int64)
        source = np.empty(0, dtype=np.int8)
        measures = np.empty((0, K.NUM_FIELDS))
    if index.size == 0:
        raise EmptyResultError(
            f"no sample out of {cfg.num_samples} satisfied E* <= {cfg.t}"
        )
    delta = measures[:, K.DELTA_Q]
    return SimulationArrays(
        cfg,
        index,
        source,
        measures,
        evaluate_array(BoundKind("nussbaum"), delta),
        evaluate_array(BoundKind("refined", cfg.t), delta),
        cfg.num_samples,
    )


def run_simulation(cfg: SimConfig, workers: int = 1) -> list[SimulationPoint]:
    return simulate_arrays(cfg, workers).points()


@dataclass(frozen=True)
class ViolationCounts:
    checked: int
    refined: int
    nussbaum_conditional: int
    chain_rule: int
    total_variation: int
    max_violation: float

    @property
    def total(self) -> int:
        return self.refined + self.nussbaum_conditional + self.chain_rule + self.total_variation


def bound_violations(sim: SimulationArrays, slack: float = INEQ_SLACK) -> ViolationCounts:
    """Count failures of ``KL >= refined``, ``KL >= KL_cond >= B`` and ``dq <= 2V``.

    Infinite divergences satisfy every lower bound, so only finite values are
    compared for the divergence checks.
    """
    kj = sim.column(K.KL_JOINT)
    kc = sim.column(K.KL_COND)
    dq = sim.column(K.DELTA_Q)
    tv = sim.column(K.TV)
    with np.errstate(invalid="ignore"):
        gaps = [
            np.where(np.isfinite(kj), sim.bound_refined - kj, -np.inf),
            np.where(np.isfinite(kc), sim.bound_nussbaum - kc, -np.inf),
            np.where(np.isfinite(kj), kc - kj, -np.inf),
            dq - 2.0 * tv,
        ]
    counts = [int(np.sum(g > slack)) for g in gaps]
    worst = max(float(np.max(g)) for g in gaps)
    return ViolationCounts(len(sim), *counts, max_violation=worst)


# --------------------------------------------------------------------------
# Lemma checks


@dataclass(frozen=True)
class LemmaReport:
    """Quantities behind the refined bound's two supporting lemmas.

    The whole agreement set (observations where both rules decide the same
    class) is pooled into a single "agreeing observation"; its mass is
    ``agreement_mass`` and its pooled local Bayes error ``agreement_error``.
    Disagreement-set quantities are ``nan`` when that set has no mass.
    """

    t: float
    delta_q: float
    applicable: bool
    agreement_mass: float
    agreement_error: float
    renorm_mismatch: float
    renorm_bayes_error: float
    lemma3_middle: float
    lemma3_lower: float

    @property
    def lemma2_holds(self) -> bool:
        return (not self.applicable) or self.agreement_mass > 0.0

    @property
    def lemma3_checked(self) -> bool:
        return self.applicable and self.agreement_mass < 1.0

    @property
    def lemma3_holds(self) -> bool:
        if not self.lemma3_checked:
            return True
        s = INEQ_SLACK
        return (
            self.renorm_mismatch >= self.lemma3_middle - s
            and self.lemma3_middle >= self.lemma3_lower - s
        )


def lemma_arrays(measures: np.ndarray, t: float) -> dict[str, np.ndarray]:
    """Vectorized lemma quantities from :func:`kernels.measure_batch` rows."""
    dq = measures[:, K.DELTA_Q]
    mass = measures[:, K.AGREE_MASS]
    rest = 1.0 - mass
    with np.errstate(divide="ignore", invalid="ignore"):
        e0 = np.where(mass > 0, measures[:, K.AGREE_ERR] / mass, np.nan)
        renorm = np.where(rest > 0, measures[:, K.DISAGREE_DELTA] / rest, np.nan)
        renorm_err = np.where(rest > 0, measures[:, K.DISAGREE_ERR] / rest, np.nan)
        middle = dq * (1.0 - 2.0 * e0) / (2.0 * t - 2.0 * e0 + dq)
        lower = dq / (2.0 * t + dq)
    applicable = (dq > 0.0) & (dq < 1.0 - 2.0 * t)
    return {
        "delta_q": dq,
        "applicable": applicable,
        "agreement_mass": mass,
        "agreement_error": e0,
        "renorm_mismatch": renorm,
        "renorm_bayes_error": renorm_err,
        "lemma3_middle": middle,
        "lemma3_lower": lower,
    }


def lemma_checks(pr: JointDistribution, q: JointDistribution, t: float) -> LemmaReport:
    if not (0.0 < t < 0.5):
        raise OutOfRangeError(f"t = {t!r} outside (0, 0.5)")
    row = K.measure_batch(pr.probs, q.probs)
    if row[0, K.E_STAR] > t + INEQ_SLACK:
        raise OutOfRangeError(f"pair has E* = {row[0, K.E_STAR]:.6g} > t = {t}")
    a = lemma_arrays(row, t)
    return LemmaReport(
        t=t,
        **{k: (bool(v[0]) if k == "applicable" else float(v[0])) for k, v in a.items()},
    )


@dataclass(frozen=True)
class LemmaCounts:
    applicable: int
    lemma2_violations: int
    lemma3_checked: int
    lemma3_violations: int


def lemma_violations(sim: SimulationArrays, slack: float = INEQ_SLACK) -> LemmaCounts:
    a = lemma_arrays(sim.measures, sim.config.t)
    app = a["applicable"]
    l2 = app & ~(a["agreement_mass"] > 0.0)
    checked = app & (a["agreement_mass"] < 1.0)
    with np.errstate(invalid="ignore"):
        bad = (a["renorm_mismatch"] < a["lemma3_middle"] - slack) | (
            a["lemma3_middle"] < a["lemma3_lower"] - slack
        )
    l3 = checked & (bad | np.isnan(a["renorm_mismatch"]))
    return LemmaCounts(int(app.sum()), int(l2.sum()), int(checked.sum()), int(l3.sum()))


# --------------------------------------------------------------------------
# Frontier oracle


@dataclass(frozen=True)
class FrontierRow:
    delta: float
    analytic: float
    search_min: float
    min_kl: float
    bound: float
    search_feasible: int

    @property
    def difference(self) -> float:
        return self.min_kl - self.bound


def two_point_family_kl(delta: float, t: float) -> float:
    """Joint KL of the two-observation construction at ``epsilon = 0``.

    At ``epsilon = 0`` the model column at x2 is an exact tie; the limiting
    decision (the second class) is used explicitly rather than the library's
    lowest-index tie-break. The divergence is evaluated term by term, not
    through the closed-form bound.
    """
    lam = (delta + t) / (delta + 2.0 * t)
    w2 = t / (1.0 - lam)
    kl = lam * math.log(2.0 * lam)
    if lam < 1.0:
        kl += (1.0 - lam) * math.log(2.0 * (1.0 - lam))
    return w2 * kl


SEARCH_SHAPES = ((2, 2), (2, 3), (3, 2), (3, 3))
DELTA_MATCH = 1e-3
_LOGIT_FLOOR = -40.0


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _assemble(plog, qlog, mlog, delta):
    """Build candidate pairs whose mismatch is steered onto ``delta``.

    The marginal starts at ``softmax(mlog)`` and is moved toward the vertex
    with the largest (or smallest) local mismatch until the expected
    mismatch equals ``delta``; the model shares the true marginal.
    """
    P = _softmax(plog, 1)
    Q = _softmax(qlog, 1)
    cb = np.argmax(P, axis=1)
    cm = np.argmax(Q, axis=1)
    pb = np.take_along_axis(P, cb[:, None, :], 1)[:, 0]
    pm = np.take_along_axis(P, cm[:, None, :], 1)[:, 0]
    local = pb - pm
    m0 = _softmax(mlog, 1)
    d0 = (m0 * local).sum(1)
    up = d0 < delta
    j = np.where(up, np.argmax(local, 1), np.argmin(local, 1))
    target = np.take_along_axis(local, j[:, None], 1)[:, 0]
    denom = target - d0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(np.abs(denom) > 0, (delta - d0) / denom, 0.0)
    ok = (s >= 0.0) & (s <= 1.0)
    s = np.clip(s, 0.0, 1.0)
    m = (1.0 - s)[:, None] * m0
    m[np.arange(m.shape[0]), j] += s
    pr = P * m[:, None, :]
    q = Q * m[:, None, :]
    pr /= pr.sum(axis=(1, 2), keepdims=True)
    q /= q.sum(axis=(1, 2), keepdims=True)
    return pr, q, ok


def _init_states(rng, n, C, X):
    alpha = rng.uniform(0.05, 1.0, size=(n, 1, 1))
    P = np.maximum(rng.gamma(alpha, size=(n, C, X)), 1e-300)
    P /= P.sum(1, keepdims=True)
    cb = np.argmax(P, 1)
    d = np.where(rng.random((n, X)) < 0.5, cb, rng.integers(0, C, size=(n, X)))
    Q = P.copy()
    ii, xx = np.nonzero(d != cb)
    a, b = cb[ii, xx], d[ii, xx]
    mid = 0.5 * (P[ii, a, xx] + P[ii, b, xx])
    Q[ii, a, xx] = mid * (1.0 - 1e-9)
    Q[ii, b, xx] = mid * (1.0 + 1e-9)
    plog = np.maximum(np.log(P), _LOGIT_FLOOR)
    qlog = np.maximum(np.log(np.maximum(Q, 1e-300)), _LOGIT_FLOOR)
    mlog = rng.normal(0.0, 2.0, size=(n, X))
    return plog, qlog, mlog


def _feasible_kl(out, delta, t):
    ok = (np.abs(out[:, K.DELTA_Q] - delta) <= DELTA_MATCH) & (out[:, K.E_STAR] <= t)
    return np.where(ok, out[:, K.KL_JOINT], np.inf), ok


def randomized_search(delta: float, t: float, trials: int = 10_000, seed: int = 0) -> tuple[float, int]:
    """Hill-climbing search for small pairs with ``|dq - delta| <= 1e-3``, ``E* <= t``.

    ``trials`` candidate pairs are evaluated in total, spread over parallel
    chains for each shape in :data:`SEARCH_SHAPES`. Returns the smallest
    joint KL seen among feasible candidates and how many were feasible.
    """
    rng = np.random.Generator(np.random.Philox(key=seed, counter=int(round(delta * 1e9)) << 192))
    chains = 25
    per_shape = max(1, trials // len(SEARCH_SHAPES))
    steps = max(1, per_shape // chains)
    best = math.inf
    feasible = 0
    for C, X in SEARCH_SHAPES:
        plog, qlog, mlog = _init_states(rng, chains, C, X)
        pr, q, ok = _assemble(plog, qlog, mlog, delta)
        cur, hit = _feasible_kl(K.measure_batch(pr, q), delta, t)
        cur = np.where(ok, cur, np.inf)
        feasible += int((hit & ok).sum())
        sigma = rng.choice([0.03, 0.1, 0.3, 1.0], size=(chains, 1, 1))
        for _ in range(steps - 1):
            np_ = plog + sigma * rng.normal(size=plog.shape)
            nq = qlog + sigma * rng.normal(size=qlog.shape)
            nm = mlog + sigma[:, :, 0] * rng.normal(size=mlog.shape)
            pr, q, ok = _assemble(np_, nq, nm, delta)
            kl, hit = _feasible_kl(K.measure_batch(pr, q), delta, t)
            kl = np.where(ok, kl, np.inf)
            feasible += int((hit & ok).sum())
            better = kl < cur
            plog[better], qlog[better], mlog[better] = np_[better], nq[better], nm[better]
            cur = np.where(better, kl, cur)
        best = min(best, float(cur.min()))
    return best, feasible


def frontier_oracle(
    t: float, deltas: Sequence[float], trials: int = 10_000, seed: int = 0
) -> list[FrontierRow]:
    """Smallest joint KL found at each target mismatch, from two routes.

    The analytic route evaluates the two-observation construction; the
    search route hunts over small random pairs. ``min_kl`` is the smaller.
    """
    if not (0.0 < t < 0.5):
        raise OutOfRangeError(f"t = {t!r} outside (0, 0.5)")
    rows = []
    for d in deltas:
        d = float(d)
        if not (0.0 < d < 1.0 - 2.0 * t):
            raise GridOutOfRangeError(f"delta {d!r} outside (0, {1 - 2 * t!r})")
        analytic = two_point_family_kl(d, t)
        found, n_ok = randomized_search(d, t, trials, seed) if trials > 0 else (math.inf, 0)
        rows.append(
            FrontierRow(d, analytic, found, min(analytic, found), refined_bound(d, t), n_ok)
        )
    return rows


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {spec!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(v) for v in spec.split(",") if v.strip()]
