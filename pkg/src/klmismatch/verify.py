"""Randomized verification suites run by ``klmismatch verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .bounds import b_function, local_f_bound
from .core import INEQ_SLACK, KL, build_joint, mismatch_report
from .simulator import (
    SimConfig,
    frontier_oracle,
    index_stream,
    lemma_checks,
    lemma_violations,
    simulate_arrays,
)
from .witness import WitnessSpec, refined_witness

SUITES = ("inequalities", "lemmas", "oracle", "all")
ORACLE_TOL = 1e-6
SEARCH_SLACK = 1e-9


@dataclass
class CheckResult:
    suite: str
    check: str
    trials: int
    violations: int
    worst: float = -math.inf


@dataclass
class SuiteResult:
    name: str
    checks: list[CheckResult] = field(default_factory=list)
    table: list[str] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(c.violations for c in self.checks)

    def add(self, check: str, trials: int, excess) -> None:
        """Record a check given the array of ``lhs - rhs`` excesses (> slack fails)."""
        excess = np.asarray(excess, dtype=np.float64)
        bad = int(np.sum(excess > INEQ_SLACK))
        worst = float(excess.max()) if excess.size else -math.inf
        self.checks.append(CheckResult(self.name, check, trials, bad, worst))


def random_pair(rng: np.random.Generator, max_dim: int = 6):
    """Unconstrained random pair of random shape, Dirichlet with random sharpness."""
    C = int(rng.integers(2, max_dim + 1))
    X = int(rng.integers(2, max_dim + 1))
    alpha = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
    pr = rng.gamma(alpha, size=(C, X)) + 1e-300
    q = rng.gamma(alpha, size=(C, X)) + 1e-300
    w = rng.random()
    q = (1 - w) * pr / pr.sum() + w * q / q.sum()
    return build_joint(pr / pr.sum()), build_joint(q / q.sum())


def aggregation_excess(rng: np.random.Generator, n: int) -> np.ndarray:
    """``rhs - lhs`` of the two-summand aggregation inequality with ``f(u) = u log u``.

    ``q f(p/q)`` is written as ``p log(p/q)``.
    """
    p1, p2, q1, q2 = np.exp(rng.uniform(-6.0, 1.0, size=(4, n)))
    lhs = p1 * np.log(p1 / q1) + p2 * np.log(p2 / q2)
    s = p1 + p2
    rhs = s * np.log(s / (q1 + q2))
    return rhs - lhs


def inequality_suite(samples: int, seed: int, t: float = 0.08) -> SuiteResult:
    res = SuiteResult("inequalities")
    tv_ex, t1_ex, chain_ex, nuss_ex = [], [], [], []
    for i in range(samples):
        pr, q = random_pair(index_stream(seed, i))
        rep = mismatch_report(pr, q)
        tv_ex.append(rep.delta_q - 2.0 * rep.total_variation)
        live = np.isfinite(rep.local_kl)
        locals_b = [local_f_bound(d, KL) for d in rep.local_mismatches[live]]
        t1_ex.append(max((b - k for b, k in zip(locals_b, rep.local_kl[live])), default=-math.inf))
        if math.isfinite(rep.kl_joint):
            chain_ex.append(rep.kl_conditional - rep.kl_joint)
        if math.isfinite(rep.kl_conditional):
            nuss_ex.append(b_function(rep.delta_q) - rep.kl_conditional)
    res.add("delta_q<=2V", samples, tv_ex)
    res.add("local_f_bound", samples, t1_ex)
    res.add("kl_joint>=kl_cond", samples, chain_ex)
    res.add("kl_cond>=B(delta_q)", samples, nuss_ex)
    agg_rng = index_stream(seed, 2**60)
    res.add("aggregation", samples, aggregation_excess(agg_rng, samples))

    sim = simulate_arrays(SimConfig(4, 6, t, samples, seed, 0.3))
    kj = sim.column(K.KL_JOINT)
    res.add(
        "kl_joint>=refined(t)",
        len(sim),
        np.where(np.isfinite(kj), sim.bound_refined - kj, -np.inf),
    )
    return res


def lemma_suite(samples: int, seed: int, t: float = 0.08) -> SuiteResult:
    res = SuiteResult("lemmas")
    sim = simulate_arrays(SimConfig(4, 6, t, samples, seed, 0.3))
    counts = lemma_violations(sim)
    res.checks.append(CheckResult("lemmas", "agreement_mass>0", counts.applicable, counts.lemma2_violations))
    res.checks.append(CheckResult("lemmas", "renorm_mismatch>=lower", counts.lemma3_checked, counts.lemma3_violations))
    if 0.75 < 1.0 - t:
        rep = lemma_checks(*refined_witness(WitnessSpec("refined", 0.75, 1e-6, t)), t)
        res.add("renorm_equality_at_witness", 1, [abs(rep.renorm_mismatch - rep.lemma3_lower) - 1e-9])
    return res


def oracle_suite(t: float, grid, trials: int = 10_000, seed: int = 0) -> SuiteResult:
    res = SuiteResult("oracle")
    rows = frontier_oracle(t, grid, trials=trials, seed=seed)
    res.add("oracle_matches_refined", len(rows), [abs(r.min_kl - r.bound) - ORACLE_TOL for r in rows])
    res.add("search_not_below_refined", len(rows), [r.bound - SEARCH_SLACK - r.search_min for r in rows])
    res.table.append("delta,oracle_min,refined_bound,difference,search_min,search_feasible")
    for r in rows:
        res.table.append(
            f"{r.delta:.9g},{r.min_kl:.9g},{r.bound:.9g},{r.difference:.3g},"
            f"{r.search_min:.9g},{r.search_feasible}"
        )
    return res


def run_suite(name: str, samples: int, seed: int, t: float, grid, trials: int = 10_000) -> list[SuiteResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    out = []
    if name in ("inequalities", "all"):
        out.append(inequality_suite(samples, seed, t))
    if name in ("lemmas", "all"):
        out.append(lemma_suite(samples, seed, t))
    if name in ("oracle", "all"):
        out.append(oracle_suite(t, grid, trials, seed))
    return out
