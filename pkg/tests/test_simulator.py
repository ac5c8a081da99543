import numpy as np
import pytest

from klmismatch import kernels as K
from klmismatch.bounds import refined_bound
from klmismatch.core import build_joint, mismatch_report
from klmismatch.errors import EmptyResultError, GridOutOfRangeError, InvalidSpecError, OutOfRangeError
from klmismatch.simulator import (
    Rejected,
    SimConfig,
    bound_violations,
    draw_pair,
    frontier_oracle,
    lemma_checks,
    lemma_violations,
    parse_grid,
    randomized_search,
    sample_pair,
    simulate_arrays,
    two_point_family_kl,
)
from klmismatch.witness import WitnessSpec, build_witness


def test_sample_pair_is_a_pure_function_of_seed_and_index():
    cfg = SimConfig(3, 4, 0.2, num_samples=50, master_seed=9)
    for i in (0, 17, 49):
        a, b = draw_pair(cfg, i), draw_pair(cfg, i)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and a[2] == b[2]
    other = draw_pair(SimConfig(3, 4, 0.2, num_samples=50, master_seed=10), 17)
    assert not np.array_equal(other[0], draw_pair(cfg, 17)[0])


def test_sample_pair_rejects_or_returns_joints():
    cfg = SimConfig(4, 6, 0.08, num_samples=200, master_seed=1)
    kinds = set()
    for i in range(200):
        r = sample_pair(cfg, i)
        if isinstance(r, Rejected):
            assert r.bayes_error > 0.08
            kinds.add("rej")
        else:
            assert mismatch_report(*r).bayes_error <= 0.08
            kinds.add("ok")
    assert kinds == {"rej", "ok"}
    with pytest.raises(OutOfRangeError):
        sample_pair(cfg, 200)


def test_draws_are_valid_joints_with_floored_model():
    cfg = SimConfig(5, 3, 0.1, num_samples=100, master_seed=2)
    for i in range(100):
        pr, q, src = draw_pair(cfg, i)
        assert src in (0, 1)
        assert abs(pr.sum() - 1) < 1e-12 and abs(q.sum() - 1) < 1e-12
        assert (pr >= 0).all() and q.min() > 0


def test_two_class_loose_constraint_accepts_everything():
    # two classes always have E* <= 1/2; ties at exactly 1/2 have measure zero
    sim = simulate_arrays(SimConfig(2, 3, 0.5 - 1e-9, 10_000, 1, 0.0, 1.0))
    assert len(sim) == 10_000


def test_acceptance_count_frozen():
    # measured once from this seed; flat Dirichlet rarely gives E* <= 0.08 at 3x3
    sim = simulate_arrays(SimConfig(3, 3, 0.08, 10_000, 1, 0.0, 1.0))
    assert len(sim) == 12
    assert (sim.column(K.E_STAR) <= 0.08).all()


def test_witness_only_mix_respects_constraint():
    sim = simulate_arrays(SimConfig(3, 3, 0.08, 2000, 5, 1.0))
    assert (sim.source == 1).all()
    assert sim.column(K.E_STAR).max() <= 0.08
    assert len(sim) > 500


def test_empty_result():
    with pytest.raises(EmptyResultError):
        simulate_arrays(SimConfig(num_samples=0))
    with pytest.raises(EmptyResultError):
        simulate_arrays(SimConfig(8, 8, 0.001, 50, 0, 0.0, 1.0))


@pytest.mark.parametrize(
    "kwargs",
    [dict(num_classes=1), dict(num_samples=-1), dict(witness_mix=1.5), dict(concentration=0.0)],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidSpecError):
        SimConfig(**kwargs)
    with pytest.raises(OutOfRangeError):
        SimConfig(t=0.6)


def test_workers_and_chunking_do_not_change_results():
    cfg = SimConfig(4, 5, 0.1, 3000, 42)
    a = simulate_arrays(cfg, workers=1, chunk_size=4096)
    b = simulate_arrays(cfg, workers=3, chunk_size=257)
    assert np.array_equal(a.index, b.index)
    assert np.array_equal(a.measures, b.measures, equal_nan=True)
    assert a.points() == b.points()


def test_no_violations_on_a_small_run():
    sim = simulate_arrays(SimConfig(4, 6, 0.08, 5000, 3))
    v = bound_violations(sim)
    assert v.total == 0 and v.checked == len(sim)
    lc = lemma_violations(sim)
    assert lc.applicable > 0 and lc.lemma2_violations == 0 and lc.lemma3_violations == 0


def test_bound_violations_detects_a_planted_failure():
    sim = simulate_arrays(SimConfig(3, 3, 0.1, 500, 3))
    sim.measures[0, K.KL_JOINT] = sim.bound_refined[0] - 1e-6
    sim.measures[0, K.KL_COND] = sim.measures[0, K.KL_JOINT]
    assert bound_violations(sim).refined >= 1


def test_lemma_checks_on_refined_witness():
    pr, q = build_witness(WitnessSpec("refined", 0.75, 1e-6, t=0.08))
    rep = lemma_checks(pr, q, 0.08)
    assert rep.applicable
    assert rep.agreement_mass == pytest.approx(0.68, abs=1e-12)
    assert rep.agreement_error == pytest.approx(0.0, abs=1e-15)
    assert rep.renorm_mismatch == pytest.approx(0.5, abs=1e-12)
    assert rep.lemma3_lower == pytest.approx(0.5, abs=1e-12)
    assert rep.lemma3_middle == pytest.approx(0.5, abs=1e-12)
    assert rep.renorm_bayes_error == pytest.approx(0.25, abs=1e-12)
    assert rep.lemma2_holds and rep.lemma3_holds


def test_lemma_checks_not_applicable_cases():
    pr = build_joint(np.array([[0.4, 0.05], [0.1, 0.45]]))
    rep = lemma_checks(pr, pr, 0.2)
    assert rep.delta_q == 0 and not rep.applicable and rep.lemma2_holds
    pr, q = build_witness(WitnessSpec("nussbaum", 0.9, 1e-6))
    rep = lemma_checks(pr, q, 0.1 + 1e-9)
    assert not rep.applicable  # dq = 0.8 = 1 - 2t, outside the interior
    assert rep.agreement_mass == 0.0
    with pytest.raises(OutOfRangeError):
        lemma_checks(pr, q, 0.05)


def test_two_point_family_matches_refined_bound():
    for d in (0.05, 0.16, 0.4, 0.8):
        assert two_point_family_kl(d, 0.08) == pytest.approx(refined_bound(d, 0.08), abs=1e-12)
    assert two_point_family_kl(0.16, 0.08) == pytest.approx(0.041860, abs=1e-6)
    assert two_point_family_kl(1e-9, 0.08) == pytest.approx(0.0, abs=1e-12)


def test_frontier_oracle_small():
    rows = frontier_oracle(0.08, [0.16, 0.5], trials=800, seed=3)
    for r in rows:
        assert abs(r.analytic - r.bound) <= 1e-6
        assert r.search_feasible > 0
        assert r.search_min >= r.bound - 1e-9
        assert r.min_kl == min(r.analytic, r.search_min)
    with pytest.raises(GridOutOfRangeError):
        frontier_oracle(0.08, [0.9])
    with pytest.raises(GridOutOfRangeError):
        frontier_oracle(0.08, [0.0])


def test_randomized_search_is_seeded():
    assert randomized_search(0.3, 0.1, 400, 5) == randomized_search(0.3, 0.1, 400, 5)


def test_parse_grid():
    assert parse_grid("0.1:0.7:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    assert parse_grid("0.2,0.4") == [0.2, 0.4]
    with pytest.raises(ValueError):
        parse_grid("0.1:0.2")
    with pytest.raises(ValueError):
        parse_grid("0.1:0.2:0")
