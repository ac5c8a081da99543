import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klmismatch import decisions, decompose, kl_components
from klmismatch.bounds import BoundKind, b_function, refined_bound
from klmismatch.errors import InvalidSpecError
from klmismatch.witness import (
    GAP_HEADER,
    WitnessSpec,
    build_witness,
    gap_row,
    kind_for,
    nussbaum_witness,
    refined_witness,
    witness_gap,
)


def refined_kl_by_hand(lam, t, eps):
    """Only the mismatched column contributes; the certain column matches exactly."""
    w2 = t / (1 - lam)
    local = lam * math.log(lam / (0.5 - eps))
    if lam < 1:
        local += (1 - lam) * math.log((1 - lam) / (0.5 + eps))
    return w2 * local


def test_refined_example():
    spec = WitnessSpec("refined", 0.75, 1e-6, t=0.08)
    pr, q = refined_witness(spec)
    assert pr.probs[:, 0].sum() == pytest.approx(0.68, abs=1e-15)
    rep = witness_gap((pr, q), kind_for(spec))
    assert rep.delta_q == pytest.approx(0.16, abs=1e-12)
    assert rep.bayes_error == pytest.approx(0.08, abs=1e-12)
    assert rep.bound_value == pytest.approx(0.041860, abs=1e-6)
    assert rep.kl_joint == pytest.approx(refined_kl_by_hand(0.75, 0.08, 1e-6), abs=1e-14)
    assert 0 < rep.gap <= 1e-5


def test_refined_gap_shrinks_with_epsilon():
    gaps = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        spec = WitnessSpec("refined", 0.75, eps, t=0.08)
        gaps.append(witness_gap(build_witness(spec), kind_for(spec)).gap)
    assert all(g > 0 for g in gaps)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("lam", [0.6, 0.75, 0.9, 1.0])
def test_nussbaum_gaps(lam):
    spec = WitnessSpec("nussbaum", lam, 1e-6)
    rep = witness_gap(nussbaum_witness(spec), kind_for(spec))
    assert rep.delta_q == pytest.approx(2 * lam - 1, abs=1e-12)
    assert rep.bound_value == pytest.approx(b_function(2 * lam - 1), abs=1e-15)
    assert 0 <= rep.gap <= 1e-5
    assert rep.bayes_error == pytest.approx(1 - lam, abs=1e-12)


def test_nussbaum_lambda_one_kl():
    spec = WitnessSpec("nussbaum", 1.0, 1e-6)
    rep = witness_gap(nussbaum_witness(spec), kind_for(spec))
    assert rep.kl_joint == pytest.approx(-math.log(0.5 - 1e-6), abs=1e-14)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="nussbaum", lam=0.5),
        dict(family="nussbaum", lam=1.01),
        dict(family="refined", lam=0.75),
        dict(family="refined", lam=0.92, t=0.08),
        dict(family="refined", lam=0.4, t=0.08),
        dict(family="refined", lam=0.6, t=0.5),
        dict(family="nussbaum", lam=0.7, epsilon=0.0),
        dict(family="nussbaum", lam=0.7, num_classes=1),
        dict(family="mixture", lam=0.7),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpecError):
        WitnessSpec(**kwargs)


def test_wrong_constructor_rejected():
    with pytest.raises(InvalidSpecError):
        refined_witness(WitnessSpec("nussbaum", 0.7))
    with pytest.raises(InvalidSpecError):
        nussbaum_witness(WitnessSpec("refined", 0.7, t=0.1))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.49), st.floats(0.0, 1.0))
def test_refined_delta_formula(t, frac):
    lam = 0.5 + frac * (0.5 - t) * 0.999
    spec = WitnessSpec("refined", lam, 1e-6, t=t)
    pr, q = refined_witness(spec)
    rep = witness_gap((pr, q), kind_for(spec))
    assert abs(rep.delta_q - (2 * lam - 1) * t / (1 - lam)) <= 1e-12
    assert abs(rep.delta_q - spec.expected_delta_q) <= 1e-12
    assert abs(rep.bayes_error - t) <= 1e-12
    assert rep.gap >= -1e-12


def test_decisions_disagree_only_at_mismatched_observation():
    pr, q = refined_witness(WitnessSpec("refined", 0.75, 1e-6, t=0.08, num_classes=3, num_obs=4))
    db, dm = decisions(decompose(pr)), decisions(decompose(q))
    assert db.decisions.tolist() == [0, 0, -1, -1]
    assert dm.decisions.tolist() == [0, 1, -1, -1]
    assert not db.defined[2:].any()


def test_extra_classes_and_observations_do_not_change_gap():
    base = witness_gap(build_witness(WitnessSpec("refined", 0.7, 1e-4, t=0.1)), BoundKind("refined", 0.1))
    big = witness_gap(
        build_witness(WitnessSpec("refined", 0.7, 1e-4, t=0.1, num_classes=5, num_obs=6)),
        BoundKind("refined", 0.1),
    )
    assert big.gap == pytest.approx(base.gap, abs=1e-15)
    n1 = witness_gap(build_witness(WitnessSpec("nussbaum", 0.8, 1e-4)), BoundKind("nussbaum"))
    n2 = witness_gap(build_witness(WitnessSpec("nussbaum", 0.8, 1e-4, num_obs=7)), BoundKind("nussbaum"))
    assert n2.gap == pytest.approx(n1.gap, abs=1e-14)


def test_refined_near_upper_lambda_reaches_junction():
    t = 0.08
    spec = WitnessSpec("refined", 1 - t - 1e-6, 1e-6, t=t)
    rep = witness_gap(build_witness(spec), kind_for(spec))
    assert rep.delta_q == pytest.approx(1 - 2 * t, abs=1e-4)
    assert rep.bound_value == pytest.approx(refined_bound(1 - 2 * t, t), abs=1e-4)


def test_kl_is_all_conditional_for_equal_marginals():
    pr, q = nussbaum_witness(WitnessSpec("nussbaum", 0.65, 1e-3))
    comp = kl_components(pr, q)
    assert comp.kl_marginal_term == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(comp.local, comp.local[0])


def test_gap_row_format():
    spec = WitnessSpec("refined", 0.75, 1e-6, t=0.08)
    row = gap_row(spec, witness_gap(build_witness(spec), kind_for(spec)))
    cells = row.split(",")
    assert len(cells) == len(GAP_HEADER.split(","))
    assert cells[:4] == ["refined", "0.75", "0.08", "1e-06"]
    assert float(cells[4]) == pytest.approx(0.16, abs=1e-9)
    nrow = gap_row(WitnessSpec("nussbaum", 0.9), witness_gap(build_witness(WitnessSpec("nussbaum", 0.9)), BoundKind("nussbaum")))
    assert nrow.split(",")[2] == ""
