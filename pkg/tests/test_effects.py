import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from htemech.dgp import (CovariateSpec, MediatorSpec, OutcomeSpec, StructuralDGP, Term, TransformSpec,
                         turnout_dgp, two_mech_dgp, voter_dgp)
from htemech.effects import (EffectsError, check_effective, check_exclusion, conditional_effects, effects_table,
                             exact_available, is_mdv, is_relevant, oracle_voter_cate, switching_sequence,
                             unit_decomposition, verify_identification, verify_linear_invariance)

LAMBDA_GRID = [0.1 * k for k in range(1, 10)]


def _quad_vote_cate_a(a, mu):
    """Independent oracle: average over lambda of P(vote | treated) - P(vote | control)."""
    treated, _ = integrate.quad(lambda t: stats.norm.cdf(mu + a - t), 0.0, 1.0, epsabs=1e-13)
    return treated - stats.norm.cdf(mu + a)


def _quad_vote_cate_lambda(lam, mu):
    return np.mean([stats.norm.cdf(mu + a - lam) - stats.norm.cdf(mu + a) for a in (-1, 0, 1)])


# values computed with the quadrature oracle above, frozen here
FROZEN_A = {-1.0: -0.0838304859606004, 0.0: -0.1843731901862536, 1.0: -0.1569715558822892}


@pytest.mark.parametrize("a", [-1.0, 0.0, 1.0])
def test_oracle_matches_quadrature(a):
    assert _quad_vote_cate_a(a, 0.0) == pytest.approx(FROZEN_A[a], abs=1e-12)
    assert oracle_voter_cate("y2", "a", a) == pytest.approx(FROZEN_A[a], abs=1e-12)


@pytest.mark.parametrize("mu", [-1.031552, 0.25, 1.531552])
def test_oracle_other_mu(mu):
    for a in (-1.0, 0.0, 1.0):
        assert oracle_voter_cate("y2", "a", a, mu) == pytest.approx(_quad_vote_cate_a(a, mu), abs=1e-10)
    for lam in (0.0, 0.3, 1.0):
        assert oracle_voter_cate("y2", "lambda", lam, mu) == pytest.approx(_quad_vote_cate_lambda(lam, mu), abs=1e-14)


def test_oracle_y1_and_orderings():
    assert oracle_voter_cate("y1", "lambda", 0.37) == -0.37
    assert oracle_voter_cate("y1", "a", 1.0) == -0.5
    assert oracle_voter_cate("y2", "lambda", 1.0) == pytest.approx(-0.272865, abs=1e-6)
    vals = [abs(oracle_voter_cate("y2", "lambda", v)) for v in np.linspace(0, 1, 21)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_oracle_domain():
    with pytest.raises(EffectsError):
        oracle_voter_cate("y2", "a", 0.5)
    with pytest.raises(EffectsError):
        oracle_voter_cate("y2", "lambda", 1.5)
    with pytest.raises(EffectsError):
        oracle_voter_cate("y3", "a", 0.0)


def test_switching_sequence_endpoints():
    dgp = two_mech_dgp()
    covs = {"lambda": 0.3, "r": 0.6, "a": 1.0}
    seq = switching_sequence(dgp, covs, 1.0, 0.0)
    assert len(seq) == 4
    assert seq[0] == pytest.approx(0.3 + 0.6 + 1.0)   # fully treated
    assert seq[1] == pytest.approx(0.3 + 0.6 + 1.0)   # treatment off, mediators still at z
    assert seq[2] == pytest.approx(0.6 + 1.0)         # first mediator switched
    assert seq[3] == pytest.approx(1.0)               # fully control


def _interacting_dgp():
    """Two mediators with a product term and a direct effect, so every piece is nonzero."""
    return StructuralDGP(
        (CovariateSpec.uniform("x", -1, 1), CovariateSpec.normal("e", 0, 1)),
        (MediatorSpec("m1", (Term(1.0, 1, {"x": 1}), Term(0.5, 0))),
         MediatorSpec("m2", (Term(2.0, 1), Term(-1.0, 1, {"x": 2})))),
        OutcomeSpec((Term(1.0, 0, {"m1": 1, "m2": 1}), Term(0.7, 1, {"x": 1}), Term(1.0, 0, {"e": 1}))),
        TransformSpec.likert([-0.5, 0.5]),
    )


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["voter", "turnout", "two_mech", "interacting"]), st.integers(0, 2 ** 32 - 1),
       st.sampled_from(["y", "y_t"]))
def test_unit_decomposition_telescopes(preset, seed, tag):
    dgp = {"voter": voter_dgp(0.2), "turnout": turnout_dgp(), "two_mech": two_mech_dgp(True),
           "interacting": _interacting_dgp()}[preset]
    rng = np.random.default_rng(seed)
    unit = {c.name: float(c.sample(rng, 1)[0]) for c in dgp.covariates}
    d = unit_decomposition(dgp, unit, outcome=tag)
    assert abs(d.residual) <= 1e-10
    assert len(d.ie) == dgp.n_mechanisms


def test_conditional_sum_identity_and_exact_vs_mc():
    dgp = _interacting_dgp()
    for tag in ("y", "y_t"):
        ex = conditional_effects(dgp, tag, "x", 0.4, exact=True)
        mc = conditional_effects(dgp, tag, "x", 0.4, n_draws=200_000, rng=5)
        assert ex.decomposition_gap == pytest.approx(0.0, abs=1e-12)
        assert mc.decomposition_gap == pytest.approx(0.0, abs=1e-9)
        assert abs(ex.cate - mc.cate) <= 4 * mc.cate_se + 1e-9
        for e, m, s in zip(ex.aie, mc.aie, mc.aie_se):
            assert abs(e - m) <= 4 * s + 1e-9


def test_voter_exact_matches_oracle():
    dgp = voter_dgp(0.0)
    for a, want in FROZEN_A.items():
        assert conditional_effects(dgp, "y_t", "a", a, exact=True).cate == pytest.approx(want, abs=1e-10)
    for lam in (0.0, 0.5, 1.0):
        got = conditional_effects(dgp, "y_t", "lambda", lam, exact=True).cate
        assert got == pytest.approx(oracle_voter_cate("y2", "lambda", lam), abs=1e-12)
        assert conditional_effects(dgp, "y", "lambda", lam, exact=True).cate == pytest.approx(-lam, abs=1e-12)


def test_voter_effects_are_all_indirect():
    e = conditional_effects(voter_dgp(), "y_t", "a", 0.0, exact=True)
    assert e.ade == 0.0 and e.aie[0] == pytest.approx(e.cate)


def test_turnout_counterexample():
    dgp = turnout_dgp()
    c1 = conditional_effects(dgp, "y_t", "x2", 1.0, exact=True).cate
    c0 = conditional_effects(dgp, "y_t", "x2", 0.0, exact=True).cate
    assert c1 == pytest.approx(stats.norm.cdf(-1) - stats.norm.cdf(-0.5), abs=1e-12)
    assert c0 == pytest.approx(0.0, abs=1e-12)
    assert not is_mdv(dgp, "y", 1, "x2", [0.0, 1.0]).member
    rel = is_relevant(dgp, "y", "x2", [0.0, 1.0])
    assert rel.member and rel.set_label == "R_only"
    assert is_mdv(dgp, "y_t", 1, "x2", [0.0, 1.0]).member


def test_effectiveness_category_contrasts():
    rep = check_effective(turnout_dgp(), "x2", 0.0, 1.0)
    assert rep.effective
    assert sum(rep.contrast_x_prime) == pytest.approx(0.0, abs=1e-12)
    assert rep.contrast_x_prime[1] == pytest.approx(stats.norm.cdf(-1) - stats.norm.cdf(-0.5), abs=1e-12)
    likert = _interacting_dgp()
    ex = check_effective(likert, "x", -0.8, 0.8, exact=True)
    mc = check_effective(likert, "x", -0.8, 0.8, exact=False, n_draws=100_000, seed=2)
    assert len(ex.categories) == 3
    for e, m, s in zip(ex.difference, mc.difference, mc.se):
        assert abs(e - m) <= 4 * s + 1e-9
    with pytest.raises(EffectsError):
        check_effective(two_mech_dgp(), "lambda", 0.1, 0.9)


def test_exclusion_checks_on_presets():
    assert check_exclusion(voter_dgp(), "y", "lambda", LAMBDA_GRID).passed
    assert check_exclusion(two_mech_dgp(), "y", "lambda", LAMBDA_GRID).passed
    bad = check_exclusion(two_mech_dgp(True), "y", "lambda", LAMBDA_GRID)
    assert bad.assumption1_pass and not bad.assumption2_pass
    assert bad.assumption2_max_dev[2] == pytest.approx(0.8)
    w = bad.assumption2_witness[2]
    assert sorted([w.x, w.x_prime]) == [pytest.approx(0.1), pytest.approx(0.9)]


def test_exclusion_monte_carlo_mode():
    rep = check_exclusion(two_mech_dgp(), "y", "lambda", [0.2, 0.8], exact=False, n_draws=20_000, seed=1)
    assert not rep.exact and rep.tolerance == 1e-3 and rep.passed


def test_identification_residuals():
    r = verify_identification(voter_dgp(), "y", "lambda", 0.8, 0.2)
    assert r.residual == pytest.approx(0.0, abs=1e-12) and r.residual_zero
    assert r.diff_cate == pytest.approx(-0.6)
    bad = verify_identification(two_mech_dgp(True), "y", "lambda", 0.8, 0.2)
    assert not bad.residual_zero
    assert bad.residual == pytest.approx(bad.non_focal_sum, abs=1e-12)
    assert bad.residual == pytest.approx(bad.diff_aie[1])


def test_identification_same_point_is_zero_in_mc():
    r = verify_identification(two_mech_dgp(True), "y", "lambda", 0.5, 0.5, exact=False, n_draws=1000)
    assert r.residual == 0.0 and r.diff_cate == 0.0


def test_linear_invariance():
    dgp = voter_dgp()
    for a in (-2.0, 0.5, 3.0):
        rep = verify_linear_invariance(dgp, "lambda", 0.9, 0.2, TransformSpec.affine(a, 1.0))
        assert rep.holds and rep.diff_transformed == pytest.approx(a * rep.diff_structural)
    thr = verify_linear_invariance(dgp, "a", 0.0, -1.0, TransformSpec.threshold(0.0))
    assert not thr.holds
    assert thr.diff_transformed == pytest.approx(-0.1005427042256532, abs=1e-10)


def test_common_random_numbers_pair_grid_points():
    dgp = two_mech_dgp()
    a = conditional_effects(dgp, "y", "lambda", 0.2, n_draws=5000, rng=9)
    b = conditional_effects(dgp, "y", "lambda", 0.7, n_draws=5000, rng=9)
    # the r-mechanism draws are shared, so its AIE is identical at both points
    assert a.aie[1] == b.aie[1]


def test_exact_availability():
    assert exact_available(voter_dgp(), "y_t", "a")
    assert exact_available(two_mech_dgp(), "y", "lambda")
    assert not exact_available(two_mech_dgp().with_transform(TransformSpec.threshold(1.0)), "y_t", "lambda")
    assert not exact_available(voter_dgp().with_transform(TransformSpec.log_shift(10.0)), "y_t", "a")


def test_input_validation():
    dgp = voter_dgp()
    with pytest.raises(EffectsError):
        conditional_effects(dgp, "y", "lambda", 1.5)
    with pytest.raises(EffectsError):
        conditional_effects(dgp, "z", "lambda", 0.5)
    with pytest.raises(EffectsError):
        check_exclusion(dgp, "y", "lambda", [0.5, 2.0])
    with pytest.raises(EffectsError):
        is_mdv(dgp, "y", 2, "a", [-1.0, 0.0])


def test_effects_table_rows():
    rows = effects_table(two_mech_dgp(), "y", "lambda", [0.2, 0.4])
    assert [r.cate for r in rows] == [pytest.approx(0.2 + 0.5), pytest.approx(0.4 + 0.5)]
