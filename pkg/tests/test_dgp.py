import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from htemech.dgp import (CovariateSpec, DGPError, MediatorSpec, OutcomeSpec, StructuralDGP, Term, TransformSpec,
                         builtin_dgp, check_transform_nonlinearity, dgp_from_dict, dgp_to_dict, load_dgp,
                         potential_outcome, sample_units, turnout_dgp, two_mech_dgp, voter_dgp)


def test_voter_structural_and_vote():
    dgp = voter_dgp(0.0)
    unit = {"lambda": 0.4, "a": 1.0, "eps": -0.5}
    assert potential_outcome(dgp, unit, 1.0) == (pytest.approx(0.1), 1.0)
    assert potential_outcome(dgp, unit, 0.0) == (pytest.approx(0.5), 1.0)
    y, yt = potential_outcome(dgp, {"lambda": 0.9, "a": 0.0, "eps": 0.5}, 1.0)
    assert y == pytest.approx(-0.4) and yt == 0.0


def test_override_fixes_mediator():
    dgp = voter_dgp()
    unit = {"lambda": 0.7, "a": 0.0, "eps": 0.0}
    y, _ = potential_outcome(dgp, unit, 0.0, overrides={"m": 0.7})
    assert y == pytest.approx(-0.7)
    with pytest.raises(DGPError):
        potential_outcome(dgp, unit, 0.0, overrides={"nope": 1.0})


def test_sample_units_shapes_and_support():
    rng = np.random.default_rng(3)
    u = sample_units(voter_dgp(0.25), 500, rng)
    assert set(u) == {"lambda", "a", "eps", "z", "m", "y", "y_t"}
    assert set(np.unique(u["a"])) <= {-1.0, 0.0, 1.0}
    assert set(np.unique(u["z"])) == {0.0, 1.0}
    assert np.all((u["lambda"] >= 0) & (u["lambda"] <= 1))
    np.testing.assert_allclose(u["y"], -u["z"] * u["lambda"] + u["a"] + u["eps"])
    np.testing.assert_array_equal(u["y_t"], (u["y"] >= 0).astype(float))


def test_sampling_is_seed_deterministic():
    a = sample_units(two_mech_dgp(), 50, np.random.default_rng(11))
    b = sample_units(two_mech_dgp(), 50, np.random.default_rng(11))
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_degree_tracks_mediators():
    assert voter_dgp().degree_in("lambda") == 1
    assert voter_dgp().degree_in("eps") == 1
    assert turnout_dgp().degree_in("x1") == 1
    dgp = StructuralDGP(
        (CovariateSpec.normal("x", 0, 1),),
        (MediatorSpec("m", (Term(1.0, 1, {"x": 2}),)),),
        OutcomeSpec((Term(1.0, 0, {"m": 2}),)),
    )
    assert dgp.degree_in("x") == 4


def test_validation_errors():
    with pytest.raises(DGPError):
        MediatorSpec("m", (Term(1.0, 0, {"x": 1}),))  # no treatment dependence
    with pytest.raises(DGPError):
        CovariateSpec.normal("x", 0, 0)
    with pytest.raises(DGPError):
        builtin_dgp("nonexistent")
    with pytest.raises(DGPError):
        TransformSpec.likert([0.0, 0.0])
    with pytest.raises(DGPError):
        voter_dgp(float("nan"))


def test_transforms():
    assert TransformSpec.threshold(0.0)(0.0) == 1.0
    assert TransformSpec.threshold(0.0)(-1e-12) == 0.0
    lik = TransformSpec.likert([-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(lik(np.array([-2.0, -0.5, 0.5, 3.0])), [1.0, 2.0, 3.0, 4.0])
    assert lik.categories() == (1.0, 2.0, 3.0, 4.0)
    assert TransformSpec.affine(2.0, 1.0)(3.0) == 7.0
    with pytest.raises(DGPError):
        TransformSpec.log_shift(1.0)(-2.0)
    w = TransformSpec.winsorize(-1.0, 1.0)
    np.testing.assert_array_equal(w(np.array([-3.0, 0.2, 5.0])), [-1.0, 0.2, 1.0])


@pytest.mark.parametrize("tr,verdict", [
    (TransformSpec.identity(), "linear"),
    (TransformSpec.affine(-3.0, 2.0), "linear"),
    (TransformSpec.threshold(0.0), "nonlinear"),
    (TransformSpec.likert([0.0, 1.0]), "nonlinear"),
    (TransformSpec.log_shift(2.0), "nonlinear"),
])
def test_nonlinearity_witness(tr, verdict):
    res = check_transform_nonlinearity(tr)
    assert res.verdict == verdict
    if verdict == "nonlinear":
        t, t2, d, dt, dt2 = res.witness
        assert float(tr(t + d)) - float(tr(t)) != pytest.approx(float(tr(t2 + d)) - float(tr(t2)))


@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_affine_is_linear_everywhere(y, a):
    tr = TransformSpec.affine(a, 0.5)
    assert tr(y + 1.0) - tr(y) == pytest.approx(a)


def test_json_round_trip(tmp_path):
    for dgp in (voter_dgp(0.3), turnout_dgp(), two_mech_dgp(True)):
        cfg = dgp_to_dict(dgp)
        path = tmp_path / f"{dgp.name}.json"
        path.write_text(json.dumps(cfg))
        back = load_dgp(path)
        unit = {c.name: c.mean + 0.1 for c in dgp.covariates}
        for z in (0.0, 1.0):
            assert potential_outcome(back, unit, z) == potential_outcome(dgp, unit, z)


def test_malformed_config():
    with pytest.raises(DGPError):
        dgp_from_dict({"covariates": []})
