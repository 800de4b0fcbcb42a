import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfamp import (
    ParameterError,
    PoleEvaluationError,
    build_beam_splitter,
    build_detuned_ndpa,
    build_ndpa,
    check_scattering_constraints,
    passive_controller,
)
from qfamp.models import controller_from_config, passivity_residual, plant_from_config
from qfamp.tfcore import ComplexPoly, RationalFunction, RationalMatrix

GRID = np.linspace(-4, 4, 81)


def test_ndpa_resonant_gains():
    kappa, lam = 1.0, 0.4
    p = build_ndpa(kappa, lam)
    g1, g2 = p.G(1, 1)(0.0), p.G(1, 2)(0.0)
    assert abs(abs(g1) - (kappa ** 2 + 4 * lam ** 2) / (kappa ** 2 - 4 * lam ** 2)) < 1e-12
    assert abs(abs(g2) - 4 * kappa * lam / (kappa ** 2 - 4 * lam ** 2)) < 1e-12
    assert abs(abs(g1) ** 2 - abs(g2) ** 2 - 1) < 1e-12


def test_ndpa_poles_undetuned():
    kappa, lam = 1.0, 0.3
    poles = sorted(p.real for p in build_ndpa(kappa, lam).poles())
    assert np.allclose(poles, [-kappa / 2 - lam, -kappa / 2 + lam])


def test_loss_column_only_when_lossy():
    assert not build_ndpa(1, 0.2).lossy
    lossy = build_ndpa(1, 0.2, gamma=0.1)
    assert lossy.lossy and lossy.matrix.col_labels[-1] == "d3"


@pytest.mark.parametrize("kwargs", [dict(kappa=0, lam=1), dict(kappa=1, lam=1, gamma=-0.1)])
def test_ndpa_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        build_ndpa(**kwargs)


def test_detuned_matches_general_ndpa():
    lam = 5.0
    a, b = build_detuned_ndpa(1.0, lam), build_ndpa(1.0, lam, lam, lam)
    assert np.max(np.abs(a.matrix.frequency_response(GRID) - b.matrix.frequency_response(GRID))) < 1e-12


def test_detuned_double_pole_independent_of_lambda():
    for lam in (1.0, 5.0, 30.0):
        assert all(abs(p + 0.5) < 1e-6 for p in build_detuned_ndpa(1.0, lam).poles())


def test_detuned_peak():
    assert abs(abs(build_detuned_ndpa(1.0, 5.0).G(1, 1)(0.0)) ** 2 - 401) < 1e-9


@given(st.floats(0.2, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1))
@settings(max_examples=60, deadline=None)
def test_scattering_constraints_hold(kappa, lam, d1, d2, gamma):
    plant = build_ndpa(kappa, lam, d1, d2, gamma)
    try:
        report = check_scattering_constraints(plant.matrix, GRID)
    except PoleEvaluationError:
        return
    scale = max(1.0, np.max(np.abs(plant.matrix.frequency_response(GRID))) ** 2)
    assert report.max_residual < 1e-11 * scale


def test_constraint_report_detects_violation():
    m = RationalMatrix.from_constants([[2, 0], [0, 1]], ("y", "z†"), ("u", "v†"))
    report = check_scattering_constraints(m, [0.0, 1.0])
    assert not report.passed and abs(report.max_residual - 3) < 1e-12
    assert set(report.residuals) == {"row1", "row2", "cross"}


def test_constraint_grid_must_be_nonempty():
    with pytest.raises(ParameterError):
        check_scattering_constraints(build_ndpa(1, 0.1).matrix, [])


def test_constraint_pole_on_grid():
    # undetuned NDPA at lam = kappa/2 has a pole at s = 0
    with pytest.raises(PoleEvaluationError):
        check_scattering_constraints(build_ndpa(1.0, 0.5).matrix, [0.0])


@given(st.floats(-1, 1))
def test_beam_splitter_is_unitary(beta):
    bs = build_beam_splitter(beta)
    assert passivity_residual(bs.matrix, [0.0]) < 1e-12
    assert bs.alpha == pytest.approx(math.sqrt(1 - beta ** 2))
    assert bs.K(2, 1)(0.0) == pytest.approx(beta)


def test_beam_splitter_rejects_beta_above_one():
    with pytest.raises(ParameterError):
        build_beam_splitter(1.2)


def test_passive_controller_accepts_all_pass_cavity():
    # single-sided empty cavity (s - k/2)/(s + k/2) is all-pass on the axis
    cav = RationalFunction(ComplexPoly([-0.5, 1]), ComplexPoly([0.5, 1]))
    ctrl = passive_controller([[0, cav], [cav, 0]])
    assert ctrl.kind == "passive_tf" and not ctrl.noisy


def test_passive_controller_noisy_three_columns():
    a = math.sqrt(0.5)
    ctrl = passive_controller([[a, 0, a], [0, 1, 0]])
    assert ctrl.noisy


@pytest.mark.parametrize("entries", [[[1, 1], [0, 1]], [[1, 0, 0]], [[0.5, 0], [0, 0.5]]])
def test_passive_controller_rejects(entries):
    with pytest.raises(ParameterError):
        passive_controller(entries)


def test_plant_from_config():
    p = plant_from_config({"type": "detuned_ndpa", "kappa": 1, "lambda": 5})
    assert p.delta1 == p.delta2 == 5 and not p.lossy
    lossy = plant_from_config({"type": "detuned_ndpa", "lambda": 5, "gamma": 0.1})
    assert lossy.lossy and lossy.delta1 == 5
    g = plant_from_config({"type": "ndpa", "lambda": 0.2, "delta1": 0.1})
    assert g.params() == {"kappa": 1.0, "lambda": 0.2, "delta1": 0.1, "delta2": 0.0, "gamma": 0.0}
    with pytest.raises(ParameterError):
        plant_from_config({"type": "laser"})


def test_controller_from_config():
    assert controller_from_config(None).beta == 0.0
    assert controller_from_config({"type": "beam_splitter", "beta": 0.3}).beta == 0.3
    with pytest.raises(ParameterError):
        controller_from_config({"type": "mirror"})
