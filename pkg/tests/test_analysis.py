import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfamp import (
    FeedbackLoopConfig,
    GainCurve,
    ParameterError,
    PoleEvaluationError,
    RangeError,
    added_noise,
    build_beam_splitter,
    build_detuned_ndpa,
    build_ndpa,
    close_ideal_feedback,
    close_lossy_feedback,
    detuned_stability_threshold,
    effective_bandwidth,
    first_order_gain_fluctuation,
    gain_profile,
    loop_gain_bode,
    sensitivity_bound,
    stability,
)
from qfamp.analysis import (
    added_noise_from_row,
    classical_sensitivity_factor,
    closed_loop_gain_ratio,
    gain_rows,
    noise_limit,
    noise_rows,
    write_csv,
)
from qfamp.tfcore import ComplexPoly, RationalFunction


class TestStability:
    def test_stable_plant(self):
        v = stability(build_ndpa(1.0, 0.3))
        assert v.stable and v.max_real_part == pytest.approx(-0.2)
        assert v.summary().startswith("stable")

    def test_unstable_plant(self):
        v = stability(build_ndpa(1.0, 0.8))
        assert not v.stable and not v.marginal and v.max_real_part == pytest.approx(0.3)

    def test_marginal_counts_as_unstable(self):
        v = stability(build_ndpa(1.0, 0.5))
        assert v.marginal and not v.stable
        assert v.summary().startswith("marginal")

    def test_rational_function_and_constant(self):
        assert stability(RationalFunction(ComplexPoly([1]), ComplexPoly([2, 1]))).stable
        assert stability(RationalFunction.constant(3.0)).stable

    def test_bad_type(self):
        with pytest.raises(TypeError):
            stability(3.0)

    @given(st.floats(-0.9, 0.9).filter(lambda b: abs(b) > 1e-3), st.floats(0.1, 30))
    @settings(max_examples=60, deadline=None)
    def test_threshold_matches_pole_verdict(self, beta, lam):
        limit = detuned_stability_threshold(1.0, beta)
        if abs(lam - limit) < 1e-4 * limit:
            return
        system = close_ideal_feedback(build_detuned_ndpa(1.0, lam), build_beam_splitter(beta))
        assert stability(system).stable == (lam < limit)

    def test_threshold_values(self):
        assert detuned_stability_threshold(1.0, 0.1) == pytest.approx(5.527708, abs=1e-6)
        assert detuned_stability_threshold(1.0, 0.0) == math.inf
        with pytest.raises(ParameterError):
            detuned_stability_threshold(1.0, 1.0)


class TestGain:
    def test_profile_peak_and_symmetry(self):
        curve = gain_profile(build_detuned_ndpa(1.0, 5.0), -1, 1, 201)
        w, db = curve.peak()
        assert w == 0.0 and db == pytest.approx(10 * math.log10(401))
        assert np.allclose(curve.magnitude, curve.magnitude[::-1])

    def test_profile_arguments(self):
        plant = build_ndpa(1, 0.2)
        with pytest.raises(ParameterError):
            gain_profile(plant, 0, 1, 1)
        with pytest.raises(ParameterError):
            gain_profile(plant, 1, 0, 10)

    def test_profile_through_pole(self):
        with pytest.raises(PoleEvaluationError):
            gain_profile(build_ndpa(1.0, 0.5), -1, 1, 3)

    def test_bandwidth_analytic(self):
        # |G11|² = 1 + 16 lam² / ((1 - 4 w²)² + 16 w²) halves at the oracle frequency
        lam = 5.0
        curve = gain_profile(build_detuned_ndpa(1.0, lam), -2, 2, 8001)
        oracle = math.sqrt(math.sqrt(2 * lam ** 2 / (16 * lam ** 2 - 1)) - 0.25)
        assert effective_bandwidth(curve, 10 * math.log10(2)) == pytest.approx(oracle, abs=1e-6)
        assert effective_bandwidth(curve) < oracle

    def test_bandwidth_out_of_range(self):
        curve = gain_profile(build_detuned_ndpa(1.0, 5.0), -0.1, 0.1, 21)
        with pytest.raises(RangeError):
            effective_bandwidth(curve)

    def test_phase_unwrap(self):
        w = np.linspace(0, 1, 50)
        curve = GainCurve(w, np.exp(1j * 4 * np.pi * w))
        assert curve.phase_unwrapped_deg[-1] == pytest.approx(720.0)
        assert np.all(np.abs(curve.phase_deg) <= 180.0)

    def test_gain_rows_format(self):
        curve = GainCurve(np.array([0.0]), np.array([1 + 1j]))
        assert next(gain_rows(curve)) == ["0", "1", "1", "3.01029995664", "45"]


class TestNoise:
    def test_ideal_amplifier(self):
        plant = build_detuned_ndpa(1.0, 5.0)
        r = added_noise(plant, 0.0)
        assert r.a_value == pytest.approx(0.5 - 0.5 / 401)
        assert sum(r.decomposition.values()) == pytest.approx(r.a_value)
        assert added_noise(plant, 0.0, "ideal").a_value == pytest.approx(r.a_value)

    @given(st.floats(0.05, 0.4), st.floats(0.0, 0.5), st.floats(-2, 2))
    @settings(max_examples=40, deadline=None)
    def test_plant_noise_equals_row_form(self, lam, gamma, w):
        plant = build_ndpa(1.0, lam, 0.1, 0.2, gamma)
        row = dict(zip(plant.matrix.col_labels, plant.matrix.evaluate(1j * w)[0]))
        assert added_noise(plant, w).a_value == pytest.approx(added_noise_from_row(row), rel=1e-10)

    @given(st.floats(0.05, 0.4), st.floats(0.0, 0.3), st.floats(-0.5, 0.5), st.floats(0.3, 1), st.floats(0.3, 1))
    @settings(max_examples=40, deadline=None)
    def test_closed_loop_noise_equals_row_form(self, lam, gamma, beta, a1, a2):
        plant = build_ndpa(1.0, lam, 0.1, 0.2, gamma)
        system = close_lossy_feedback(plant, build_beam_splitter(beta), FeedbackLoopConfig(a1, a2))
        row = {k: f(0.0) for k, f in system.b1_row.items()}
        assert added_noise(system, 0.0).a_value == pytest.approx(added_noise_from_row(row), rel=1e-9)

    def test_noise_limit(self):
        plant = build_ndpa(1.0, 5.0, 5.0, 5.0, 0.1)
        G = plant.matrix.evaluate(0.0)
        assert noise_limit(plant) == pytest.approx(0.5 + abs(G[0, 2]) ** 2 / abs(G[0, 0]) ** 2)
        assert noise_limit(build_ndpa(1.0, 0.2)) == 0.5

    def test_flavor_errors(self):
        plant = build_ndpa(1.0, 0.2)
        with pytest.raises(ParameterError):
            added_noise(plant, 0.0, "closed_loop")
        with pytest.raises(ParameterError):
            added_noise(plant, 0.0, "thermal")

    def test_noise_rows(self):
        r = added_noise(build_detuned_ndpa(1.0, 5.0), 0.0)
        row = next(noise_rows([r]))
        assert row[0] == "0" and float(row[2]) == 0.5


class TestSensitivity:
    def test_bound_value(self):
        plant = build_detuned_ndpa(1.0, 5.0)
        assert plant.G(2, 2)(0.0) == pytest.approx(-1 - 20j)
        assert sensitivity_bound(plant, build_beam_splitter(0.1)) == pytest.approx(1 / abs(1.1 + 2j), rel=1e-12)

    @given(st.complex_numbers(max_magnitude=30).filter(lambda z: abs(z) > 1.01),
           st.floats(-0.9, 0.9), st.complex_numbers(max_magnitude=1))
    @settings(max_examples=80, deadline=None)
    def test_first_order_matches_finite_difference(self, g22, k21, d):
        if abs(1 - k21 * g22) < 0.05 or abs(np.conj(g22) - k21) < 0.05 or abs(d) < 1e-3:
            return
        eps = 1e-7
        base = closed_loop_gain_ratio(g22, k21)
        fd = (closed_loop_gain_ratio(g22 + eps * d, k21) - base) / base / eps
        assert fd == pytest.approx(first_order_gain_fluctuation(g22, k21, d), abs=1e-5 * max(1, abs(d)))

    def test_classical_factor(self):
        assert classical_sensitivity_factor(1000.0, 0.1) == pytest.approx(1 / 101)

    def test_bode(self):
        plant, ctrl = build_detuned_ndpa(1.0, 5.0), build_beam_splitter(0.1)
        curve = loop_gain_bode(plant, ctrl, [0.0, 0.5])
        assert curve.values[0] == pytest.approx(0.1 * (-1 - 20j))


def test_write_csv(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(path, ["a", "b"], [["1", "2"]])
    assert path.read_text() == "a,b\n1,2\n"
