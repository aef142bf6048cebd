import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starkloop.errors import BranchError, DistributionError, DomainError, MetricError
from starkloop.model import beta_from_mixing_angle, dressed_splitting, nominal_point
from starkloop.nonuniform import (
    averaged_first_harmonic,
    averaged_response_map,
    coherent_gain,
    collapse_study,
    discretize_bias,
    node_points,
    reference_point,
    resonant_stark_config,
)
from starkloop.pss import first_harmonic

BASE = nominal_point()
BETA0 = beta_from_mixing_angle(BASE.theta)
STARK = resonant_stark_config(BASE)


@given(st.floats(min_value=0.1, max_value=5.0), st.floats(min_value=0.0, max_value=0.1),
       st.sampled_from(["gauss-hermite", "trapezoid"]))
def test_distribution_moments(beta0, spread, rule):
    dist = discretize_bias(beta0, spread, 21, rule)
    assert dist.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.mean() == pytest.approx(beta0, rel=1e-12)
    var = dist.weights @ (dist.nodes - beta0) ** 2
    assert np.sqrt(var) == pytest.approx(beta0 * spread, rel=1e-3, abs=1e-15)


def test_distribution_validation():
    with pytest.raises(DomainError):
        discretize_bias(0.0, 0.1)
    with pytest.raises(DomainError):
        discretize_bias(1.0, 0.1, rule="simpson")
    with pytest.raises(DistributionError):
        discretize_bias(1.0, 0.5)
    assert discretize_bias(1.0, 0.0).nodes.size == 1


def test_zero_spread_reduces_to_uniform():
    dist = discretize_bias(BETA0, 0.0)
    ref = first_harmonic(reference_point(BASE, dist))
    for mode, stark in (("fixed", None), ("local", STARK)):
        avg = averaged_first_harmonic(BASE, dist, stark=stark, detuning=mode)
        assert abs(avg - ref) < 1e-15
        assert coherent_gain(avg, ref) == pytest.approx(1.0, abs=1e-14)


def test_resonant_stark_pair():
    assert dressed_splitting(STARK) == pytest.approx(BASE.omega_s_drive, rel=1e-14)
    assert STARK.beta == pytest.approx(BETA0, rel=1e-14)
    pts = node_points(BASE, discretize_bias(BETA0, 0.02, 21), stark=STARK, detuning="local")
    centre = pts[10]
    assert centre.delta_s == pytest.approx(BASE.delta_s, abs=1e-12)
    assert pts[0].delta_s > 0 > pts[-1].delta_s
    with pytest.raises(DomainError):
        node_points(BASE, discretize_bias(BETA0, 0.02), detuning="local")


def test_gain_bounds_and_monotone_local():
    gains = []
    for spread in (0.01, 0.02, 0.05):
        dist = discretize_bias(BETA0, spread, 201, "trapezoid")
        avg = averaged_first_harmonic(BASE, dist, stark=STARK, detuning="local")
        gains.append(coherent_gain(avg, first_harmonic(BASE)))
    assert all(0 < g <= 1 for g in gains)
    assert gains == sorted(gains, reverse=True)
    assert gains == pytest.approx([0.49994, 0.29696, 0.13259], abs=1e-4)


def test_fixed_mode_quadrature_converged():
    for spread in (0.01, 0.05):
        a = averaged_first_harmonic(BASE, discretize_bias(BETA0, spread, 21))
        b = averaged_first_harmonic(BASE, discretize_bias(BETA0, spread, 41))
        assert abs(a - b) / abs(b) < 1e-4


def test_coherent_gain_zero_reference():
    with pytest.raises(MetricError):
        coherent_gain(1.0, 0.0)


def test_averaged_map_and_collapse_axes():
    dist = discretize_bias(BETA0, 0.02, 201, "trapezoid")
    resp = averaged_response_map(BASE, dist, np.linspace(0.06, 0.18, 25), 0.12, STARK, "local")
    assert resp.gain == pytest.approx(0.29696, abs=1e-4)
    assert resp.s_avg == pytest.approx(0.743, abs=5e-3)
    (curves,) = collapse_study(BASE, [resp], snr_grid=[1e3, 1e4], trials=5000, seed=1)
    assert np.allclose(curves.snr_phase_axis, resp.gain ** 2 * curves.snr_raw)
    assert np.allclose(curves.snr_amp_axis, resp.s_avg ** 2 * curves.snr_phase_axis)
    assert np.allclose(curves.curve.snr_eff, curves.snr_phase_axis, rtol=1e-12)


def test_branch_error_when_design_level_is_flat():
    dist = discretize_bias(BETA0, 0.0)
    grid = np.linspace(0.0, 0.2, 9)
    with pytest.raises(BranchError):
        averaged_response_map(BASE.with_(omega_p_rabi=0.0), dist, grid, 0.1)
