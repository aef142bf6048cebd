import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starkloop.errors import DomainError
from starkloop.model import (
    THETA_MAX,
    DissipationRates,
    OperatingPoint,
    StarkConfig,
    beta_from_mixing_angle,
    build_floquet_blocks,
    dressed_splitting,
    effective_couplings,
    mixing_angle_from_beta,
    nominal_point,
    splitting_slope,
    stress_point,
)

betas = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)
thetas = st.floats(min_value=0.0, max_value=THETA_MAX, allow_nan=False)


def test_mixing_angle_examples():
    assert mixing_angle_from_beta(0.0) == 0.0
    assert mixing_angle_from_beta(1.0) == pytest.approx(math.pi / 8, abs=1e-15)
    assert mixing_angle_from_beta(1e12) == pytest.approx(math.pi / 4, abs=1e-12)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_mixing_angle_rejects(bad):
    with pytest.raises(DomainError):
        mixing_angle_from_beta(bad)


@given(betas)
def test_mixing_angle_round_trip(beta):
    theta = mixing_angle_from_beta(beta)
    assert 0.0 <= theta < THETA_MAX
    assert beta_from_mixing_angle(theta) == pytest.approx(beta, rel=1e-9, abs=1e-12)


def test_beta_from_angle_domain():
    with pytest.raises(DomainError):
        beta_from_mixing_angle(THETA_MAX)


def test_stark_config_beta():
    cfg = StarkConfig(delta34=2.0, dipole_z=3.0, bias=0.5)
    assert cfg.beta == pytest.approx(2 * 0.5 * 3.0 / 2.0)
    assert StarkConfig.from_beta(1.7, delta34=2.0, dipole_z=3.0).beta == pytest.approx(1.7)
    assert cfg.with_beta(0.3).beta == pytest.approx(0.3)


@pytest.mark.parametrize("kwargs", [dict(delta34=0.0), dict(delta34=1.0, bias=-1.0),
                                    dict(delta34=1.0, hbar=0.0), dict(delta34=math.nan)])
def test_stark_config_validation(kwargs):
    with pytest.raises(DomainError):
        StarkConfig(**kwargs)


@given(betas, st.floats(min_value=0.1, max_value=10.0))
def test_dressed_splitting_closed_form(beta, delta34):
    cfg = StarkConfig.from_beta(beta, delta34)
    assert dressed_splitting(cfg) == pytest.approx(delta34 * math.sqrt(1 + beta * beta), rel=1e-12)


def test_dressed_splitting_zero_bias():
    assert dressed_splitting(StarkConfig(delta34=3.0)) == 3.0


@given(st.floats(min_value=0.01, max_value=0.75))
def test_splitting_slope_matches_finite_difference(theta):
    base = StarkConfig.from_beta(beta_from_mixing_angle(theta), delta34=1.3, dipole_z=0.7)
    h = 1e-6 * max(base.bias, 1e-3)
    up = StarkConfig(1.3, 0.7, base.bias + h)
    down = StarkConfig(1.3, 0.7, base.bias - h)
    fd = (dressed_splitting(up) - dressed_splitting(down)) / (2 * h)
    assert splitting_slope(base, theta) == pytest.approx(fd, rel=1e-6)


def test_splitting_slope_examples():
    cfg = StarkConfig(delta34=1.0, dipole_z=2.0)
    assert splitting_slope(cfg, 0.0) == 0.0
    assert splitting_slope(cfg, math.pi / 4) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        splitting_slope(cfg, 1.0)


def test_effective_couplings_limits():
    assert effective_couplings(1.0, 0.12, 0.0) == (1.0, 0.0, 0.12)
    o23, o24, o34 = effective_couplings(1.0, 0.12, math.pi / 4)
    assert o23 == pytest.approx(o24)
    assert abs(o34) < 1e-17


@given(thetas)
def test_effective_couplings_norm(theta):
    o23, o24, _ = effective_couplings(1.5, 0.1, theta)
    assert math.hypot(o23, o24) == pytest.approx(1.5, rel=1e-14)


def test_floquet_blocks_structure():
    op = stress_point(delta_s=0.3)
    fb = build_floquet_blocks(op)
    assert np.allclose(fb.h0, fb.h0.conj().T)
    assert np.array_equal(fb.hminus, fb.hplus.conj().T)
    assert np.count_nonzero(fb.hplus) == 1
    assert fb.hplus[1, 3] == pytest.approx(1.6 * math.sin(0.6))
    assert np.allclose(np.diag(fb.h0).real, [0.0, -0.1, 0.0, 0.3])
    for t in np.linspace(0, 7, 11):
        h = fb.hamiltonian(t, op.omega_s_drive, 0.4)
        assert np.allclose(h, h.conj().T)


def test_floquet_theta_zero_is_static():
    fb = build_floquet_blocks(nominal_point(theta=0.0))
    assert not np.any(fb.hplus)


def test_operating_point_defaults_and_validation():
    op = nominal_point()
    assert (op.omega_p_rabi, op.omega_c_rabi, op.omega_s_rabi, op.theta) == (0.2, 1.0, 0.12, 0.56)
    assert op.rates == DissipationRates()
    with pytest.raises(DomainError):
        OperatingPoint(theta=1.0)
    with pytest.raises(DomainError):
        OperatingPoint(omega_s_drive=0.0)
    with pytest.raises(DomainError):
        OperatingPoint(omega_p_rabi=-0.1)
    with pytest.raises(DomainError):
        DissipationRates(gamma21=0.0)


def test_with_replaces_rates_partially():
    op = nominal_point().with_(rates={"gamma32": 0.2}, theta=0.3)
    assert op.rates.gamma32 == 0.2 and op.rates.gamma42 == 0.05
    assert op.theta == 0.3


def test_stress_point_values():
    op = stress_point()
    assert (op.omega_c_rabi, op.omega_s_rabi, op.delta_p, op.delta_c, op.theta, op.omega_s_drive) == \
        (1.6, 0.25, 0.10, -0.10, 0.60, 1.0)
