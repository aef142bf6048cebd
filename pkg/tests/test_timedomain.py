import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import starkloop.timedomain as td
from starkloop.errors import DomainError, IntegrationError, WindowError
from starkloop.model import nominal_point, stress_point
from starkloop.pss import solve_pss, static_steady_state
from starkloop.timedomain import (
    IntegrationWindow,
    Trajectory,
    demodulate,
    ground_state,
    integrate_master,
    master_rhs,
    trajectory_from_harmonics,
)

SHORT = IntegrationWindow(burn_in_periods=10, eval_periods=2, samples_per_period=100)


def test_window_sample_times():
    t = IntegrationWindow(2, 3, 10).sample_times(omega=2 * math.pi)
    assert t.size == 31
    assert t[0] == pytest.approx(2.0) and t[-1] == pytest.approx(5.0)
    with pytest.raises(DomainError):
        IntegrationWindow(eval_periods=0)
    with pytest.raises(DomainError):
        IntegrationWindow(samples_per_period=2.5)


@given(st.integers(min_value=-3, max_value=3), st.floats(min_value=0.0, max_value=50.0))
def test_demodulation_recovers_synthesized_harmonics(n, t_start):
    hs = solve_pss(stress_point(), 3).harmonics
    traj = trajectory_from_harmonics(hs, 1.0, IntegrationWindow(0, 2, 64), t_start)
    assert abs(demodulate(traj, n) - hs[n][1, 0]) < 1e-14
    assert abs(demodulate(traj, n, element=(3, 1)) - hs[n][3, 1]) < 1e-14


def test_demodulation_window_errors():
    hs = solve_pss(stress_point(), 3).harmonics
    traj = trajectory_from_harmonics(hs, 1.0, IntegrationWindow(0, 1, 40))
    cut = Trajectory(traj.times[:-3], traj.states[:-3], traj.omega_s_drive)
    with pytest.raises(WindowError):
        demodulate(cut, 1)
    with pytest.raises(WindowError):
        demodulate(Trajectory(traj.times[:2], traj.states[:2], 1.0), 1)


def test_trajectory_linearity():
    hs = solve_pss(stress_point(), 2).harmonics
    a = trajectory_from_harmonics(hs, 1.0)
    b = 2.0 * a + a * (-0.5j)
    assert demodulate(b, 1) == pytest.approx((2 - 0.5j) * demodulate(a, 1), abs=1e-15)
    with pytest.raises(DomainError):
        a + trajectory_from_harmonics(hs, 2.0)


def test_master_rhs_preserves_trace_and_hermiticity():
    f = master_rhs(stress_point(), 0.3)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    d = f(0.7, rho)
    assert abs(np.trace(d)) < 1e-14
    assert np.max(np.abs(d - d.conj().T)) < 1e-14


def test_static_case_has_no_harmonics():
    op = nominal_point(theta=0.0)
    traj = integrate_master(op, rho0=static_steady_state(op), window=IntegrationWindow(20, 6, 400))
    for n in (1, 2):
        assert abs(demodulate(traj, n)) < 1e-8


def test_stress_point_matches_harmonic_balance():
    op = stress_point()
    traj = integrate_master(op)
    hs = solve_pss(op, 8).harmonics
    for n in (0, 1, 2):
        ref = hs[n][1, 0]
        assert abs(demodulate(traj, n) - ref) <= 1e-6 * max(abs(ref), 1e-12)


def test_signal_phase_is_a_time_shift():
    # H(t, phi) = H(t + phi / w, 0), so starting phi / w later gives the same states.
    op, phi = stress_point(), 0.9
    a = integrate_master(op, phi_s=phi, window=SHORT)
    b = integrate_master(op, window=SHORT, t_start=phi / op.omega_s_drive)
    assert np.max(np.abs(a.states - b.states)) < 1e-9


def test_rk4_fallback(monkeypatch):
    class Failed:
        success, message = False, "forced failure"
        t = np.array([0.0])

    op = stress_point()
    adaptive = integrate_master(op, window=SHORT)
    monkeypatch.setattr(td, "solve_ivp", lambda *a, **k: Failed())
    fixed = integrate_master(op, window=SHORT)
    assert np.max(np.abs(fixed.states - adaptive.states)) < 1e-7
    explicit = integrate_master(op, window=SHORT, method="rk4")
    assert np.array_equal(explicit.states, fixed.states)


def test_trace_drift_is_reported(monkeypatch):
    monkeypatch.setattr(td, "TRACE_DRIFT_LIMIT", 0.0)
    with pytest.raises(IntegrationError):
        integrate_master(stress_point(), window=IntegrationWindow(1, 1, 20))


def test_rho0_validation():
    with pytest.raises(DomainError):
        integrate_master(stress_point(), rho0=2 * ground_state(), window=SHORT)
    with pytest.raises(DomainError):
        integrate_master(stress_point(), rho0=np.diag([1.5, -0.5, 0, 0]).astype(complex), window=SHORT)


@pytest.mark.slow
def test_nominal_point_after_long_burn_in():
    op = nominal_point()
    traj = integrate_master(op, window=IntegrationWindow(1800, 6, 400))
    hs = solve_pss(op, 8).harmonics
    for n in (0, 1):
        ref = hs[n][1, 0]
        assert abs(demodulate(traj, n) - ref) <= 1e-6 * abs(ref)
