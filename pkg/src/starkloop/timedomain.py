"""Direct time-domain integration of the master equation and lock-in demodulation.

This is an independent check on the harmonic-balance solver: the right-hand
side is evaluated in plain matrix form (no vectorization), integrated through
a burn-in, and the probe coherence is then projected onto each harmonic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from starkloop.errors import DomainError, IntegrationError, WindowError
from starkloop.liouville import DIM, jump_operators
from starkloop.model import OperatingPoint, build_floquet_blocks
from starkloop.pss import HarmonicSet

RTOL = 1e-11
ATOL = 1e-14
TRACE_DRIFT_LIMIT = 1e-8
HERMITICITY_LIMIT = 1e-9


@dataclass(frozen=True)
class IntegrationWindow:
    """Burn-in length, evaluation length and sampling density, in drive periods."""

    burn_in_periods: int = 180
    eval_periods: int = 6
    samples_per_period: int = 400

    def __post_init__(self):
        for name in ("burn_in_periods", "eval_periods", "samples_per_period"):
            value = getattr(self, name)
            if int(value) != value or value < 0 or (value == 0 and name != "burn_in_periods"):
                raise DomainError(f"{name} must be a positive integer, got {value!r}")

    def sample_times(self, omega: float, t_start: float = 0.0) -> np.ndarray:
        period = 2.0 * math.pi / omega
        count = self.eval_periods * self.samples_per_period + 1
        t0 = t_start + self.burn_in_periods * period
        return t0 + period * np.arange(count) / self.samples_per_period


@dataclass(frozen=True)
class Trajectory:
    """Sampled density matrices ``states[k]`` at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 4, 4)
    omega_s_drive: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=complex)
        if t.ndim != 1 or s.shape != (t.size, DIM, DIM):
            raise DomainError(f"states shape {s.shape} does not match {t.size} times")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DomainError("times must be strictly increasing")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def rho21(self) -> np.ndarray:
        return self.states[:, 1, 0]

    def __add__(self, other: "Trajectory") -> "Trajectory":
        _check_same_grid(self, other)
        return Trajectory(self.times, self.states + other.states, self.omega_s_drive)

    def __mul__(self, a: complex) -> "Trajectory":
        return Trajectory(self.times, self.states * a, self.omega_s_drive)

    __rmul__ = __mul__


def _check_same_grid(a: Trajectory, b: Trajectory) -> None:
    if a.omega_s_drive != b.omega_s_drive or not np.array_equal(a.times, b.times):
        raise DomainError("trajectories are sampled on different grids")


def _validate_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (DIM, DIM):
        raise DomainError(f"rho0 must be {DIM}x{DIM}, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise DomainError("rho0 is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-12:
        raise DomainError(f"rho0 trace is {np.trace(rho).real:.3e}, expected 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-12:
        raise DomainError("rho0 is not positive semidefinite")
    return rho


def ground_state() -> np.ndarray:
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def master_rhs(op: OperatingPoint, phi_s: float = 0.0):
    """Return ``f(t, rho)`` for d rho/dt = -i[H(t), rho] + D[rho] on 4x4 matrices.

    The anticommutator part of the dissipator is folded into a non-Hermitian
    effective Hamiltonian; the recycling terms ``L rho L^dag`` are kept explicit.
    """
    fb = build_floquet_blocks(op)
    jumps = np.array(list(jump_operators(op.rates)), dtype=complex).reshape(-1, DIM, DIM)
    jumps_dag = jumps.conj().transpose(0, 2, 1)
    k = np.einsum("kij,kjl->il", jumps_dag, jumps)
    h0_eff = fb.h0 - 0.5j * k
    omega = op.omega_s_drive

    def rhs(t: float, rho: np.ndarray) -> np.ndarray:
        e = np.exp(1j * (omega * t + phi_s))
        h = h0_eff + fb.hplus * e + fb.hminus * np.conj(e)
        out = -1j * (h @ rho - rho @ h.conj().T)
        if len(jumps):
            out = out + (jumps @ rho @ jumps_dag).sum(axis=0)
        return out

    return rhs


def _rk4(fun, y0: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    """Classical fixed-step RK4 on a prescribed grid; returns y at every node."""
    ys = np.empty((t_grid.size,) + y0.shape, dtype=complex)
    y = y0.copy()
    ys[0] = y
    for i in range(t_grid.size - 1):
        t, h = t_grid[i], t_grid[i + 1] - t_grid[i]
        k1 = fun(t, y)
        k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = fun(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return ys


def integrate_master(op: OperatingPoint, phi_s: float = 0.0,
                     window: IntegrationWindow | None = None,
                     rho0: np.ndarray | None = None, t_start: float = 0.0,
                     method: str = "DOP853", rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Integrate from ``rho0`` at ``t_start`` and return the evaluation window.

    Parameters
    ----------
    method : str
        ``"DOP853"`` (adaptive, default) or any other ``solve_ivp`` explicit
        method, or ``"rk4"`` for the fixed-step scheme on the sampling grid.
        If the adaptive integrator fails, the fixed-step scheme is tried.

    Raises
    ------
    IntegrationError
        If both integrators fail, or the trace drifts by more than 1e-8, or
        a sampled state loses Hermiticity.
    """
    window = window or IntegrationWindow()
    rho0 = ground_state() if rho0 is None else _validate_density(rho0)
    f = master_rhs(op, phi_s)
    t_eval = window.sample_times(op.omega_s_drive, t_start)

    def fun(t, y):
        return f(t, y.reshape(DIM, DIM)).ravel()

    states = None
    diagnostics = ""
    if method != "rk4":
        sol = solve_ivp(fun, (t_start, t_eval[-1]), rho0.ravel(), method=method,
                        t_eval=t_eval, rtol=rtol, atol=atol)
        if sol.success:
            states = sol.y.T.reshape(-1, DIM, DIM)
        else:
            diagnostics = f"{method} failed at t={sol.t[-1] if sol.t.size else t_start:.6g}: {sol.message}"
    if states is None:
        period = 2.0 * math.pi / op.omega_s_drive
        burn = t_start + period * np.arange(window.burn_in_periods * window.samples_per_period + 1) \
            / window.samples_per_period
        rho_burn = _rk4(f, rho0, burn)[-1] if window.burn_in_periods else rho0
        states = _rk4(f, rho_burn, t_eval)
        if not np.all(np.isfinite(states)):
            raise IntegrationError(f"fixed-step fallback diverged; {diagnostics}".rstrip("; "))

    drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)))
    if drift > TRACE_DRIFT_LIMIT:
        raise IntegrationError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT:.0e}")
    herm = float(np.max(np.abs(states - states.conj().transpose(0, 2, 1))))
    if herm > HERMITICITY_LIMIT:
        raise IntegrationError(f"Hermiticity defect {herm:.3e} exceeds {HERMITICITY_LIMIT:.0e}")
    # Symmetrize away the integrator's sub-tolerance anti-Hermitian part.
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))
    return Trajectory(t_eval, states, op.omega_s_drive)


def demodulate(traj: Trajectory, n: int, element: tuple[int, int] = (1, 0)) -> complex:
    """Lock-in projection ``(1/T) * integral y(t) exp(-i n w t) dt`` by the trapezoid rule.

    ``y`` is the probe coherence rho_21 unless ``element`` says otherwise.

    Raises
    ------
    WindowError
        If the trajectory does not span a whole number of drive periods.
    """
    t = traj.times
    if t.size < 3:
        raise WindowError("need at least three samples to demodulate")
    span = t[-1] - t[0]
    periods = span * traj.omega_s_drive / (2.0 * math.pi)
    if abs(periods - round(periods)) > 1e-9 * max(1.0, periods) or round(periods) < 1:
        raise WindowError(f"window spans {periods:.9f} drive periods, not an integer")
    y = traj.states[:, element[0], element[1]]
    return complex(np.trapezoid(y * np.exp(-1j * n * traj.omega_s_drive * t), t) / span)


def trajectory_from_harmonics(harmonics: HarmonicSet, omega: float,
                              window: IntegrationWindow | None = None,
                              t_start: float = 0.0) -> Trajectory:
    """Exact periodic trajectory synthesized from Fourier coefficients."""
    window = window or IntegrationWindow(burn_in_periods=0)
    t = window.sample_times(omega, t_start)
    n = np.arange(-harmonics.n_max, harmonics.n_max + 1)
    ph = np.exp(1j * np.outer(omega * t, n))
    return Trajectory(t, np.einsum("tn,nij->tij", ph, harmonics.coeffs), omega)
