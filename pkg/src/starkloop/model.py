"""Stark-mixing geometry and the rotating-frame Floquet Hamiltonian.

All frequencies are angular and measured in units of the probe-transition
decay rate gamma21, which is fixed to 1. The reduced basis is
``{|1>, |2>, |3S>, |4S>}`` with 0-based indices 0..3; the Hamiltonian is

    H(t, phi) = h0 + hplus * exp(i(w t + phi)) + hminus * exp(-i(w t + phi))

where only ``hplus[1, 3]`` (the bias-enabled 2-4 leg) is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from starkloop.errors import DomainError

THETA_MAX = math.pi / 4


def _check_finite_nonneg(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class StarkConfig:
    """Physical description of the isolated upper pair under a static bias.

    Parameters
    ----------
    delta34 : float
        Bare splitting omega_3 - omega_4 (> 0).
    dipole_z : float
        Magnitude of the z dipole matrix element between the bare pair.
    bias : float
        Static field E_z along z.
    hbar : float
        Action scale; 1 in code units.
    """

    delta34: float
    dipole_z: float = 1.0
    bias: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.delta34) and self.delta34 > 0):
            raise DomainError(f"delta34 must be > 0, got {self.delta34!r}")
        _check_finite_nonneg("dipole_z", self.dipole_z)
        _check_finite_nonneg("bias", self.bias)
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise DomainError(f"hbar must be > 0, got {self.hbar!r}")

    @property
    def beta(self) -> float:
        return 2.0 * self.bias * self.dipole_z / (self.hbar * self.delta34)

    @property
    def theta(self) -> float:
        return mixing_angle_from_beta(self.beta)

    @classmethod
    def from_beta(cls, beta: float, delta34: float, dipole_z: float = 1.0,
                  hbar: float = 1.0) -> "StarkConfig":
        """Return the config whose bias produces mixing parameter ``beta``."""
        _check_finite_nonneg("beta", beta)
        if dipole_z <= 0:
            raise DomainError("dipole_z must be > 0 to realize a nonzero beta")
        return cls(delta34=delta34, dipole_z=dipole_z,
                   bias=beta * hbar * delta34 / (2.0 * dipole_z), hbar=hbar)

    def with_beta(self, beta: float) -> "StarkConfig":
        return StarkConfig.from_beta(beta, self.delta34, self.dipole_z or 1.0, self.hbar)


@dataclass(frozen=True)
class DissipationRates:
    """Lindblad rates in units of gamma21.

    The defaults (upper-state decay 0.05, upper-state dephasing 0.01) are
    the values for which the uniform-bias design landscape lands on the
    published optima; the source does not list them explicitly.
    """

    gamma21: float = 1.0
    gamma32: float = 0.05
    gamma42: float = 0.05
    deph3: float = 0.01
    deph4: float = 0.01

    def __post_init__(self):
        for name in ("gamma21", "gamma32", "gamma42", "deph3", "deph4"):
            _check_finite_nonneg(name, getattr(self, name))
        if self.gamma21 <= 0:
            raise DomainError("gamma21 must be > 0")


@dataclass(frozen=True)
class OperatingPoint:
    """Complete set of parameters defining one periodically driven model.

    Defaults reproduce the nominal operating point: probe 0.2, coupling 1,
    signal Rabi scale 0.12, all detunings zero, mixing angle 0.56 rad.
    """

    omega_p_rabi: float = 0.2
    omega_c_rabi: float = 1.0
    omega_s_rabi: float = 0.12
    delta_p: float = 0.0
    delta_c: float = 0.0
    delta_s: float = 0.0
    omega_s_drive: float = 10.0
    theta: float = 0.56
    rates: DissipationRates = field(default_factory=DissipationRates)

    def __post_init__(self):
        for name in ("omega_p_rabi", "omega_c_rabi", "omega_s_rabi"):
            _check_finite_nonneg(name, getattr(self, name))
        for name in ("delta_p", "delta_c", "delta_s"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not (math.isfinite(self.omega_s_drive) and self.omega_s_drive > 0):
            raise DomainError(f"omega_s_drive must be > 0, got {self.omega_s_drive!r}")
        if not (0.0 <= self.theta <= THETA_MAX + 1e-15):
            raise DomainError(f"theta must lie in [0, pi/4], got {self.theta!r}")

    def with_(self, **changes) -> "OperatingPoint":
        """Copy with some fields replaced (``rates`` may be given as a dict)."""
        rates = changes.pop("rates", None)
        if isinstance(rates, dict):
            rates = DissipationRates(**{**self.rates.__dict__, **rates})
        if rates is not None:
            changes["rates"] = rates
        return OperatingPoint(**{**self.__dict__, **changes})


def nominal_point(**changes) -> OperatingPoint:
    return OperatingPoint().with_(**changes)


def stress_point(**changes) -> OperatingPoint:
    """The harder convergence test point (stronger coupling, detuned, slow drive)."""
    base = OperatingPoint(omega_c_rabi=1.6, omega_s_rabi=0.25, delta_p=0.10,
                          delta_c=-0.10, theta=0.60, omega_s_drive=1.0)
    return base.with_(**changes)


@dataclass(frozen=True)
class FloquetBlocks:
    """Fourier blocks of the rotating-frame Hamiltonian (4x4, angular units)."""

    h0: np.ndarray
    hplus: np.ndarray
    hminus: np.ndarray

    def hamiltonian(self, t: float, omega: float, phi_s: float = 0.0) -> np.ndarray:
        """Full time-dependent Hamiltonian at time ``t``."""
        e = np.exp(1j * (omega * t + phi_s))
        return self.h0 + self.hplus * e + self.hminus * np.conj(e)


def mixing_angle_from_beta(beta: float) -> float:
    """Stark-mixing angle theta = atan(beta) / 2, in [0, pi/4)."""
    if not math.isfinite(beta) or beta < 0:
        raise DomainError(f"beta must be finite and >= 0, got {beta!r}")
    return 0.5 * math.atan(beta)


def beta_from_mixing_angle(theta: float) -> float:
    if not 0.0 <= theta < THETA_MAX:
        raise DomainError(f"theta must lie in [0, pi/4) for finite beta, got {theta!r}")
    return math.tan(2.0 * theta)


def dressed_splitting(cfg: StarkConfig) -> float:
    """Splitting of the Stark pair, sqrt(delta34**2 + (2 E |mu| / hbar)**2)."""
    return math.hypot(cfg.delta34, 2.0 * cfg.bias * cfg.dipole_z / cfg.hbar)


def splitting_slope(cfg: StarkConfig, theta0: float) -> float:
    """Derivative of the dressed splitting with respect to the bias field at theta0."""
    if not 0.0 <= theta0 <= THETA_MAX:
        raise DomainError(f"theta0 must lie in [0, pi/4], got {theta0!r}")
    return 2.0 * cfg.dipole_z / cfg.hbar * math.sin(2.0 * theta0)


def effective_couplings(omega_c: float, omega_s: float, theta: float) -> tuple[float, float, float]:
    """Return (Omega_23, Omega_24, Omega_34) in the Stark basis."""
    return (omega_c * math.cos(theta),
            omega_c * math.sin(theta),
            omega_s * math.cos(2.0 * theta))


def build_floquet_blocks(op: OperatingPoint) -> FloquetBlocks:
    o23, o24, o34 = effective_couplings(op.omega_c_rabi, op.omega_s_rabi, op.theta)
    dp, dc, ds = op.delta_p, op.delta_c, op.delta_s
    h0 = np.zeros((4, 4), dtype=complex)
    h0[0, 1] = h0[1, 0] = op.omega_p_rabi
    h0[1, 2] = h0[2, 1] = o23
    h0[2, 3] = h0[3, 2] = o34
    h0[np.diag_indices(4)] = (0.0, -dp, -(dp + dc), -(dp + dc - ds))
    hplus = np.zeros((4, 4), dtype=complex)
    hplus[1, 3] = o24
    return FloquetBlocks(h0=h0, hplus=hplus, hminus=hplus.conj().T)
