"""Mixing-angle design: phase and amplitude metrics, joint cost, balanced angle.

For a design level ``Omega_S,0`` the phase metric is ``M_phi = m`` and the
amplitude metric is ``M_A = Omega_S,0 |dm/dOmega_S|``, where
``m = |P21^(1)|``. Optima are located on a grid and refined by golden-section
search inside the bracketing cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from starkloop.errors import OptimizationError, StarkloopError
from starkloop.model import THETA_MAX, OperatingPoint, mixing_angle_from_beta
from starkloop.pss import DEFAULT_N_MAX, first_harmonics

FD_REL_STEP = 0.02
REFINE_TOL = 1e-4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def default_theta_grid(points: int = 49) -> np.ndarray:
    return np.linspace(0.01, THETA_MAX - 0.01, points)


def golden_section_max(f, a: float, b: float, tol: float = REFINE_TOL) -> float:
    """Maximizer of a unimodal ``f`` on ``[a, b]`` to absolute tolerance ``tol``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class DesignWeights:
    """Relative weights of phase and amplitude variance, normalized to sum 1."""

    w_phase: float = 0.5
    w_amp: float = 0.5

    def __post_init__(self):
        if self.w_phase < 0 or self.w_amp < 0 or self.w_phase + self.w_amp == 0:
            raise ValueError("weights must be >= 0 and not both zero")
        total = self.w_phase + self.w_amp
        object.__setattr__(self, "w_phase", self.w_phase / total)
        object.__setattr__(self, "w_amp", self.w_amp / total)


@dataclass(frozen=True)
class ThetaSweep:
    """Design metrics on a mixing-angle grid.

    Failed grid points hold NaN and are listed in ``failures`` by index.
    ``base`` and ``design_level`` are kept so optima can be refined off-grid.
    """

    thetas: np.ndarray
    m_phi: np.ndarray
    m_amp: np.ndarray
    s_values: np.ndarray
    base: OperatingPoint
    design_level: float
    n_max: int = DEFAULT_N_MAX
    failures: dict = field(default_factory=dict, compare=False)

    def metrics(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(M_phi, M_A, s) evaluated directly at arbitrary angles."""
        return design_metrics(self.base, np.atleast_1d(theta), self.design_level, self.n_max)


def design_metrics(base: OperatingPoint, thetas, design_level: float,
                   n_max: int = DEFAULT_N_MAX) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(M_phi, M_A, s)`` at each angle using a central difference in Omega_S."""
    thetas = np.asarray(thetas, dtype=float)
    h = FD_REL_STEP * design_level
    ops = [base.with_(theta=float(t), omega_s_rabi=w)
           for t in thetas for w in (design_level, design_level + h, design_level - h)]
    p = np.abs(first_harmonics(ops, n_max)).reshape(thetas.size, 3)
    m = p[:, 0]
    slope = (p[:, 1] - p[:, 2]) / (2.0 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(m > 0, design_level * slope / m, np.nan)
    return m, design_level * np.abs(slope), s


def sweep_theta(base: OperatingPoint, design_level: float, theta_grid=None,
                n_max: int = DEFAULT_N_MAX) -> ThetaSweep:
    """Evaluate the design metrics across ``theta_grid`` (default: 49 interior points)."""
    thetas = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if thetas.size < 16 or np.any(np.diff(thetas) <= 0):
        raise ValueError("theta grid must be strictly increasing with at least 16 points")
    if thetas[0] < 0 or thetas[-1] > THETA_MAX:
        raise ValueError("theta grid must lie in [0, pi/4]")
    try:
        m_phi, m_amp, s = design_metrics(base, thetas, design_level, n_max)
        failures = {}
    except StarkloopError:
        m_phi, m_amp, s = (np.full(thetas.size, np.nan) for _ in range(3))
        failures = {}
        for i, t in enumerate(thetas):
            try:
                m_phi[i], m_amp[i], s[i] = (v[0] for v in design_metrics(base, [t], design_level, n_max))
            except StarkloopError as exc:
                failures[i] = str(exc)
    return ThetaSweep(thetas, m_phi, m_amp, s, base, float(design_level), n_max, failures)


def _refine_max(sweep: ThetaSweep, values: np.ndarray, objective) -> float:
    if not np.any(np.nan_to_num(values) > 0):
        raise OptimizationError("objective vanishes on the whole grid")
    k = int(np.nanargmax(values))
    lo = sweep.thetas[max(k - 1, 0)]
    hi = sweep.thetas[min(k + 1, sweep.thetas.size - 1)]
    return golden_section_max(objective, lo, hi)


def theta_phase_star(sweep: ThetaSweep) -> float:
    """Angle maximizing the first-harmonic magnitude."""
    return _refine_max(sweep, sweep.m_phi, lambda t: sweep.metrics(t)[0][0])


def theta_amp_star(sweep: ThetaSweep) -> float:
    """Angle maximizing the local slope magnitude ``M_A``."""
    return _refine_max(sweep, sweep.m_amp, lambda t: sweep.metrics(t)[1][0])


def _joint(m_phi, m_amp, weights: DesignWeights, sigma: float):
    # sigma^2/m^2 (w_phi + w_A/s^2) with m |s| = M_A.
    with np.errstate(divide="ignore", invalid="ignore"):
        phase = np.where(weights.w_phase > 0, weights.w_phase / np.square(m_phi), 0.0)
        amp = np.where(weights.w_amp > 0, weights.w_amp / np.square(m_amp), 0.0)
    return sigma ** 2 * (phase + amp)


def joint_cost(sweep: ThetaSweep, weights: DesignWeights, sigma: float = 1.0) -> np.ndarray:
    """``J = sigma^2 / m^2 * (w_phi + w_A / s^2)`` on the sweep grid.

    Since ``m |s| = M_A`` this equals ``sigma^2 (w_phi / M_phi^2 + w_A / M_A^2)``.
    """
    return _joint(sweep.m_phi, sweep.m_amp, weights, sigma)


def theta_joint_star(sweep: ThetaSweep, weights: DesignWeights, sigma: float = 1.0) -> float:
    """Minimizer of the weighted joint cost."""
    cost = joint_cost(sweep, weights, sigma)
    if not np.any(np.isfinite(cost)):
        raise OptimizationError("joint cost is infinite on the whole grid (degenerate sensitivity)")

    def neg_cost(t):
        m_phi, m_amp, _ = sweep.metrics(t)
        return -float(_joint(m_phi, m_amp, weights, sigma)[0])

    score = np.where(np.isfinite(cost), 1.0 / cost, 0.0)
    return _refine_max(sweep, score, neg_cost)


@dataclass(frozen=True)
class BalancedAngle:
    theta: float
    d_phi: float
    d_amp: float
    crossing: bool


def theta_balanced(sweep: ThetaSweep, theta_phi: float | None = None,
                   theta_amp: float | None = None, xtol: float = 1e-10) -> BalancedAngle:
    """Minimax of the fractional degradations ``D_phi`` and ``D_A``.

    The grid minimax is refined by bisection on ``D_phi - D_A`` when the grid
    brackets a sign change; otherwise the grid minimax is returned with
    ``crossing=False``.
    """
    theta_phi = theta_phase_star(sweep) if theta_phi is None else theta_phi
    theta_amp = theta_amp_star(sweep) if theta_amp is None else theta_amp
    best_phi = sweep.metrics(theta_phi)[0][0]
    best_amp = sweep.metrics(theta_amp)[1][0]

    def degradations(t):
        m_phi, m_amp, _ = sweep.metrics(t)
        return best_phi / m_phi[0], best_amp / m_amp[0]

    with np.errstate(divide="ignore"):
        d_phi = best_phi / sweep.m_phi
        d_amp = best_amp / sweep.m_amp
    worst = np.fmax(d_phi, d_amp)
    k = int(np.nanargmin(worst))
    diff = d_phi - d_amp
    brackets = [i for i in range(diff.size - 1)
                if np.isfinite(diff[i]) and np.isfinite(diff[i + 1]) and diff[i] * diff[i + 1] <= 0]
    if not brackets:
        return BalancedAngle(float(sweep.thetas[k]), float(d_phi[k]), float(d_amp[k]), False)
    i = min(brackets, key=lambda j: abs(j + 0.5 - k))
    a, b = float(sweep.thetas[i]), float(sweep.thetas[i + 1])
    fa = diff[i]
    while b - a > xtol:
        mid = 0.5 * (a + b)
        dp, da = degradations(mid)
        if (dp - da) * fa > 0:
            a, fa = mid, dp - da
        else:
            b = mid
    theta = 0.5 * (a + b)
    dp, da = degradations(theta)
    return BalancedAngle(theta, float(dp), float(da), True)


def perturbative_f(theta):
    """Weak-drive angular factor ``sin(theta) cos(theta) cos(2 theta)``."""
    t = np.asarray(theta, dtype=float)
    out = np.sin(t) * np.cos(t) * np.cos(2.0 * t)
    return float(out) if out.ndim == 0 else out


def perturbative_f_beta(beta):
    """The same factor expressed through the mixing parameter, ``beta / (2 (1 + beta^2))``."""
    b = np.asarray(beta, dtype=float)
    out = b / (2.0 * (1.0 + b * b))
    return float(out) if out.ndim == 0 else out


def perturbative_seed() -> tuple[float, float]:
    """Seed ``(theta, beta) = (pi/8, 1)`` maximizing the weak-drive factor."""
    beta = 1.0
    return mixing_angle_from_beta(beta), beta


def weak_drive_point(**changes) -> OperatingPoint:
    """Operating point deep in the weak-drive regime (all Rabi scales << 1)."""
    return OperatingPoint(omega_p_rabi=0.01, omega_c_rabi=0.02, omega_s_rabi=0.005,
                          omega_s_drive=10.0).with_(**changes)


def shape_error(sweep: ThetaSweep) -> float:
    """Max deviation between peak-normalized ``M_phi`` and the weak-drive factor."""
    ok = np.isfinite(sweep.m_phi)
    m = sweep.m_phi[ok] / np.max(sweep.m_phi[ok])
    f = perturbative_f(sweep.thetas[ok])
    return float(np.max(np.abs(m - f / np.max(f))))
