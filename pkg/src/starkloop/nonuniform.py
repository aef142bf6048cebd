"""Quasistatic averaging of the first harmonic over a nonuniform static bias.

The bias is described by a Gaussian distribution of the mixing parameter
``beta`` with mean ``beta0`` and standard deviation ``rel_spread * beta0``.
Each node contributes its local first harmonic; the coherent sum sets the
averaged response, the coherent-gain factor ``G`` and the averaged
logarithmic sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from starkloop.errors import DistributionError, DomainError, MetricError, StarkloopError
from starkloop.estimation import ResponseMap, RmseCurve, log_sensitivity, monte_carlo_rmse
from starkloop.model import (
    OperatingPoint,
    StarkConfig,
    beta_from_mixing_angle,
    dressed_splitting,
    mixing_angle_from_beta,
)
from starkloop.pss import DEFAULT_N_MAX, first_harmonic, first_harmonics

DEFAULT_NODES = 21
LOCAL_NODES = 201
TRAPEZOID_SPAN = 6.0
RULES = ("gauss-hermite", "trapezoid")
DETUNING_MODES = ("fixed", "local")


@dataclass(frozen=True)
class BiasDistribution:
    """Discrete weights ``weights[i]`` on mixing parameters ``nodes[i]``."""

    beta0: float
    rel_spread: float
    nodes: np.ndarray
    weights: np.ndarray
    rule: str = "gauss-hermite"

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise DistributionError("nodes and weights must be matching nonempty 1-D arrays")
        if np.any(nodes <= 0):
            raise DistributionError("all bias nodes must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DistributionError("weights must be nonnegative and sum to 1")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def thetas(self) -> np.ndarray:
        return 0.5 * np.arctan(self.nodes)

    def mean(self) -> float:
        return float(self.weights @ self.nodes)


def discretize_bias(beta0: float, rel_spread: float, node_count: int = DEFAULT_NODES,
                    rule: str = "gauss-hermite", span: float = TRAPEZOID_SPAN) -> BiasDistribution:
    """Quadrature for a Gaussian in beta.

    ``"gauss-hermite"`` uses probabilists' Gauss-Hermite nodes. ``"trapezoid"``
    places equispaced nodes on ``beta0 (1 + rel_spread x)`` for ``|x| <= span``
    with weights proportional to ``exp(-x^2/2)``; it is the robust choice when
    the local response varies faster than a low-order polynomial in beta.
    """
    if not (math.isfinite(beta0) and beta0 > 0):
        raise DomainError(f"beta0 must be > 0, got {beta0!r}")
    if not (math.isfinite(rel_spread) and rel_spread >= 0):
        raise DomainError(f"rel_spread must be >= 0, got {rel_spread!r}")
    if rule not in RULES:
        raise DomainError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    if rel_spread == 0:
        return BiasDistribution(beta0, 0.0, np.array([beta0]), np.array([1.0]), rule)
    if node_count < 3:
        raise DomainError(f"node_count must be >= 3, got {node_count}")
    if rule == "gauss-hermite":
        x, w = np.polynomial.hermite_e.hermegauss(node_count)
    else:
        x = np.linspace(-span, span, node_count)
        w = np.exp(-0.5 * x * x)
    nodes = beta0 * (1.0 + rel_spread * x)
    if np.any(nodes <= 0):
        raise DistributionError(f"rel_spread={rel_spread} puts quadrature nodes at beta <= 0")
    return BiasDistribution(beta0, rel_spread, nodes, w / w.sum(), rule)


def resonant_stark_config(op: OperatingPoint, dipole_z: float = 1.0) -> StarkConfig:
    """Stark pair whose dressed splitting equals the drive frequency at ``op.theta``.

    With this choice the nominal signal detuning is zero exactly when the bias
    produces the nominal mixing angle.
    """
    beta0 = beta_from_mixing_angle(op.theta)
    delta34 = op.omega_s_drive / math.sqrt(1.0 + beta0 * beta0)
    return StarkConfig.from_beta(beta0, delta34, dipole_z)


def node_points(base: OperatingPoint, dist: BiasDistribution, omega_s_rabi: float | None = None,
                stark: StarkConfig | None = None, detuning: str = "fixed") -> list[OperatingPoint]:
    """Operating point of every node.

    In ``"local"`` mode the signal detuning follows the local dressed splitting,
    ``Delta_S,i = Delta_S + (split(beta0) - split(beta_i))``, which needs ``stark``.
    """
    if detuning not in DETUNING_MODES:
        raise DomainError(f"unknown detuning mode {detuning!r}; expected one of {DETUNING_MODES}")
    if detuning == "local" and stark is None:
        raise DomainError("detuning='local' needs a StarkConfig")
    rabi = base.omega_s_rabi if omega_s_rabi is None else omega_s_rabi
    split0 = dressed_splitting(stark.with_beta(dist.beta0)) if detuning == "local" else 0.0
    points = []
    for beta in dist.nodes:
        changes = {"theta": mixing_angle_from_beta(float(beta)), "omega_s_rabi": rabi}
        if detuning == "local":
            changes["delta_s"] = base.delta_s + split0 - dressed_splitting(stark.with_beta(float(beta)))
        points.append(base.with_(**changes))
    return points


def node_harmonics(base: OperatingPoint, dist: BiasDistribution, omega_s_rabi: float | None = None,
                   stark: StarkConfig | None = None, detuning: str = "fixed",
                   n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Local P21^(1) at every node."""
    points = node_points(base, dist, omega_s_rabi, stark, detuning)
    try:
        return first_harmonics(points, n_max)
    except StarkloopError:
        pass
    out = np.empty(len(points), dtype=complex)
    for i, op in enumerate(points):
        try:
            out[i] = first_harmonic(op, n_max)
        except StarkloopError as exc:
            raise type(exc)(f"bias node {i} (beta={dist.nodes[i]:.6g}) failed: {exc}") from exc
    return out


def averaged_first_harmonic(base: OperatingPoint, dist: BiasDistribution,
                            omega_s_rabi: float | None = None, stark: StarkConfig | None = None,
                            detuning: str = "fixed", n_max: int = DEFAULT_N_MAX) -> complex:
    """Weighted coherent average ``sum_i w_i P21^(1)(beta_i)``."""
    return complex(dist.weights @ node_harmonics(base, dist, omega_s_rabi, stark, detuning, n_max))


def coherent_gain(avg: complex, reference: complex) -> float:
    """``G = |avg| / |reference|``."""
    if reference == 0:
        raise MetricError("coherent gain is undefined for a zero reference")
    return abs(avg) / abs(reference)


@dataclass(frozen=True)
class AveragedResponse:
    """Averaged first harmonic at the design level and the averaged response map."""

    p_bar: complex
    gain: float
    map_avg: ResponseMap
    s_avg: float
    reference: complex
    dist: BiasDistribution


def reference_point(base: OperatingPoint, dist: BiasDistribution) -> OperatingPoint:
    """Uniform-bias operating point at ``beta0``."""
    return base.with_(theta=mixing_angle_from_beta(dist.beta0))


def averaged_response_map(base: OperatingPoint, dist: BiasDistribution, omega_grid,
                          design_level: float, stark: StarkConfig | None = None,
                          detuning: str = "fixed", n_max: int = DEFAULT_N_MAX) -> AveragedResponse:
    """Averaged response map, its injective branch and sensitivity, plus ``G``.

    Raises
    ------
    BranchError
        If averaging destroys the monotone interval around the design level.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    levels = np.append(omega_grid, design_level)
    points = [p for w in levels for p in node_points(base, dist, float(w), stark, detuning)]
    local = first_harmonics(points, n_max).reshape(levels.size, dist.nodes.size)
    averaged = local @ dist.weights
    rmap = ResponseMap.from_samples(omega_grid, np.abs(averaged[:-1]), design_level)
    p_bar = complex(averaged[-1])
    reference = first_harmonic(reference_point(base, dist).with_(omega_s_rabi=design_level), n_max)
    return AveragedResponse(p_bar, coherent_gain(p_bar, reference), rmap,
                            log_sensitivity(rmap, design_level), reference, dist)


@dataclass(frozen=True)
class CollapseCurves:
    """One distribution's Monte-Carlo curves with the axes needed for collapse plots.

    ``snr_raw`` is the nominal SNR_1,0; ``snr_phase_axis = G^2 SNR_1,0`` and
    ``snr_amp_axis = s_avg^2 G^2 SNR_1,0``.
    """

    rel_spread: float
    gain: float
    s_avg: float
    curve: RmseCurve
    snr_raw: np.ndarray
    snr_phase_axis: np.ndarray
    snr_amp_axis: np.ndarray


def default_map_grid(design_level: float, points: int = 61) -> np.ndarray:
    """Symmetric grid on [0.5, 1.5] x design level containing the level itself."""
    return design_level * np.linspace(0.5, 1.5, points)


def collapse_study(base: OperatingPoint, dists, snr_grid=None, trials: int = 30_000,
                   seed: int = 0, omega_grid=None, design_level: float | None = None,
                   stark: StarkConfig | None = None, detuning: str = "fixed",
                   n_max: int = DEFAULT_N_MAX) -> list[CollapseCurves]:
    """Run the RMSE harness against each averaged response on the SNR_1,0 axis.

    ``dists`` may mix :class:`BiasDistribution` items (averaged here) and
    ready :class:`AveragedResponse` items. The noise level of every entry is
    set from the uniform-bias magnitude ``|P21^(1)(beta0)|`` so that curves
    share one raw axis.
    """
    level = base.omega_s_rabi if design_level is None else design_level
    grid = default_map_grid(level) if omega_grid is None else omega_grid
    out = []
    for k, item in enumerate(dists):
        resp = item if isinstance(item, AveragedResponse) else averaged_response_map(
            base, item, grid, level, stark, detuning, n_max)
        curve = monte_carlo_rmse(resp, resp.map_avg, snr_grid, trials, seed=seed + k,
                                 reference_magnitude=abs(resp.reference),
                                 sensitivity=resp.s_avg, n_max=n_max)
        g2 = resp.gain ** 2
        out.append(CollapseCurves(resp.dist.rel_spread, resp.gain, resp.s_avg, curve,
                                  curve.snr_grid, g2 * curve.snr_grid,
                                  resp.s_avg ** 2 * g2 * curve.snr_grid))
    return out
