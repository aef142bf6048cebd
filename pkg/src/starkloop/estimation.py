"""Noise model, phase and amplitude estimators, response maps and RMSE laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from starkloop.errors import BranchError, DomainError, EstimatorError, RangeError
from starkloop.model import OperatingPoint
from starkloop.pss import DEFAULT_N_MAX, first_harmonic

DEFAULT_SNR_GRID = np.logspace(1.0, 4.0, 8)
DEFAULT_TRIALS = 30_000
FAILURE_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex Gaussian noise with per-quadrature std ``sigma``."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be > 0, got {self.sigma!r}")

    def generator(self, *stream: int) -> np.random.Generator:
        """Independent generator for the sub-stream ``stream`` of this seed."""
        return np.random.default_rng([self.seed, *stream])


def snr(magnitude, noise: NoiseModel | float):
    """Harmonic SNR ``|P|^2 / (2 sigma^2)``."""
    sigma = noise.sigma if isinstance(noise, NoiseModel) else float(noise)
    magnitude = np.asarray(magnitude, dtype=float)
    if np.any(magnitude < 0):
        raise DomainError("magnitude must be >= 0")
    out = magnitude ** 2 / (2.0 * sigma ** 2)
    return float(out) if out.ndim == 0 else out


def sigma_from_snr(magnitude: float, snr_value):
    """Inverse of :func:`snr` for fixed magnitude."""
    snr_value = np.asarray(snr_value, dtype=float)
    if np.any(snr_value <= 0):
        raise DomainError("SNR must be > 0")
    out = magnitude / np.sqrt(2.0 * snr_value)
    return float(out) if out.ndim == 0 else out


def add_noise(z, noise: NoiseModel, rng: np.random.Generator | None = None):
    """Add independent N(0, sigma^2) to both quadratures of ``z``.

    Without an explicit ``rng`` the draw comes from the model's base stream,
    so repeated calls with the same model return the same noise.
    """
    rng = noise.generator() if rng is None else rng
    z = np.asarray(z, dtype=complex)
    eta = rng.standard_normal(z.shape + (2,)) @ np.array([1.0, 1j])
    out = z + noise.sigma * eta
    return complex(out) if out.ndim == 0 else out


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    y = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)
    return float(y) if y.ndim == 0 else y


def estimate_phase(z_meas, z_ref, phi0: float = 0.0, n: int = 1):
    """Phase estimate ``phi0 + arg(z_meas / z_ref) / n`` in [phi0, phi0 + 2 pi / n).

    Dividing by the reference removes any fixed complex readout gain. For
    ``n > 1`` the result is only defined modulo ``2 pi / n``.
    """
    if n < 1:
        raise EstimatorError(f"harmonic order must be >= 1, got {n}")
    z_meas = np.asarray(z_meas, dtype=complex)
    z_ref = np.asarray(z_ref, dtype=complex)
    if np.any(z_ref == 0) or np.any(z_meas == 0):
        raise EstimatorError("phase is undefined for a zero phasor")
    out = phi0 + np.mod(np.angle(z_meas / z_ref), 2.0 * np.pi) / n
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ResponseMap:
    """Sampled response ``m(Omega_S)`` with its injective branch around the design level.

    ``branch`` holds inclusive grid indices ``(lo, hi)``.
    """

    omega_grid: np.ndarray
    magnitudes: np.ndarray
    branch: tuple[int, int]
    design_level: float

    @property
    def increasing(self) -> bool:
        lo, hi = self.branch
        return bool(self.magnitudes[hi] > self.magnitudes[lo])

    @property
    def branch_omega(self) -> np.ndarray:
        lo, hi = self.branch
        return self.omega_grid[lo:hi + 1]

    @property
    def branch_magnitudes(self) -> np.ndarray:
        lo, hi = self.branch
        return self.magnitudes[lo:hi + 1]

    @property
    def design_magnitude(self) -> float:
        return float(np.interp(self.design_level, self.omega_grid, self.magnitudes))

    @classmethod
    def from_samples(cls, omega_grid, magnitudes, design_level: float) -> "ResponseMap":
        """Locate the maximal strictly monotone run containing ``design_level``."""
        omega = np.array(omega_grid, dtype=float)
        mags = np.array(magnitudes, dtype=float)
        if omega.ndim != 1 or omega.size < 8 or mags.shape != omega.shape:
            raise DomainError("need matching 1-D grids with at least 8 points")
        if np.any(np.diff(omega) <= 0):
            raise DomainError("omega grid must be strictly increasing")
        if np.any(mags < 0):
            raise DomainError("magnitudes must be >= 0")
        if not omega[0] <= design_level <= omega[-1]:
            raise BranchError(f"design level {design_level} lies outside the grid")
        sign = np.sign(np.diff(mags))
        j = min(int(np.searchsorted(omega, design_level, side="right")) - 1, omega.size - 2)
        if sign[j] == 0:
            raise BranchError(f"response is flat at the design level {design_level}")
        lo = j
        while lo > 0 and sign[lo - 1] == sign[j]:
            lo -= 1
        hi = j
        while hi < sign.size - 1 and sign[hi + 1] == sign[j]:
            hi += 1
        omega.setflags(write=False)
        mags.setflags(write=False)
        return cls(omega, mags, (lo, hi + 1), float(design_level))


def response_magnitudes(op_base: OperatingPoint, omega_grid, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    return np.array([abs(first_harmonic(op_base.with_(omega_s_rabi=float(w)), n_max))
                     for w in omega_grid])


def build_response_map(op_base: OperatingPoint, omega_grid, design_level: float,
                       n_max: int = DEFAULT_N_MAX) -> ResponseMap:
    """Solve the periodic steady state on ``omega_grid`` and find the injective branch."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size < 8:
        raise DomainError("response map needs at least 8 grid points")
    return ResponseMap.from_samples(omega_grid, response_magnitudes(op_base, omega_grid, n_max),
                                    design_level)


def log_sensitivity(rmap: ResponseMap, omega_s: float) -> float:
    """Local slope ``d ln m / d ln Omega_S`` from central differences in log space.

    Derivatives are formed at the branch grid nodes (second-order formula on a
    nonuniform grid) and linearly interpolated in ``ln Omega_S``.
    """
    x = np.log(rmap.branch_omega)
    m = rmap.branch_magnitudes
    if m.size < 3 or np.any(m <= 0):
        raise RangeError("branch too short or touches zero; log slope undefined")
    if not x[0] < math.log(omega_s) < x[-1]:
        raise RangeError(f"Omega_S={omega_s} is not strictly inside the branch "
                         f"[{rmap.branch_omega[0]}, {rmap.branch_omega[-1]}]")
    slopes = np.gradient(np.log(m), x)
    return float(np.interp(math.log(omega_s), x, slopes))


def invert_response(rmap: ResponseMap, m_meas):
    """Invert the piecewise-linear branch interpolant.

    Returns ``(omega_hat, out_of_range)``. Magnitudes outside the branch range
    are clamped to the nearest branch endpoint and flagged.
    """
    w = rmap.branch_omega
    m = rmap.branch_magnitudes
    if not rmap.increasing:
        w, m = w[::-1], m[::-1]
    q = np.asarray(m_meas, dtype=float)
    out = (q < m[0]) | (q > m[-1])
    qc = np.clip(q, m[0], m[-1])
    k = np.clip(np.searchsorted(m, qc, side="right") - 1, 0, m.size - 2)
    frac = (qc - m[k]) / (m[k + 1] - m[k])
    omega_hat = w[k] + frac * (w[k + 1] - w[k])
    if omega_hat.ndim == 0:
        return float(omega_hat), bool(out)
    return omega_hat, out


def _scalar_or_array(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def rabi_to_field(omega_s, dipole: float, hbar: float = 1.0):
    """Field amplitude ``A = 2 hbar Omega / |mu|``."""
    if dipole <= 0:
        raise DomainError(f"dipole must be > 0, got {dipole!r}")
    return _scalar_or_array(2.0 * hbar * np.asarray(omega_s, dtype=float) / dipole)


def field_to_rabi(amplitude, dipole: float, hbar: float = 1.0):
    """Rabi scale ``Omega = |mu| A / (2 hbar)``."""
    if dipole <= 0:
        raise DomainError(f"dipole must be > 0, got {dipole!r}")
    if hbar <= 0:
        raise DomainError(f"hbar must be > 0, got {hbar!r}")
    return _scalar_or_array(dipole * np.asarray(amplitude, dtype=float) / (2.0 * hbar))


def rmse_phase_theory(n: int, snr_value):
    """Linearized phase RMSE ``1 / (n sqrt(2 SNR))``."""
    snr_value = np.asarray(snr_value, dtype=float)
    if n < 1 or np.any(snr_value <= 0):
        raise EstimatorError("need n >= 1 and SNR > 0")
    out = 1.0 / (n * np.sqrt(2.0 * snr_value))
    return float(out) if out.ndim == 0 else out


def rmse_amp_theory(s: float, snr_value):
    """Sensitivity-corrected relative amplitude RMSE ``1 / (|s| sqrt(2 SNR))``."""
    snr_value = np.asarray(snr_value, dtype=float)
    if s == 0 or not math.isfinite(s):
        raise EstimatorError("degenerate sensitivity s = 0")
    if np.any(snr_value <= 0):
        raise EstimatorError("SNR must be > 0")
    out = 1.0 / (abs(s) * np.sqrt(2.0 * snr_value))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RmseCurve:
    """Monte-Carlo and theoretical RMSE on a nominal SNR axis.

    ``snr_grid`` is the axis the noise level was set from; ``snr_eff`` is the
    SNR of the phasor actually observed (they differ under bias averaging).
    """

    snr_grid: np.ndarray
    rmse_phase: np.ndarray
    rmse_amp_rel: np.ndarray
    theory_phase: np.ndarray
    theory_amp_rel: np.ndarray
    trials: int
    snr_eff: np.ndarray
    sensitivity: float
    failures: np.ndarray
    warnings: tuple[str, ...] = field(default=())


def _source_phasor(source, n_max: int) -> complex:
    if isinstance(source, OperatingPoint):
        return first_harmonic(source, n_max)
    if hasattr(source, "p_bar"):
        return complex(source.p_bar)
    return complex(source)


def monte_carlo_rmse(source, rmap: ResponseMap, snr_grid=None, trials: int = DEFAULT_TRIALS,
                     seed: int = 0, n: int = 1, reference_magnitude: float | None = None,
                     sensitivity: float | None = None, n_max: int = DEFAULT_N_MAX) -> RmseCurve:
    """Monte-Carlo phase and amplitude RMSE versus SNR.

    Each trial draws a uniform signal phase, forms ``P exp(i n phi) + eta`` and
    applies the phase estimator (against the noiseless ``P``) and the branch
    inversion of the magnitude.

    Parameters
    ----------
    source : OperatingPoint, complex, or object with ``p_bar``
        The true harmonic phasor at the design level (solved if an
        operating point is given).
    reference_magnitude : float, optional
        Magnitude that defines the SNR axis; defaults to ``|P|``. Pass the
        uniform-bias magnitude to put averaged responses on the SNR_1,0 axis.
    sensitivity : float, optional
        Log sensitivity for the amplitude law; measured from ``rmap`` if omitted.

    Notes
    -----
    SNR point ``k`` draws from the generator seeded with ``(seed, k)``, so
    every point is reproducible on its own regardless of evaluation order.
    """
    if trials < 1000:
        raise DomainError(f"need at least 1000 trials, got {trials}")
    snr_grid = DEFAULT_SNR_GRID if snr_grid is None else np.asarray(snr_grid, dtype=float)
    if np.any(snr_grid <= 0):
        raise DomainError("SNR values must be > 0")
    p = _source_phasor(source, n_max)
    if p == 0:
        raise EstimatorError("true phasor is zero; loop open")
    ref_mag = abs(p) if reference_magnitude is None else float(reference_magnitude)
    s = log_sensitivity(rmap, rmap.design_level) if sensitivity is None else float(sensitivity)
    omega0 = rmap.design_level
    k = len(snr_grid)
    rmse_phi, rmse_amp, fails = np.empty(k), np.empty(k), np.zeros(k, dtype=int)
    notes = []
    for i, snr_i in enumerate(snr_grid):
        sigma = ref_mag / math.sqrt(2.0 * snr_i)
        rng = np.random.default_rng([seed, i])
        phi = rng.uniform(0.0, 2.0 * np.pi, trials)
        eta = rng.standard_normal((trials, 2)) @ np.array([1.0, 1j])
        z = p * np.exp(1j * n * phi) + sigma * eta
        err = wrap_phase(n * (estimate_phase(z, p, 0.0, n) - phi)) / n
        rmse_phi[i] = math.sqrt(np.mean(err ** 2))
        omega_hat, out = invert_response(rmap, np.abs(z))
        rmse_amp[i] = math.sqrt(np.mean(((omega_hat - omega0) / omega0) ** 2))
        fails[i] = int(np.count_nonzero(out))
        if fails[i] > FAILURE_WARN_FRACTION * trials:
            notes.append(f"SNR={snr_i:.6g}: {fails[i]} of {trials} magnitudes outside the branch")
    snr_eff = abs(p) ** 2 / ref_mag ** 2 * snr_grid
    return RmseCurve(
        snr_grid=snr_grid.copy(),
        rmse_phase=rmse_phi,
        rmse_amp_rel=rmse_amp,
        theory_phase=rmse_phase_theory(n, snr_eff) * np.ones(k),
        theory_amp_rel=rmse_amp_theory(s, snr_eff) * np.ones(k),
        trials=trials,
        snr_eff=snr_eff,
        sensitivity=s,
        failures=fails,
        warnings=tuple(notes),
    )
