"""Periodic steady state by truncated harmonic balance.

The density matrix of the periodically driven system is expanded as
``rho(t) = sum_n rho_n exp(i n w t)`` for ``|n| <= N``, where the signal phase
enters as ``rho_n(phi) = P[n] exp(i n phi)``. Stacking
``vec(P[n])`` gives a block-tridiagonal linear system whose diagonal blocks
are ``i n w I - L0`` and whose off-diagonal blocks are ``-L+`` (below) and
``-L-`` (above). In every block the equation for the (1,1) element is
replaced by the trace condition (1 for n = 0, 0 otherwise).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from starkloop.errors import HarmonicRangeError, MetricError, ResidualError, SolverError
from starkloop.liouville import (
    DIM,
    TAU,
    JumpOperatorSet,
    commutator_super,
    dissipator_super,
    jump_operators,
    liouvillian_blocks,
    lindblad_dissipator,
)
from starkloop.model import DissipationRates, OperatingPoint, build_floquet_blocks

DEFAULT_N_MAX = 3
REFERENCE_N_MAX = 8
DEFAULT_TOLERANCE = 1e-10

_NV = DIM * DIM
# vec index of the (1,1) element under column stacking.
_TRACE_ROW = 0


@dataclass(frozen=True)
class HarmonicSet:
    """Fourier coefficients ``P[-N] .. P[N]`` of the periodic steady state.

    ``phi_s`` records the signal phase the coefficients belong to; a solve at
    the reference phase has ``phi_s == 0``.
    """

    n_max: int
    coeffs: np.ndarray  # shape (2N+1, 4, 4)
    phi_s: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.n_max + 1, DIM, DIM):
            raise ValueError(f"coeffs shape {c.shape} does not match n_max={self.n_max}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, n: int) -> np.ndarray:
        if abs(n) > self.n_max:
            raise HarmonicRangeError(f"harmonic {n} outside truncation |n| <= {self.n_max}")
        return self.coeffs[n + self.n_max]

    @property
    def orders(self) -> range:
        return range(-self.n_max, self.n_max + 1)


@dataclass(frozen=True)
class PssSolution:
    harmonics: HarmonicSet
    op: OperatingPoint
    residual_norm: float
    solve_tolerance: float = DEFAULT_TOLERANCE
    extra: dict = field(default_factory=dict, compare=False)


@functools.lru_cache(maxsize=64)
def _cached_dissipator(rates: DissipationRates) -> tuple[JumpOperatorSet, np.ndarray]:
    jumps = jump_operators(rates)
    return jumps, dissipator_super(jumps)


def _system_blocks(l0: np.ndarray, lplus: np.ndarray, lminus: np.ndarray,
                   omega, n_max: int):
    """Blocks of the constrained block-tridiagonal system; leading axes are a batch.

    Returns ``(diag, lower, upper, rhs)`` with ``diag`` of shape (..., K, 16, 16),
    the couplings ``lower`` (to n-1) and ``upper`` (to n+1) shared by all rows,
    and ``rhs`` of shape (..., K, 16). The trace row only touches its own
    diagonal block, so the tridiagonal structure survives the constraint.
    """
    n = np.arange(-n_max, n_max + 1)
    omega = np.asarray(omega, dtype=float)[..., None, None, None]
    diag = 1j * n[:, None, None] * omega * np.eye(_NV) - l0[..., None, :, :]
    diag[..., _TRACE_ROW, :] = TAU
    lower = -lplus.copy()
    upper = -lminus.copy()
    lower[..., _TRACE_ROW, :] = 0.0
    upper[..., _TRACE_ROW, :] = 0.0
    rhs = np.zeros(diag.shape[:-1], dtype=complex)
    rhs[..., n_max, _TRACE_ROW] = 1.0
    return diag, lower, upper, rhs


def _stack_system(diag, lower, upper, rhs):
    """Dense form of the block system."""
    k = diag.shape[-3]
    batch = diag.shape[:-3]
    a = np.zeros(batch + (k * _NV, k * _NV), dtype=complex)
    for idx in range(k):
        rows = slice(idx * _NV, (idx + 1) * _NV)
        a[..., rows, rows] = diag[..., idx, :, :]
        if idx > 0:
            a[..., rows, (idx - 1) * _NV: idx * _NV] = lower
        if idx < k - 1:
            a[..., rows, (idx + 1) * _NV: (idx + 2) * _NV] = upper
    return a, rhs.reshape(batch + (k * _NV,))


def _block_solve(diag, lower, upper, rhs) -> np.ndarray:
    """Block Thomas elimination, batched over leading axes; returns (..., K, 16)."""
    k = diag.shape[-3]
    gains, shifts = [], []
    schur, y = diag[..., 0, :, :], rhs[..., 0, :]
    for idx in range(k):
        if idx > 0:
            schur = diag[..., idx, :, :] - lower @ gains[-1]
            y = rhs[..., idx, :] - (lower @ shifts[-1][..., None])[..., 0]
        sol = np.linalg.solve(schur, np.concatenate([upper, y[..., None]], axis=-1))
        gains.append(sol[..., :-1])
        shifts.append(sol[..., -1])
    x = np.empty(rhs.shape, dtype=complex)
    x[..., -1, :] = shifts[-1]
    for idx in range(k - 2, -1, -1):
        x[..., idx, :] = shifts[idx] - (gains[idx] @ x[..., idx + 1, :, None])[..., 0]
    return x


def assemble_system(op: OperatingPoint, n_max: int, phi_s: float = 0.0):
    """Return the constrained stacked matrix and right-hand side.

    With ``phi_s != 0`` the signal phase is inserted explicitly into the
    +-1 Liouvillian blocks, so the solution is rho^(n)(phi_s) directly.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    jumps, d = _cached_dissipator(op.rates)
    lb = liouvillian_blocks(build_floquet_blocks(op), jumps, d)
    phase = np.exp(1j * phi_s)
    return _stack_system(*_system_blocks(lb.l0, lb.lplus * phase, lb.lminus * np.conj(phase),
                                         op.omega_s_drive, n_max))


def _balance_error(coeffs: np.ndarray, h0: np.ndarray, hp: np.ndarray, hm: np.ndarray,
                   jumps: JumpOperatorSet, omega) -> np.ndarray:
    """Elementwise harmonic-balance defect in matrix form, shape of ``coeffs``.

    ``coeffs`` is (..., 2N+1, 4, 4); the Hamiltonian blocks are (..., 4, 4).
    """
    p = coeffs
    pad = np.zeros_like(p[..., :1, :, :])
    below = np.concatenate([pad, p[..., :-1, :, :]], axis=-3)
    above = np.concatenate([p[..., 1:, :, :], pad], axis=-3)
    h0, hp, hm = (h[..., None, :, :] for h in (h0, hp, hm))
    rhs = (-1j * (h0 @ p - p @ h0)
           - 1j * (hp @ below - below @ hp)
           - 1j * (hm @ above - above @ hm)
           + lindblad_dissipator(jumps, p))
    nn = (p.shape[-3] - 1) // 2
    n = np.arange(-nn, nn + 1)[:, None, None]
    omega = np.asarray(omega, dtype=float)[..., None, None, None]
    return np.abs(1j * n * omega * p - rhs)


def harmonic_balance_residual(harmonics: HarmonicSet, op: OperatingPoint,
                              interior_only: bool = True) -> float:
    """Max-norm residual of the harmonic-balance equations in matrix form.

    Evaluated with direct commutators and the matrix dissipator, independently
    of the superoperator assembly. Edge harmonics are skipped by default since
    truncation drops their outer neighbour.
    """
    fb = build_floquet_blocks(op)
    jumps, _ = _cached_dissipator(op.rates)
    phase = np.exp(1j * harmonics.phi_s)
    err = _balance_error(harmonics.coeffs, fb.h0, fb.hplus * phase, fb.hminus * np.conj(phase),
                         jumps, op.omega_s_drive)
    if interior_only:
        err = err[1:-1]
    return float(np.max(err))


def _checked_solve(blocks, dense: bool = False) -> np.ndarray:
    """Solve the block system; returns (..., K, 16)."""
    try:
        if dense:
            a, b = _stack_system(*blocks)
            x = np.linalg.solve(a, b[..., None])[..., 0].reshape(blocks[3].shape)
        else:
            x = _block_solve(*blocks)
    except np.linalg.LinAlgError as exc:
        a, _ = _stack_system(*blocks)
        raise SolverError(f"constrained harmonic-balance system is singular: {exc}",
                          condition=float(np.max(np.linalg.cond(a)))) from exc
    if not np.all(np.isfinite(x)):
        a, _ = _stack_system(*blocks)
        raise SolverError("non-finite solution", condition=float(np.max(np.linalg.cond(a))))
    return x


def _residual_with_traces(coeffs: np.ndarray, balance: np.ndarray) -> np.ndarray:
    n_max = (coeffs.shape[-3] - 1) // 2
    traces = np.trace(coeffs, axis1=-2, axis2=-1)
    traces[..., n_max] -= 1.0
    interior = balance[..., 1:-1, :, :].max(axis=(-3, -2, -1))
    return np.maximum(interior, np.abs(traces).max(axis=-1))


def solve_pss(op: OperatingPoint, n_max: int = DEFAULT_N_MAX, phi_s: float = 0.0,
              tolerance: float = DEFAULT_TOLERANCE, dense: bool = False) -> PssSolution:
    """Solve for the periodic steady state truncated at ``|n| <= n_max``.

    The block-tridiagonal system is eliminated block by block; ``dense=True``
    solves the assembled matrix with a full LU factorization instead.

    Raises
    ------
    SolverError
        If the constrained system is singular.
    ResidualError
        If the interior harmonic-balance residual or a trace constraint
        exceeds ``tolerance``.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    jumps, d = _cached_dissipator(op.rates)
    lb = liouvillian_blocks(build_floquet_blocks(op), jumps, d)
    phase = np.exp(1j * phi_s)
    x = _checked_solve(_system_blocks(lb.l0, lb.lplus * phase, lb.lminus * np.conj(phase),
                                      op.omega_s_drive, n_max), dense)
    coeffs = x.reshape(2 * n_max + 1, DIM, DIM).transpose(0, 2, 1)
    hs = HarmonicSet(n_max=n_max, coeffs=coeffs, phi_s=phi_s)
    fb = build_floquet_blocks(op)
    balance = _balance_error(hs.coeffs, fb.h0, fb.hplus * phase, fb.hminus * np.conj(phase),
                             jumps, op.omega_s_drive)
    residual = float(_residual_with_traces(hs.coeffs, balance))
    if residual > tolerance:
        raise ResidualError(f"harmonic-balance residual {residual:.3e} exceeds {tolerance:.1e}")
    return PssSolution(harmonics=hs, op=op, residual_norm=residual, solve_tolerance=tolerance)


def solve_pss_many(ops, n_max: int = DEFAULT_N_MAX, tolerance: float = DEFAULT_TOLERANCE,
                   chunk: int = 256) -> np.ndarray:
    """Harmonic coefficients for many operating points, shape (len(ops), 2N+1, 4, 4).

    Operating points that share dissipation rates are assembled and solved
    as stacked batches; the residual check is the same as in :func:`solve_pss`.
    """
    ops = list(ops)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    out = np.empty((len(ops), 2 * n_max + 1, DIM, DIM), dtype=complex)
    groups: dict[DissipationRates, list[int]] = {}
    for i, op in enumerate(ops):
        groups.setdefault(op.rates, []).append(i)
    for rates, members in groups.items():
        jumps, d = _cached_dissipator(rates)
        for start in range(0, len(members), chunk):
            idx = members[start:start + chunk]
            fbs = [build_floquet_blocks(ops[i]) for i in idx]
            h0 = np.stack([fb.h0 for fb in fbs])
            hp = np.stack([fb.hplus for fb in fbs])
            hm = np.stack([fb.hminus for fb in fbs])
            omega = np.array([ops[i].omega_s_drive for i in idx])
            x = _checked_solve(_system_blocks(commutator_super(h0) + d, commutator_super(hp),
                                              commutator_super(hm), omega, n_max))
            coeffs = x.reshape(len(idx), 2 * n_max + 1, DIM, DIM).transpose(0, 1, 3, 2)
            residual = _residual_with_traces(coeffs, _balance_error(coeffs, h0, hp, hm, jumps, omega))
            worst = int(np.argmax(residual))
            if residual[worst] > tolerance:
                raise ResidualError(f"harmonic-balance residual {residual[worst]:.3e} exceeds "
                                    f"{tolerance:.1e} at batch entry {idx[worst]}")
            out[idx] = coeffs
    return out


def first_harmonics(ops, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """P21^(1) for each operating point (batched)."""
    return solve_pss_many(ops, n_max)[:, n_max + 1, 1, 0]


def first_harmonic(op: OperatingPoint, n_max: int = DEFAULT_N_MAX) -> complex:
    """Shortcut for P21^(1) of a fresh solve."""
    return probe_harmonic(solve_pss(op, n_max), 1)


def apply_phase(harmonics: HarmonicSet, phi_s: float) -> HarmonicSet:
    """Rotate every coefficient by exp(i n phi_s)."""
    n = np.arange(-harmonics.n_max, harmonics.n_max + 1)
    rotated = harmonics.coeffs * np.exp(1j * n * phi_s)[:, None, None]
    return HarmonicSet(harmonics.n_max, rotated, harmonics.phi_s + phi_s)


def probe_harmonic(sol: PssSolution | HarmonicSet, n: int) -> complex:
    """Element rho_21 (row 2, column 1) of the n-th coefficient."""
    hs = sol.harmonics if isinstance(sol, PssSolution) else sol
    return complex(hs[n][1, 0])


def reconstruct_rho(sol: PssSolution, t: float | np.ndarray, phi_s: float = 0.0) -> np.ndarray:
    """Density matrix from the Fourier series at time(s) ``t``.

    ``phi_s`` is added on top of the phase the harmonics were solved at.
    Returns shape (4, 4) for scalar ``t`` and (len(t), 4, 4) otherwise.
    """
    hs = sol.harmonics
    n = np.arange(-hs.n_max, hs.n_max + 1)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    ph = np.exp(1j * np.outer(sol.op.omega_s_drive * tt + phi_s, n))
    rho = np.einsum("tn,nij->tij", ph, hs.coeffs)
    return rho[0] if np.ndim(t) == 0 else rho


def convergence_error(op: OperatingPoint, n: int, n_ref: int = REFERENCE_N_MAX) -> float:
    """Relative change of P21^(1) between truncation ``n`` and ``n_ref``."""
    if not 1 <= n < n_ref:
        raise ValueError(f"need 1 <= n < n_ref, got n={n}, n_ref={n_ref}")
    ref = first_harmonic(op, n_ref)
    if ref == 0:
        raise MetricError("reference first harmonic is zero; relative error undefined")
    return abs(first_harmonic(op, n) - ref) / abs(ref)


def static_steady_state(op: OperatingPoint) -> np.ndarray:
    """Null vector of the static Liouvillian block, normalized to unit trace."""
    jumps, d = _cached_dissipator(op.rates)
    l0 = liouvillian_blocks(build_floquet_blocks(op), jumps, d).l0
    _, _, vh = np.linalg.svd(l0)
    rho = vh[-1].conj().reshape(DIM, DIM, order="F")
    return rho / np.trace(rho)
