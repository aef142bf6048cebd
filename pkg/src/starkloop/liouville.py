"""Column-stacking vectorization and the harmonic Liouvillian superoperators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from starkloop.errors import DimensionError
from starkloop.model import DissipationRates, FloquetBlocks

DIM = 4
I4 = np.eye(DIM, dtype=complex)
# Row vector vec(I)^T: tau @ vec(X) == trace(X).
TAU = I4.reshape(-1, order="F").copy()


def vec(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.shape != (DIM, DIM):
        raise DimensionError(f"expected a {DIM}x{DIM} matrix, got shape {m.shape}")
    return m.reshape(-1, order="F").astype(complex)


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (DIM * DIM,):
        raise DimensionError(f"expected a vector of length {DIM * DIM}, got shape {v.shape}")
    return v.reshape(DIM, DIM, order="F")


def projector(i: int, j: int) -> np.ndarray:
    """|i><j| with 0-based indices."""
    m = np.zeros((DIM, DIM), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass(frozen=True)
class JumpOperatorSet:
    """Jump operators with their rates absorbed (sqrt(rate) * operator)."""

    ops: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)


def jump_operators(rates: DissipationRates) -> JumpOperatorSet:
    """Minimal ladder set: 2->1, 3S->2, 4S->2 decay plus upper-state dephasing.

    Dephasing acts through projectors on the Stark states. Zero-rate
    channels are dropped.
    """
    channels = [
        (rates.gamma21, (0, 1)),
        (rates.gamma32, (1, 2)),
        (rates.gamma42, (1, 3)),
        (rates.deph3, (2, 2)),
        (rates.deph4, (3, 3)),
    ]
    return JumpOperatorSet(tuple(np.sqrt(rate) * projector(*ij) for rate, ij in channels if rate > 0))


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # 4x4 (x) 4x4 without np.kron's generic-shape overhead; leading axes broadcast.
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (DIM * DIM, DIM * DIM))


def commutator_super(h: np.ndarray) -> np.ndarray:
    """Superoperator of X -> -i[h, X]; ``h`` may carry leading batch axes."""
    return -1j * (_kron(I4, h) - _kron(np.swapaxes(h, -1, -2), I4))


def dissipator_super(jumps: JumpOperatorSet) -> np.ndarray:
    d = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for lk in jumps:
        ldl = lk.conj().T @ lk
        d += _kron(lk.conj(), lk) - 0.5 * (_kron(I4, ldl) + _kron(ldl.T, I4))
    return d


def lindblad_dissipator(jumps: JumpOperatorSet, x: np.ndarray) -> np.ndarray:
    """Direct matrix form of the dissipator acting on ``x``.

    ``x`` may carry leading batch axes (shape ``(..., 4, 4)``).
    """
    out = np.zeros(np.shape(x), dtype=complex)
    for lk in jumps:
        ld = lk.conj().T
        ldl = ld @ lk
        out += lk @ x @ ld - 0.5 * (ldl @ x + x @ ldl)
    return out


@dataclass(frozen=True)
class LiouvillianBlocks:
    """Static and +-1 Fourier blocks of the Liouvillian (16x16 each)."""

    l0: np.ndarray
    lplus: np.ndarray
    lminus: np.ndarray


def liouvillian_blocks(blocks: FloquetBlocks, jumps: JumpOperatorSet,
                       dissipator: np.ndarray | None = None) -> LiouvillianBlocks:
    """Build the three blocks; ``dissipator`` may be passed in precomputed."""
    d = dissipator_super(jumps) if dissipator is None else dissipator
    return LiouvillianBlocks(
        l0=commutator_super(blocks.h0) + d,
        lplus=commutator_super(blocks.hplus),
        lminus=commutator_super(blocks.hminus),
    )
