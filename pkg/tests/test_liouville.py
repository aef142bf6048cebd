from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import floquet_generators
from starkloop.errors import DimensionError
from starkloop.liouville import (
    TAU,
    commutator_super,
    dissipator_super,
    jump_operators,
    lindblad_dissipator,
    liouvillian_blocks,
    projector,
    unvec,
    vec,
)
from starkloop.model import DissipationRates, build_floquet_blocks, nominal_point, stress_point

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)
mats = st.builds(lambda a, b: a + 1j * b, arrays(float, (4, 4), elements=finite),
                 arrays(float, (4, 4), elements=finite))


@given(mats)
def test_vec_round_trip_and_trace(x):
    assert np.array_equal(unvec(vec(x)), x)
    assert TAU @ vec(x) == pytest.approx(np.trace(x), abs=1e-12)


def test_vec_is_column_stacking():
    x = np.arange(16).reshape(4, 4)
    assert list(vec(x)[:4].real) == [0, 4, 8, 12]


def test_shape_errors():
    with pytest.raises(DimensionError):
        vec(np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        unvec(np.zeros(15))


@given(mats, mats)
def test_commutator_super_matches_matrix_form(h, x):
    lhs = unvec(commutator_super(h) @ vec(x))
    assert np.allclose(lhs, -1j * (h @ x - x @ h), atol=1e-10)


@given(mats)
def test_dissipator_super_matches_matrix_form(x):
    jumps = jump_operators(DissipationRates(gamma32=0.3, deph4=0.2))
    assert np.allclose(unvec(dissipator_super(jumps) @ vec(x)), lindblad_dissipator(jumps, x), atol=1e-10)


def test_trace_preservation():
    op = stress_point()
    lb = liouvillian_blocks(build_floquet_blocks(op), jumps_of(op))
    for block in (lb.l0, lb.lplus, lb.lminus):
        assert np.max(np.abs(TAU @ block)) < 1e-15


def jumps_of(op):
    return jump_operators(op.rates)


def test_jump_operator_sets():
    zero = SimpleNamespace(gamma21=0.0, gamma32=0.0, gamma42=0.0, deph3=0.0, deph4=0.0)
    assert len(jump_operators(zero)) == 0
    only = jump_operators(DissipationRates(gamma32=0, gamma42=0, deph3=0, deph4=0))
    assert len(only) == 1 and np.array_equal(next(iter(only)), projector(0, 1))
    ops = list(jump_operators(DissipationRates()))
    assert len(ops) == 5
    assert [np.max(np.abs(o)) for o in ops] == pytest.approx([1.0, 0.05 ** 0.5, 0.05 ** 0.5, 0.1, 0.1])


def test_blocks_against_brute_force_oracle():
    # The oracle flattens row-major; map both to matrix actions before comparing.
    op = nominal_point(delta_p=0.2, delta_s=-0.1)
    lb = liouvillian_blocks(build_floquet_blocks(op), jumps_of(op))
    g0, gp, gm = floquet_generators(op)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        for ours, ref in ((lb.l0, g0), (lb.lplus, gp), (lb.lminus, gm)):
            assert np.allclose(unvec(ours @ vec(x)), (ref @ x.reshape(16)).reshape(4, 4), atol=1e-13)


def test_batched_commutator():
    rng = np.random.default_rng(0)
    hs = rng.normal(size=(3, 4, 4)) + 0j
    batch = commutator_super(hs)
    for k in range(3):
        assert np.array_equal(batch[k], commutator_super(hs[k]))
