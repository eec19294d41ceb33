import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from openhier.indexset import (
    BosonicUntruncated,
    SpaceTooLarge,
    Truncation,
    build_index_space,
    depth_space_size,
    ordering_sign,
    pair_space,
    sign_factors,
    sign_tables,
    split_pair,
)


def test_graded_order_two_channels():
    space = build_index_space(2, "bosonic", Truncation.Depth(2))
    assert list(space) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@given(st.integers(1, 4), st.integers(0, 5))
def test_depth_size_is_binomial(J, K):
    assert len(build_index_space(J, "bosonic", Truncation.Depth(K))) == depth_space_size(J, K) == math.comb(J + K, J)


@given(st.integers(1, 4), st.integers(0, 4))
def test_depth_prefix(J, K):
    small = build_index_space(J, "bosonic", Truncation.Depth(K))
    big = build_index_space(J, "bosonic", Truncation.Depth(K + 1))
    np.testing.assert_array_equal(big.indices[: len(small)], small.indices)


@given(st.integers(1, 6))
def test_fermionic_full_space(J):
    space = build_index_space(J, "fermionic")
    assert len(space) == 2**J
    assert space.indices.max() <= 1


def test_guards():
    with pytest.raises(BosonicUntruncated):
        build_index_space(2, "bosonic", Truncation.Full())
    with pytest.raises(SpaceTooLarge):
        build_index_space(25, "fermionic")
    with pytest.raises(ValueError):
        Truncation(energy=1.0)


@given(st.integers(1, 4), st.integers(0, 4), st.sampled_from(["bosonic", "fermionic"]))
def test_adjacency_consistent(J, K, stats):
    space = build_index_space(J, stats, Truncation.Depth(K))
    for p, k in enumerate(space.indices.tolist()):
        for j in range(J):
            q = space.up[p, j]
            if q >= 0:
                assert space.indices[q].tolist() == [x + (i == j) for i, x in enumerate(k)]
                assert space.down[q, j] == p
            if k[j] > 0:
                assert space.down[p, j] >= 0  # downward closed


@given(st.lists(st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=3),
       st.floats(0, 6))
def test_energy_truncation_downward_closed(weights, W):
    w = [complex(abs(x.real) + 0.1, x.imag) for x in weights]
    space = build_index_space(len(w), "bosonic", Truncation.Energy(W, w))
    for k in space:
        assert abs(np.dot(k, w)) <= W * (1 + 1e-12)
        for j in range(len(w)):
            if k[j]:
                assert tuple(x - (i == j) for i, x in enumerate(k)) in space


@given(st.lists(st.integers(0, 1), min_size=1, max_size=8), st.data())
def test_sign_tables_match_scalar(k, data):
    j = data.draw(st.integers(0, len(k) - 1))
    s_tot, s_part, s_before = sign_tables(np.array([k]))
    total, partial = sign_factors(k, j)
    assert s_tot[0] == total and s_part[0, j] == partial
    assert s_before[0, j] == ordering_sign(k, j)
    # total = before * own * after
    assert total == s_before[0, j] * (-1) ** k[j] * partial


def test_pair_space_depth_counts_both():
    space = pair_space(2, "bosonic", Truncation.Depth(2))
    m, n = split_pair(space)
    assert np.all(m.sum(1) + n.sum(1) <= 2)
    assert len(space) == math.comb(4 + 2, 4)
