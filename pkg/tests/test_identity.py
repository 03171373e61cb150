import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from podsim.identity import ID_BITS, ID_MASK, bucket_index, generate_ids, xor_distance

ids = st.integers(min_value=0, max_value=ID_MASK)


def test_width():
    assert ID_BITS == 128
    assert ID_MASK == 2**128 - 1


def test_xor_examples():
    assert xor_distance(0b0011, 0b0101) == 6
    assert xor_distance(12345, 12345) == 0


@given(ids, ids)
def test_xor_symmetric_and_zero_iff_equal(a, b):
    assert xor_distance(a, b) == xor_distance(b, a)
    assert (xor_distance(a, b) == 0) == (a == b)


@given(ids, ids, ids)
def test_xor_composes(a, b, c):
    assert xor_distance(a, c) == xor_distance(a, b) ^ xor_distance(b, c)


def test_bucket_index_edges():
    assert bucket_index(0, 1) == 0
    assert bucket_index(0, 2**127) == 127
    with pytest.raises(ValueError):
        bucket_index(7, 7)


@given(ids, ids)
def test_bucket_index_brackets_distance(a, b):
    if a == b:
        return
    i = bucket_index(a, b)
    d = xor_distance(a, b)
    assert 0 <= i < ID_BITS
    assert 2**i <= d < 2 ** (i + 1)
    assert i == max(j for j in range(ID_BITS) if d >> j)


def test_generate_ids_deterministic():
    assert generate_ids(3, random.Random(42)) == generate_ids(3, random.Random(42))


def test_generate_ids_distinct_and_in_range():
    out = generate_ids(1000, random.Random(5))
    assert len(set(out)) == 1000
    assert all(0 <= x <= ID_MASK for x in out)


def test_generate_ids_avoids_taken():
    taken = set(generate_ids(50, random.Random(1)))
    fresh = generate_ids(50, random.Random(1), taken=set(taken))
    assert not taken & set(fresh)


def test_generate_ids_rejects_zero():
    with pytest.raises(ValueError):
        generate_ids(0, random.Random(0))


@given(st.lists(ids, min_size=2, max_size=50, unique=True), ids)
def test_xor_order_has_no_ties(nodes, target):
    dists = [xor_distance(n, target) for n in nodes]
    assert len(set(dists)) == len(dists)
