"""Deterministic RNG: reproducibility, fork independence, bit-width bounds."""

import random

import pytest
from hypothesis import given, strategies as st

from evotesim.rng import DeterministicRng


def test_same_seed_same_stream():
    a = DeterministicRng(b"seed")
    b = DeterministicRng(b"seed")
    assert [a.randbytes(17) for _ in range(5)] == [b.randbytes(17) for _ in range(5)]
    assert a.getrandbits(257) == b.getrandbits(257)


def test_different_seeds_differ():
    assert DeterministicRng(b"a").randbytes(32) != DeterministicRng(b"b").randbytes(32)


def test_label_changes_stream():
    assert (
        DeterministicRng(b"s", label=b"x").randbytes(16)
        != DeterministicRng(b"s", label=b"y").randbytes(16)
    )


def test_seed_required():
    with pytest.raises(TypeError):
        DeterministicRng()  # type: ignore[call-arg]


def test_fork_position_independent():
    """A fork is keyed by (parent key, label), not by the parent's position."""
    parent_a = DeterministicRng(b"seed")
    parent_b = DeterministicRng(b"seed")
    parent_b.randbytes(1000)
    assert parent_a.fork(b"child").randbytes(32) == parent_b.fork(b"child").randbytes(32)


def test_fork_does_not_mirror_parent():
    parent = DeterministicRng(b"seed")
    child = parent.fork(b"child")
    assert child.randbytes(32) != DeterministicRng(b"seed").randbytes(32)


def test_forks_with_distinct_labels_independent():
    parent = DeterministicRng(b"seed")
    streams = {parent.fork(bytes([i])).randbytes(16) for i in range(32)}
    assert len(streams) == 32


@given(st.integers(min_value=1, max_value=4096))
def test_getrandbits_within_width(k):
    value = DeterministicRng(b"width").getrandbits(k)
    assert 0 <= value < (1 << k)


def test_getrandbits_hits_top_bit():
    rng = DeterministicRng(b"top-bit")
    assert any(rng.getrandbits(8) >= 128 for _ in range(64))


def test_randrange_and_sample_work():
    """The class must satisfy random.Random's subclass contract."""
    rng = DeterministicRng(b"api")
    assert isinstance(rng, random.Random)
    assert all(0 <= rng.randrange(10) < 10 for _ in range(100))
    assert sorted(rng.sample(range(5), 5)) == [0, 1, 2, 3, 4]
    assert 0.0 <= rng.random() < 1.0


def test_randbytes_zero_length():
    assert DeterministicRng(b"z").randbytes(0) == b""


def test_stream_is_not_all_zero_or_periodic_short():
    data = DeterministicRng(b"quality").randbytes(4096)
    assert data != bytes(4096)
    assert data[:64] != data[64:128]
