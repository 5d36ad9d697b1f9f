import numpy as np
import pytest

from fragsim.rng import (Stream, derive, derive_vec, draw, draw_vec, mix,
                         to_unit, to_unit_vec)


def test_mix_deterministic_and_order_sensitive():
    assert mix(1, 2, 3) == mix(1, 2, 3)
    assert mix(1, 2) != mix(2, 1)
    assert mix(7) != mix(8)


def test_scalar_and_vector_paths_bit_identical():
    keys = [mix(5, r) for r in range(64)]
    kv = np.array(keys, dtype=np.uint64)
    for i in (0, 1, 17):
        scalar = np.array([draw(k, i) for k in keys], dtype=np.uint64)
        assert np.array_equal(draw_vec(kv, i), scalar)
    for tag in (0, 1, 5):
        scalar = np.array([derive(k, tag) for k in keys], dtype=np.uint64)
        assert np.array_equal(derive_vec(kv, tag), scalar)
    u_scalar = np.array([to_unit(draw(k, 0)) for k in keys])
    assert np.array_equal(to_unit_vec(draw_vec(kv, 0)), u_scalar)


def test_stream_sequence_matches_bulk():
    s1 = Stream(11, 22)
    singles = [s1.uniform() for _ in range(10)]
    s2 = Stream(11, 22)
    assert np.allclose(s2.uniforms(10), singles, rtol=0, atol=0)


def test_child_streams_are_distinct():
    s = Stream(3)
    assert s.child(0).key != s.child(1).key
    assert s.child(0).key == Stream(3).child(0).key


def test_uniforms_in_open_unit_interval_and_roughly_uniform():
    u = Stream(99).uniforms(20000)
    assert np.all((u > 0.0) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(np.mean(u < 0.25) - 0.25) < 0.02


def test_exponential_positive():
    s = Stream(4)
    assert all(s.exponential() > 0 for _ in range(100))
