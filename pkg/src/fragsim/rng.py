"""Counter-based splittable random streams.

Every random draw in the simulator is a pure function of a 64-bit key, so
branches of the fragmentation tree own independent, resumable streams: the
stream of a child block is derived from (parent key, child index) and never
depends on scheduling, batching or on how deep sibling branches were run.
That is what makes the alpha-invariance and monotone-refinement checks exact
rather than statistical.

The scalar path (`Stream`, `mix`) and the vectorised path (`derive_vec`,
`draw_vec`) implement the same splitmix64 arithmetic and are bit-identical.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TAG_SALT = 0xD1B54A32D192ED03

_U64 = np.uint64
_V_GOLDEN = _U64(_GOLDEN)
_V_MIX1 = _U64(_MIX1)
_V_MIX2 = _U64(_MIX2)
_V_TAG_SALT = _U64(_TAG_SALT)


def _fin(z: int) -> int:
    # splitmix64 finalizer
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def fin_vec(z: np.ndarray) -> np.ndarray:
    z = (z + _V_GOLDEN)
    z = (z ^ (z >> _U64(30))) * _V_MIX1
    z = (z ^ (z >> _U64(27))) * _V_MIX2
    return z ^ (z >> _U64(31))


def mix(*parts: int) -> int:
    """Fold integers into a 64-bit key (order-sensitive)."""
    h = _TAG_SALT
    for p in parts:
        h = _fin(h ^ _fin(p & _MASK))
    return h


def draw(key: int, i: int) -> int:
    """i-th 64-bit output of the stream with the given key."""
    return _fin((key + (i + 1) * _GOLDEN) & _MASK)


def derive(key: int, tag: int) -> int:
    """Key of the sub-stream tagged `tag` (structurally disjoint from draw)."""
    return _fin(key ^ _fin((_TAG_SALT + tag) & _MASK))


def draw_vec(keys: np.ndarray, i: int) -> np.ndarray:
    return fin_vec(keys + _U64(((i + 1) * _GOLDEN) & _MASK))


def derive_vec(keys: np.ndarray, tag: int) -> np.ndarray:
    return fin_vec(keys ^ _U64(_fin((_TAG_SALT + tag) & _MASK)))


def to_unit(v: int) -> float:
    """Map a 64-bit word to a uniform in the open interval (0, 1)."""
    return ((v >> 11) + 0.5) * 2.0**-53


def to_unit_vec(v: np.ndarray) -> np.ndarray:
    return ((v >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53


class Stream:
    """Sequential view of a counter-based stream.

    `Stream(a, b, ...)` keys the stream by `mix(a, b, ...)`; `child(tag)`
    derives an independent sub-stream without consuming state.
    """

    __slots__ = ("key", "_i")

    def __init__(self, *parts: int, key: int | None = None):
        self.key = mix(*parts) if key is None else key
        self._i = 0

    def child(self, tag: int) -> "Stream":
        return Stream(key=derive(self.key, tag))

    def uniform(self) -> float:
        u = to_unit(draw(self.key, self._i))
        self._i += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        i0 = self._i
        self._i += n
        keys = (np.uint64(self.key) +
                (np.arange(i0 + 1, i0 + n + 1, dtype=np.uint64) * _V_GOLDEN))
        return to_unit_vec(fin_vec(keys))

    def exponential(self) -> float:
        return -np.log(self.uniform())
