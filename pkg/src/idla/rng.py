"""Counter-based, splittable random streams.

Every draw is a pure function of ``(master_seed, lane, replicate, particle,
counter)``: the stream key is obtained by hashing the address with the
SplitMix64 finalizer, and the i-th 64-bit word of a stream is
``mix64(key + i * GOLDEN)``.  Nothing depends on call order across streams,
so results do not change with thread scheduling or with the order in which
particles of an Abelian sum are released.

The stream state is a length-4 ``uint64`` array ``[key, counter, bitbuf,
nbits]`` so that numba kernels can advance it in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0

# Lanes separate independent uses of one (seed, replicate) address.
LANE_CHAIN = 1
LANE_CHAIN_B = 2
LANE_WATER = 3
LANE_PAIRS = 4
LANE_SMASH = 5
LANE_WALK = 6
LANE_INIT_A = 7
LANE_INIT_B = 8
LANE_MISC = 9

MASK64 = (1 << 64) - 1


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def child_key(key, index):
    """Key of sub-stream ``index`` of ``key``."""
    return mix64(mix64(key ^ GOLDEN) + np.uint64(index) * GOLDEN + np.uint64(1))


@njit(cache=True, nogil=True)
def next_u64(st):
    st[1] += np.uint64(1)
    return mix64(st[0] + st[1] * GOLDEN)


@njit(cache=True, nogil=True)
def next_double(st):
    return float(next_u64(st) >> _S11) * _TWO53


@njit(cache=True, nogil=True)
def next_below(st, n):
    """Uniform integer in ``[0, n)``; bias is below 2**-53 * n."""
    return int(next_double(st) * n)


@njit(cache=True, nogil=True)
def next_dir(st):
    """Two fresh bits: 0 = +x, 1 = -x, 2 = +y, 3 = -y."""
    if st[3] == np.uint64(0):
        st[2] = next_u64(st)
        st[3] = np.uint64(32)
    d = int(st[2] & np.uint64(3))
    st[2] = st[2] >> np.uint64(2)
    st[3] -= np.uint64(1)
    return d


@njit(cache=True, nogil=True)
def reset_stream(st, key):
    st[0] = key
    st[1] = np.uint64(0)
    st[2] = np.uint64(0)
    st[3] = np.uint64(0)


def _u64(v: int) -> np.uint64:
    return np.uint64(int(v) & MASK64)


def family_key(master_seed: int, lane: int, replicate: int) -> np.uint64:
    k = _u64(mix64(_u64(int(master_seed) + int(GOLDEN))))
    k = _u64(child_key(k, _u64(lane)))
    return _u64(child_key(k, _u64(replicate)))


@dataclass(frozen=True)
class RngFamily:
    """All streams of one (seed, lane, replicate) address, indexed by particle."""

    master_seed: int
    replicate: int = 0
    lane: int = LANE_CHAIN

    @property
    def key(self) -> np.uint64:
        return family_key(self.master_seed, self.lane, self.replicate)

    def stream(self, particle: int) -> "RngStream":
        return RngStream(self.master_seed, (self.replicate, particle), lane=self.lane)

    def sub(self, lane: int) -> "RngFamily":
        return RngFamily(self.master_seed, self.replicate, lane)

    def label(self) -> str:
        return f"{self.master_seed}:{self.lane}:{self.replicate}"


class RngStream:
    """One deterministic stream, addressed by ``(master_seed, (replicate, particle))``."""

    __slots__ = ("master_seed", "stream_key", "lane", "state")

    def __init__(self, master_seed: int, stream_key: tuple[int, int] = (0, 0), lane: int = LANE_WALK):
        self.master_seed = int(master_seed)
        self.stream_key = (int(stream_key[0]), int(stream_key[1]))
        self.lane = int(lane)
        self.state = np.zeros(4, dtype=np.uint64)
        fk = family_key(self.master_seed, self.lane, self.stream_key[0])
        reset_stream(self.state, _u64(child_key(fk, _u64(self.stream_key[1]))))

    def __repr__(self) -> str:
        return (
            f"RngStream(seed={self.master_seed}, lane={self.lane}, "
            f"key={self.stream_key}, counter={int(self.state[1])})"
        )

    @property
    def counter(self) -> int:
        return int(self.state[1])

    def u64(self) -> int:
        return int(next_u64(self.state))

    def random(self) -> float:
        return float(next_double(self.state))

    def integers(self, n: int) -> int:
        return int(next_below(self.state, n))

    def direction(self) -> int:
        return int(next_dir(self.state))

    def numpy_generator(self) -> np.random.Generator:
        """A numpy Generator seeded from the next word of this stream."""
        return np.random.Generator(np.random.Philox(key=self.u64()))
