"""Seeded, platform-independent random number generation.

A ``SeededRng`` is a splitmix64-seeded ensemble of xoshiro256** streams.
The ensemble is stepped in lockstep with vectorized uint64 arithmetic and
its outputs are interleaved round-robin (lane 0 at step 0, lane 1 at step
0, ..., lane 0 at step 1, ...), which makes bulk generation fast while the
draw sequence for a given seed stays fixed forever. All arithmetic is
exact modular uint64, so identical seeds produce identical streams on
every platform.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64
_MASK64 = (1 << 64) - 1

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + _SM_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM_MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MIX2) & _MASK64
    return state, z ^ (z >> 31)


def _mix_key(seed: int, key: int | str) -> int:
    """Derive a child seed from (seed, key) through a splitmix64 chain."""
    state = seed & _MASK64
    if isinstance(key, str):
        material = list(key.encode("utf-8"))
    else:
        k = key & _MASK64
        material = [(k >> s) & 0xFF for s in range(0, 64, 8)]
    out = 0
    for byte in material:
        state, out = splitmix64(state ^ byte)
    state, out = splitmix64(state)
    return out


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    k64 = _U64(k)
    return (x << k64) | (x >> _U64(64 - k))


class SeededRng:
    """Deterministic uint64 stream with float/permutation conveniences."""

    LANES = 512

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        state = self.seed
        init = np.empty(4 * self.LANES, dtype=np.uint64)
        for i in range(init.size):
            state, out = splitmix64(state)
            init[i] = out
        init = init.reshape(self.LANES, 4)
        self._s0 = init[:, 0].copy()
        self._s1 = init[:, 1].copy()
        self._s2 = init[:, 2].copy()
        self._s3 = init[:, 3].copy()
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0

    def _step_block(self, n_steps: int) -> np.ndarray:
        """Advance all lanes n_steps times; returns the interleaved outputs."""
        out = np.empty((n_steps, self.LANES), dtype=np.uint64)
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        five, nine, seventeen = _U64(5), _U64(9), _U64(17)
        for i in range(n_steps):
            out[i] = _rotl(s1 * five, 7) * nine
            t = s1 << seventeen
            s2 = s2 ^ s0
            s3 = s3 ^ s1
            s1 = s1 ^ s2
            s0 = s0 ^ s3
            s2 = s2 ^ t
            s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return out.reshape(-1)

    def next_u64(self, n: int) -> np.ndarray:
        """Next n draws of the stream as a uint64 array."""
        if n < 0:
            raise ValueError("draw count must be nonnegative")
        avail = self._buf.size - self._pos
        if n <= avail:
            out = self._buf[self._pos : self._pos + n]
            self._pos += n
            return out.copy()
        parts = [self._buf[self._pos :]]
        need = n - avail
        steps = -(-need // self.LANES)
        fresh = self._step_block(steps)
        parts.append(fresh[:need])
        self._buf = fresh
        self._pos = need
        return np.concatenate(parts)

    def uniform(self, shape, dtype=np.float64) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        bits = self.next_u64(n) >> _U64(11)
        out = bits.astype(np.float64) * 2.0**-53
        return out.reshape(shape).astype(dtype, copy=False)

    def uniform_open(self, shape) -> np.ndarray:
        """Uniform draws in (0, 1]; safe as a log argument."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        bits = (self.next_u64(n) >> _U64(11)) + _U64(1)
        return (bits.astype(np.float64) * 2.0**-53).reshape(shape)

    def normal(self, shape, dtype=np.float64) -> np.ndarray:
        """Standard normal draws via Box-Muller."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        pairs = -(-n // 2)
        u1 = self.uniform_open(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape).astype(dtype, copy=False)

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """n integers uniform over [low, high)."""
        if high <= low:
            raise ValueError("empty integer range")
        u = self.uniform(n)
        return (low + np.floor(u * (high - low))).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """A uniform permutation of range(n) (random-key sort)."""
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")

    def choice_no_replace(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn uniformly from range(n)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")[:k]

    def shuffle(self, items: list) -> list:
        """A shuffled copy of a list."""
        return [items[i] for i in self.permutation(len(items))]

    def derive(self, key: int | str) -> "SeededRng":
        """An independent child generator determined by (seed, key)."""
        return SeededRng(_mix_key(self.seed, key))
