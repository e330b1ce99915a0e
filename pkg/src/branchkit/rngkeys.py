"""Counter-based random streams keyed by tree position.

Every node of a branching realization owns an independent stream derived by
hashing (seed, replication, path). A draw never mutates hidden state shared
between nodes, so a tree is reproducible no matter the traversal order, and
two trees grown from the same keys consume identical node-level randomness,
which is exactly what the coupled constructions need.

The mixing function is the 64-bit splitmix finalizer. The same integer
recipe is implemented three times (scalar Python, vectorized numpy, and the
compiled kernel) and the test suite pins them bit-for-bit against each other.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

# Domain-separation salts: draws, child derivation, replication roots, and
# the independent-coupling side key must never alias each other.
DRAW_SALT = 0xD1B54A32D192ED03
CHILD_SALT = 0x8CB92BA72F3D8DD7
REP_SALT = 0xEB44ACCAB455D165
INDEP_SALT = 0x9E6C63D0876A9A47

_U64 = np.uint64
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """Splitmix64 finalizer on a Python integer."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64_np(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    z = (z + _U64(0x9E3779B97F4A7C15)).astype(np.uint64, copy=False)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def draw_u64(key: int, slot: int) -> int:
    """The slot-th 64-bit output of the stream owned by `key`."""
    return mix64(key ^ mix64((DRAW_SALT + slot * GAMMA) & MASK64))


def child_key(key: int, index: int) -> int:
    """Stream key of child `index` (1-based) of the node owning `key`."""
    return mix64(key ^ mix64((CHILD_SALT + index * GAMMA) & MASK64))


def root_key(seed: int, replication: int = 0) -> int:
    """Stream key of the root node of one replication."""
    return mix64(mix64(seed & MASK64) ^ mix64((REP_SALT + replication * GAMMA) & MASK64))


def indep_key(key: int) -> int:
    """Salted variant of `key` used by the second side of an independent coupling."""
    return mix64(key ^ INDEP_SALT)


def to_uniform(x: int) -> float:
    """Map a 64-bit output to a double in [0, 1)."""
    return (x >> 11) * _INV_2_53


# Vectorized counterparts used by the numpy kernel backend. The slot mix is
# key-independent, so callers precompute it once per slot.


def slot_mix(slot: int) -> np.uint64:
    return _U64(mix64((DRAW_SALT + slot * GAMMA) & MASK64))


def draw_uniforms_np(keys: np.ndarray, slot: int) -> np.ndarray:
    """Uniforms at a fixed slot for an array of keys."""
    out = mix64_np(keys ^ slot_mix(slot))
    return (out >> _U64(11)) * _INV_2_53


def draw_uniforms_slots_np(keys: np.ndarray, slots: np.ndarray) -> np.ndarray:
    """Uniforms where each key draws at its own slot."""
    inner = mix64_np((_U64(DRAW_SALT) + slots.astype(np.uint64) * _U64(GAMMA)))
    out = mix64_np(keys ^ inner)
    return (out >> _U64(11)) * _INV_2_53


def child_keys_np(keys: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Child keys where each key spawns the child of its own 1-based index."""
    inner = mix64_np((_U64(CHILD_SALT) + indices.astype(np.uint64) * _U64(GAMMA)))
    return mix64_np(keys ^ inner)


def root_keys_np(seed: int, rep_start: int, n: int) -> np.ndarray:
    reps = np.arange(rep_start, rep_start + n, dtype=np.uint64)
    inner = mix64_np(_U64(REP_SALT) + reps * _U64(GAMMA))
    return mix64_np(_U64(mix64(seed & MASK64)) ^ inner)


def indep_keys_np(keys: np.ndarray) -> np.ndarray:
    return mix64_np(keys ^ _U64(INDEP_SALT))


def derive_seed(*parts: int) -> int:
    """Fold integers into a fresh 64-bit seed (for sub-experiment streams)."""
    acc = 0x243F6A8885A308D3
    for p in parts:
        acc = mix64(acc ^ mix64(p & MASK64))
    return acc


class KeyedStream:
    """Sequential view over one node's stream: uniform() advances a slot counter.

    child(i) derives the stream of the i-th child node. Instances are cheap
    and throwaway; the underlying draws are pure functions of (key, slot).
    """

    __slots__ = ("key", "slot")

    def __init__(self, key: int, slot: int = 0):
        self.key = key & MASK64
        self.slot = slot

    @classmethod
    def for_root(cls, seed: int, replication: int = 0) -> "KeyedStream":
        return cls(root_key(seed, replication))

    def uniform(self) -> float:
        u = to_uniform(draw_u64(self.key, self.slot))
        self.slot += 1
        return u

    def uniform_at(self, slot: int) -> float:
        """Draw at an explicit slot without advancing the counter."""
        return to_uniform(draw_u64(self.key, slot))

    def child(self, index: int) -> "KeyedStream":
        if index < 1:
            raise ValueError("child index is 1-based")
        return KeyedStream(child_key(self.key, index))

    def independent_twin(self) -> "KeyedStream":
        return KeyedStream(indep_key(self.key))
