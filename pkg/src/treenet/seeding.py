"""Deterministic seed derivation.

One master seed fans out into independent streams for trees, folds, layers
and samplers. The derivation is pure integer arithmetic (SplitMix64
finalization), so identical inputs give identical streams on every platform
and under any worker-thread count.
"""

from __future__ import annotations

from typing import Iterable

_MASK64 = (1 << 64) - 1
# SplitMix64 increment; any odd 64-bit constant works, this is the usual one.
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, tags: Iterable[int] = ()) -> int:
    """Derive a child seed from ``master`` and a tag path.

    The state starts as the SplitMix64 finalization of ``master``; each tag
    is folded in as ``state = mix64(state XOR (tag + gamma))``. Distinct tag
    paths give independent streams. Stable across releases: serialized
    models depend on it.

    Args:
        master: 64-bit unsigned master seed (wider ints are masked).
        tags: integers identifying the consumer, e.g. ``[layer, forest, fold]``.

    Returns:
        A 64-bit unsigned seed.
    """
    state = _mix64(master & _MASK64)
    for tag in tags:
        state = _mix64(state ^ ((int(tag) + _GAMMA) & _MASK64))
    return state
