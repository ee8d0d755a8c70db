"""Finite sets [n] = {0, ..., n-1}, functions between them, coproducts and pushouts.

Every composition in the package bottoms out here: gluing boxes along
junctions is a pushout of finite-set functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FinFunction",
    "Cospan",
    "PushoutResult",
    "identity",
    "compose",
    "coproduct",
    "coproduct_all",
    "pushout",
    "preimage",
]


class FinFunction:
    """A function ``[dom_size] -> [codom_size]`` stored as an index array.

    Instances are immutable; the underlying array is marked read-only.
    """

    __slots__ = ("_map", "_codom")

    def __init__(self, values: Iterable[int] | np.ndarray, codom_size: int):
        arr = np.array(values, dtype=np.int64).reshape(-1)
        codom_size = int(codom_size)
        if codom_size < 0:
            raise ValueError(f"codomain size must be non-negative, got {codom_size}")
        if arr.size and (arr.min() < 0 or arr.max() >= codom_size):
            bad = int(arr[(arr < 0) | (arr >= codom_size)][0])
            raise ValueError(f"entry {bad} out of range for codomain of size {codom_size}")
        arr.flags.writeable = False
        self._map = arr
        self._codom = codom_size

    @property
    def map(self) -> np.ndarray:
        return self._map

    @property
    def dom_size(self) -> int:
        return int(self._map.size)

    @property
    def codom_size(self) -> int:
        return self._codom

    def __call__(self, i: int) -> int:
        return int(self._map[i])

    def __len__(self) -> int:
        return self.dom_size

    def __iter__(self):
        return (int(v) for v in self._map)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FinFunction):
            return NotImplemented
        return self._codom == other._codom and np.array_equal(self._map, other._map)

    def __hash__(self) -> int:
        return hash((self._codom, self._map.tobytes()))

    def __repr__(self) -> str:
        return f"FinFunction({self._map.tolist()}, codom_size={self._codom})"

    def is_injective(self) -> bool:
        return np.unique(self._map).size == self._map.size

    def is_surjective(self) -> bool:
        return np.unique(self._map).size == self._codom

    def is_bijective(self) -> bool:
        return self.dom_size == self._codom and self.is_injective()

    def tolist(self) -> list[int]:
        return self._map.tolist()


def identity(n: int) -> FinFunction:
    return FinFunction(np.arange(n), n)


def compose(f: FinFunction, g: FinFunction) -> FinFunction:
    """Return ``g o f`` (apply ``f`` first)."""
    if f.codom_size != g.dom_size:
        raise ValueError(
            f"cannot compose: f has codomain size {f.codom_size}, "
            f"g has domain size {g.dom_size}"
        )
    return FinFunction(g.map[f.map], g.codom_size)


def coproduct(f: FinFunction, g: FinFunction) -> FinFunction:
    """``f + g``: g's entries are shifted by ``f.codom_size``."""
    return coproduct_all([f, g])


def coproduct_all(fs: Sequence[FinFunction]) -> FinFunction:
    parts = []
    offset = 0
    for f in fs:
        parts.append(f.map + offset)
        offset += f.codom_size
    values = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return FinFunction(values, offset)


def preimage(f: FinFunction, j: int) -> list[int]:
    if not 0 <= j < f.codom_size:
        raise IndexError(f"index {j} out of range for codomain of size {f.codom_size}")
    return np.flatnonzero(f.map == j).tolist()


@dataclass(frozen=True)
class Cospan:
    left: FinFunction
    right: FinFunction

    def __post_init__(self):
        if self.left.codom_size != self.right.codom_size:
            raise ValueError(
                f"cospan legs disagree on apex: {self.left.codom_size} vs "
                f"{self.right.codom_size}"
            )

    @property
    def apex_size(self) -> int:
        return self.left.codom_size


@dataclass(frozen=True)
class PushoutResult:
    """Apex of a pushout together with the two coprojections."""

    apex_size: int
    proj_left: FinFunction
    proj_right: FinFunction


def _find(parent: list[int], i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def pushout(m: FinFunction, l: FinFunction) -> PushoutResult:
    """Pushout of the span ``S <-m- X -l-> J``.

    The apex is ``(S + J) / ~`` with ``m(x) ~ l(x)``.  Apex elements are
    numbered by first appearance of their class when scanning S and then J,
    so the result is fully determined by the inputs.
    """
    if m.dom_size != l.dom_size:
        raise ValueError(
            f"pushout legs have different domains: {m.dom_size} vs {l.dom_size}"
        )
    n_s, n_j = m.codom_size, l.codom_size
    parent = list(range(n_s + n_j))
    rank = [0] * (n_s + n_j)
    for a, b in zip(m.map.tolist(), (l.map + n_s).tolist()):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1

    label: dict[int, int] = {}
    out = np.empty(n_s + n_j, dtype=np.int64)
    for i in range(n_s + n_j):
        root = _find(parent, i)
        if root not in label:
            label[root] = len(label)
        out[i] = label[root]
    apex = len(label)
    return PushoutResult(apex, FinFunction(out[:n_s], apex), FinFunction(out[n_s:], apex))
