"""Open objects and their composition along wiring diagrams.

Any finset algebra ``F`` (a way to move payloads along finite-set functions
plus a way to put payloads side by side) lifts to an algebra of open objects
``(S, o in F(S), m: X -> S)``.  :func:`oapply` composes such triples along a
:class:`~compopt.uwd.UWD` by gluing the domains with a pushout.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Generic, Sequence, TypeVar

import numpy as np

from .finset import FinFunction, compose, coproduct_all, identity, pushout
from .uwd import UWD

__all__ = [
    "OpenObject",
    "FinsetAlgebra",
    "oapply",
    "closed",
    "ProvenanceAlgebra",
    "provenance_fillers",
    "align_domains",
    "compare_open",
]

T = TypeVar("T")


@dataclass(frozen=True)
class OpenObject(Generic[T]):
    domain_size: int
    payload: T
    port_map: FinFunction

    def __post_init__(self):
        if self.port_map.codom_size != self.domain_size:
            raise ValueError(
                f"port map lands in a set of size {self.port_map.codom_size}, "
                f"but the domain has size {self.domain_size}"
            )

    @property
    def n_ports(self) -> int:
        return self.port_map.dom_size


def closed(payload, dim: int | None = None) -> OpenObject:
    """Expose every coordinate of ``payload`` as a port, in order."""
    n = payload.dim if dim is None else dim
    return OpenObject(n, payload, identity(n))


class FinsetAlgebra(ABC, Generic[T]):
    """Payload operations needed by :func:`oapply`.

    ``evaluate`` is only used for extensional comparisons: it returns a pair
    ``(invariant, covariant)`` where ``covariant`` is indexed by the domain
    and must be permuted when the domain is renumbered.
    """

    name: str = "algebra"

    @abstractmethod
    def dimension(self, t: T) -> int: ...

    @abstractmethod
    def act(self, phi: FinFunction, t: T) -> T: ...

    @abstractmethod
    def combine(self, ts: Sequence[T]) -> T: ...

    def combine2(self, a: T, b: T) -> T:
        return self.combine([a, b])

    def unit(self) -> T:
        return self.combine([])

    def act_along_pushout(self, p_S: FinFunction, p_J: FinFunction, diagram: UWD, t: T) -> T:
        return self.act(p_S, t)

    def evaluate(self, t: T, x: np.ndarray, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError(f"{self.name} payloads cannot be evaluated")

    def discrepancy(self, a: T, b: T, points, sigma: np.ndarray | None = None, seed: int = 0) -> float:
        """Max abs difference between ``a`` and ``b`` at the given points.

        ``sigma`` maps the domain of ``a`` onto the domain of ``b``; points
        are given in ``b``'s coordinates.
        """
        worst = 0.0
        for k, y in enumerate(points):
            y = np.asarray(y, dtype=float)
            x = y if sigma is None else y[sigma]
            inv_a, cov_a = self.evaluate(a, x, seed + k)
            inv_b, cov_b = self.evaluate(b, y, seed + k)
            if sigma is not None:
                cov_b = cov_b[sigma]
            d = max(_maxabs(inv_a, inv_b), _maxabs(cov_a, cov_b))
            worst = max(worst, d)
        return worst


def _maxabs(a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        return float("inf")
    if a.size == 0:
        return 0.0
    with np.errstate(invalid="ignore"):
        d = np.abs(a - b)
    d[a == b] = 0.0  # equal infinities
    d[np.isnan(d)] = np.inf
    return float(d.max())


def oapply(alg: FinsetAlgebra, diagram: UWD, fillers: Sequence[OpenObject]) -> OpenObject:
    """Compose open objects along ``diagram``.

    The payload of the result lives on the pushout of the fillers' domains
    and the diagram's junctions; its ports are the diagram's outer ports.
    """
    if len(fillers) != diagram.n_boxes:
        raise ValueError(
            f"diagram has {diagram.n_boxes} boxes but {len(fillers)} fillers were given"
        )
    for i, f in enumerate(fillers):
        if f.n_ports != diagram.box_ports[i]:
            raise ValueError(
                f"box {i} has {diagram.box_ports[i]} ports but filler {i} has {f.n_ports}"
            )
        d = alg.dimension(f.payload)
        if d != f.domain_size:
            raise ValueError(
                f"filler {i}: payload dimension {d} does not match domain size {f.domain_size}"
            )
    m = coproduct_all([f.port_map for f in fillers])
    po = pushout(m, diagram.inner_map)
    combined = alg.combine([f.payload for f in fillers])
    payload = alg.act_along_pushout(po.proj_left, po.proj_right, diagram, combined)
    return OpenObject(po.apex_size, payload, compose(diagram.outer_map, po.proj_right))


class ProvenanceAlgebra(FinsetAlgebra[tuple]):
    """Tracks which tagged source elements end up in each domain element.

    Payloads are tuples of frozensets.  Running it alongside another algebra
    identifies domain elements of two differently-built composites.
    """

    name = "provenance"

    def dimension(self, t):
        return len(t)

    def act(self, phi, t):
        if phi.dom_size != len(t):
            raise ValueError(f"provenance: expected {phi.dom_size} entries, got {len(t)}")
        out = [set() for _ in range(phi.codom_size)]
        for i, j in enumerate(phi):
            out[j] |= t[i]
        return tuple(frozenset(s) for s in out)

    def combine(self, ts):
        return tuple(s for t in ts for s in t)


def provenance_fillers(fillers: Sequence[OpenObject], start: int = 0) -> list[OpenObject]:
    """Tag element ``k`` of filler ``i`` with ``(start + i, k)``."""
    return [
        OpenObject(
            f.domain_size,
            tuple(frozenset({(start + i, k)}) for k in range(f.domain_size)),
            f.port_map,
        )
        for i, f in enumerate(fillers)
    ]


def align_domains(prov_a: tuple, prov_b: tuple, ports_a: FinFunction | None = None,
                  ports_b: FinFunction | None = None) -> np.ndarray:
    """Bijection ``sigma`` with ``prov_a[i] == prov_b[sigma[i]]``.

    Elements with empty provenance are matched through the port maps when
    given, then in order.
    """
    if len(prov_a) != len(prov_b):
        raise ValueError(f"domains differ in size: {len(prov_a)} vs {len(prov_b)}")
    index_b: dict[frozenset, int] = {}
    for j, s in enumerate(prov_b):
        if s:
            if s in index_b:
                raise ValueError("ambiguous provenance in second domain")
            index_b[s] = j
    sigma = np.full(len(prov_a), -1, dtype=np.int64)
    for i, s in enumerate(prov_a):
        if s:
            if s not in index_b:
                raise ValueError(f"element {i} of first domain has no counterpart")
            sigma[i] = index_b[s]
    if ports_a is not None and ports_b is not None:
        for i, j in zip(ports_a.map.tolist(), ports_b.map.tolist()):
            if sigma[i] == -1:
                sigma[i] = j
    used = set(sigma[sigma >= 0].tolist())
    rest = [j for j in range(len(prov_b)) if j not in used]
    free = np.flatnonzero(sigma < 0)
    if len(free) != len(rest):
        raise ValueError("domains cannot be aligned")
    sigma[free] = rest
    if np.unique(sigma).size != sigma.size:
        raise ValueError("alignment is not a bijection")
    return sigma


def compare_open(alg: FinsetAlgebra, a: OpenObject, b: OpenObject, points, sigma=None,
                 seed: int = 0) -> float:
    """Payload discrepancy plus a port-map check (inf if the ports disagree)."""
    if a.domain_size != b.domain_size or a.n_ports != b.n_ports:
        return float("inf")
    if sigma is not None and not np.array_equal(sigma[a.port_map.map], b.port_map.map):
        return float("inf")
    if sigma is None and a.port_map != b.port_map:
        return float("inf")
    return alg.discrepancy(a.payload, b.payload, points, sigma, seed)
