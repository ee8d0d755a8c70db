"""Undirected wiring diagrams and their substitution.

A diagram with boxes of sizes ``P_1, ..., P_n`` is stored as the cospan
``P_1 + ... + P_n --inner_map--> J <--outer_map-- P'``.  Typed diagrams carry
a convex/concave label on every junction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .finset import FinFunction, compose, coproduct_all, identity, pushout

__all__ = [
    "CONVEX",
    "CONCAVE",
    "UWD",
    "normalize_label",
    "identity_uwd",
    "substitute",
    "validate",
    "permute_boxes",
    "iso_check",
    "canonical",
    "load_uwd",
    "dump_uwd",
]

CONVEX = "convex"
CONCAVE = "concave"

_LABEL_ALIASES = {
    "convex": CONVEX,
    "cx": CONVEX,
    "min": CONVEX,
    "concave": CONCAVE,
    "cc": CONCAVE,
    "max": CONCAVE,
}


def normalize_label(label: str) -> str:
    try:
        return _LABEL_ALIASES[str(label).lower()]
    except KeyError:
        raise ValueError(f"unknown label {label!r}; expected convex/cx or concave/cc") from None


@dataclass(frozen=True, eq=False)
class UWD:
    """A (possibly typed) undirected wiring diagram.

    Construction does not enforce the invariants so that malformed diagrams
    can be inspected with :func:`validate`; call :meth:`check` to raise.
    """

    box_ports: tuple[int, ...]
    junctions: int
    inner_map: FinFunction
    outer_map: FinFunction
    junction_labels: tuple[str, ...] | None = None
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "box_ports", tuple(int(p) for p in self.box_ports))
        object.__setattr__(self, "junctions", int(self.junctions))
        if self.junction_labels is not None:
            object.__setattr__(
                self,
                "junction_labels",
                tuple(normalize_label(s) for s in self.junction_labels),
            )
        offsets = np.concatenate([[0], np.cumsum(self.box_ports, dtype=np.int64)])
        object.__setattr__(self, "_offsets", offsets)

    @classmethod
    def from_lists(cls, box_ports, junctions, inner_map, outer_map, labels=None) -> "UWD":
        d = cls(
            tuple(box_ports),
            junctions,
            FinFunction(inner_map, junctions),
            FinFunction(outer_map, junctions),
            None if labels is None else tuple(labels),
        )
        d.check()
        return d

    @property
    def n_boxes(self) -> int:
        return len(self.box_ports)

    @property
    def n_outer(self) -> int:
        return self.outer_map.dom_size

    @property
    def typed(self) -> bool:
        return self.junction_labels is not None

    def box_slice(self, i: int) -> slice:
        return slice(int(self._offsets[i]), int(self._offsets[i + 1]))

    def box_map(self, i: int) -> FinFunction:
        """Wiring of box ``i``'s ports into the junctions."""
        return FinFunction(self.inner_map.map[self.box_slice(i)], self.junctions)

    def port_labels(self, i: int) -> tuple[str, ...] | None:
        if self.junction_labels is None:
            return None
        return tuple(self.junction_labels[j] for j in self.box_map(i))

    def outer_labels(self) -> tuple[str, ...] | None:
        if self.junction_labels is None:
            return None
        return tuple(self.junction_labels[j] for j in self.outer_map)

    def check(self) -> None:
        problems = validate(self)
        if problems:
            raise ValueError("invalid wiring diagram: " + "; ".join(problems))

    def __eq__(self, other):
        if not isinstance(other, UWD):
            return NotImplemented
        return (
            self.box_ports == other.box_ports
            and self.junctions == other.junctions
            and self.inner_map == other.inner_map
            and self.outer_map == other.outer_map
            and self.junction_labels == other.junction_labels
        )

    def __hash__(self):
        return hash((self.box_ports, self.junctions, self.inner_map, self.outer_map,
                     self.junction_labels))

    def to_dict(self) -> dict:
        out = {
            "boxes": list(self.box_ports),
            "junctions": self.junctions,
            "inner_map": self.inner_map.tolist(),
            "outer_map": self.outer_map.tolist(),
        }
        if self.junction_labels is not None:
            out["labels"] = ["cx" if s == CONVEX else "cc" for s in self.junction_labels]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "UWD":
        """Parse the JSON form; raises ``ValueError`` on malformed input."""
        try:
            boxes = [int(b) for b in data["boxes"]]
            junctions = int(data["junctions"])
            inner = [int(v) for v in data["inner_map"]]
            outer = [int(v) for v in data.get("outer_map", [])]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed diagram JSON: {exc}") from exc
        labels = data.get("labels")
        return cls.from_lists(boxes, junctions, inner, outer, labels)


def validate(d: UWD) -> list[str]:
    """Human-readable list of invariant violations (empty when well formed)."""
    out = []
    if any(p < 0 for p in d.box_ports):
        out.append(f"negative port count in box_ports {list(d.box_ports)}")
    if d.junctions < 0:
        out.append(f"negative junction count {d.junctions}")
    total = sum(d.box_ports)
    if d.inner_map.dom_size != total:
        out.append(
            f"inner_map has domain size {d.inner_map.dom_size} but boxes have {total} ports"
        )
    if d.inner_map.codom_size != d.junctions:
        out.append(
            f"inner_map has codomain size {d.inner_map.codom_size}, expected {d.junctions} junctions"
        )
    if d.outer_map.codom_size != d.junctions:
        out.append(
            f"outer_map has codomain size {d.outer_map.codom_size}, expected {d.junctions} junctions"
        )
    if d.junction_labels is not None and len(d.junction_labels) != d.junctions:
        out.append(
            f"{len(d.junction_labels)} junction labels given for {d.junctions} junctions"
        )
    return out


def identity_uwd(n: int, labels: Sequence[str] | None = None) -> UWD:
    return UWD((n,), n, identity(n), identity(n), None if labels is None else tuple(labels))


def _pushout_labels(p: FinFunction, p_labels, q: FinFunction, q_labels, apex: int):
    labels: list[str | None] = [None] * apex
    for fn, src in ((p, p_labels), (q, q_labels)):
        for i, j in enumerate(fn):
            if labels[j] is None:
                labels[j] = src[i]
            elif labels[j] != src[i]:
                raise ValueError(
                    f"label mismatch at junction {j}: {labels[j]} vs {src[i]}"
                )
    return tuple(CONVEX if s is None else s for s in labels)


def substitute(target: UWD, fillers: Sequence[UWD]) -> UWD:
    """Plug ``fillers[i]`` into box ``i`` of ``target``."""
    if len(fillers) != target.n_boxes:
        raise ValueError(
            f"target has {target.n_boxes} boxes but {len(fillers)} fillers were given"
        )
    for i, f in enumerate(fillers):
        if f.n_outer != target.box_ports[i]:
            raise ValueError(
                f"box {i} has {target.box_ports[i]} ports but its filler exposes {f.n_outer}"
            )
    typed = target.typed or any(f.typed for f in fillers)
    if typed:
        if not (target.typed and all(f.typed for f in fillers)):
            raise ValueError("cannot mix typed and untyped diagrams in substitution")
        for i, f in enumerate(fillers):
            want, got = target.port_labels(i), f.outer_labels()
            if want != got:
                k = next(k for k in range(len(want)) if want[k] != got[k])
                raise ValueError(
                    f"label mismatch at junction {target.box_map(i)(k)} of the target "
                    f"(box {i}, port {k}): {want[k]} vs {got[k]}"
                )

    r_sum = coproduct_all([f.outer_map for f in fillers])
    l_sum = coproduct_all([f.inner_map for f in fillers])
    po = pushout(r_sum, target.inner_map)
    inner = compose(l_sum, po.proj_left)
    outer = compose(target.outer_map, po.proj_right)
    labels = None
    if typed:
        filler_labels = [s for f in fillers for s in f.junction_labels]
        labels = _pushout_labels(
            po.proj_left, filler_labels, po.proj_right, target.junction_labels, po.apex_size
        )
    boxes = tuple(p for f in fillers for p in f.box_ports)
    return UWD(boxes, po.apex_size, inner, outer, labels)


def permute_boxes(d: UWD, perm: Sequence[int]) -> UWD:
    """Reorder boxes so that new box ``k`` is old box ``perm[k]``."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(d.n_boxes)):
        raise ValueError(f"{perm} is not a permutation of {d.n_boxes} boxes")
    parts = [d.inner_map.map[d.box_slice(i)] for i in perm]
    values = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return UWD(
        tuple(d.box_ports[i] for i in perm),
        d.junctions,
        FinFunction(values, d.junctions),
        d.outer_map,
        d.junction_labels,
    )


def iso_check(a: UWD, b: UWD) -> np.ndarray | None:
    """Find a junction bijection ``sigma`` carrying ``a`` onto ``b``.

    Returns ``sigma`` as an array (``sigma[j_a] = j_b``) or ``None`` when the
    diagrams are not isomorphic with boxes and ports held fixed.
    """
    if (a.box_ports != b.box_ports or a.junctions != b.junctions
            or a.n_outer != b.n_outer or a.typed != b.typed):
        return None
    sigma = np.full(a.junctions, -1, dtype=np.int64)
    for fa, fb in ((a.inner_map, b.inner_map), (a.outer_map, b.outer_map)):
        for ja, jb in zip(fa.map.tolist(), fb.map.tolist()):
            if sigma[ja] == -1:
                sigma[ja] = jb
            elif sigma[ja] != jb:
                return None
    used = set(sigma[sigma >= 0].tolist())
    if len(used) != int((sigma >= 0).sum()):
        return None
    # junctions without ports: pair them up, respecting labels
    free_a = np.flatnonzero(sigma < 0).tolist()
    free_b = [j for j in range(b.junctions) if j not in used]
    if a.typed:
        for lab in (CONVEX, CONCAVE):
            fa = [j for j in free_a if a.junction_labels[j] == lab]
            fb = [j for j in free_b if b.junction_labels[j] == lab]
            if len(fa) != len(fb):
                return None
            sigma[fa] = fb
        if any(a.junction_labels[j] != b.junction_labels[sigma[j]] for j in range(a.junctions)):
            return None
    else:
        sigma[free_a] = free_b
    return sigma


def canonical(d: UWD) -> UWD:
    """Renumber junctions by first appearance (inner ports, outer ports, rest)."""
    order: dict[int, int] = {}
    for j in list(d.inner_map) + list(d.outer_map) + list(range(d.junctions)):
        order.setdefault(j, len(order))
    sigma = np.array([order[j] for j in range(d.junctions)], dtype=np.int64)
    labels = None
    if d.junction_labels is not None:
        labels = [None] * d.junctions
        for j, s in enumerate(d.junction_labels):
            labels[sigma[j]] = s
    return UWD(
        d.box_ports,
        d.junctions,
        FinFunction(sigma[d.inner_map.map], d.junctions),
        FinFunction(sigma[d.outer_map.map], d.junctions),
        None if labels is None else tuple(labels),
    )


def load_uwd(path: str | Path) -> UWD:
    with open(path) as fh:
        return UWD.from_dict(json.load(fh))


def dump_uwd(d: UWD, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(d.to_dict(), fh)
