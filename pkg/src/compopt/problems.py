"""Objectives and the algebras that compose them.

``Opt`` moves an objective along ``phi: N -> M`` by precomposing with the
pullback (``f -> f o phi*``) and puts objectives side by side by summing them
on disjoint coordinate blocks.  ``Saddle`` does the same for objectives whose
coordinates are labelled convex or concave.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .finset import FinFunction
from .opensys import FinsetAlgebra, OpenObject, oapply
from .seeding import mix64, rng_for
from .uwd import CONVEX, UWD, normalize_label

__all__ = [
    "DIFFERENTIABLE",
    "SUBDIFFERENTIABLE",
    "Objective",
    "SaddleObjective",
    "OptAlgebra",
    "SaddleAlgebra",
    "OPT",
    "SADDLE",
    "opt_act",
    "opt_combine",
    "opt_compose",
    "saddle_act",
    "saddle_combine",
    "saddle_compose",
    "quadratic",
    "load_quadratic",
    "finite_difference_grad",
    "abs_sum",
    "jensen_violations",
]

DIFFERENTIABLE = "differentiable"
SUBDIFFERENTIABLE = "subdifferentiable"

Vec = np.ndarray


class Objective:
    """A real function on ``R^dim`` with a first-order oracle.

    ``grad`` is the gradient, or a fixed subgradient selection when the
    objective is only subdifferentiable.  ``subgrad(x, seed)`` may return a
    different (seed-dependent) element of the subdifferential; by default it
    falls back to ``grad``.
    """

    def __init__(
        self,
        dim: int,
        eval: Callable[[Vec], float],
        grad: Callable[[Vec], Vec],
        smoothness: str = DIFFERENTIABLE,
        subgrad: Callable[[Vec, int], Vec] | None = None,
    ):
        if smoothness not in (DIFFERENTIABLE, SUBDIFFERENTIABLE):
            raise ValueError(f"unknown smoothness flag {smoothness!r}")
        self.dim = int(dim)
        self.eval = eval
        self.grad = grad
        self.smoothness = smoothness
        self._subgrad = subgrad

    @property
    def differentiable(self) -> bool:
        return self.smoothness == DIFFERENTIABLE

    def __call__(self, x) -> float:
        return self.eval(np.asarray(x, dtype=float))

    def subgradient(self, x: Vec, seed: int = 0) -> Vec:
        if self._subgrad is None:
            return self.grad(x)
        return self._subgrad(x, seed)

    @property
    def has_random_subgrad(self) -> bool:
        return self._subgrad is not None

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, {self.smoothness})"


class SaddleObjective(Objective):
    """Objective with a convex/concave label on every coordinate."""

    def __init__(self, dim, eval, grad, labels: Sequence[str], smoothness=DIFFERENTIABLE,
                 subgrad=None, strict: bool = False, seed: int = 0):
        super().__init__(dim, eval, grad, smoothness, subgrad)
        labels = tuple(normalize_label(s) for s in labels)
        if len(labels) != self.dim:
            raise ValueError(f"{len(labels)} labels given for dimension {self.dim}")
        self.labels = labels
        if strict:
            bad = jensen_violations(self, np.random.default_rng(seed))
            if bad:
                raise ValueError("saddle spot-check failed: " + bad[0])

    @property
    def sign(self) -> np.ndarray:
        """+1 on convex coordinates, -1 on concave ones."""
        return np.array([1.0 if s == CONVEX else -1.0 for s in self.labels])

    @classmethod
    def from_objective(cls, f: Objective, labels: Sequence[str], strict=False):
        return cls(f.dim, f.eval, f.grad, labels, f.smoothness, f._subgrad, strict)


def jensen_violations(f: Objective, rng: np.random.Generator, pairs: int = 50,
                      scale: float = 2.0, tol: float = 1e-9) -> list[str]:
    """Spot-check convexity (or the saddle property) along random segments.

    For a plain objective every coordinate is treated as convex.  For a
    saddle objective the convex block is moved with the concave block held
    fixed, and vice versa.
    """
    labels = getattr(f, "labels", (CONVEX,) * f.dim)
    cx = np.array([s == CONVEX for s in labels], dtype=bool)
    out = []
    for _ in range(pairs):
        a = rng.uniform(-scale, scale, f.dim)
        b = rng.uniform(-scale, scale, f.dim)
        for mask, sgn in ((cx, 1.0), (~cx, -1.0)):
            if not mask.any():
                continue
            b_ = a.copy()
            b_[mask] = b[mask]
            fa, fb = f.eval(a), f.eval(b_)
            for t in (0.25, 0.5, 0.75):
                m = t * a + (1 - t) * b_
                gap = sgn * (t * fa + (1 - t) * fb - f.eval(m))
                if gap < -tol * max(1.0, abs(fa), abs(fb)):
                    kind = "convex" if sgn > 0 else "concave"
                    out.append(f"{kind} block fails Jensen at t={t} (gap {gap:.3g})")
    return out


# --- Opt ---------------------------------------------------------------

def opt_act(phi: FinFunction, f: Objective) -> Objective:
    if phi.dom_size != f.dim:
        raise ValueError(f"cannot move an objective of dimension {f.dim} along a map "
                         f"with domain size {phi.dom_size}")
    idx = phi.map
    m = phi.codom_size

    def eval_(y):
        return f.eval(y[idx])

    def grad(y):
        return np.bincount(idx, weights=f.grad(y[idx]), minlength=m)

    subgrad = None
    if f.has_random_subgrad:
        def subgrad(y, seed):
            return np.bincount(idx, weights=f.subgradient(y[idx], seed), minlength=m)

    return Objective(m, eval_, grad, f.smoothness, subgrad)


def _blocks(dims: Sequence[int]) -> list[slice]:
    offs = np.concatenate([[0], np.cumsum(dims, dtype=np.int64)]).tolist()
    return [slice(offs[i], offs[i + 1]) for i in range(len(dims))]


def opt_combine(fs: Sequence[Objective]) -> Objective:
    fs = list(fs)
    blocks = _blocks([f.dim for f in fs])
    dim = sum(f.dim for f in fs)
    pairs = list(zip(fs, blocks))

    def eval_(z):
        total = 0.0
        for f, s in pairs:
            total += f.eval(z[s])
        return total

    def grad(z):
        if not pairs:
            return np.zeros(0)
        return np.concatenate([f.grad(z[s]) for f, s in pairs])

    smooth = DIFFERENTIABLE if all(f.differentiable for f in fs) else SUBDIFFERENTIABLE
    subgrad = None
    if any(f.has_random_subgrad for f in fs):
        def subgrad(z, seed):
            return np.concatenate(
                [f.subgradient(z[s], mix64(seed, i)) for i, (f, s) in enumerate(pairs)]
            )

    return Objective(dim, eval_, grad, smooth, subgrad)


class OptAlgebra(FinsetAlgebra[Objective]):
    name = "Opt"

    def dimension(self, t):
        return t.dim

    def act(self, phi, t):
        return opt_act(phi, t)

    def combine(self, ts):
        return opt_combine(ts)

    def evaluate(self, t, x, seed=0):
        return np.array([t.eval(x)]), t.subgradient(x, seed)


OPT = OptAlgebra()


def opt_compose(diagram: UWD, fillers: Sequence[OpenObject]) -> OpenObject:
    return oapply(OPT, diagram, fillers)


# --- Saddle ------------------------------------------------------------

def _transport_labels(phi: FinFunction, labels: Sequence[str], target: Sequence[str] | None,
                      codom_labels_hint: dict[int, str] | None = None) -> tuple[str, ...]:
    out: list[str | None] = [None] * phi.codom_size
    if target is not None:
        out = [normalize_label(s) for s in target]
        if len(out) != phi.codom_size:
            raise ValueError(f"{len(out)} target labels for codomain of size {phi.codom_size}")
    if codom_labels_hint:
        for j, s in codom_labels_hint.items():
            if out[j] is None:
                out[j] = s
            elif out[j] != s:
                raise ValueError(f"label mismatch at junction {j}: {out[j]} vs {s}")
    for i, j in enumerate(phi):
        if out[j] is None:
            out[j] = labels[i]
        elif out[j] != labels[i]:
            raise ValueError(
                f"label mismatch at junction {j}: coordinate {i} is {labels[i]} "
                f"but the junction is {out[j]}"
            )
    return tuple(CONVEX if s is None else s for s in out)


def saddle_act(phi: FinFunction, f: SaddleObjective, labels: Sequence[str] | None = None
               ) -> SaddleObjective:
    """Move ``f`` along ``phi``; ``labels`` are the codomain's labels.

    When ``labels`` is omitted they are transported from ``f``; codomain
    elements nobody maps to are labelled convex.
    """
    new_labels = _transport_labels(phi, f.labels, labels)
    g = opt_act(phi, f)
    return SaddleObjective(g.dim, g.eval, g.grad, new_labels, g.smoothness, g._subgrad)


def saddle_combine(fs: Sequence[SaddleObjective]) -> SaddleObjective:
    g = opt_combine(fs)
    labels = tuple(s for f in fs for s in f.labels)
    return SaddleObjective(g.dim, g.eval, g.grad, labels, g.smoothness, g._subgrad)


class SaddleAlgebra(FinsetAlgebra[SaddleObjective]):
    name = "Saddle"

    def dimension(self, t):
        return t.dim

    def act(self, phi, t):
        return saddle_act(phi, t)

    def combine(self, ts):
        return saddle_combine(ts)

    def act_along_pushout(self, p_S, p_J, diagram, t):
        hint = None
        if diagram.junction_labels is not None:
            hint = {}
            for j, s in zip(p_J.map.tolist(), diagram.junction_labels):
                if hint.setdefault(j, s) != s:
                    raise ValueError(f"label mismatch at junction {j}: {hint[j]} vs {s}")
        new_labels = _transport_labels(p_S, t.labels, None, hint)
        return saddle_act(p_S, t, new_labels)

    def evaluate(self, t, x, seed=0):
        return np.array([t.eval(x)]), np.column_stack([t.subgradient(x, seed), t.sign])


SADDLE = SaddleAlgebra()


def saddle_compose(diagram: UWD, fillers: Sequence[OpenObject]) -> OpenObject:
    return oapply(SADDLE, diagram, fillers)


# --- concrete objectives -------------------------------------------------

def quadratic(P, q=None, c: float = 0.0, labels: Sequence[str] | None = None) -> Objective:
    """``x -> 0.5 x'Px + q'x + c``; a :class:`SaddleObjective` when labelled."""
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"P must be square, got shape {P.shape}")
    n = P.shape[0]
    q = np.zeros(n) if q is None else np.array(q, dtype=float)
    if q.shape != (n,):
        raise ValueError(f"q must have length {n}, got shape {q.shape}")
    S = 0.5 * (P + P.T)

    def eval_(x):
        return float(0.5 * x @ S @ x + q @ x + c)

    def grad(x):
        return S @ x + q

    if labels is not None:
        return SaddleObjective(n, eval_, grad, labels)
    return Objective(n, eval_, grad)


def load_quadratic(source: str | Path | dict) -> Objective:
    data = source
    if not isinstance(source, dict):
        with open(source) as fh:
            data = json.load(fh)
    try:
        return quadratic(data["P"], data.get("q"), data.get("c", 0.0), data.get("labels"))
    except KeyError as exc:
        raise ValueError(f"quadratic objective JSON is missing {exc}") from exc


def finite_difference_grad(eval_: Callable[[Vec], float], h_rel: float = 1e-6):
    """Central-difference gradient, step ``h_rel * max(1, |x_i|)``."""

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        for i in range(x.size):
            h = h_rel * max(1.0, abs(x[i]))
            e = x.copy()
            e[i] = x[i] + h
            fp = eval_(e)
            e[i] = x[i] - h
            fm = eval_(e)
            g[i] = (fp - fm) / (2 * h)
        return g

    return grad


def abs_sum(weights, labels: Sequence[str] | None = None) -> Objective:
    """``x -> sum_i w_i |x_i|`` with ``w_i`` of either sign.

    The deterministic selection uses ``sign(0) = 0``; the seeded selection
    draws a uniform element of ``w_i * [-1, 1]`` at kinks.
    """
    w = np.array(weights, dtype=float)

    def eval_(x):
        return float(w @ np.abs(x))

    def grad(x):
        return w * np.sign(x)

    def subgrad(x, seed):
        g = np.sign(x)
        kink = g == 0
        if kink.any():
            g[kink] = rng_for(seed).uniform(-1.0, 1.0, int(kink.sum()))
        return w * g

    if labels is not None:
        return SaddleObjective(w.size, eval_, grad, labels, SUBDIFFERENTIABLE, subgrad)
    return Objective(w.size, eval_, grad, SUBDIFFERENTIABLE, subgrad)
