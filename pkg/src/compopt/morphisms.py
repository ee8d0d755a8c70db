"""Solution methods as maps from problems to dynamical systems.

Each transformation here turns a problem payload into a system payload and
commutes with composition: transforming a composite problem gives the same
system as transforming its pieces and composing the systems.
:func:`check_naturality` measures how far that holds numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    DYNAM_D,
    DiscreteMap,
    SelectorField,
    VectorField,
    euler,
)
from .finset import FinFunction, coproduct_all, pushout
from .opensys import FinsetAlgebra, OpenObject, oapply
from .problems import DIFFERENTIABLE, Objective, SaddleObjective
from .uwd import CONCAVE, CONVEX, UWD

__all__ = [
    "grad_flow",
    "saddle_flow",
    "gd",
    "gad",
    "subgrad_flow",
    "supergrad_flow",
    "pd_subg",
    "lift",
    "generate_solver",
    "NaturalityReport",
    "check_naturality",
    "inf_objective",
    "InnerSolveError",
]


def grad_flow(f: Objective) -> VectorField:
    if not f.differentiable:
        raise ValueError("objective is not differentiable; use subgrad_flow instead")
    g = f.grad
    return VectorField(f.dim, lambda x: -g(x))


def gd(f: Objective, gamma: float) -> DiscreteMap:
    """``x -> x - gamma * grad f(x)``, built as Euler of the gradient flow."""
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    return euler(grad_flow(f), gamma)


def saddle_flow(L: SaddleObjective) -> VectorField:
    """Descend in convex coordinates, ascend in concave ones."""
    if not L.differentiable:
        raise ValueError("objective is not differentiable; use pd_subg instead")
    s, g = L.sign, L.grad
    return VectorField(L.dim, lambda x: -(s * g(x)))


def gad(L: SaddleObjective, gamma: float) -> DiscreteMap:
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    return euler(saddle_flow(L), gamma)


def subgrad_flow(f: Objective) -> SelectorField:
    labels = getattr(f, "labels", None)
    if labels is not None and CONCAVE in labels:
        raise ValueError("subgrad_flow needs a convex objective; got concave coordinates")
    sub = f.subgradient
    return SelectorField(f.dim, lambda x, seed: -sub(x, seed))


def supergrad_flow(f: Objective) -> SelectorField:
    labels = getattr(f, "labels", None)
    if labels is None or CONVEX in labels:
        raise ValueError("supergrad_flow needs an objective with all coordinates labelled concave")
    sub = f.subgradient
    return SelectorField(f.dim, lambda x, seed: sub(x, seed))


def pd_subg(L: SaddleObjective) -> SelectorField:
    if not isinstance(L, SaddleObjective):
        raise ValueError("pd_subg needs a labelled (saddle) objective")
    s, sub = L.sign, L.subgradient
    return SelectorField(L.dim, lambda x, seed: -(s * sub(x, seed)))


def lift(morphism: Callable) -> Callable[[OpenObject], OpenObject]:
    """Apply a payload transformation to an open object, keeping its ports."""

    def lifted(o: OpenObject) -> OpenObject:
        return OpenObject(o.domain_size, morphism(o.payload), o.port_map)

    return lifted


def generate_solver(diagram: UWD, objectives: Sequence[OpenObject], gamma: float) -> OpenObject:
    """Distributed gradient descent: ``gd`` each piece, compose as discrete systems."""
    step = lift(lambda f: gd(f, gamma))
    return oapply(DYNAM_D, diagram, [step(o) for o in objectives])


@dataclass
class NaturalityReport:
    max_discrepancy: float
    tolerance: float
    per_point: list[float]
    suspect_boxes: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        msg = f"{status}: max discrepancy {self.max_discrepancy:.3e} (tol {self.tolerance:.0e})"
        if self.suspect_boxes:
            msg += f"; suspect boxes {self.suspect_boxes}"
        return msg


def check_naturality(alg_src: FinsetAlgebra, alg_dst: FinsetAlgebra, morphism: Callable,
                     diagram: UWD, fillers: Sequence[OpenObject], points,
                     tol: float = 1e-9, seed: int = 0) -> NaturalityReport:
    """Compare compose-then-transform with transform-then-compose.

    When the square fails, each box is checked against its own inclusion
    into the composite domain; boxes whose small square fails are reported
    as suspects.
    """
    top = morphism(oapply(alg_src, diagram, fillers).payload)
    bottom = oapply(alg_dst, diagram, [lift(morphism)(f) for f in fillers]).payload
    per_point = [alg_dst.discrepancy(top, bottom, [y], seed=seed + k)
                 for k, y in enumerate(points)]
    worst = max(per_point, default=0.0)
    report = NaturalityReport(worst, tol, per_point)
    if worst > tol:
        report.suspect_boxes = _locate(alg_src, alg_dst, morphism, diagram, fillers, points,
                                       tol, seed)
    return report


def _locate(alg_src, alg_dst, morphism, diagram, fillers, points, tol, seed) -> list[int]:
    po = pushout(coproduct_all([f.port_map for f in fillers]), diagram.inner_map)
    offs = np.concatenate([[0], np.cumsum([f.domain_size for f in fillers])]).astype(int)
    suspects = []
    for i, f in enumerate(fillers):
        inc = FinFunction(po.proj_left.map[offs[i]:offs[i + 1]], po.apex_size)
        a = morphism(alg_src.act(inc, f.payload))
        b = alg_dst.act(inc, morphism(f.payload))
        if alg_dst.discrepancy(a, b, points, seed=seed) > tol:
            suspects.append(i)
    return suspects


# --- inner minimisation -------------------------------------------------------

class InnerSolveError(RuntimeError):
    pass


def _nested_gd(grad_z: Callable[[np.ndarray], np.ndarray], z0: np.ndarray, gamma: float,
               tol: float, max_iter: int) -> np.ndarray:
    z = z0.copy()
    for _ in range(max_iter):
        g = grad_z(z)
        if np.linalg.norm(g) <= tol:
            return z
        z = z - gamma * g
        if not np.all(np.isfinite(z)):
            break
    raise InnerSolveError(
        f"inner gradient descent did not reach gradient norm {tol:g} "
        f"within {max_iter} iterations (step {gamma:g})"
    )


def inf_objective(f: Objective, keep: Sequence[int], argmin: Callable | None = None,
                  inner_gamma: float = 0.1, tol: float = 1e-10, max_iter: int = 100_000,
                  z0=None) -> Objective:
    """``u -> inf_z f(u, z)`` where ``u`` are the coordinates in ``keep``.

    The gradient uses the envelope formula ``grad_u f(u, z*(u))``, valid when
    the inner minimiser is unique.  ``argmin(u)`` may supply ``z*``
    directly; otherwise nested gradient descent with step ``inner_gamma``
    is used.
    """
    if not f.differentiable:
        raise ValueError("inf_objective needs a differentiable objective")
    keep = np.asarray(keep, dtype=np.int64)
    if np.unique(keep).size != keep.size or (keep.size and (keep.min() < 0 or keep.max() >= f.dim)):
        raise ValueError(f"invalid kept coordinates {keep.tolist()} for dimension {f.dim}")
    hidden = np.setdiff1d(np.arange(f.dim), keep)
    z_init = np.zeros(hidden.size) if z0 is None else np.asarray(z0, dtype=float)

    def join(u, z):
        x = np.empty(f.dim)
        x[keep] = u
        x[hidden] = z
        return x

    def solve(u):
        if argmin is not None:
            return np.asarray(argmin(u), dtype=float)
        return _nested_gd(lambda z: f.grad(join(u, z))[hidden], z_init, inner_gamma, tol, max_iter)

    def eval_(u):
        return f.eval(join(u, solve(u)))

    def grad(u):
        return f.grad(join(u, solve(u)))[keep]

    obj = Objective(keep.size, eval_, grad, DIFFERENTIABLE)
    obj.argmin = solve
    return obj
