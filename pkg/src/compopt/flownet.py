"""Minimum-cost network flow: networks as open objects and their duals.

A network is ``(E, src, tgt, costs, balance)``.  Networks glue along shared
vertices (balances add).  :func:`netflow` turns a network into its concave
Lagrange dual ``lam -> inf_x sum_e cost_e(x_e) + lam'(Ax - b)``; because
gluing networks corresponds to composing their duals, dual decomposition can
be run either on the glued network or piecewise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .dynamics import DYNAM_D, simulate, simulate_message_passing
from .finset import FinFunction, coproduct_all, compose, pushout
from .morphisms import gad, lift
from .opensys import FinsetAlgebra, OpenObject, oapply
from .problems import DIFFERENTIABLE, SUBDIFFERENTIABLE, SaddleObjective
from .uwd import CONCAVE, UWD

__all__ = [
    "QuadraticCost",
    "GenericCost",
    "FlowNetwork",
    "FLOWNET",
    "flownet_act",
    "flownet_combine",
    "incidence_matrix",
    "incidence_dense",
    "NetflowObjective",
    "netflow",
    "DualResult",
    "dual_ascent",
    "dual_decomposition_standard",
    "dual_decomposition_hierarchical",
    "network_from_dict",
    "network_to_dict",
    "load_network",
]


@dataclass(frozen=True)
class QuadraticCost:
    """``xi -> a xi^2 + b xi`` with ``a > 0``."""

    a: float
    b: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"quadratic cost needs a > 0 (got a={self.a}); "
                             "a=0 makes the dual unbounded")

    def eval(self, xi):
        return self.a * xi * xi + self.b * xi

    def deriv(self, xi):
        return 2.0 * self.a * xi + self.b

    def argmin_shifted(self, c: float) -> float:
        """Minimiser of ``cost(xi) + c * xi``."""
        return -(self.b + c) / (2.0 * self.a)


@dataclass(frozen=True)
class GenericCost:
    """Convex edge cost given by value and derivative oracles.

    The shifted argmin is found by bisection on ``deriv(xi) + c``.
    """

    eval: Callable[[float], float]
    deriv: Callable[[float], float]
    strictly_convex: bool = True
    tol: float = 1e-12
    max_expansions: int = 200

    def argmin_shifted(self, c: float) -> float:
        g = lambda xi: self.deriv(xi) + c
        lo, hi = -1.0, 1.0
        for _ in range(self.max_expansions):
            if g(lo) <= 0 <= g(hi):
                break
            if g(lo) > 0:
                lo *= 2.0
            if g(hi) < 0:
                hi *= 2.0
        else:
            raise ArithmeticError("could not bracket the edge minimiser")
        for _ in range(2000):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if abs(gm) <= self.tol or hi - lo <= 1e-15 * max(1.0, abs(mid)):
                return mid
            if gm > 0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)


class FlowNetwork:
    """Vertices ``[V]``, edges ``[E]`` with endpoint maps, edge costs and balances."""

    def __init__(self, src: FinFunction, tgt: FinFunction, costs: Sequence, balance,
                 check_balance: bool = True):
        if src.dom_size != tgt.dom_size:
            raise ValueError(f"src has {src.dom_size} edges but tgt has {tgt.dom_size}")
        if src.codom_size != tgt.codom_size:
            raise ValueError("src and tgt disagree on the vertex count")
        if len(costs) != src.dom_size:
            raise ValueError(f"{len(costs)} costs given for {src.dom_size} edges")
        balance = np.array(balance, dtype=float).reshape(-1)
        if balance.size != src.codom_size:
            raise ValueError(f"balance has length {balance.size}, expected {src.codom_size}")
        if check_balance:
            total = float(balance.sum())
            if abs(total) > 1e-12 * max(1.0, float(np.abs(balance).sum())):
                raise ValueError(f"balance must sum to zero, sums to {total:.3e}")
        balance.flags.writeable = False
        self.src = src
        self.tgt = tgt
        self.costs = tuple(costs)
        self.balance = balance

    @property
    def V(self) -> int:
        return self.src.codom_size

    @property
    def E(self) -> int:
        return self.src.dom_size

    @property
    def dim(self) -> int:
        return self.V

    @property
    def all_quadratic(self) -> bool:
        return all(isinstance(c, QuadraticCost) for c in self.costs)

    def quadratic_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.all_quadratic:
            raise ValueError("network has non-quadratic costs")
        return (np.array([c.a for c in self.costs], dtype=float),
                np.array([c.b for c in self.costs], dtype=float))

    def cost(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.all_quadratic:
            a, b = self.quadratic_coefficients()
            return float(np.sum(a * x * x + b * x))
        return float(sum(c.eval(float(v)) for c, v in zip(self.costs, x)))

    def __repr__(self):
        return f"FlowNetwork(V={self.V}, E={self.E})"


def flownet_act(phi: FinFunction, G: FlowNetwork) -> FlowNetwork:
    if phi.dom_size != G.V:
        raise ValueError(f"network has {G.V} vertices but the map has domain size {phi.dom_size}")
    b = np.bincount(phi.map, weights=G.balance, minlength=phi.codom_size)
    return FlowNetwork(compose(G.src, phi), compose(G.tgt, phi), G.costs, b,
                       check_balance=False)


def flownet_combine(Gs: Sequence[FlowNetwork]) -> FlowNetwork:
    Gs = list(Gs)
    src = coproduct_all([G.src for G in Gs])
    tgt = coproduct_all([G.tgt for G in Gs])
    costs = [c for G in Gs for c in G.costs]
    b = np.concatenate([G.balance for G in Gs]) if Gs else np.zeros(0)
    return FlowNetwork(src, tgt, costs, b, check_balance=False)


class _FlowNetAlgebra(FinsetAlgebra[FlowNetwork]):
    name = "FlowNet"

    def dimension(self, t):
        return t.V

    def act(self, phi, t):
        return flownet_act(phi, t)

    def combine(self, ts):
        return flownet_combine(ts)

    def evaluate(self, t, x, seed=0):
        # vertex potentials seen from each edge are invariant; balance moves with vertices
        costs = np.array([c.eval(float(v)) for c, v in zip(t.costs, x[t.src.map] - x[t.tgt.map])])
        return np.concatenate([x[t.src.map], x[t.tgt.map], costs]), t.balance


FLOWNET = _FlowNetAlgebra()


def incidence_matrix(G: FlowNetwork) -> sparse.csr_array:
    """``V x E`` with +1 at the source, -1 at the target, zero columns for loops."""
    e = np.arange(G.E)
    keep = G.src.map != G.tgt.map
    rows = np.concatenate([G.src.map[keep], G.tgt.map[keep]])
    cols = np.concatenate([e[keep], e[keep]])
    vals = np.concatenate([np.ones(keep.sum()), -np.ones(keep.sum())])
    return sparse.csr_array((vals, (rows, cols)), shape=(G.V, G.E))


def incidence_dense(G: FlowNetwork) -> np.ndarray:
    A = np.zeros((G.V, G.E))
    e = np.arange(G.E)
    A[G.src.map, e] += 1.0
    A[G.tgt.map, e] -= 1.0
    return A


class NetflowObjective(SaddleObjective):
    """Concave dual of a flow network; ``flows(lam)`` recovers the inner minimiser."""

    def __init__(self, G: FlowNetwork):
        self.network = G
        A = incidence_dense(G)
        self.A = A
        b = G.balance
        strict = all(getattr(c, "strictly_convex", True) for c in G.costs)
        if G.all_quadratic:
            qa, qb = G.quadratic_coefficients()
            inv2a = 1.0 / (2.0 * qa)

            def flows(lam):
                return -(qb + A.T @ lam) * inv2a

            def eval_(lam):
                x = flows(lam)
                return float(np.sum(qa * x * x + qb * x) + lam @ (A @ x - b))
        else:
            costs = G.costs

            def flows(lam):
                c = A.T @ lam
                x = np.empty(G.E)
                for e, (cost, ce) in enumerate(zip(costs, c)):
                    try:
                        x[e] = cost.argmin_shifted(float(ce))
                    except ArithmeticError as exc:
                        raise ArithmeticError(f"inner solve failed on edge {e}: {exc}") from exc
                return x

            def eval_(lam):
                x = flows(lam)
                return float(G.cost(x) + lam @ (A @ x - b))

        def grad(lam):
            return A @ flows(lam) - b

        self.flows = flows
        super().__init__(G.V, eval_, grad, (CONCAVE,) * G.V,
                         DIFFERENTIABLE if strict else SUBDIFFERENTIABLE)


def netflow(G: FlowNetwork) -> NetflowObjective:
    return NetflowObjective(G)


@dataclass
class DualResult:
    lambdas: np.ndarray
    flows: np.ndarray
    residual: float
    dual_value: float

    @property
    def iterations(self) -> int:
        return len(self.lambdas) - 1


def dual_ascent(G: FlowNetwork, gamma: float = 0.01, tol: float = 1e-6,
                max_iter: int = 2_000_000, lam0=None) -> tuple[np.ndarray, np.ndarray, int]:
    """Gradient ascent on the dual until ``||Ax - b||_inf <= tol``.

    Returns ``(lam, flows, iterations)``.
    """
    L = netflow(G)
    lam = np.zeros(G.V) if lam0 is None else np.array(lam0, dtype=float)
    for k in range(max_iter + 1):
        g = L.grad(lam)
        if np.max(np.abs(g), initial=0.0) <= tol:
            return lam, L.flows(lam), k
        lam = lam + gamma * g
    raise RuntimeError(f"dual ascent did not reach residual {tol:g} in {max_iter} iterations")


def _init(lam0, n):
    lam = np.zeros(n) if lam0 is None else np.array(lam0, dtype=float)
    if lam.shape != (n,):
        raise ValueError(f"initial multipliers have shape {lam.shape}, expected ({n},)")
    return lam


def dual_decomposition_standard(diagram: UWD, nets: Sequence[OpenObject], gamma: float = 0.01,
                                iters: int = 10, lam0=None) -> DualResult:
    """Glue the networks first, then run dual ascent on the glued network."""
    glued = oapply(FLOWNET, diagram, nets).payload
    L = netflow(glued)
    lambdas = simulate(gad(L, gamma), _init(lam0, glued.V), iters)
    lam = lambdas[-1]
    x = L.flows(lam)
    residual = float(np.max(np.abs(L.A @ x - glued.balance), initial=0.0))
    return DualResult(lambdas, x, residual, L.eval(lam))


def dual_decomposition_hierarchical(diagram: UWD, nets: Sequence[OpenObject], gamma: float = 0.01,
                                    iters: int = 10, lam0=None,
                                    executor: str = "closure") -> DualResult:
    """Dual ascent on every network separately, composed as discrete systems.

    ``executor`` is ``"closure"`` (iterate the composed system) or
    ``"serial"``/``"parallel"`` (message passing between the pieces).
    """
    duals = [lift(netflow)(o) for o in nets]
    systems = [lift(lambda L: gad(L, gamma))(o) for o in duals]
    po = pushout(coproduct_all([o.port_map for o in nets]), diagram.inner_map)
    if executor == "closure":
        composite = oapply(DYNAM_D, diagram, systems)
        lambdas = simulate(composite.payload, _init(lam0, composite.domain_size), iters)
    elif executor in ("serial", "parallel"):
        lambdas = simulate_message_passing(diagram, systems, _init(lam0, po.apex_size), iters,
                                           mode=executor)
    else:
        raise ValueError(f"unknown executor {executor!r}")
    lam = lambdas[-1]

    local = lam[po.proj_left.map]
    offs = np.concatenate([[0], np.cumsum([o.domain_size for o in nets])]).astype(int)
    xs, violations, value = [], [], 0.0
    for i, o in enumerate(duals):
        li = local[offs[i]:offs[i + 1]]
        xs.append(o.payload.flows(li))
        violations.append(o.payload.grad(li))
        value += o.payload.eval(li)
    x = np.concatenate(xs) if xs else np.zeros(0)
    viol = np.concatenate(violations) if violations else np.zeros(0)
    total = np.bincount(po.proj_left.map, weights=viol, minlength=po.apex_size)
    residual = float(np.max(np.abs(total), initial=0.0))
    return DualResult(lambdas, x, residual, value)


# --- JSON ----------------------------------------------------------------------

def _cost_from_dict(d: dict):
    kind = d.get("type", "quadratic")
    if kind != "quadratic":
        raise ValueError(f"unsupported cost type {kind!r}")
    return QuadraticCost(float(d["a"]), float(d.get("b", 0.0)))


def network_from_dict(data: dict) -> OpenObject:
    """Parse a network; the result's ports are ``data["ports"]`` (default none)."""
    try:
        V, E = int(data["V"]), int(data["E"])
        src = FinFunction(data["src"], V)
        tgt = FinFunction(data["tgt"], V)
        if src.dom_size != E:
            raise ValueError(f"E={E} but {src.dom_size} sources given")
        costs = [_cost_from_dict(c) for c in data["costs"]]
        G = FlowNetwork(src, tgt, costs, data["balance"])
        ports = FinFunction(data.get("ports", []), V)
    except KeyError as exc:
        raise ValueError(f"network JSON is missing {exc}") from exc
    return OpenObject(V, G, ports)


def network_to_dict(o: OpenObject | FlowNetwork) -> dict:
    G, ports = (o.payload, o.port_map.tolist()) if isinstance(o, OpenObject) else (o, None)
    out = {
        "V": G.V,
        "E": G.E,
        "src": G.src.tolist(),
        "tgt": G.tgt.tolist(),
        "costs": [{"type": "quadratic", "a": c.a, "b": c.b} for c in G.costs],
        "balance": G.balance.tolist(),
    }
    if ports is not None:
        out["ports"] = ports
    return out


def load_network(path: str | Path) -> OpenObject:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
