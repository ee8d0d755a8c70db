"""Continuous, discrete and non-deterministic dynamical systems as finset algebras.

Moving a system along ``phi: N -> M`` distributes the state with the
pullback, runs the system, and collects the result with the pushforward.
Discrete systems are moved through their increments ``v - id`` so that
fixed points are preserved.

Non-deterministic systems (point-to-set maps) are represented by seeded
selections; combining splits the seed per component with :func:`mix64`.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .finset import FinFunction, coproduct_all, pushout
from .opensys import FinsetAlgebra, OpenObject
from .seeding import mix64
from .uwd import UWD

__all__ = [
    "VectorField",
    "DiscreteMap",
    "SelectorField",
    "dynam_act",
    "dynam_combine",
    "dynam_d_act",
    "dynam_d_combine",
    "euler",
    "ndd_act",
    "ndd_combine",
    "ndd_d_act",
    "euler_ndd",
    "DYNAM",
    "DYNAM_D",
    "NDD",
    "NDD_D",
    "NonFiniteStateError",
    "simulate",
    "simulate_message_passing",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

Vec = np.ndarray


@dataclass(frozen=True)
class VectorField:
    dim: int
    field: Callable[[Vec], Vec]

    def __call__(self, x):
        return self.field(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DiscreteMap:
    dim: int
    step: Callable[[Vec], Vec]

    def __call__(self, x):
        return self.step(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SelectorField:
    """Picks one element of a set-valued map; ``select(x, seed)``."""

    dim: int
    select: Callable[[Vec, int], Vec]
    discrete: bool = False

    def __call__(self, x, seed: int = 0):
        return self.select(np.asarray(x, dtype=float), seed)

    @classmethod
    def singleton(cls, f: VectorField | DiscreteMap) -> "SelectorField":
        if isinstance(f, DiscreteMap):
            return cls(f.dim, lambda x, seed: f.step(x), True)
        return cls(f.dim, lambda x, seed: f.field(x), False)


def _check_dim(phi: FinFunction, dim: int):
    if phi.dom_size != dim:
        raise ValueError(
            f"system has dimension {dim} but the map has domain size {phi.dom_size}"
        )


def _slices(dims: Sequence[int]) -> list[slice]:
    offs = np.concatenate([[0], np.cumsum(dims, dtype=np.int64)]).tolist()
    return [slice(offs[i], offs[i + 1]) for i in range(len(dims))]


def _stack(fns: Sequence[Callable[[Vec], Vec]], dims: Sequence[int]) -> Callable[[Vec], Vec]:
    pairs = list(zip(fns, _slices(dims)))

    def stacked(z):
        if not pairs:
            return np.zeros(0)
        return np.concatenate([fn(z[s]) for fn, s in pairs])

    return stacked


# --- deterministic ---------------------------------------------------------

def dynam_act(phi: FinFunction, v: VectorField) -> VectorField:
    _check_dim(phi, v.dim)
    idx, m, f = phi.map, phi.codom_size, v.field
    return VectorField(m, lambda y: np.bincount(idx, weights=f(y[idx]), minlength=m))


def dynam_combine(vs: Sequence[VectorField]) -> VectorField:
    vs = list(vs)
    dims = [v.dim for v in vs]
    return VectorField(sum(dims), _stack([v.field for v in vs], dims))


def dynam_d_act(phi: FinFunction, v: DiscreteMap) -> DiscreteMap:
    _check_dim(phi, v.dim)
    idx, m, step = phi.map, phi.codom_size, v.step

    def new_step(y):
        x = y[idx]
        return y + np.bincount(idx, weights=step(x) - x, minlength=m)

    return DiscreteMap(m, new_step)


def dynam_d_combine(vs: Sequence[DiscreteMap]) -> DiscreteMap:
    vs = list(vs)
    dims = [v.dim for v in vs]
    return DiscreteMap(sum(dims), _stack([v.step for v in vs], dims))


def euler(v: VectorField, gamma: float) -> DiscreteMap:
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    f = v.field
    return DiscreteMap(v.dim, lambda x: x + gamma * f(x))


# --- non-deterministic -----------------------------------------------------

def ndd_act(phi: FinFunction, s: SelectorField) -> SelectorField:
    _check_dim(phi, s.dim)
    if s.discrete:
        raise ValueError("ndd_act expects a continuous selector; use ndd_d_act")
    idx, m, sel = phi.map, phi.codom_size, s.select
    return SelectorField(
        m, lambda y, seed: np.bincount(idx, weights=sel(y[idx], seed), minlength=m)
    )


def _ndd_stack(ss: Sequence[SelectorField], discrete: bool) -> SelectorField:
    ss = list(ss)
    if any(s.discrete != discrete for s in ss):
        raise ValueError("cannot combine continuous and discrete selectors")
    dims = [s.dim for s in ss]
    pairs = list(zip([s.select for s in ss], _slices(dims)))

    def select(z, seed):
        if not pairs:
            return np.zeros(0)
        return np.concatenate(
            [sel(z[sl], mix64(seed, i)) for i, (sel, sl) in enumerate(pairs)]
        )

    return SelectorField(sum(dims), select, discrete)


def ndd_combine(ss: Sequence[SelectorField]) -> SelectorField:
    return _ndd_stack(ss, discrete=False)


def ndd_d_combine(ss: Sequence[SelectorField]) -> SelectorField:
    return _ndd_stack(ss, discrete=True)


def ndd_d_act(phi: FinFunction, s: SelectorField) -> SelectorField:
    _check_dim(phi, s.dim)
    if not s.discrete:
        raise ValueError("ndd_d_act expects a discrete selector; use ndd_act")
    idx, m, sel = phi.map, phi.codom_size, s.select

    def select(y, seed):
        x = y[idx]
        return y + np.bincount(idx, weights=sel(x, seed) - x, minlength=m)

    return SelectorField(m, select, True)


def euler_ndd(s: SelectorField, gamma: float) -> SelectorField:
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    if s.discrete:
        raise ValueError("euler_ndd expects a continuous selector")
    sel = s.select
    return SelectorField(s.dim, lambda x, seed: x + gamma * sel(x, seed), True)


# --- algebras ----------------------------------------------------------------

class _DynamAlgebra(FinsetAlgebra[VectorField]):
    name = "Dynam"

    def dimension(self, t):
        return t.dim

    def act(self, phi, t):
        return dynam_act(phi, t)

    def combine(self, ts):
        return dynam_combine(ts)

    def evaluate(self, t, x, seed=0):
        return np.zeros(0), t.field(x)


class _DynamDAlgebra(FinsetAlgebra[DiscreteMap]):
    name = "Dynam_D"

    def dimension(self, t):
        return t.dim

    def act(self, phi, t):
        return dynam_d_act(phi, t)

    def combine(self, ts):
        return dynam_d_combine(ts)

    def evaluate(self, t, x, seed=0):
        return np.zeros(0), t.step(x)


class _NDDAlgebra(FinsetAlgebra[SelectorField]):
    name = "NDD"
    discrete = False

    def dimension(self, t):
        return t.dim

    def act(self, phi, t):
        return ndd_d_act(phi, t) if self.discrete else ndd_act(phi, t)

    def combine(self, ts):
        return _ndd_stack(ts, self.discrete)

    def evaluate(self, t, x, seed=0):
        return np.zeros(0), t.select(x, seed)


class _NDDDAlgebra(_NDDAlgebra):
    name = "NDD_D"
    discrete = True


DYNAM = _DynamAlgebra()
DYNAM_D = _DynamDAlgebra()
NDD = _NDDAlgebra()
NDD_D = _NDDDAlgebra()


# --- simulation ----------------------------------------------------------------

class NonFiniteStateError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"state became non-finite at step {step}")
        self.step = step


def _stepper(v: DiscreteMap | SelectorField, seed: int):
    if isinstance(v, DiscreteMap):
        return lambda x, k: v.step(x)
    if isinstance(v, SelectorField):
        if not v.discrete:
            raise ValueError("cannot iterate a continuous selector; apply euler_ndd first")
        return lambda x, k: v.select(x, mix64(seed, k))
    raise TypeError(f"cannot simulate {type(v).__name__}")


def simulate(v: DiscreteMap | SelectorField, x0, steps: int, seed: int = 0,
             callback: Callable[[int, Vec], None] | None = None,
             store: bool = True) -> np.ndarray:
    """Iterate ``v`` from ``x0``.

    Returns an array of shape ``(steps + 1, dim)``.  With ``store=False``
    only the final state is kept (shape ``(1, dim)``) and ``callback`` sees
    every state.  For selectors, step ``k`` uses seed ``mix64(seed, k)``.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (v.dim,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({v.dim},)")
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    advance = _stepper(v, seed)
    traj = np.empty((steps + 1 if store else 1, v.dim))
    traj[0] = x
    if callback is not None:
        callback(0, x)
    for k in range(steps):
        x = advance(x, k)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(k + 1)
        if store:
            traj[k + 1] = x
        if callback is not None:
            callback(k + 1, x)
    if not store:
        traj[0] = x
    return traj


def simulate_message_passing(diagram: UWD, subsystems: Sequence[OpenObject], x0, steps: int,
                             mode: str = "serial", max_workers: int | None = None
                             ) -> np.ndarray:
    """Run discrete subsystems wired by ``diagram`` without building the composite.

    Each round distributes the shared state to the subsystems, steps each of
    them (concurrently in ``"parallel"`` mode) and collects their increments.
    """
    if mode not in ("serial", "parallel"):
        raise ValueError(f"mode must be 'serial' or 'parallel', got {mode!r}")
    if len(subsystems) != diagram.n_boxes:
        raise ValueError(
            f"diagram has {diagram.n_boxes} boxes but {len(subsystems)} subsystems were given"
        )
    for i, s in enumerate(subsystems):
        if s.n_ports != diagram.box_ports[i]:
            raise ValueError(
                f"box {i} has {diagram.box_ports[i]} ports but subsystem {i} has {s.n_ports}"
            )
        if s.payload.dim != s.domain_size:
            raise ValueError(f"subsystem {i}: dimension {s.payload.dim} != {s.domain_size}")
    po = pushout(coproduct_all([s.port_map for s in subsystems]), diagram.inner_map)
    idx, n = po.proj_left.map, po.apex_size
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"initial state has shape {x.shape}, composite dimension is {n}")
    slices = _slices([s.domain_size for s in subsystems])
    steps_fns = [s.payload.step for s in subsystems]
    jobs = list(zip(steps_fns, slices))

    traj = np.empty((steps + 1, n))
    traj[0] = x
    pool = ThreadPoolExecutor(max_workers=max_workers) if mode == "parallel" else None
    try:
        for k in range(steps):
            local = x[idx]  # distribute
            if pool is None:
                outs = [fn(local[sl]) for fn, sl in jobs]
            else:
                outs = list(pool.map(lambda job: job[0](local[job[1]]), jobs))
            new_local = np.concatenate(outs) if outs else np.zeros(0)
            x = x + np.bincount(idx, weights=new_local - local, minlength=n)  # collect
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(k + 1)
            traj[k + 1] = x
    finally:
        if pool is not None:
            pool.shutdown()
    return traj


def write_trajectory_csv(path: str | Path, traj) -> None:
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"x{i}" for i in range(traj.shape[1])])
        for k, row in enumerate(traj):
            w.writerow([k] + [repr(float(v)) for v in row])


def read_trajectory_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(
        len(rows) - 1, len(rows[0]) - 1
    )
