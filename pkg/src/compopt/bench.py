"""Random composite flow networks and the standard-vs-hierarchical benchmark."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import connected_components

from .finset import FinFunction
from .flownet import (
    FlowNetwork,
    QuadraticCost,
    dual_decomposition_hierarchical,
    dual_decomposition_standard,
)
from .opensys import OpenObject
from .uwd import UWD

__all__ = [
    "BenchConfig",
    "CSV_COLUMNS",
    "gen_er_flownet",
    "three_subgraph_uwd",
    "three_subgraph_instance",
    "run_benchmark",
    "write_rows",
    "read_rows",
]

CSV_COLUMNS = [
    "mode", "nodes", "p", "seed", "iters", "wall_ms",
    "residual", "final_dual_value", "lambda_max_discrepancy",
]

MODES = ("standard", "hierarchical", "both")


@dataclass
class BenchConfig:
    seed: int = 0
    nodes_per_subgraph: Sequence[int] = (80,)
    edge_prob: Sequence[float] = (0.2,)
    gamma: float = 0.01
    outer_iters: int = 10
    mode: str = "both"
    output_path: str | None = None
    repeats: int = 3
    parallel: bool = False

    def __post_init__(self):
        if isinstance(self.nodes_per_subgraph, int):
            self.nodes_per_subgraph = (self.nodes_per_subgraph,)
        if isinstance(self.edge_prob, (int, float)):
            self.edge_prob = (float(self.edge_prob),)
        for p in self.edge_prob:
            if not 0 < p <= 1:
                raise ValueError(f"edge probability must be in (0, 1], got {p}")
        for n in self.nodes_per_subgraph:
            if n < 2:
                raise ValueError(f"subgraphs need at least 2 nodes, got {n}")
        if self.outer_iters < 1:
            raise ValueError(f"need at least one outer iteration, got {self.outer_iters}")
        if not self.gamma > 0:
            raise ValueError(f"step size must be positive, got {self.gamma}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")


def gen_er_flownet(n: int, p: float, rng: np.random.Generator, ports: int = 0,
                   max_attempts: int = 1000) -> OpenObject:
    """Connected Erdos-Renyi network with random quadratic costs and balances.

    Every unordered pair is an edge with probability ``p``, oriented at
    random.  Graphs are resampled until connected.  Ports sit on distinct
    vertices whenever ``ports <= n``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 vertices, got {n}")
    if not 0 < p <= 1:
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    if ports < 0:
        raise ValueError(f"port count must be non-negative, got {ports}")
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_attempts):
        mask = rng.random(iu.size) < p
        u, v = iu[mask], ju[mask]
        adj = coo_array((np.ones(u.size), (u, v)), shape=(n, n))
        if connected_components(adj, directed=False, return_labels=False) == 1:
            break
    else:
        raise RuntimeError(f"no connected graph after {max_attempts} attempts (n={n}, p={p})")
    flip = rng.random(u.size) < 0.5
    src = np.where(flip, v, u)
    tgt = np.where(flip, u, v)
    a = rng.uniform(0.5, 2.0, u.size)
    b = rng.uniform(-1.0, 1.0, u.size)
    balance = rng.uniform(-1.0, 1.0, n)
    balance -= balance.mean()
    if ports <= n:
        port_vertices = rng.choice(n, size=ports, replace=False)
    else:
        # more ports than vertices: every vertex is a port, some carry several
        port_vertices = np.concatenate([rng.permutation(n), rng.integers(0, n, ports - n)])
    G = FlowNetwork(
        FinFunction(src, n),
        FinFunction(tgt, n),
        [QuadraticCost(float(ai), float(bi)) for ai, bi in zip(a, b)],
        balance,
    )
    return OpenObject(n, G, FinFunction(port_vertices, n))


def three_subgraph_uwd() -> UWD:
    """Three boxes with 3, 2 and 2 ports joined on three junctions, no outer ports.

    Junction 0 joins G1 and G2, junction 1 joins G1 and G3, junction 2 joins
    all three.
    """
    return UWD.from_lists([3, 2, 2], 3, [0, 1, 2, 0, 2, 1, 2], [])


def three_subgraph_instance(n: int, p: float, seed: int) -> tuple[UWD, list[OpenObject]]:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(n), int(round(p * 1_000_000))])
    rngs = [np.random.default_rng(s) for s in ss.spawn(3)]
    nets = [gen_er_flownet(n, p, r, ports=k) for r, k in zip(rngs, (3, 2, 2))]
    return three_subgraph_uwd(), nets


def _timed(fn, repeats: int):
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best * 1000.0


def run_benchmark(cfg: BenchConfig) -> list[dict]:
    rows = []
    executor = "parallel" if cfg.parallel else "closure"
    for n in cfg.nodes_per_subgraph:
        for p in cfg.edge_prob:
            diagram, nets = three_subgraph_instance(n, p, cfg.seed)
            results = {}
            if cfg.mode in ("standard", "both"):
                results["standard"] = _timed(
                    lambda: dual_decomposition_standard(diagram, nets, cfg.gamma, cfg.outer_iters),
                    cfg.repeats,
                )
            if cfg.mode in ("hierarchical", "both"):
                results["hierarchical"] = _timed(
                    lambda: dual_decomposition_hierarchical(
                        diagram, nets, cfg.gamma, cfg.outer_iters, executor=executor),
                    cfg.repeats,
                )
            disc = ""
            if cfg.mode == "both":
                disc = float(np.max(np.abs(results["standard"][0].lambdas
                                           - results["hierarchical"][0].lambdas)))
            for mode, (res, ms) in results.items():
                rows.append({
                    "mode": mode,
                    "nodes": n,
                    "p": p,
                    "seed": cfg.seed,
                    "iters": cfg.outer_iters,
                    "wall_ms": ms,
                    "residual": res.residual,
                    "final_dual_value": res.dual_value,
                    "lambda_max_discrepancy": disc,
                })
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="") as fh:
            write_rows(rows, fh)
    return rows


def write_rows(rows: Iterable[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_rows(source: str | Path | io.TextIOBase) -> list[dict]:
    """Parse benchmark CSV back into typed rows."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_rows(fh)
    out = []
    for r in csv.DictReader(source):
        out.append({
            "mode": r["mode"],
            "nodes": int(r["nodes"]),
            "p": float(r["p"]),
            "seed": int(r["seed"]),
            "iters": int(r["iters"]),
            "wall_ms": float(r["wall_ms"]),
            "residual": float(r["residual"]),
            "final_dual_value": float(r["final_dual_value"]),
            "lambda_max_discrepancy": (float(r["lambda_max_discrepancy"])
                                       if r["lambda_max_discrepancy"] else None),
        })
    return out
