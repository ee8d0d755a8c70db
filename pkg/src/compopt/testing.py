"""Random instance generators shared by the test-suite and the ``naturality`` command."""
from __future__ import annotations

import numpy as np

from .finset import FinFunction
from .opensys import OpenObject
from .problems import Objective, SaddleObjective, abs_sum, quadratic
from .uwd import CONCAVE, CONVEX, UWD


def random_finfunction(rng: np.random.Generator, n: int, m: int) -> FinFunction:
    """Uniform random map ``[n] -> [m]`` (``m`` must be positive unless ``n == 0``)."""
    if n == 0:
        return FinFunction([], m)
    return FinFunction(rng.integers(0, m, n), m)


def random_uwd(rng: np.random.Generator, max_boxes: int = 4, max_junctions: int = 6,
               max_ports: int = 5, max_outer: int = 3, typed: bool = False,
               surjective: bool = False) -> UWD:
    """Random diagram; ``surjective`` makes every junction touch an inner port."""
    nb = int(rng.integers(1, max_boxes + 1))
    ports = [int(rng.integers(1, max_ports + 1)) for _ in range(nb)]
    total = sum(ports)
    nj = int(rng.integers(1, min(max_junctions, total) + 1))
    inner = rng.integers(0, nj, total)
    if surjective:
        inner[rng.permutation(total)[:nj]] = np.arange(nj)
    n_outer = int(rng.integers(0, max_outer + 1))
    outer = rng.integers(0, nj, n_outer)
    labels = None
    if typed:
        labels = [CONVEX if rng.random() < 0.5 else CONCAVE for _ in range(nj)]
    return UWD.from_lists(ports, nj, inner.tolist(), outer.tolist(), labels)


def random_pd(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * rng.uniform(lo, hi, n)) @ Q.T


def random_quadratic(rng: np.random.Generator, n: int) -> Objective:
    return quadratic(random_pd(rng, n), rng.standard_normal(n))


def random_saddle_quadratic(rng: np.random.Generator, labels) -> SaddleObjective:
    """``0.5 x'Px + q'x`` convex in the convex block and concave in the other."""
    labels = list(labels)
    n = len(labels)
    cx = np.array([s == CONVEX for s in labels])
    P = rng.standard_normal((n, n)) * 0.5
    P = 0.5 * (P + P.T)
    for mask, sgn in ((cx, 1.0), (~cx, -1.0)):
        k = int(mask.sum())
        if k:
            P[np.ix_(mask, mask)] = sgn * random_pd(rng, k)
    return quadratic(P, rng.standard_normal(n), labels=labels)


def random_nonsmooth_saddle(rng: np.random.Generator, labels) -> SaddleObjective:
    """Saddle quadratic plus ``+|x_i|`` on convex and ``-|x_i|`` on concave coordinates."""
    labels = list(labels)
    q = random_saddle_quadratic(rng, labels)
    sign = np.array([1.0 if s == CONVEX else -1.0 for s in labels])
    a = abs_sum(sign * rng.uniform(0.2, 1.5, len(labels)))

    def eval_(x):
        return q.eval(x) + a.eval(x)

    def grad(x):
        return q.grad(x) + a.grad(x)

    def subgrad(x, seed):
        return q.grad(x) + a.subgradient(x, seed)

    return SaddleObjective(len(labels), eval_, grad, labels, "subdifferentiable", subgrad)


def fillers_for(rng: np.random.Generator, diagram: UWD, make, max_extra: int = 2,
                identity_ports: bool = False):
    """One open filler per box; ``make(rng, dim, port_labels_by_element)``.

    Each filler's domain has the box's ports plus up to ``max_extra``
    private coordinates; ports are wired into the domain at random.
    """
    out = []
    for i in range(diagram.n_boxes):
        k = diagram.box_ports[i]
        port_labels = diagram.port_labels(i)
        if identity_ports:
            dom, pm = k, np.arange(k)
        else:
            extra = int(rng.integers(0, max_extra + 1))
            dom = max(1, int(rng.integers(1, k + 1))) + extra
            pm = rng.integers(0, dom, k)
        labels = None
        if port_labels is not None:
            labels = _labels_through(pm, port_labels, dom)
            if labels is None:
                # ports with different labels landed on one element; wire them apart
                dom, pm = k, np.arange(k)
                labels = list(port_labels)
            labels = [s if s is not None else (CONVEX if rng.random() < 0.5 else CONCAVE)
                      for s in labels]
        out.append(OpenObject(dom, make(rng, dom, labels), FinFunction(pm, dom)))
    return out


def _labels_through(pm, port_labels, dom):
    labels = [None] * dom
    for p, e in enumerate(pm):
        if labels[e] is None:
            labels[e] = port_labels[p]
        elif labels[e] != port_labels[p]:
            return None
    return labels


def composite_dim(diagram: UWD, fillers) -> int:
    from .finset import coproduct_all, pushout

    return pushout(coproduct_all([f.port_map for f in fillers]), diagram.inner_map).apex_size


def random_points(rng: np.random.Generator, dim: int, count: int, kinks: bool = False):
    """Gaussian points; with ``kinks`` some coordinates are exactly zero."""
    pts = rng.standard_normal((count, dim))
    if kinks:
        pts[rng.random((count, dim)) < 0.3] = 0.0
    return list(pts)


def naturality_suite(seed: int = 0, instances: int = 50, steps_points: int = 5,
                     tol: float = 1e-9) -> list[tuple[str, float, bool]]:
    """Randomised naturality checks for every solution-method transformation.

    Returns ``(name, worst discrepancy, passed)`` per transformation.
    """
    from .dynamics import DYNAM, DYNAM_D, NDD
    from .morphisms import (check_naturality, gad, gd, grad_flow, pd_subg, subgrad_flow,
                            supergrad_flow)
    from .problems import OPT, SADDLE

    rng = np.random.default_rng(seed)
    quad = lambda r, n, labels: random_quadratic(r, n)
    sad = lambda r, n, labels: random_saddle_quadratic(r, labels)
    nonsmooth = lambda r, n, labels: random_nonsmooth_saddle(r, labels or [CONVEX] * n)

    def all_concave(r, **kw):
        d = random_uwd(r, **kw)
        return UWD(d.box_ports, d.junctions, d.inner_map, d.outer_map, (CONCAVE,) * d.junctions)

    cases = [
        ("grad_flow", OPT, DYNAM, grad_flow, quad, lambda r: random_uwd(r), False),
        ("gd", OPT, DYNAM_D, lambda f: gd(f, 0.1), quad, lambda r: random_uwd(r), False),
        ("gad", SADDLE, DYNAM_D, lambda f: gad(f, 0.1), sad,
         lambda r: random_uwd(r, typed=True), False),
        ("subgrad_flow", OPT, NDD, subgrad_flow, nonsmooth, lambda r: random_uwd(r), True),
        ("supergrad_flow", SADDLE, NDD, supergrad_flow,
         lambda r, n, labels: random_nonsmooth_saddle(r, [CONCAVE] * n), all_concave, True),
        ("pd_subg", SADDLE, NDD, pd_subg, nonsmooth, lambda r: random_uwd(r, typed=True), True),
    ]
    results = []
    for name, src, dst, morph, make, diagram_fn, kinks in cases:
        worst = 0.0
        for _ in range(instances):
            d = diagram_fn(rng)
            fillers = fillers_for(rng, d, make)
            pts = random_points(rng, composite_dim(d, fillers), steps_points, kinks)
            rep = check_naturality(src, dst, morph, d, fillers, pts, tol=tol,
                                   seed=int(rng.integers(2**32)))
            worst = max(worst, rep.max_discrepancy)
        results.append((name, worst, worst <= tol))
    return results


def random_filler_uwd(rng: np.random.Generator, n_outer: int, max_boxes: int = 3,
                      max_junctions: int = 4, max_ports: int = 3,
                      outer_labels=None) -> UWD:
    """Random diagram with exactly ``n_outer`` outer ports.

    With ``outer_labels`` the diagram is typed and its outer ports carry
    those labels.
    """
    nb = int(rng.integers(1, max_boxes + 1))
    ports = [int(rng.integers(1, max_ports + 1)) for _ in range(nb)]
    total = sum(ports)
    nj = int(rng.integers(1, max_junctions + 1))
    labels = None
    if outer_labels is not None:
        # one junction per distinct outer label at least, so the labels can be honoured
        nj = max(nj, 2)
        labels = [CONVEX if rng.random() < 0.5 else CONCAVE for _ in range(nj)]
        labels[0], labels[1] = CONVEX, CONCAVE
        by_label = {s: [j for j in range(nj) if labels[j] == s] for s in (CONVEX, CONCAVE)}
        outer = [int(rng.choice(by_label[s])) for s in outer_labels]
    else:
        outer = rng.integers(0, nj, n_outer).tolist()
    inner = rng.integers(0, nj, total).tolist()
    return UWD.from_lists(ports, nj, inner, outer, labels)


def random_nest(rng: np.random.Generator, typed: bool = False, surjective: bool = False):
    """A top diagram and one filler diagram per top box."""
    top = random_uwd(rng, max_boxes=3, max_junctions=4, max_ports=3, typed=typed,
                     surjective=surjective)
    subs = []
    for i in range(top.n_boxes):
        sub = random_filler_uwd(rng, top.box_ports[i], outer_labels=top.port_labels(i))
        if surjective:
            sub = _make_surjective(rng, sub)
        subs.append(sub)
    return top, subs


def _make_surjective(rng, d: UWD) -> UWD:
    inner = d.inner_map.map.copy()
    hit = set(inner.tolist())
    missing = [j for j in range(d.junctions) if j not in hit]
    if not missing:
        return d
    # add one single-port box per missing junction
    inner = np.concatenate([inner, missing])
    return UWD(d.box_ports + (1,) * len(missing), d.junctions,
               FinFunction(inner, d.junctions), d.outer_map, d.junction_labels)


def random_flownetwork(rng: np.random.Generator, V: int, E: int, connected: bool = False):
    """Random quadratic-cost network; ``connected`` adds a random spanning path first."""
    from .flownet import FlowNetwork, QuadraticCost

    src = rng.integers(0, V, E)
    tgt = rng.integers(0, V, E)
    if connected:
        if E < V - 1:
            raise ValueError(f"a connected network on {V} vertices needs at least {V - 1} edges")
        order = rng.permutation(V)
        src[:V - 1], tgt[:V - 1] = order[:-1], order[1:]
    b = rng.uniform(-1, 1, V)
    b -= b.mean()
    costs = [QuadraticCost(float(a), float(c))
             for a, c in zip(rng.uniform(0.5, 2.0, E), rng.uniform(-1, 1, E))]
    return FlowNetwork(FinFunction(src, V), FinFunction(tgt, V), costs, b)


def _affine(rng, n):
    M = rng.standard_normal((n, n))
    c = rng.standard_normal(n)
    return lambda x: M @ x + c


def payload_maker(name: str):
    """``make(rng, dim, labels)`` producing a random payload for the named algebra."""
    from .dynamics import DiscreteMap, VectorField

    return {
        "Opt": lambda r, n, labels: random_quadratic(r, n),
        "Saddle": lambda r, n, labels: random_saddle_quadratic(r, labels),
        "Dynam": lambda r, n, labels: VectorField(n, _affine(r, n)),
        "Dynam_D": lambda r, n, labels: DiscreteMap(n, _affine(r, n)),
        "FlowNet": lambda r, n, labels: random_flownetwork(r, n, int(r.integers(0, 2 * n + 1))),
    }[name]


def coherence_discrepancy(alg, top: UWD, subs, leaves, points_rng: np.random.Generator,
                          n_points: int = 20) -> float:
    """Compare substitute-then-compose with compose-then-compose.

    ``leaves[i]`` are the open fillers of ``subs[i]``'s boxes.  Domains of
    the two results are matched by tracking which leaf elements land where.
    """
    from .opensys import ProvenanceAlgebra, align_domains, compare_open, oapply, provenance_fillers
    from .uwd import substitute

    prov = ProvenanceAlgebra()
    flat_leaves = [f for row in leaves for f in row]
    flat_diagram = substitute(top, subs)
    flat = oapply(alg, flat_diagram, flat_leaves)
    flat_prov = oapply(prov, flat_diagram, provenance_fillers(flat_leaves))

    inner, inner_prov, start = [], [], 0
    for sub, row in zip(subs, leaves):
        inner.append(oapply(alg, sub, row))
        inner_prov.append(oapply(prov, sub, provenance_fillers(row, start)))
        start += len(row)
    nested = oapply(alg, top, inner)
    nested_prov = oapply(prov, top, inner_prov)

    sigma = align_domains(flat_prov.payload, nested_prov.payload,
                          flat_prov.port_map, nested_prov.port_map)
    pts = list(points_rng.standard_normal((n_points, nested.domain_size)))
    return compare_open(alg, flat, nested, pts, sigma)
