import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compopt.dynamics import DYNAM_D
from compopt.finset import FinFunction, coproduct_all, pushout
from compopt.flownet import (
    FLOWNET,
    FlowNetwork,
    GenericCost,
    QuadraticCost,
    dual_ascent,
    dual_decomposition_hierarchical,
    dual_decomposition_standard,
    flownet_act,
    flownet_combine,
    incidence_dense,
    incidence_matrix,
    load_network,
    netflow,
    network_from_dict,
    network_to_dict,
)
from compopt.freevect import pushforward_matrix
from compopt.morphisms import gad, lift
from compopt.opensys import OpenObject, closed, oapply
from compopt.problems import SADDLE, saddle_act, saddle_combine
from compopt.testing import random_finfunction, random_flownetwork
from compopt.uwd import CONCAVE, UWD, identity_uwd
from oracles import kkt_flows


def two_vertex_net(b=(1.0, -1.0)):
    return FlowNetwork(FinFunction([0], 2), FinFunction([1], 2), [QuadraticCost(1.0, 0.0)], b)


def test_incidence_of_single_edge():
    assert incidence_dense(two_vertex_net()).tolist() == [[1.0], [-1.0]]
    assert incidence_matrix(two_vertex_net()).toarray().tolist() == [[1.0], [-1.0]]


def test_self_loop_has_zero_column():
    G = FlowNetwork(FinFunction([0, 1], 2), FinFunction([0, 0], 2),
                    [QuadraticCost(1.0)] * 2, [0.0, 0.0])
    A = incidence_dense(G)
    assert A[:, 0].tolist() == [0.0, 0.0]
    assert np.array_equal(incidence_matrix(G).toarray(), A)


def test_network_validation():
    with pytest.raises(ValueError, match="sum to zero|sums to"):
        two_vertex_net((1.0, 0.0))
    with pytest.raises(ValueError, match="costs"):
        FlowNetwork(FinFunction([0], 2), FinFunction([1], 2), [], [0.0, 0.0])
    with pytest.raises(ValueError, match="a > 0"):
        QuadraticCost(0.0, 1.0)


def test_merging_endpoints_creates_a_self_loop():
    G = flownet_act(FinFunction([0, 0], 1), two_vertex_net())
    assert G.V == 1 and G.src.tolist() == G.tgt.tolist() == [0]
    assert G.balance.tolist() == [0.0]
    assert incidence_dense(G).tolist() == [[0.0]]


def test_act_conserves_total_balance(rng):
    for _ in range(30):
        G = random_flownetwork(rng, int(rng.integers(1, 8)), int(rng.integers(0, 10)))
        phi = random_finfunction(rng, G.V, int(rng.integers(1, 6)))
        H = flownet_act(phi, G)
        assert H.balance.sum() == pytest.approx(G.balance.sum(), abs=1e-12)
        assert H.E == G.E


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_incidence_pushes_forward(seed):
    rng = np.random.default_rng(seed)
    G = random_flownetwork(rng, int(rng.integers(1, 13)), int(rng.integers(0, 13)))
    phi = random_finfunction(rng, G.V, int(rng.integers(1, 13)))
    A = incidence_dense(flownet_act(phi, G)).astype(int)
    assert np.array_equal(A, pushforward_matrix(phi).astype(int) @ incidence_dense(G).astype(int))


def test_combine_is_disjoint_union(rng):
    G, H = random_flownetwork(rng, 3, 4), random_flownetwork(rng, 2, 1)
    U = flownet_combine([G, H])
    assert (U.V, U.E) == (5, 5)
    A = incidence_dense(U)
    assert np.array_equal(A[:3, :4], incidence_dense(G)) and np.array_equal(A[3:, 4:], incidence_dense(H))
    assert not A[:3, 4:].any() and not A[3:, :4].any()
    assert FLOWNET.unit().V == 0


def test_quadratic_closed_form_flows(rng):
    G = random_flownetwork(rng, 4, 6)
    L = netflow(G)
    a, b = G.quadratic_coefficients()
    lam = rng.standard_normal(4)
    x = L.flows(lam)
    assert np.allclose(x, -(b + L.A.T @ lam) / (2 * a))
    assert np.allclose(L.grad(lam), L.A @ x - G.balance)
    assert L.labels == (CONCAVE,) * 4


def test_two_vertex_example_against_kkt():
    G = two_vertex_net()
    lam, x, k = dual_ascent(G, gamma=0.1, tol=1e-10)
    xk, _ = kkt_flows([0], [1], 2, [1.0], [0.0], [1.0, -1.0])
    assert x[0] == pytest.approx(1.0, abs=1e-9)
    assert xk[0] == pytest.approx(1.0, abs=1e-12)
    assert k > 0


def test_dual_ascent_matches_kkt_on_random_networks():
    rng = np.random.default_rng(2)
    for _ in range(5):
        V = int(rng.integers(2, 7))
        G = random_flownetwork(rng, V, int(rng.integers(V - 1, 10)), connected=True)
        _, x, _ = dual_ascent(G, gamma=0.05, tol=1e-8)
        a, b = G.quadratic_coefficients()
        xk, _ = kkt_flows(G.src.tolist(), G.tgt.tolist(), V, a, b, G.balance)
        assert np.max(np.abs(x - xk)) <= 1e-6


def test_dual_ascent_reports_non_convergence():
    with pytest.raises(RuntimeError, match="did not reach"):
        dual_ascent(two_vertex_net(), gamma=1e-4, tol=1e-12, max_iter=5)


def test_dual_update_rule(rng):
    G = random_flownetwork(rng, 4, 5)
    L = netflow(G)
    lam = rng.standard_normal(4)
    step = gad(L, 0.01)(lam)
    assert np.allclose(step, lam + 0.01 * (L.A @ L.flows(lam) - G.balance), rtol=1e-14, atol=1e-15)


def test_netflow_is_natural(rng):
    for _ in range(20):
        G = random_flownetwork(rng, int(rng.integers(1, 6)), int(rng.integers(0, 8)))
        # surjective, so no element of the codomain is left without a label
        m = int(rng.integers(1, G.V + 1))
        phi = FinFunction(np.concatenate([np.arange(m), rng.integers(0, m, G.V - m)]), m)
        a = netflow(flownet_act(phi, G))
        b = saddle_act(phi, netflow(G))
        pts = list(rng.standard_normal((10, phi.codom_size)))
        assert SADDLE.discrepancy(a, b, pts) <= 1e-10


def test_netflow_is_monoidal(rng):
    G, H = random_flownetwork(rng, 3, 4), random_flownetwork(rng, 2, 2)
    a = netflow(flownet_combine([G, H]))
    b = saddle_combine([netflow(G), netflow(H)])
    assert SADDLE.discrepancy(a, b, list(rng.standard_normal((10, 5)))) <= 1e-12


def open_nets(rng, diagram):
    return [OpenObject(V, random_flownetwork(rng, V, V + 1, connected=True),
                       FinFunction(rng.choice(V, k, replace=False), V))
            for k in diagram.box_ports for V in [int(rng.integers(max(k, 2), 6))]]


def test_single_box_pipelines_agree(rng):
    G = random_flownetwork(rng, 4, 5, connected=True)
    d = identity_uwd(4)
    nets = [closed(G)]
    s = dual_decomposition_standard(d, nets, 0.05, 30)
    h = dual_decomposition_hierarchical(d, nets, 0.05, 30)
    assert np.max(np.abs(s.lambdas - h.lambdas)) <= 1e-12
    assert s.iterations == 30


def test_standard_and_hierarchical_agree(rng):
    d = UWD.from_lists([3, 2, 2], 3, [0, 1, 2, 0, 2, 1, 2], [])
    nets = open_nets(rng, d)
    s = dual_decomposition_standard(d, nets, 0.01, 50)
    for ex in ("closure", "serial", "parallel"):
        h = dual_decomposition_hierarchical(d, nets, 0.01, 50, executor=ex)
        assert np.max(np.abs(s.lambdas - h.lambdas)) <= 1e-10
        assert h.residual == pytest.approx(s.residual, rel=1e-6, abs=1e-10)
        assert h.dual_value == pytest.approx(s.dual_value, rel=1e-9)
    with pytest.raises(ValueError, match="executor"):
        dual_decomposition_hierarchical(d, nets, executor="mpi")


def test_hierarchical_is_a_composite_of_open_systems(rng):
    d = UWD.from_lists([2, 2], 3, [0, 1, 1, 2], [0, 2])
    nets = open_nets(rng, d)
    systems = [lift(lambda L: gad(L, 0.01))(lift(netflow)(o)) for o in nets]
    comp = oapply(DYNAM_D, d, systems)
    glued = oapply(FLOWNET, d, nets)
    direct = gad(netflow(glued.payload), 0.01)
    pts = list(rng.standard_normal((10, comp.domain_size)))
    assert comp.port_map == glued.port_map
    assert DYNAM_D.discrepancy(comp.payload, direct, pts) <= 1e-12


def test_initial_multiplier_shape_is_checked(rng):
    d = identity_uwd(2)
    with pytest.raises(ValueError, match="initial multipliers"):
        dual_decomposition_standard(d, [closed(two_vertex_net())], lam0=[0.0])


def test_generic_cost_bisection():
    c = GenericCost(lambda x: x ** 4 + x ** 2, lambda x: 4 * x ** 3 + 2 * x)
    for shift in (-50.0, -1.0, 0.0, 3.0, 1e3):
        xi = c.argmin_shifted(shift)
        assert abs(4 * xi ** 3 + 2 * xi + shift) <= 1e-8


def test_generic_cost_matches_quadratic():
    q = QuadraticCost(1.5, -0.5)
    g = GenericCost(q.eval, q.deriv)
    for shift in (-3.0, 0.0, 2.0):
        assert g.argmin_shifted(shift) == pytest.approx(q.argmin_shifted(shift), abs=1e-10)


def test_netflow_with_generic_costs(rng):
    G = random_flownetwork(rng, 3, 3, connected=True)
    H = FlowNetwork(G.src, G.tgt, [GenericCost(c.eval, c.deriv) for c in G.costs], G.balance)
    lam = rng.standard_normal(3)
    assert np.allclose(netflow(H).grad(lam), netflow(G).grad(lam), atol=1e-9)


def test_unbracketable_cost_is_reported():
    flat = GenericCost(lambda x: 0.0, lambda x: 0.0, max_expansions=5)
    with pytest.raises(ArithmeticError, match="bracket"):
        flat.argmin_shifted(1.0)


def test_json_round_trip(tmp_path, rng):
    G = random_flownetwork(rng, 4, 5)
    o = OpenObject(4, G, FinFunction([2, 0], 4))
    path = tmp_path / "net.json"
    path.write_text(json.dumps(network_to_dict(o)))
    back = load_network(path)
    assert back.port_map == o.port_map
    assert back.payload.src == G.src and back.payload.tgt == G.tgt
    assert np.array_equal(back.payload.balance, G.balance)
    assert [c.a for c in back.payload.costs] == [c.a for c in G.costs]


def test_json_errors():
    with pytest.raises(ValueError, match="missing"):
        network_from_dict({"V": 2})
    bad = network_to_dict(two_vertex_net())
    bad["costs"] = [{"type": "cubic"}]
    with pytest.raises(ValueError, match="cubic"):
        network_from_dict(bad)


def test_cost_evaluation():
    G = two_vertex_net()
    assert G.cost([2.0]) == 4.0
    assert FlowNetwork(G.src, G.tgt, [GenericCost(lambda x: 3 * x, lambda x: 3.0)],
                       G.balance).cost([2.0]) == 6.0


def test_composite_dimension_matches_pushout(rng):
    d = UWD.from_lists([3, 2, 2], 3, [0, 1, 2, 0, 2, 1, 2], [])
    nets = open_nets(rng, d)
    glued = oapply(FLOWNET, d, nets).payload
    po = pushout(coproduct_all([o.port_map for o in nets]), d.inner_map)
    assert glued.V == po.apex_size == sum(o.domain_size for o in nets) - 4
    assert glued.E == sum(o.payload.E for o in nets)
    assert glued.balance.sum() == pytest.approx(0.0, abs=1e-12)
