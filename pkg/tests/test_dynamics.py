import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compopt.dynamics import (
    DYNAM,
    DYNAM_D,
    NDD,
    NDD_D,
    DiscreteMap,
    NonFiniteStateError,
    SelectorField,
    VectorField,
    dynam_act,
    dynam_d_act,
    euler,
    euler_ndd,
    ndd_act,
    ndd_combine,
    ndd_d_act,
    read_trajectory_csv,
    simulate,
    simulate_message_passing,
    write_trajectory_csv,
)
from compopt.finset import FinFunction, compose, coproduct, identity
from compopt.freevect import pullback_matrix, pushforward_matrix
from compopt.opensys import OpenObject, closed, oapply
from compopt.testing import fillers_for, random_finfunction, random_uwd
from compopt.uwd import identity_uwd


def linear_field(A):
    A = np.asarray(A, float)
    return VectorField(A.shape[0], lambda x: A @ x)


def linear_map(A):
    A = np.asarray(A, float)
    return DiscreteMap(A.shape[0], lambda x: A @ x)


def test_act_sums_shared_velocities():
    v = VectorField(2, lambda x: -x)
    w = dynam_act(FinFunction([0, 0], 1), v)
    assert w(np.array([3.0]))[0] == -6.0


def test_euler_step():
    step = euler(VectorField(1, lambda x: -2 * x), 0.1)
    assert step(np.array([1.0]))[0] == pytest.approx(0.8)


def test_geometric_trajectory():
    traj = simulate(euler(VectorField(1, lambda x: -2 * x), 0.1), [1.0], 20)
    assert traj.shape == (21, 1)
    assert np.allclose(traj[:, 0], 0.8 ** np.arange(21), rtol=1e-13)


def test_zero_steps_returns_initial_state():
    traj = simulate(linear_map(np.eye(2)), [1.0, 2.0], 0)
    assert traj.tolist() == [[1.0, 2.0]]


def test_trajectory_prefix_property(rng):
    m = linear_map(rng.standard_normal((3, 3)) * 0.3)
    x0 = rng.standard_normal(3)
    assert np.array_equal(simulate(m, x0, 7), simulate(m, x0, 12)[:8])


def test_store_false_keeps_final_state(rng):
    m = linear_map(np.eye(2) * 0.5)
    seen = []
    last = simulate(m, [1.0, 1.0], 3, callback=lambda k, x: seen.append(k), store=False)
    assert last.tolist() == [[0.125, 0.125]] and seen == [0, 1, 2, 3]


def test_non_finite_state_is_reported():
    m = DiscreteMap(1, lambda x: x * 1e200)
    with np.errstate(over="ignore"), pytest.raises(NonFiniteStateError) as exc:
        simulate(m, [1.0], 5)
    assert exc.value.step == 2


def test_simulate_rejects_bad_inputs():
    m = linear_map(np.eye(2))
    with pytest.raises(ValueError, match="shape"):
        simulate(m, [1.0], 1)
    with pytest.raises(ValueError, match="non-negative"):
        simulate(m, [1.0, 2.0], -1)
    with pytest.raises(ValueError, match="positive"):
        euler(VectorField(1, lambda x: x), 0.0)


def test_dimension_mismatch_on_act():
    with pytest.raises(ValueError, match="dimension 2"):
        dynam_act(FinFunction([0], 1), VectorField(2, lambda x: x))


def test_act_matches_matrix_form(rng):
    for _ in range(20):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        phi = random_finfunction(rng, n, m)
        A = rng.standard_normal((n, n))
        M, K = pushforward_matrix(phi), pullback_matrix(phi)
        y = rng.standard_normal(m)
        assert np.allclose(dynam_act(phi, linear_field(A))(y), M @ A @ K @ y, atol=1e-12)
        # discrete systems move through their increments
        expect = y + M @ (A @ K @ y - K @ y)
        assert np.allclose(dynam_d_act(phi, linear_map(A))(y), expect, atol=1e-12)


def test_discrete_act_preserves_fixed_points(rng):
    m = linear_map(np.diag([1.0, 0.5]))  # fixes the first axis
    moved = dynam_d_act(FinFunction([0, 0], 2), m)
    y = np.array([0.0, 4.0])
    assert np.array_equal(moved(y), y)


@pytest.mark.parametrize("alg, make", [
    (DYNAM, lambda A: linear_field(A)),
    (DYNAM_D, lambda A: linear_map(A)),
])
def test_functor_and_monoidal_laws(rng, alg, make):
    for _ in range(20):
        a, b, c = (int(rng.integers(1, 5)) for _ in range(3))
        phi, psi = random_finfunction(rng, a, b), random_finfunction(rng, b, c)
        v = make(rng.standard_normal((a, a)))
        pts = list(rng.standard_normal((10, c)))
        assert alg.discrepancy(alg.act(compose(phi, psi), v), alg.act(psi, alg.act(phi, v)), pts) <= 1e-12
        assert alg.discrepancy(alg.act(identity(a), v), v, list(rng.standard_normal((5, a)))) <= 1e-15
        w = make(rng.standard_normal((c, c)))
        chi = random_finfunction(rng, c, b)
        lhs = alg.act(coproduct(phi, chi), alg.combine([v, w]))
        rhs = alg.combine([alg.act(phi, v), alg.act(chi, w)])
        assert alg.discrepancy(lhs, rhs, list(rng.standard_normal((10, 2 * b)))) <= 1e-12


def test_euler_is_natural():
    rng = np.random.default_rng(21)
    for _ in range(30):
        d = random_uwd(rng)
        fillers = fillers_for(rng, d, lambda r, n, lab: linear_field(r.standard_normal((n, n))))
        a = oapply(DYNAM_D, d, [OpenObject(f.domain_size, euler(f.payload, 0.05), f.port_map)
                                for f in fillers])
        c = oapply(DYNAM, d, fillers)
        b = euler(c.payload, 0.05)
        pts = list(rng.standard_normal((10, b.dim)))
        assert DYNAM_D.discrepancy(a.payload, b, pts) <= 1e-12


def test_selector_singleton_round_trip(rng):
    v = linear_field(rng.standard_normal((2, 2)))
    s = SelectorField.singleton(v)
    x = rng.standard_normal(2)
    assert np.array_equal(s(x, 3), v(x))
    assert SelectorField.singleton(linear_map(np.eye(2))).discrete


def noisy_selector(dim, scale=1.0):
    def select(x, seed):
        return -x + scale * np.random.default_rng(seed).uniform(-1, 1, dim)
    return SelectorField(dim, select)


def test_ndd_combine_splits_seed(rng):
    s = ndd_combine([noisy_selector(1), noisy_selector(1)])
    out = s(np.zeros(2), 0)
    assert out[0] != out[1]
    assert np.array_equal(s(np.zeros(2), 0), out)


def test_ndd_laws(rng):
    for _ in range(20):
        a, b, c = (int(rng.integers(1, 5)) for _ in range(3))
        phi, psi = random_finfunction(rng, a, b), random_finfunction(rng, b, c)
        s = noisy_selector(a)
        pts = list(rng.standard_normal((10, c)))
        assert NDD.discrepancy(ndd_act(compose(phi, psi), s), ndd_act(psi, ndd_act(phi, s)), pts) <= 1e-12


def test_euler_ndd_is_natural_for_seeded_selectors():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = random_uwd(rng)
        fillers = fillers_for(rng, d, lambda r, n, lab: noisy_selector(n, 0.5))
        a = oapply(NDD_D, d, [OpenObject(f.domain_size, euler_ndd(f.payload, 0.1), f.port_map)
                              for f in fillers])
        b = euler_ndd(oapply(NDD, d, fillers).payload, 0.1)
        pts = list(rng.standard_normal((10, b.dim)))
        for seed in range(3):
            assert np.allclose([a.payload(p, seed) for p in pts], [b(p, seed) for p in pts],
                               atol=1e-12)


def test_discrete_and_continuous_selectors_do_not_mix():
    with pytest.raises(ValueError):
        ndd_combine([noisy_selector(1), euler_ndd(noisy_selector(1), 0.1)])
    with pytest.raises(ValueError):
        ndd_d_act(identity(1), noisy_selector(1))
    with pytest.raises(ValueError):
        simulate(noisy_selector(1), [0.0], 3)


def test_simulate_selector_is_reproducible():
    s = euler_ndd(noisy_selector(2), 0.1)
    a = simulate(s, [1.0, -1.0], 30, seed=5)
    b = simulate(s, [1.0, -1.0], 30, seed=5)
    c = simulate(s, [1.0, -1.0], 30, seed=6)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_message_passing_single_subsystem(rng):
    m = linear_map(rng.standard_normal((3, 3)) * 0.4)
    x0 = rng.standard_normal(3)
    mp = simulate_message_passing(identity_uwd(3), [closed(m)], x0, 25)
    # increments are added back, so agreement is up to rounding
    assert np.allclose(mp, simulate(m, x0, 25), rtol=1e-12, atol=1e-14)


def test_message_passing_matches_composite():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = random_uwd(rng)
        subs = fillers_for(rng, d, lambda r, n, lab: linear_map(np.eye(n) - 0.1 * r.random((n, n))))
        comp = oapply(DYNAM_D, d, subs).payload
        x0 = rng.standard_normal(comp.dim)
        ref = simulate(comp, x0, 50)
        serial = simulate_message_passing(d, subs, x0, 50)
        parallel = simulate_message_passing(d, subs, x0, 50, mode="parallel", max_workers=3)
        assert np.array_equal(serial, ref)
        assert np.max(np.abs(parallel - ref)) <= 1e-12


def test_message_passing_argument_errors(two_box_uwd):
    m = closed(linear_map(np.eye(2)))
    with pytest.raises(ValueError, match="2 boxes"):
        simulate_message_passing(two_box_uwd, [m], np.zeros(3), 1)
    with pytest.raises(ValueError, match="mode"):
        simulate_message_passing(two_box_uwd, [m, m], np.zeros(3), 1, mode="gpu")


def test_trajectory_csv_round_trip(tmp_path, rng):
    traj = rng.standard_normal((6, 3))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj)
    assert path.read_text().splitlines()[0] == "step,x0,x1,x2"
    assert np.array_equal(read_trajectory_csv(path), traj)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shared_fixed_points_survive_composition(seed):
    rng = np.random.default_rng(seed)
    d = random_uwd(rng)
    # every subsystem contracts towards 0, so 0 is a common fixed point
    subs = fillers_for(rng, d, lambda r, n, lab: linear_map(np.diag(r.uniform(0.0, 0.9, n))))
    comp = oapply(DYNAM_D, d, subs).payload
    assert np.array_equal(comp(np.zeros(comp.dim)), np.zeros(comp.dim))
