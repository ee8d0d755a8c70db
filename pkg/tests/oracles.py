"""Reference implementations written independently of the package code."""
from __future__ import annotations

import numpy as np


def quotient_closure(m_map, l_map, n_s, n_j):
    """Pushout by explicit partition refinement over S + J.

    Returns ``(apex, proj_left, proj_right)`` with classes numbered in order
    of first appearance scanning S then J.
    """
    blocks = [{i} for i in range(n_s + n_j)]
    changed = True
    while changed:
        changed = False
        for a, b in zip(m_map, l_map):
            ia = next(k for k, blk in enumerate(blocks) if a in blk)
            ib = next(k for k, blk in enumerate(blocks) if n_s + b in blk)
            if ia != ib:
                blocks[ia] |= blocks[ib]
                del blocks[ib]
                changed = True
    number = {}
    out = []
    for e in range(n_s + n_j):
        k = next(k for k, blk in enumerate(blocks) if e in blk)
        key = min(blocks[k])
        if key not in number:
            number[key] = len(number)
        out.append(number[key])
    return len(number), out[:n_s], out[n_s:]


def pushforward_loop(phi_map, m, x):
    out = [0.0] * m
    for i, j in enumerate(phi_map):
        out[j] += x[i]
    return np.array(out)


def pullback_loop(phi_map, y):
    return np.array([y[j] for j in phi_map], dtype=float)


def kkt_flows(src, tgt, V, a, b_cost, balance):
    """Solve ``[diag(2a) A'; A 0] (x, lam) = (-b_cost, balance)`` by least squares."""
    E = len(src)
    A = np.zeros((V, E))
    for e, (s, t) in enumerate(zip(src, tgt)):
        if s != t:
            A[s, e] = 1.0
            A[t, e] = -1.0
    K = np.block([[np.diag(2.0 * np.asarray(a)), A.T], [A, np.zeros((V, V))]])
    rhs = np.concatenate([-np.asarray(b_cost, dtype=float), np.asarray(balance, dtype=float)])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:E], sol[E:]


def algorithm1(K: np.ndarray, grads, dims, s0, gamma, steps):
    """Literal message-passing gradient descent over junction states.

    ``K`` is the 0/1 matrix copying junction states to box ports; ``grads``
    are per-box gradient functions on their port blocks.
    """
    s = np.array(s0, dtype=float)
    traj = [s.copy()]
    offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    for _ in range(steps):
        t = K @ s
        t = np.concatenate([g(t[offs[i]:offs[i + 1]]) for i, g in enumerate(grads)])
        s = s - gamma * (K.T @ t)
        traj.append(s.copy())
    return np.array(traj)
