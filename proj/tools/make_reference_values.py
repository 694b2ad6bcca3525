#!/usr/bin/env python3
"""Regenerates the frozen reference constants used by the C++ unit tests.

Each instance is solved with scipy's HiGHS LP solver on a formulation written
directly from the optimization problem statement (all pairwise Lipschitz
constraints, no adjacent-pair reduction), so the numbers are independent of
the library's solver path. Output is meant to be pasted into tests/.
"""
import numpy as np
from scipy.optimize import linprog


def pinball_lp(phi, s, alpha, w):
    """min sum_i w_i [(1-a) p_i + a q_i]  s.t.  phi beta + p - q = s, p,q >= 0."""
    m, d = phi.shape
    c = np.concatenate([np.zeros(d), (1 - alpha) * w, alpha * w])
    A = np.hstack([phi, np.eye(m), -np.eye(m)])
    bounds = [(None, None)] * d + [(0, None)] * (2 * m)
    r = linprog(c, A_eq=A, b_eq=s, bounds=bounds, method="highs")
    assert r.status == 0, r.message
    return r.fun


def lipschitz_lp(x, phi, s, alpha, lam):
    """min (1/m) sum_i pinball + lam * t with all-pairs |g_i - g_j| <= d_ij t."""
    m, d = phi.shape
    nv = 3 * m + d + 1  # gamma, beta, t, p, q
    ig, ib, it, ip, iq = 0, m, m + d, m + d + 1, 2 * m + d + 1
    c = np.zeros(nv)
    c[it] = lam
    c[ip:ip + m] = (1 - alpha) / m
    c[iq:iq + m] = alpha / m
    Aeq = np.zeros((m, nv))
    for i in range(m):
        Aeq[i, ig + i] = 1.0
        Aeq[i, ib:ib + d] = phi[i]
        Aeq[i, ip + i] = 1.0
        Aeq[i, iq + i] = -1.0
    rows = []
    for i in range(m):
        for j in range(i + 1, m):
            dist = np.linalg.norm(x[i] - x[j])
            for sgn in (1.0, -1.0):
                row = np.zeros(nv)
                row[ig + i] = sgn
                row[ig + j] = -sgn
                row[it] = -dist
                rows.append(row)
    Aub = np.array(rows)
    bounds = [(None, None)] * (m + d) + [(0, None)] * (2 * m + 1)
    r = linprog(c, A_eq=Aeq, b_eq=s, A_ub=Aub, b_ub=np.zeros(len(rows)),
                bounds=bounds, method="highs")
    assert r.status == 0, r.message
    return r.fun


def main():
    x1 = np.array([0.0, 0.7, 1.3, 2.1, 3.0, 4.2])[:, None]
    s1 = np.array([0.5, 1.9, -0.3, 2.4, 0.8, 1.6])
    phi1 = np.ones((6, 1))
    print("lip1d objective = %.12f" % lipschitz_lp(x1, phi1, s1, 0.2, 0.15))

    x2 = np.array([[0, 0], [1, 0.5], [0.4, 1.2], [2, 1], [1.5, 2.2], [3, 0.3]],
                  dtype=float)
    s2 = np.array([1.0, 0.2, 1.7, -0.5, 2.2, 0.9])
    phi2 = np.hstack([np.ones((6, 1)), x2[:, :1]])
    print("lip2d objective = %.12f" % lipschitz_lp(x2, phi2, s2, 0.1, 0.3))

    xl = np.array([0.2, 0.5, 1.1, 1.7, 2.3, 3.1, 3.8])
    sl = np.array([1.2, 0.4, 2.0, 1.1, 2.9, 1.8, 3.5])
    phil = np.column_stack([np.ones(7), xl])
    w_unif = np.full(7, 1 / 7)
    print("lin1 uniform objective = %.12f" % pinball_lp(phil, sl, 0.25, w_unif))
    w = np.array([1, 2, 1, 1, 3, 1, 1], dtype=float)
    w = w / w.sum()
    print("lin1 weighted objective = %.12f" % pinball_lp(phil, sl, 0.25, w))


if __name__ == "__main__":
    main()
