"""Shared generators and oracles for the solver test suites."""

import numpy as np

from varstokes.saddle import SaddleSystem


def random_spd(rng, n, lo=0.5, hi=5.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.T


def random_saddle_system(rng, nmax=50, mmax=20):
    """Dense SPD-A / full-row-rank-B system with random SPD norm Grams."""
    n = int(rng.integers(8, nmax + 1))
    m = int(rng.integers(2, min(n - 2, mmax) + 1))
    A = random_spd(rng, n)
    B = rng.standard_normal((m, n))
    gx = random_spd(rng, n, 0.5, 2.0)
    gm = random_spd(rng, m, 0.5, 2.0)
    f = rng.standard_normal(n)
    g = rng.standard_normal(m)
    return SaddleSystem(A=A, B=B, f=f, g=g, gram_x=gx, gram_m=gm)


def kkt_oracle(system):
    """Dense LU on the full KKT block matrix (independent reference path)."""
    A = system.A.toarray()
    B = system.B.toarray()
    n, m = A.shape[0], B.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = A
    kkt[:n, n:] = B.T
    kkt[n:, :n] = B
    sol = np.linalg.solve(kkt, np.concatenate([system.f, system.g]))
    return sol[:n], sol[n:]


def xnorm(system, u):
    return float(np.sqrt(u @ (system.gram_x @ u)))


def mnorm(system, p):
    return float(np.sqrt(p @ (system.gram_m @ p)))


def dual_xnorm(system, f):
    gx = system.gram_x.toarray()
    return float(np.sqrt(f @ np.linalg.solve(gx, f)))


def dual_mnorm(system, g):
    gm = system.gram_m.toarray()
    return float(np.sqrt(g @ np.linalg.solve(gm, g)))
