import numpy as np
import pytest

from helpers import (
    dual_mnorm,
    dual_xnorm,
    kkt_oracle,
    mnorm,
    random_saddle_system,
    random_spd,
    xnorm,
)
from varstokes.errors import SolverError
from varstokes.saddle import (
    DirectSaddleSolver,
    SaddleSystem,
    check_coercivity,
    estimate_inf_sup,
    operator_norm,
    solve,
    stability_constant,
)


def test_zero_data_gives_zero_solution():
    rng = np.random.default_rng(0)
    sysm = random_saddle_system(rng)
    sysm.f[:] = 0.0
    sysm.g[:] = 0.0
    sol = solve(sysm)
    assert np.allclose(sol.u, 0.0) and np.allclose(sol.p, 0.0)
    assert sol.residual_momentum == 0.0 and sol.residual_mass == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_uzawa_matches_dense_kkt(seed):
    rng = np.random.default_rng(100 + seed)
    sysm = random_saddle_system(rng)
    u_ref, p_ref = kkt_oracle(sysm)
    sol = solve(sysm, tol=1e-12, max_iter=2000)
    scale = np.linalg.norm(u_ref) + np.linalg.norm(p_ref)
    assert np.linalg.norm(sol.u - u_ref) + np.linalg.norm(sol.p - p_ref) <= 1e-10 * scale
    assert sol.converged and sol.iterations > 0 and sol.inner_iterations > 0


@pytest.mark.parametrize("method", ["direct", "minres"])
def test_other_methods_match_oracle(method):
    rng = np.random.default_rng(7)
    sysm = random_saddle_system(rng)
    u_ref, p_ref = kkt_oracle(sysm)
    sol = solve(sysm, tol=1e-11, method=method)
    scale = np.linalg.norm(u_ref) + np.linalg.norm(p_ref)
    assert np.linalg.norm(sol.u - u_ref) + np.linalg.norm(sol.p - p_ref) <= 1e-9 * scale


def test_stability_estimate_holds():
    rng = np.random.default_rng(42)
    for _ in range(10):
        sysm = random_saddle_system(rng)
        rep = estimate_inf_sup(sysm, compute_lambda=True)
        norm_a = operator_norm(sysm)
        c = stability_constant(norm_a, rep.beta_h, rep.lambda_h)
        sol = solve(sysm, tol=1e-12, max_iter=2000)
        lhs = xnorm(sysm, sol.u) + mnorm(sysm, sol.p)
        rhs = c * (dual_xnorm(sysm, sysm.f) + dual_mnorm(sysm, sysm.g))
        assert lhs <= rhs * (1 + 1e-10)


def test_beta_routes_agree():
    rng = np.random.default_rng(3)
    for _ in range(10):
        sysm = random_saddle_system(rng)
        rep = estimate_inf_sup(sysm)
        assert rep.meta["beta_h_dual"] == pytest.approx(rep.beta_h, rel=1e-8)


def test_beta_degenerate_and_isometric_cases():
    rng = np.random.default_rng(4)
    n, m = 20, 5
    A = random_spd(rng, n)
    f, g = rng.standard_normal(n), rng.standard_normal(m)
    zero = SaddleSystem(A=A, B=np.zeros((m, n)), f=f, g=g)
    assert estimate_inf_sup(zero).beta_h == 0.0
    # B with Gm-orthonormal rows in the Gx geometry: beta = 1
    B = np.zeros((m, n))
    B[np.arange(m), np.arange(m)] = 1.0
    iso = SaddleSystem(A=A, B=B, f=f, g=g)
    assert estimate_inf_sup(iso).beta_h == pytest.approx(1.0, rel=1e-12)


def test_coercivity_identity_and_kernel_overlap():
    rng = np.random.default_rng(5)
    n, m = 18, 4
    gx = random_spd(rng, n)
    B = rng.standard_normal((m, n))
    f, g = rng.standard_normal(n), rng.standard_normal(m)
    ident = SaddleSystem(A=gx, B=B, f=f, g=g, gram_x=gx)
    assert check_coercivity(ident) == pytest.approx(1.0, rel=1e-10)
    # construct A that kills one kernel direction of B
    import scipy.linalg as la

    kernel = la.null_space(B)
    v = kernel[:, 0]
    proj = np.eye(n) - np.outer(v, v) / (v @ v)
    A = proj.T @ random_spd(rng, n) @ proj
    lam = check_coercivity(SaddleSystem(A=A, B=B, f=f, g=g, gram_x=gx))
    assert lam == pytest.approx(0.0, abs=1e-10)


def test_pinned_dofs_reduce_like_manual_elimination():
    rng = np.random.default_rng(6)
    sysm = random_saddle_system(rng)
    n = sysm.A.shape[0]
    pinned = np.array([0, 3, 5])
    sysm.pinned = pinned
    sol = solve(sysm, tol=1e-12, max_iter=2000)
    assert np.all(sol.u[pinned] == 0.0)
    free = sysm.free
    manual = SaddleSystem(
        A=sysm.A[free][:, free], B=sysm.B[:, free], f=sysm.f[free], g=sysm.g
    )
    u_ref, p_ref = kkt_oracle(manual)
    assert np.allclose(sol.u[free], u_ref, atol=1e-9 * np.linalg.norm(u_ref))
    assert np.allclose(sol.p, p_ref, atol=1e-9 * np.linalg.norm(p_ref))


def test_pressure_nullspace_projection():
    rng = np.random.default_rng(8)
    n, m = 30, 6
    A = random_spd(rng, n)
    z = rng.standard_normal(m)
    z /= np.linalg.norm(z)
    B = (np.eye(m) - np.outer(z, z)) @ rng.standard_normal((m, n))
    u_star = rng.standard_normal(n)
    g = B @ u_star
    f = rng.standard_normal(n)
    sysm = SaddleSystem(A=A, B=B, f=f, g=g, pressure_nullspace=z)
    for method in ("uzawa", "direct"):
        sol = solve(sysm, tol=1e-11, max_iter=2000, method=method)
        assert abs(z @ sol.p) < 1e-9
        assert sol.residual_mass <= 1e-9 * np.linalg.norm(g)
    rep = estimate_inf_sup(sysm)
    assert rep.beta_h > 0  # smallest eigenvalue after deflating the nullspace


def test_nonconvergence_raises_with_diagnostics():
    rng = np.random.default_rng(9)
    sysm = random_saddle_system(rng)
    with pytest.raises(SolverError) as err:
        solve(sysm, tol=1e-13, max_iter=1)
    diag = err.value.diagnostics
    assert "residual_history" in diag and len(diag["residual_history"]) >= 1
    assert diag["best_u"].shape == sysm.f.shape


def test_direct_solver_reusable_for_many_rhs():
    rng = np.random.default_rng(10)
    sysm = random_saddle_system(rng)
    solver = DirectSaddleSolver(sysm)
    for _ in range(4):
        f = rng.standard_normal(sysm.A.shape[0])
        g = rng.standard_normal(sysm.B.shape[0])
        sol = solver.solve(f, g)
        ref = kkt_oracle(SaddleSystem(A=sysm.A, B=sysm.B, f=f, g=g))
        assert np.allclose(sol.u, ref[0], atol=1e-10 * (1 + np.linalg.norm(ref[0])))
