"""Abstract mixed variational (saddle-point) solver and well-posedness diagnostics.

Systems have the block form

    A u + B^T p = f
    B u         = g

with A symmetric positive semidefinite and coercive on Ker B (the caller's
responsibility; diagnosed here on failure).  The production solver is an
Uzawa-type Krylov iteration: preconditioned CG on the pressure Schur
complement B A^-1 B^T, with an inner preconditioned CG solve on A per outer
application.  A direct factorization of the full KKT matrix is kept alongside
for workflows that reuse one system for many right-hand sides.

Homogeneous velocity constraints are carried as a pinned dof set; a known
pressure nullspace (e.g. constants for enclosed flow) is projected out during
the iteration and reported in the gauge-free representative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

DENSE_EIG_LIMIT = 6000


def _as_csr(M):
    if M is None:
        return None
    if sp.issparse(M):
        return M.tocsr()
    return sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))


@dataclass
class SaddleSystem:
    """One mixed problem: operators, loads, norms and constraint metadata."""

    A: sp.spmatrix
    B: sp.spmatrix
    f: np.ndarray
    g: np.ndarray
    gram_x: sp.spmatrix | None = None
    gram_m: sp.spmatrix | None = None
    pinned: np.ndarray | None = None
    pressure_nullspace: np.ndarray | None = None
    near_nullspace: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A = _as_csr(self.A)
        self.B = _as_csr(self.B)
        self.f = np.asarray(self.f, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n, m = self.A.shape[0], self.B.shape[0]
        if self.B.shape[1] != n or self.f.shape != (n,) or self.g.shape != (m,):
            raise ValueError("inconsistent saddle system dimensions")
        self.gram_x = _as_csr(self.gram_x) if self.gram_x is not None else sp.eye(n, format="csr")
        self.gram_m = _as_csr(self.gram_m) if self.gram_m is not None else sp.eye(m, format="csr")
        if self.pressure_nullspace is not None:
            z = np.atleast_2d(np.asarray(self.pressure_nullspace, dtype=float))
            if z.shape[0] == m:
                z = z.reshape(m, -1)
            else:
                z = z.T
            self.pressure_nullspace = np.linalg.qr(z)[0]

    @property
    def free(self) -> np.ndarray:
        if self.pinned is None or len(self.pinned) == 0:
            return np.arange(self.A.shape[0])
        mask = np.ones(self.A.shape[0], dtype=bool)
        mask[self.pinned] = False
        return np.nonzero(mask)[0]


@dataclass
class SaddleSolution:
    u: np.ndarray
    p: np.ndarray
    residual_momentum: float
    residual_mass: float
    iterations: int
    inner_iterations: int
    method: str
    converged: bool


@dataclass
class InfSupReport:
    beta_h: float
    lambda_h: float
    meta: dict


# ---------------------------------------------------------------------------
# inner solver on A


class _InnerA:
    """Preconditioned CG on the (reduced) velocity block."""

    def __init__(self, A_ff, tol=1e-13, direct_limit=200_000):
        self.A = A_ff
        self.tol = tol
        self.count = 0
        n = A_ff.shape[0]
        if n <= direct_limit:
            self._factor = spla.splu(A_ff.tocsc())
            self._M = spla.LinearOperator((n, n), matvec=self._factor.solve)
        else:  # pragma: no cover - sizes above the direct limit
            diag = A_ff.diagonal()
            diag[diag == 0.0] = 1.0
            self._M = spla.LinearOperator((n, n), matvec=lambda x: x / diag)

    def solve(self, rhs):
        if not np.any(rhs):
            return np.zeros_like(rhs)
        it = [0]

        def cb(_):
            it[0] += 1

        x, info = spla.cg(self.A, rhs, M=self._M, rtol=self.tol, atol=0.0,
                          maxiter=500, callback=cb)
        if info != 0:
            raise SolverError(f"inner CG on A failed to converge (info={info})")
        self.count += it[0]
        return x


def _projector(z):
    if z is None:
        return lambda v: v
    return lambda v: v - z @ (z.T @ v)


# ---------------------------------------------------------------------------
# solvers


class UzawaSolver:
    """CG on the pressure Schur complement with inner CG on A."""

    def __init__(self, system: SaddleSystem, inner_tol: float = 1e-13):
        self.system = system
        free = system.free
        self.free = free
        self.A_ff = system.A[free][:, free].tocsr()
        self.B_f = system.B[:, free].tocsr()
        self.inner = _InnerA(self.A_ff, tol=inner_tol)
        gm = system.gram_m
        diag = np.asarray(gm.diagonal())
        offdiag = abs(gm - sp.diags(diag)).max() if gm.nnz else 0.0
        if offdiag <= 1e-14 * max(diag.max(), 1.0):
            self._mp = lambda r: r / diag
        else:
            factor = spla.splu(gm.tocsc())
            self._mp = factor.solve
        self._proj = _projector(system.pressure_nullspace)

    def solve(self, f=None, g=None, tol=1e-10, max_iter=500) -> SaddleSolution:
        sysm = self.system
        f = sysm.f if f is None else f
        g = sysm.g if g is None else g
        f_f = f[self.free]
        proj = self._proj

        u_f = self.inner.solve(f_f)
        r = proj(self.B_f @ u_f - g)
        scale = max(np.linalg.norm(g), np.linalg.norm(r), np.linalg.norm(f_f), 1e-300)
        target = 0.5 * tol * scale

        m = self.B_f.shape[0]
        p = np.zeros(m)
        z = proj(self._mp(r))
        d = z.copy()
        delta = r @ z
        history = [np.linalg.norm(r)]
        it = 0
        while history[-1] > target and it < max_iter:
            q = proj(self.B_f @ self.inner.solve(self.B_f.T @ d))
            dq = d @ q
            if dq <= 0:
                break
            alpha = delta / dq
            p += alpha * d
            r -= alpha * q
            z = proj(self._mp(r))
            delta_new = r @ z
            d = z + (delta_new / delta) * d
            delta = delta_new
            history.append(np.linalg.norm(r))
            it += 1

        u_f = self.inner.solve(f_f - self.B_f.T @ p)
        res_mom = np.linalg.norm(self.A_ff @ u_f + self.B_f.T @ p - f_f)
        # the solvable part of the mass equation excludes the pressure-nullspace
        # component of g (a data-consistency defect, not a solver failure)
        res_mass = np.linalg.norm(proj(self.B_f @ u_f - g))
        mom_scale = max(np.linalg.norm(f_f), np.linalg.norm(self.B_f.T @ p), 1e-300)
        converged = res_mom <= tol * mom_scale and res_mass <= tol * scale
        u = np.zeros(sysm.A.shape[0])
        u[self.free] = u_f
        if not converged:
            raise SolverError(
                "Uzawa iteration did not converge; the inf-sup constant of B is "
                "likely degenerate for this pair",
                diagnostics={
                    "iterations": it,
                    "residual_history": history,
                    "best_u": u,
                    "best_p": proj(p),
                    "residual_mass": res_mass,
                    "residual_momentum": res_mom,
                },
            )
        return SaddleSolution(
            u=u,
            p=proj(p),
            residual_momentum=float(res_mom),
            residual_mass=float(res_mass),
            iterations=it,
            inner_iterations=self.inner.count,
            method="uzawa",
            converged=bool(converged),
        )


class DirectSaddleSolver:
    """One sparse factorization of the (bordered) KKT matrix, many solves."""

    def __init__(self, system: SaddleSystem):
        self.system = system
        free = system.free
        self.free = free
        A_ff = system.A[free][:, free]
        B_f = system.B[:, free]
        z = system.pressure_nullspace
        n, m = A_ff.shape[0], B_f.shape[0]
        self.n, self.m = n, m
        if z is None:
            kkt = sp.bmat([[A_ff, B_f.T], [B_f, None]], format="csc")
        else:
            zs = sp.csr_matrix(z)
            k = z.shape[1]
            kkt = sp.bmat(
                [
                    [A_ff, B_f.T, None],
                    [B_f, None, zs],
                    [None, zs.T, None],
                ],
                format="csc",
            )
        self._factor = spla.splu(kkt)
        self.A_ff, self.B_f = A_ff.tocsr(), B_f.tocsr()

    def solve(self, f=None, g=None, tol=1e-10, max_iter=0) -> SaddleSolution:
        sysm = self.system
        f = sysm.f if f is None else f
        g = sysm.g if g is None else g
        f_f = f[self.free]
        rhs = np.concatenate([f_f, g, np.zeros(self._factor.shape[0] - self.n - self.m)])
        x = self._factor.solve(rhs)
        u_f, p = x[: self.n], x[self.n : self.n + self.m]
        res_mom = np.linalg.norm(self.A_ff @ u_f + self.B_f.T @ p - f_f)
        mass_vec = self.B_f @ u_f - g
        z = self.system.pressure_nullspace
        if z is not None:
            mass_vec = mass_vec - z @ (z.T @ mass_vec)
        res_mass = np.linalg.norm(mass_vec)
        scale = max(np.linalg.norm(f_f), np.linalg.norm(g),
                    np.linalg.norm(self.B_f.T @ p), 1e-300)
        u = np.zeros(sysm.A.shape[0])
        u[self.free] = u_f
        return SaddleSolution(
            u=u,
            p=p,
            residual_momentum=float(res_mom),
            residual_mass=float(res_mass),
            iterations=1,
            inner_iterations=0,
            method="direct",
            converged=bool(max(res_mom, res_mass) <= max(tol, 1e-11) * scale),
        )


class MinresSaddleSolver:
    """Block-preconditioned MINRES on the full KKT system with restarts.

    Memory-lean path for systems too large to factorize: one multigrid
    V-cycle on the velocity block and the scaled pressure mass diagonal as
    preconditioner, with defect-correction restarts until the true residuals
    meet the target.
    """

    def __init__(self, system: SaddleSystem, schur_diag: np.ndarray | None = None):
        import pyamg

        free = system.free
        self.system = system
        self.free = free
        self.A_ff = system.A[free][:, free].tocsr()
        self.B_f = system.B[:, free].tocsr()
        self.n, self.m = self.A_ff.shape[0], self.B_f.shape[0]
        near = system.near_nullspace
        near_f = near[free] if near is not None else None
        ml = pyamg.smoothed_aggregation_solver(
            self.A_ff, B=near_f, max_coarse=500, strength="symmetric"
        )
        self._mv = ml.aspreconditioner(cycle="V")
        if schur_diag is None:
            schur_diag = np.asarray(system.gram_m.diagonal())
        self._mp = schur_diag
        self._kkt = sp.bmat([[self.A_ff, self.B_f.T], [self.B_f, None]], format="csr")
        z = system.pressure_nullspace
        self._zp = z if z is not None else None

    def _proj_p(self, v):
        if self._zp is not None:
            v = v - self._zp @ (self._zp.T @ v)
        return v

    def solve(self, f=None, g=None, tol=1e-10, max_iter=600, restarts=4) -> SaddleSolution:
        sysm = self.system
        f = sysm.f if f is None else f
        g = sysm.g if g is None else g
        f_f = f[self.free]
        n, m = self.n, self.m
        rhs = np.concatenate([f_f, g])
        mv, mp = self._mv, self._mp

        def prec(x):
            out = np.empty_like(x)
            out[:n] = mv @ x[:n]
            out[n:] = x[n:] / mp
            return out

        M = spla.LinearOperator(self._kkt.shape, matvec=prec)
        x = np.zeros(n + m)
        scale = max(np.linalg.norm(rhs), 1e-300)
        total_it = 0
        for _ in range(restarts):
            r = rhs - self._kkt @ x
            r[n:] = self._proj_p(r[n:])
            if np.linalg.norm(r) <= 0.2 * tol * scale:
                break
            it = [0]
            dx, _ = spla.minres(
                self._kkt, r, M=M, rtol=1e-10, maxiter=max_iter,
                callback=lambda _x: it.__setitem__(0, it[0] + 1),
            )
            x = x + dx
            x[n:] = self._proj_p(x[n:])
            total_it += it[0]
        u_f, p = x[:n], x[n:]
        res_mom = np.linalg.norm(self.A_ff @ u_f + self.B_f.T @ p - f_f)
        res_mass = np.linalg.norm(self._proj_p(self.B_f @ u_f - g))
        mom_scale = max(np.linalg.norm(f_f), np.linalg.norm(self.B_f.T @ p), 1e-300)
        mass_scale = max(np.linalg.norm(g), scale, 1e-300)
        converged = res_mom <= tol * mom_scale and res_mass <= tol * mass_scale
        u = np.zeros(sysm.A.shape[0])
        u[self.free] = u_f
        if not converged:
            raise SolverError(
                "MINRES saddle solve stalled above the residual target",
                diagnostics={
                    "iterations": total_it,
                    "residual_momentum": res_mom,
                    "residual_mass": res_mass,
                    "best_u": u,
                    "best_p": p,
                },
            )
        return SaddleSolution(
            u=u,
            p=p,
            residual_momentum=float(res_mom),
            residual_mass=float(res_mass),
            iterations=total_it,
            inner_iterations=0,
            method="minres",
            converged=True,
        )


def solve(system: SaddleSystem, tol: float = 1e-10, max_iter: int = 500,
          method: str = "uzawa") -> SaddleSolution:
    """Solve one saddle system; `method` is "uzawa" (default), "direct" or "minres"."""
    if method == "uzawa":
        return UzawaSolver(system).solve(tol=tol, max_iter=max_iter)
    if method == "direct":
        return DirectSaddleSolver(system).solve(tol=tol)
    if method == "minres":
        return MinresSaddleSolver(system).solve(tol=tol, max_iter=max_iter)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# inf-sup and coercivity diagnostics


def _dense_schur(B_f, gx_factor, chunk=256):
    m = B_f.shape[0]
    Bt = B_f.T.tocsc()
    S = np.empty((m, m))
    for start in range(0, m, chunk):
        cols = np.asarray(Bt[:, start : start + chunk].todense())
        S[:, start : start + chunk] = B_f @ gx_factor.solve(cols)
    return 0.5 * (S + S.T)


def _deflate(mat, z):
    if z is None:
        return mat, None
    basis = la.null_space(z.T)
    return basis.T @ mat @ basis, basis


def estimate_inf_sup(system: SaddleSystem, compute_lambda: bool = False) -> InfSupReport:
    """Discrete inf-sup constant from the Schur pencil B Gx^-1 B^T q = beta^2 Gm q.

    Also reports the equivalent dual-route value (smallest nonzero generalized
    singular value of B over the X-Gram) in the metadata, and the coercivity
    constant of A on Ker B when `compute_lambda` is set (dense sizes only).
    """
    free = system.free
    B_f = system.B[:, free].tocsr()
    gx = system.gram_x[free][:, free].tocsc()
    gm = system.gram_m
    m, n = B_f.shape
    if m > DENSE_EIG_LIMIT:
        raise SolverError(f"pressure space too large for dense inf-sup estimate (m={m})")

    gx_factor = spla.splu(gx)
    S = _dense_schur(B_f, gx_factor)
    gm_dense = gm.toarray() if sp.issparse(gm) else np.asarray(gm)
    z = system.pressure_nullspace
    S_d, basis = _deflate(S, z)
    gm_d = basis.T @ gm_dense @ basis if basis is not None else gm_dense
    evals = la.eigh(S_d, gm_d, eigvals_only=True)
    beta_sq = float(evals[0])
    beta_h = float(np.sqrt(max(beta_sq, 0.0)))

    # dual route: smallest nonzero eigenvalue of (B^T Gm^-1 B, Gx)
    beta_dual = None
    if n <= DENSE_EIG_LIMIT:
        B_dense = np.asarray(B_f.todense())
        gm_inv_B = np.linalg.solve(gm_dense, B_dense)
        quot = B_dense.T @ gm_inv_B
        gx_dense = np.asarray(gx.todense())
        evq = la.eigh(0.5 * (quot + quot.T), gx_dense, eigvals_only=True)
        rank = m - (0 if z is None else z.shape[1])
        nonzero = evq[n - rank :]
        beta_dual = float(np.sqrt(max(nonzero[0], 0.0)))

    lambda_h = float("nan")
    if compute_lambda:
        lambda_h = check_coercivity(system)
    return InfSupReport(
        beta_h=beta_h,
        lambda_h=lambda_h,
        meta={
            "beta_h_dual": beta_dual,
            "pressure_dim": int(m),
            "velocity_dim": int(n),
            "deflated": z is not None,
            "method": "dense schur pencil",
        },
    )


def check_coercivity(system: SaddleSystem) -> float:
    """Smallest Rayleigh quotient of A over a computed basis of Ker B (X norm)."""
    free = system.free
    A_ff = system.A[free][:, free]
    B_f = system.B[:, free]
    n = A_ff.shape[0]
    if n > DENSE_EIG_LIMIT:
        raise SolverError(f"velocity space too large for dense kernel basis (n={n})")
    kernel = la.null_space(np.asarray(B_f.todense()))
    if kernel.shape[1] == 0:
        return float("inf")
    gx = system.gram_x[free][:, free]
    An = kernel.T @ (A_ff @ kernel)
    Gn = kernel.T @ (gx @ kernel)
    evals = la.eigh(0.5 * (An + An.T), 0.5 * (Gn + Gn.T), eigvals_only=True)
    return float(evals[0])


def operator_norm(system: SaddleSystem) -> float:
    """Norm of the form a(.,.) in the X geometry (largest generalized eigenvalue)."""
    free = system.free
    A_ff = np.asarray(system.A[free][:, free].todense())
    gx = np.asarray(system.gram_x[free][:, free].todense())
    evals = la.eigh(0.5 * (A_ff + A_ff.T), gx, eigvals_only=True)
    return float(evals[-1])


def stability_constant(norm_a: float, beta_h: float, lambda_h: float) -> float:
    """The constant of the well-posedness estimate |u|+|p| <= C (|f|+|g|)."""
    if beta_h <= 0 or lambda_h <= 0:
        return float("inf")
    c_uf = 1.0 / lambda_h
    c_ug = (1.0 + norm_a / lambda_h) / beta_h
    c_pf = (1.0 + norm_a / lambda_h) / beta_h
    c_pg = norm_a * (1.0 + norm_a / lambda_h) / beta_h**2
    return max(c_uf + c_pf, c_ug + c_pg)
