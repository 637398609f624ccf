"""Newtonian and single-layer potentials defined through whole-box saddle solves.

The Newtonian pair solves the mixed problem  a(u,v) + b(v,p) = ell(v),
b(u,q) = 0  on the truncation box with velocity pinned on its boundary; the
single-layer pair is the Newtonian potential of the boundary load gamma*(phi),
i.e. the weak form of the transmission problem with conormal jump phi.  The
pressure constant is gauged to zero mean over the cell shell touching the
truncation boundary, which keeps the exact kernel pair (0, -chi) exact at the
discrete level.

Boundary operators derived from the single layer:
  trace          -> the single-layer boundary operator,
  averaged one-sided conormal derivatives -> the K* operator,
and the constrained inverse of the boundary operator on normal-orthogonal
trace data, normalized by the quotient convention of the trace space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .errors import PreconditionError, SolverError
from .fespace import CotraceDensity, QuotientDensity, TraceField, pair, trace
from .forms import AssembledForms, conormal, gamma_star
from .mesh import normal_density
from .saddle import DirectSaddleSolver, MinresSaddleSolver, SaddleSystem

DIRECT_FREE_DOF_LIMIT = 20_000
DENSE_BOUNDARY_LIMIT = 2_500


def rigid_body_modes(vspace) -> np.ndarray:
    """Translations and rotations as velocity coefficient vectors (ndof, 6)."""
    modes = np.zeros((vspace.ndof, 6))
    for c in range(3):
        modes[c::3, c] = 1.0
    for k in range(3):
        modes[:, 3 + k] = np.cross(np.eye(3)[k], vspace.node_xyz).reshape(-1)
    return modes


class CachedStokesSolver:
    """One factorization (or multigrid setup) reused for many right-hand sides."""

    def __init__(self, system: SaddleSystem, schur_diag=None,
                 direct_limit: int = DIRECT_FREE_DOF_LIMIT):
        self.system = system
        if len(system.free) <= direct_limit:
            self._impl = DirectSaddleSolver(system)
            self.kind = "direct"
        else:
            self._impl = MinresSaddleSolver(system, schur_diag=schur_diag)
            self.kind = "minres"

    def solve(self, f, g=None, tol: float = 1e-10):
        if g is None:
            g = np.zeros(self.system.B.shape[0])
        return self._impl.solve(f, g, tol=tol)


@dataclass
class PotentialPair:
    """A (velocity, pressure) pair produced by a potential solve."""

    velocity: np.ndarray
    pressure: np.ndarray
    kind: str
    residual_momentum: float
    residual_mass: float


class PotentialOperators:
    """All potential maps for one assembled (mesh, viscosity) system."""

    def __init__(self, forms: AssembledForms, tol: float = 1e-10,
                 direct_limit: int = DIRECT_FREE_DOF_LIMIT):
        self.forms = forms
        self.tol = tol
        vspace, pspace = forms.vspace, forms.pspace
        system = SaddleSystem(
            A=forms.A,
            B=forms.B,
            f=np.zeros(vspace.ndof),
            g=np.zeros(pspace.ndof),
            gram_x=forms.gram_velocity,
            gram_m=forms.gram_pressure,
            pinned=vspace.constrained_dofs,
            pressure_nullspace=np.ones(pspace.ndof),
            near_nullspace=rigid_body_modes(vspace),
        )
        self.solver = CachedStokesSolver(
            system, schur_diag=pspace.volumes / forms.mu_cubes, direct_limit=direct_limit
        )

    @cached_property
    def nu(self) -> CotraceDensity:
        return normal_density(self.forms.mesh, self.forms.tspace)

    # -- potential maps ----------------------------------------------------

    def newtonian(self, ell: np.ndarray) -> PotentialPair:
        """Velocity/pressure pair of the whole-space problem with load ell."""
        sol = self.solver.solve(ell, tol=self.tol)
        return PotentialPair(
            velocity=sol.u,
            pressure=self.forms.normalize_pressure(sol.p),
            kind="newtonian",
            residual_momentum=sol.residual_momentum,
            residual_mass=sol.residual_mass,
        )

    def single_layer(self, phi: CotraceDensity) -> PotentialPair:
        ell = gamma_star(self.forms.tspace, phi, self.forms.vspace.ndof)
        pair_ = self.newtonian(ell)
        pair_.kind = "single_layer"
        return pair_

    def boundary_v(self, phi: CotraceDensity) -> TraceField:
        return trace(self.forms.tspace, self.single_layer(phi).velocity)

    def one_sided_conormals(self, phi: CotraceDensity):
        """(t_plus, t_minus, pair) of the single-layer solution of phi."""
        pot = self.single_layer(phi)
        tp = conormal(self.forms, pot.velocity, pot.pressure, None, "plus")
        tm = conormal(self.forms, pot.velocity, pot.pressure, None, "minus")
        return tp, tm, pot

    def k_star(self, phi: CotraceDensity) -> CotraceDensity:
        tp, tm, _ = self.one_sided_conormals(phi)
        return CotraceDensity(0.5 * (tp.actions + tm.actions))

    def jump_check(self, phi: CotraceDensity) -> tuple[float, float]:
        """(trace-jump norm, dual-norm residual of [t] - phi) for one density."""
        tp, tm, pot = self.one_sided_conormals(phi)
        tspace = self.forms.tspace
        jump_trace = (
            trace(tspace, pot.velocity, "plus").coeffs
            - trace(tspace, pot.velocity, "minus").coeffs
        )
        trace_jump = float(np.linalg.norm(jump_trace))
        residual = CotraceDensity(tp.actions - tm.actions - phi.actions)
        return trace_jump, tspace.dual_norm(residual)

    # -- boundary operator matrix and its constrained inverse ---------------

    @cached_property
    def galerkin_matrix(self) -> np.ndarray:
        """Dense boundary-operator matrix: column j is the trace of the
        single-layer velocity of the unit-action density e_j."""
        ndof = self.forms.tspace.ndof
        if ndof > DENSE_BOUNDARY_LIMIT:
            raise SolverError(
                f"trace space too large for a dense boundary matrix ({ndof} dofs)"
            )
        if self.solver.kind != "direct":
            raise SolverError("dense boundary matrix needs the direct solver tier")
        vmat = np.empty((ndof, ndof))
        vel_dofs = self.forms.tspace.vel_dofs
        zeros_g = np.zeros(self.forms.pspace.ndof)
        ell = np.zeros(self.forms.vspace.ndof)
        for j in range(ndof):
            ell[vel_dofs] = 0.0
            ell[vel_dofs[j]] = 1.0
            sol = self.solver.solve(ell, zeros_g, tol=self.tol)
            vmat[:, j] = sol.u[vel_dofs]
        return vmat

    @cached_property
    def _inverse_factor(self):
        vmat = self.galerkin_matrix
        z = self.forms.tspace.riesz(self.nu).coeffs
        aug = np.zeros((vmat.shape[0] + 1,) * 2)
        aug[:-1, :-1] = vmat
        aug[:-1, -1] = z
        aug[-1, :-1] = z
        return la.lu_factor(aug)

    def invert_boundary_v(self, psi: TraceField, orth_tol: float = 1e-9) -> QuotientDensity:
        """Solve V phi = psi for normal-orthogonal psi, returning the class of phi."""
        tspace = self.forms.tspace
        scale = tspace.dual_norm(self.nu) * max(tspace.field_norm(psi), 1e-300)
        mismatch = pair(self.nu, psi)
        if abs(mismatch) > orth_tol * scale:
            raise PreconditionError(
                f"trace datum is not orthogonal to the normal: <nu, psi> = {mismatch:.3e} "
                f"(relative {abs(mismatch) / scale:.3e}, tolerance {orth_tol:.1e})"
            )
        rhs = np.concatenate([psi.coeffs, [0.0]])
        sol = la.lu_solve(self._inverse_factor, rhs)
        density = CotraceDensity(sol[:-1])
        return tspace.quotient(density, self.nu)

    def boundary_spectrum(self):
        """Eigen-decomposition of the symmetrized boundary matrix (ascending)."""
        vmat = self.galerkin_matrix
        return la.eigh(0.5 * (vmat + vmat.T))

    @cached_property
    def trace_dual_gram(self) -> np.ndarray:
        """Discrete H^(1/2) Gram on the interface: Schur complement of the
        weighted H^1 velocity Gram onto the interface dofs (its inverse is the
        dual-norm Gram for densities)."""
        import scipy.sparse.linalg as spla

        forms = self.forms
        G = forms.gram_velocity
        tdofs = forms.tspace.vel_dofs
        rest = np.setdiff1d(forms.vspace.free_dofs, tdofs)
        G_tt = G[tdofs][:, tdofs].toarray()
        G_tr = G[tdofs][:, rest]
        factor = spla.splu(G[rest][:, rest].tocsc())
        cols = G_tr.T.tocsc()
        X = np.empty((len(rest), len(tdofs)))
        for s in range(0, len(tdofs), 256):
            X[:, s : s + 256] = factor.solve(np.asarray(cols[:, s : s + 256].todense()))
        T = G_tt - np.asarray(G_tr.todense()) @ X
        return 0.5 * (T + T.T)

    def ellipticity_spectrum(self) -> np.ndarray:
        """Eigenvalues of the boundary operator against the dual-norm Gram.

        These approximate the mesh-independent ellipticity constants of the
        boundary form on the quotient space; the raw matrix eigenvalues scale
        like 1/h and are only comparable within one level.
        """
        chol = la.cholesky(self.trace_dual_gram, lower=True)
        vmat = self.galerkin_matrix
        M = chol.T @ (0.5 * (vmat + vmat.T)) @ chol
        return la.eigvalsh(0.5 * (M + M.T))
