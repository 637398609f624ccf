"""Exterior Dirichlet problem on the truncated shell, solved two ways.

The variational route restricts the mixed forms to the exterior cells,
imposes the boundary datum through a divergence-free lifting, and solves the
reduced saddle system.  The potential route composes the whole-box operators:
Newtonian potential of the extended force, then a single layer whose density
inverts the boundary operator on the remaining trace datum.  Uniqueness makes
the two routes agree up to discretization error, which is what the
cross-method acceptance checks exercise.

The lifting is one auxiliary constant-viscosity Stokes solve on the same
exterior sub-mesh (the double-layer construction of the continuous theory is
replaced by this discrete device; same contract: prescribed trace,
divergence-free, zero on the truncation boundary).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import PreconditionError
from .fespace import TraceField, build_spaces, lift, pair, trace
from .forms import AssembledForms, ViscosityField, assemble
from .potentials import CachedStokesSolver, PotentialOperators, rigid_body_modes
from .saddle import SaddleSystem


@dataclass
class ExteriorProblem:
    """Data (f, phi) of the exterior problem: a body-force load supported on
    the exterior region and the velocity trace datum on the interface."""

    f_load: np.ndarray
    phi: TraceField

    def validate(self, solver: "ExteriorSolver"):
        interior_only = solver.interior_only_dofs
        if interior_only.size and np.any(self.f_load[interior_only] != 0.0):
            raise PreconditionError(
                "exterior body force carries actions on dofs interior to the body"
            )
        if not np.all(np.isfinite(self.phi.coeffs)):
            raise PreconditionError("boundary datum contains non-finite entries")


@dataclass
class ExteriorSolution:
    velocity: np.ndarray
    pressure: np.ndarray
    method: str
    residual_momentum: float
    residual_mass: float
    trace_error: float
    meta: dict = field(default_factory=dict)


class ExteriorSolver:
    """Reusable exterior-problem machinery for one assembled system."""

    def __init__(self, forms: AssembledForms, tol: float = 1e-10):
        self.forms = forms
        self.tol = tol
        mesh, vspace = forms.mesh, forms.vspace
        ext_nodes = np.unique(vspace.tet_nodes[mesh.exterior_cells()])
        mask = np.zeros(vspace.nnodes, dtype=bool)
        mask[ext_nodes] = True
        self.exterior_nodes = ext_nodes
        self.interior_only_dofs = (
            3 * np.nonzero(~mask)[0][:, None] + np.arange(3)
        ).ravel()
        pinned_nodes = np.zeros(vspace.nnodes, dtype=bool)
        pinned_nodes[~mask] = True
        pinned_nodes[forms.tspace.gamma_nodes] = True
        pinned_nodes[vspace.outer_nodes] = True
        self.pinned_dofs = (3 * np.nonzero(pinned_nodes)[0][:, None] + np.arange(3)).ravel()
        self.ext_cubes = mesh.exterior_cubes()
        self._g_zero = np.zeros(len(self.ext_cubes))

    @cached_property
    def _system(self) -> SaddleSystem:
        import scipy.sparse as sp

        forms = self.forms
        return SaddleSystem(
            A=forms.A_minus,
            B=forms.B_minus[self.ext_cubes],
            f=np.zeros(forms.vspace.ndof),
            g=self._g_zero,
            gram_x=forms.gram_velocity,
            gram_m=sp.diags(forms.pspace.volumes[self.ext_cubes]),
            pinned=self.pinned_dofs,
            pressure_nullspace=np.ones(len(self.ext_cubes)),
            near_nullspace=rigid_body_modes(forms.vspace),
        )

    @cached_property
    def solver(self) -> CachedStokesSolver:
        forms = self.forms
        return CachedStokesSolver(
            self._system,
            schur_diag=forms.pspace.volumes[self.ext_cubes] / forms.mu_cubes[self.ext_cubes],
        )

    @cached_property
    def _lifting_solver(self) -> "ExteriorSolver":
        """Constant-viscosity twin used by the lifting when mu is not constant."""
        if self.forms.mu.kind == "const":
            return self
        mesh = self.forms.mesh
        one = assemble(ViscosityField.parse("const:1"), mesh, self.forms.vspace,
                       self.forms.pspace, self.forms.tspace)
        return ExteriorSolver(one, tol=self.tol)

    def _expand_pressure(self, p_ext: np.ndarray) -> np.ndarray:
        p = np.zeros(self.forms.pspace.ndof)
        p[self.ext_cubes] = p_ext
        return self.forms.normalize_pressure(p)

    def build_lifting(self, phi: TraceField) -> np.ndarray:
        """Divergence-free velocity with trace phi, zero on the truncation box."""
        forms = self.forms
        if not np.any(phi.coeffs):
            return np.zeros(forms.vspace.ndof)
        helper = self._lifting_solver
        w = lift(forms.tspace, phi, forms.vspace.ndof)
        hf = helper.forms
        sol = helper.solver.solve(
            -(hf.A_minus @ w), -(hf.B_minus[helper.ext_cubes] @ w), tol=self.tol
        )
        return w + sol.u

    def extend_force(self, f_load: np.ndarray) -> np.ndarray:
        """Extension of the exterior load by zero (identity on the actions)."""
        if np.any(f_load[self.interior_only_dofs] != 0.0):
            raise PreconditionError("load already carries interior actions")
        return f_load.copy()

    def solve_variational(self, problem: ExteriorProblem) -> ExteriorSolution:
        problem.validate(self)
        forms = self.forms
        u0 = self.build_lifting(problem.phi)
        rhs_f = -problem.f_load - forms.A_minus @ u0
        rhs_g = -(forms.B_minus[self.ext_cubes] @ u0)
        sol = self.solver.solve(rhs_f, rhs_g, tol=self.tol)
        u = u0 + sol.u
        p = self._expand_pressure(sol.p)
        tr_err = float(
            np.linalg.norm(trace(forms.tspace, u).coeffs - problem.phi.coeffs)
        )
        rhs_scale = max(np.linalg.norm(rhs_f), np.linalg.norm(rhs_g), 1e-300)
        return ExteriorSolution(
            velocity=u,
            pressure=p,
            method="variational",
            residual_momentum=sol.residual_momentum,
            residual_mass=sol.residual_mass,
            trace_error=tr_err,
            meta={"iterations": sol.iterations, "solver": sol.method,
                  "rhs_scale": rhs_scale},
        )

    def solve_potential(
        self,
        problem: ExteriorProblem,
        potentials: PotentialOperators,
        orth_tol: float = 1e-9,
    ) -> ExteriorSolution:
        """Compose Newtonian and single-layer potentials per the solution formula."""
        problem.validate(self)
        forms = self.forms
        tspace = forms.tspace
        nu = potentials.nu
        scale = tspace.dual_norm(nu) * max(tspace.field_norm(problem.phi), 1e-300)
        mismatch = pair(nu, problem.phi)
        if abs(mismatch) > orth_tol * scale:
            raise PreconditionError(
                f"potential route needs a normal-orthogonal datum: <nu, phi> = "
                f"{mismatch:.3e} (relative {abs(mismatch) / scale:.3e})"
            )
        f_ext = self.extend_force(problem.f_load)
        if np.any(f_ext):
            newt = potentials.newtonian(-f_ext)
            u_n, p_n = newt.velocity, newt.pressure
        else:
            u_n = np.zeros(forms.vspace.ndof)
            p_n = np.zeros(forms.pspace.ndof)
        psi = TraceField(problem.phi.coeffs - trace(tspace, u_n).coeffs)
        density = potentials.invert_boundary_v(psi, orth_tol=orth_tol)
        layer = potentials.single_layer(density.representative)
        u = u_n + layer.velocity
        p = forms.normalize_pressure(p_n + layer.pressure)

        free = self._system.free
        r_mom = (forms.A_minus @ u + forms.B_minus.T @ p + problem.f_load)[free]
        r_mass = forms.B_minus[self.ext_cubes] @ u
        mom_scale = max(np.linalg.norm(problem.f_load), np.linalg.norm(forms.A_minus @ u), 1e-300)
        tr_err = float(
            np.linalg.norm(trace(tspace, u).coeffs - problem.phi.coeffs)
        )
        return ExteriorSolution(
            velocity=u,
            pressure=p,
            method="potential",
            residual_momentum=float(np.linalg.norm(r_mom) / mom_scale),
            residual_mass=float(np.linalg.norm(r_mass)),
            trace_error=tr_err,
            meta={},
        )


def project_flux_free(tspace, nu, phi: TraceField) -> TraceField:
    """Remove the net interface flux of a trace datum.

    On the truncated enclosure a divergence-free extension with zero outer
    velocity exists only for data with vanishing flux <nu, phi>; for other
    data the lifting carries the defect as a uniform compressibility.
    """
    riesz_nu = tspace.riesz(nu)
    c = pair(nu, phi) / pair(nu, riesz_nu)
    return TraceField(phi.coeffs - c * riesz_nu.coeffs)


def probe_lattice(spec) -> np.ndarray:
    """Fixed midshell probe lattice: {-1.5a, 0, 1.5a}^3 minus the origin."""
    c = 1.5 * spec.a
    pts = np.array(
        [[x, y, z] for x in (-c, 0.0, c) for y in (-c, 0.0, c) for z in (-c, 0.0, c)]
    )
    keep = np.abs(pts).max(axis=1) > spec.a
    return pts[keep]


def build_exterior_stack(spec, mu: ViscosityField, tol: float = 1e-10):
    """Mesh, spaces, forms and both solvers for one configuration."""
    from .mesh import build_box_mesh

    mesh = build_box_mesh(spec)
    spaces = build_spaces(mesh)
    forms = assemble(mu, mesh, *spaces)
    return forms, ExteriorSolver(forms, tol=tol)
