"""Assembly of the Stokes forms with bounded measurable viscosity.

The two bilinear forms are

    a(u, v) = 2 <mu E(u), E(v)>        (velocity x velocity)
    b(v, q) = -<div v, q>              (pressure x velocity)

with E the strain rate tensor (symmetric gradient).  Viscosity fields from
the registry are constant per cell, so every element integral is a polynomial
and the order-4 tetrahedral rule used for the reference moments makes the
assembly quadrature-exact.  Matrices are assembled separately over the
interior and exterior cell sets; their sums are the global forms and the
per-side pieces drive the generalized conormal derivative

    +-<t+-(u, pi; f), Phi> = 2<mu E(u), E(lift Phi)>_side
                             - <pi, div(lift Phi)>_side + <f, lift Phi>_side

evaluated with the canonical coefficient-copy lifting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigError
from .fespace import (
    CotraceDensity,
    PressureSpace,
    TraceSpace,
    VelocitySpace,
    p1_tet_grad,
    p2_tet_basis,
    p2_tet_grad,
)
from .mesh import CellRegion, Mesh
from .quadrature import tet_rule

ASSEMBLY_DEGREE = 4


def strain(grad_u: np.ndarray) -> np.ndarray:
    """Symmetric part of a velocity gradient; works on stacked (..., 3, 3) arrays."""
    g = np.asarray(grad_u, dtype=float)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def weight_rho(x: np.ndarray) -> np.ndarray:
    """Decay weight (1 + |x|^2)^(1/2) of the weighted Sobolev norm."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


# ---------------------------------------------------------------------------
# viscosity registry


@dataclass(frozen=True)
class ViscosityField:
    """Cellwise-constant viscosity with its two-sided bound c_mu.

    kinds: ``const:c`` | ``two-phase:c_plus,c_minus`` | ``checkerboard:c1,c2,period``
    """

    kind: str
    params: tuple
    c_mu: float

    @staticmethod
    def parse(spec: str) -> "ViscosityField":
        try:
            kind, _, rest = spec.partition(":")
            vals = tuple(float(tok) for tok in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise ConfigError(f"viscosity spec {spec!r}: non-numeric parameter") from exc
        expected = {"const": 1, "two-phase": 2, "checkerboard": 3}
        if kind not in expected:
            raise ConfigError(
                f"viscosity spec {spec!r}: unknown kind {kind!r} "
                f"(known: {', '.join(sorted(expected))})"
            )
        if len(vals) != expected[kind]:
            raise ConfigError(
                f"viscosity spec {spec!r}: kind {kind!r} needs {expected[kind]} parameters"
            )
        if any(v <= 0 for v in vals[: 2 if kind != "const" else 1]):
            raise ConfigError(f"viscosity spec {spec!r}: values must be positive")
        levels = vals[:1] if kind == "const" else vals[:2]
        c_mu = max(max(levels), max(1.0 / v for v in levels))
        return ViscosityField(kind=kind, params=vals, c_mu=c_mu)

    def cell_values(self, mesh: Mesh) -> np.ndarray:
        cent = mesh.vertices[mesh.tets].mean(axis=1)
        if self.kind == "const":
            return np.full(mesh.num_cells, self.params[0])
        if self.kind == "two-phase":
            cp, cm = self.params
            return np.where(mesh.cell_region == CellRegion.INTERIOR, cp, cm)
        if self.kind == "checkerboard":
            c1, c2, period = self.params
            idx = np.floor((cent + mesh.R) / period).astype(int).sum(axis=1)
            return np.where(idx % 2 == 0, c1, c2)
        raise ConfigError(f"unknown viscosity kind {self.kind!r}")


# ---------------------------------------------------------------------------
# reference moments (order-4 rule; exact for these degree <= 2 integrands)


def _reference_moments():
    pts, wts = tet_rule(ASSEMBLY_DEGREE)
    grads = p2_tet_grad(pts)
    vals = p2_tet_basis(pts)
    r2 = np.einsum("q,qic,qjd->cdij", wts, grads, grads)
    r1 = np.einsum("q,qic->ci", wts, grads)
    rm = np.einsum("q,qi,qj->ij", wts, vals, vals)
    return r2, r1, rm


_R2, _R1, _RM = _reference_moments()


@dataclass
class AssembledForms:
    """Sparse forms for one (mesh, viscosity) pair, split by region."""

    mesh: Mesh
    vspace: VelocitySpace
    pspace: PressureSpace
    tspace: TraceSpace
    mu: ViscosityField
    mu_cells: np.ndarray
    A_plus: sp.csr_matrix
    A_minus: sp.csr_matrix
    B_plus: sp.csr_matrix
    B_minus: sp.csr_matrix
    jinv: np.ndarray = field(repr=False, default=None)
    detj: np.ndarray = field(repr=False, default=None)

    @cached_property
    def A(self) -> sp.csr_matrix:
        return (self.A_plus + self.A_minus).tocsr()

    @cached_property
    def B(self) -> sp.csr_matrix:
        return (self.B_plus + self.B_minus).tocsr()

    @cached_property
    def gram_velocity(self) -> sp.csr_matrix:
        """Weighted H1 Gram: rho^-2 mass plus full-gradient stiffness."""
        lap = _scalar_gradient_matrix(self, None, np.ones(self.mesh.num_cells))
        wm = _scalar_weighted_mass(self)
        return sp.kron(lap + wm, sp.eye(3), format="csr")

    @cached_property
    def stiffness_velocity(self) -> sp.csr_matrix:
        """Full-gradient vector stiffness (the H1 seminorm Gram)."""
        lap = _scalar_gradient_matrix(self, None, np.ones(self.mesh.num_cells))
        return sp.kron(lap, sp.eye(3), format="csr")

    @cached_property
    def divdiv_velocity(self) -> sp.csr_matrix:
        """Matrix of the quadratic form u -> |div u|_L2^2."""
        ones = np.ones(self.mesh.num_cells)
        C = sp.csr_matrix((self.vspace.ndof, self.vspace.ndof))
        for a in range(3):
            for b in range(3):
                e = sp.coo_matrix(([1.0], ([b], [a])), shape=(3, 3))
                C = C + sp.kron(_scalar_gradient_matrix(self, (b, a), ones), e)
        return C.tocsr()

    @cached_property
    def gram_pressure(self) -> sp.dia_matrix:
        return sp.diags(self.pspace.volumes)

    @cached_property
    def mu_cubes(self) -> np.ndarray:
        """Viscosity per pressure cell (registry fields are cube-uniform)."""
        per_cube = self.mu_cells.reshape(-1, 6)
        if not np.allclose(per_cube, per_cube[:, :1]):
            raise AssemblyError("viscosity varies inside a grid cube")
        return per_cube[:, 0].copy()

    @cached_property
    def outer_shell_cubes(self) -> np.ndarray:
        """Cubes with a vertex on the truncation boundary (pressure gauge region)."""
        on_outer = np.zeros(self.mesh.vertices.shape[0], dtype=bool)
        on_outer[np.unique(self.mesh.outer_faces)] = True
        touching = on_outer[self.mesh.tets].any(axis=1).reshape(-1, 6).any(axis=1)
        return np.nonzero(touching)[0]

    def normalize_pressure(self, p: np.ndarray) -> np.ndarray:
        """Fix the pressure constant: zero mean over the outer shell cubes."""
        cubes = self.outer_shell_cubes
        vol = self.pspace.volumes[cubes].sum()
        return p - (p[cubes] @ self.pspace.volumes[cubes]) / vol


def _geometry(mesh: Mesh):
    verts = mesh.vertices[mesh.tets]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    detj = np.linalg.det(jac)
    jinv = np.linalg.inv(jac)
    return jinv, detj


def _scalar_gradient_matrix(forms, pair_ab, coef):
    """Assemble sum_a int coef d_a Ni d_a Nj (pair_ab=None) or one (a,b) block."""
    mesh, vspace = forms.mesh, forms.vspace
    jinv, detj = forms.jinv, forms.detj
    w = coef * detj
    if pair_ab is None:
        elem = np.einsum("t,tca,tda,cdij->tij", w, jinv, jinv, _R2, optimize=True)
    else:
        a, b = pair_ab
        elem = np.einsum(
            "t,tc,td,cdij->tij", w, jinv[:, :, a], jinv[:, :, b], _R2, optimize=True
        )
    n = vspace.nnodes
    rows = np.repeat(vspace.tet_nodes, 10, axis=1).ravel()
    cols = np.tile(vspace.tet_nodes, (1, 10)).ravel()
    return sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scalar_weighted_mass(forms):
    mesh, vspace = forms.mesh, forms.vspace
    pts, wts = tet_rule(ASSEMBLY_DEGREE)
    vals = p2_tet_basis(pts)
    v0 = mesh.vertices[mesh.tets[:, 0]]
    jac = np.transpose(
        mesh.vertices[mesh.tets][:, 1:, :] - mesh.vertices[mesh.tets][:, :1, :],
        (0, 2, 1),
    )
    elem = np.zeros((mesh.num_cells, 10, 10))
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        rho2 = 1.0 + np.sum(xq * xq, axis=1)
        coef = wts[q] * forms.detj / rho2
        elem += coef[:, None, None] * np.outer(vals[q], vals[q])[None, :, :]
    n = vspace.nnodes
    rows = np.repeat(vspace.tet_nodes, 10, axis=1).ravel()
    cols = np.tile(vspace.tet_nodes, (1, 10)).ravel()
    return sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _region_vector_stiffness(forms, cells):
    """a(u,v) over one cell set: kron expansion of the scalar gradient blocks."""
    mask = np.zeros(forms.mesh.num_cells)
    mask[cells] = 1.0
    coef = forms.mu_cells * mask
    K = _scalar_gradient_matrix(forms, None, coef)
    A = sp.kron(K, sp.eye(3), format="csr")
    unit = {}
    for a in range(3):
        for b in range(3):
            e = sp.coo_matrix(([1.0], ([b], [a])), shape=(3, 3))
            D = _scalar_gradient_matrix(forms, (a, b), coef)
            A = A + sp.kron(D, e, format="csr")
    return A.tocsr()


def _region_divergence(forms, cells):
    """Rows indexed by pressure cubes; only the requested tets contribute."""
    mesh, vspace = forms.mesh, forms.vspace
    jinv, detj = forms.jinv, forms.detj
    elem = -np.einsum("t,tca,ci->tia", detj, jinv, _R1, optimize=True)
    elem = elem[cells]
    rows = np.repeat(mesh.cube_of_cell[cells], 30)
    cols = (3 * vspace.tet_nodes[cells][:, :, None] + np.arange(3)[None, None, :]).ravel()
    return sp.coo_matrix(
        (elem.ravel(), (rows, cols)), shape=(mesh.num_cubes, vspace.ndof)
    ).tocsr()


def assemble(
    mu: ViscosityField,
    mesh: Mesh,
    vspace: VelocitySpace,
    pspace: PressureSpace,
    tspace: TraceSpace,
) -> AssembledForms:
    """Assemble region-split A and B for one viscosity field."""
    mu_cells = mu.cell_values(mesh)
    bad = (mu_cells > mu.c_mu * (1 + 1e-12)) | (mu_cells < (1 - 1e-12) / mu.c_mu)
    if bad.any():
        cell = int(np.nonzero(bad)[0][0])
        where = mesh.vertices[mesh.tets[cell]].mean(axis=0)
        raise AssemblyError(
            f"viscosity bound violated: mu={mu_cells[cell]:.6g} outside "
            f"[{1.0 / mu.c_mu:.6g}, {mu.c_mu:.6g}] at cell {cell} near {where}"
        )
    jinv, detj = _geometry(mesh)
    forms = AssembledForms(
        mesh=mesh,
        vspace=vspace,
        pspace=pspace,
        tspace=tspace,
        mu=mu,
        mu_cells=mu_cells,
        A_plus=None,
        A_minus=None,
        B_plus=None,
        B_minus=None,
        jinv=jinv,
        detj=detj,
    )
    inner, outer = mesh.interior_cells(), mesh.exterior_cells()
    forms.A_plus = _region_vector_stiffness(forms, inner)
    forms.A_minus = _region_vector_stiffness(forms, outer)
    forms.B_plus = _region_divergence(forms, inner)
    forms.B_minus = _region_divergence(forms, outer)
    return forms


# ---------------------------------------------------------------------------
# boundary pairing and the conormal derivative


def gamma_star(tspace: TraceSpace, phi: CotraceDensity, ndof: int) -> np.ndarray:
    """Velocity load with action <phi, trace(v)>; zero away from the interface."""
    ell = np.zeros(ndof)
    ell[tspace.vel_dofs] = phi.actions
    return ell


def conormal(
    forms: AssembledForms,
    u: np.ndarray,
    pi: np.ndarray,
    f_tilde: np.ndarray | None,
    side: str,
) -> CotraceDensity:
    """Generalized one-sided conormal derivative of a discrete pair (u, pi).

    `f_tilde` is a velocity load supported on the chosen side (or None).
    The plus side carries the + sign of the defining identity, the minus side
    the - sign, so the jump is t_plus - t_minus.
    """
    if side == "plus":
        r = forms.A_plus @ u + forms.B_plus.T @ pi
        sign = 1.0
    elif side == "minus":
        r = forms.A_minus @ u + forms.B_minus.T @ pi
        sign = -1.0
    else:
        raise ValueError(f"unknown side {side!r}")
    if f_tilde is not None:
        r = r + f_tilde
    return CotraceDensity(sign * r[forms.tspace.vel_dofs])


def conormal_jump(
    forms: AssembledForms, u: np.ndarray, pi: np.ndarray, f: np.ndarray | None = None
) -> CotraceDensity:
    """Jump t_plus - t_minus; equals the full-residual restriction to the interface."""
    r = forms.A @ u + forms.B.T @ pi
    if f is not None:
        r = r + f
    return CotraceDensity(r[forms.tspace.vel_dofs])


# ---------------------------------------------------------------------------
# loads and integrals


def _cell_subset(mesh: Mesh, region: str):
    if region in (None, "all"):
        return np.arange(mesh.num_cells)
    if region == "interior":
        return mesh.interior_cells()
    if region == "exterior":
        return mesh.exterior_cells()
    raise ValueError(f"unknown region {region!r}")


def body_load(forms: AssembledForms, func, region: str = "all") -> np.ndarray:
    """Assemble <f, v> for a callable body force, optionally on one region."""
    mesh, vspace = forms.mesh, forms.vspace
    cells = _cell_subset(mesh, region)
    pts, wts = tet_rule(ASSEMBLY_DEGREE)
    vals = p2_tet_basis(pts)
    verts = mesh.vertices[mesh.tets[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    v0 = verts[:, 0, :]
    detj = forms.detj[cells]
    load = np.zeros((vspace.nnodes, 3))
    acc = np.zeros((len(cells), 10, 3))
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        fq = np.asarray(func(xq), dtype=float)
        acc += (wts[q] * detj)[:, None, None] * vals[q][None, :, None] * fq[:, None, :]
    np.add.at(load, vspace.tet_nodes[cells].ravel(), acc.reshape(-1, 3))
    return load.ravel()


def stress_load(
    forms: AssembledForms, grad_u_func, p_func, region: str = "all"
) -> np.ndarray:
    """Assemble v -> 2<mu E(u*), E(v)> - <p*, div v> from closed-form fields."""
    mesh, vspace = forms.mesh, forms.vspace
    cells = _cell_subset(mesh, region)
    pts, wts = tet_rule(ASSEMBLY_DEGREE)
    grads = p2_tet_grad(pts)
    verts = mesh.vertices[mesh.tets[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    v0 = verts[:, 0, :]
    detj = forms.detj[cells]
    jinv = forms.jinv[cells]
    mu = forms.mu_cells[cells]
    load = np.zeros((vspace.nnodes, 3))
    acc = np.zeros((len(cells), 10, 3))
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        g = np.asarray(grad_u_func(xq), dtype=float)
        s = mu[:, None, None] * (g + np.swapaxes(g, 1, 2))
        pq = np.asarray(p_func(xq), dtype=float)
        gphys = np.einsum("kc,tca->tka", grads[q], jinv)
        acc += (wts[q] * detj)[:, None, None] * (
            np.einsum("tka,tca->tkc", gphys, s) - gphys * pq[:, None, None]
        )
    np.add.at(load, vspace.tet_nodes[cells].ravel(), acc.reshape(-1, 3))
    return load.ravel()


def weighted_norm(forms: AssembledForms, u: np.ndarray, region: str = "all") -> float:
    """Weighted H1 norm: (|rho^-1 u|^2 + |grad u|^2)^(1/2) over a region."""
    mesh, vspace = forms.mesh, forms.vspace
    cells = _cell_subset(mesh, region)
    pts, wts = tet_rule(ASSEMBLY_DEGREE)
    vals = p2_tet_basis(pts)
    grads = p2_tet_grad(pts)
    verts = mesh.vertices[mesh.tets[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    v0 = verts[:, 0, :]
    detj = forms.detj[cells]
    jinv = forms.jinv[cells]
    nodal = u.reshape(-1, 3)[vspace.tet_nodes[cells]]
    total = 0.0
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        rho2 = 1.0 + np.sum(xq * xq, axis=1)
        uq = np.einsum("k,tkc->tc", vals[q], nodal)
        gphys = np.einsum("kc,tca->tka", grads[q], jinv)
        gu = np.einsum("tka,tkc->tca", gphys, nodal)
        total += wts[q] * np.sum(
            detj * (np.sum(uq * uq, axis=1) / rho2 + np.sum(gu * gu, axis=(1, 2)))
        )
    return float(np.sqrt(max(total, 0.0)))


def velocity_error(
    forms: AssembledForms, u: np.ndarray, exact, exact_grad=None, region: str = "all"
) -> tuple[float, float]:
    """(L2, H1-seminorm) errors of a discrete velocity against closed-form fields."""
    mesh, vspace = forms.mesh, forms.vspace
    cells = _cell_subset(mesh, region)
    pts, wts = tet_rule(ASSEMBLY_DEGREE + 2)
    vals = p2_tet_basis(pts)
    grads = p2_tet_grad(pts)
    verts = mesh.vertices[mesh.tets[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    v0 = verts[:, 0, :]
    detj = forms.detj[cells]
    jinv = forms.jinv[cells]
    nodal = u.reshape(-1, 3)[vspace.tet_nodes[cells]]
    err0 = err1 = 0.0
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        uq = np.einsum("k,tkc->tc", vals[q], nodal) - np.asarray(exact(xq), dtype=float)
        err0 += wts[q] * np.sum(detj * np.sum(uq * uq, axis=1))
        if exact_grad is not None:
            gphys = np.einsum("kc,tca->tka", grads[q], jinv)
            gu = np.einsum("tka,tkc->tca", gphys, nodal)
            diff = gu - np.asarray(exact_grad(xq), dtype=float)
            err1 += wts[q] * np.sum(detj * np.sum(diff * diff, axis=(1, 2)))
    return float(np.sqrt(err0)), float(np.sqrt(err1))


def pressure_error(forms: AssembledForms, p: np.ndarray, exact, region: str = "all") -> float:
    mesh = forms.mesh
    cells = _cell_subset(mesh, region)
    pts, wts = tet_rule(ASSEMBLY_DEGREE + 2)
    verts = mesh.vertices[mesh.tets[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    v0 = verts[:, 0, :]
    detj = forms.detj[cells]
    pvals = p[mesh.cube_of_cell[cells]]
    err = 0.0
    for q in range(len(wts)):
        xq = v0 + jac @ pts[q]
        diff = pvals - np.asarray(exact(xq), dtype=float)
        err += wts[q] * np.sum(detj * diff * diff)
    return float(np.sqrt(err))


# ---------------------------------------------------------------------------
# P1/P1 pair (unstable; used only as the inf-sup negative control)


def p1p1_infsup_system(mesh: Mesh):
    """B, velocity Gram, pressure Gram and pressure nullspace for equal-order P1."""
    jinv, detj = _geometry(mesh)
    gref = p1_tet_grad()
    nv = mesh.vertices.shape[0]

    # b(v, q) = -int q div v with P1 q: element (j, i, a) = -detj/24 * dNi/dxa
    gphys = np.einsum("ic,tca->tia", gref, jinv)
    elem = -(detj / 24.0)[:, None, None, None] * gphys[:, None, :, :]
    elem = np.broadcast_to(elem, (mesh.num_cells, 4, 4, 3))
    rows = np.repeat(mesh.tets, 12, axis=1).ravel()
    cols = (
        3 * mesh.tets[:, None, :, None] + np.arange(3)[None, None, None, :]
    )
    cols = np.broadcast_to(cols, (mesh.num_cells, 4, 4, 3)).ravel()
    B = sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(nv, 3 * nv)).tocsr()

    stiff = np.einsum("t,tca,tda,cdij->tij", detj, jinv, jinv, _p1_r2(), optimize=True)
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    K = sp.coo_matrix((stiff.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()

    mref = (np.ones((4, 4)) + np.eye(4)) / 120.0
    mass_elem = detj[:, None, None] * mref[None, :, :]
    M = sp.coo_matrix((mass_elem.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()

    on_outer = np.zeros(nv, dtype=bool)
    on_outer[np.unique(mesh.outer_faces)] = True
    free_nodes = np.nonzero(~on_outer)[0]
    free_dofs = (3 * free_nodes[:, None] + np.arange(3)).ravel()

    gram_x = sp.kron(K + M, sp.eye(3), format="csr")[free_dofs][:, free_dofs]
    B_free = B[:, free_dofs]
    nullspace = np.ones(nv)
    return B_free, gram_x, M, nullspace


def _p1_r2():
    g = p1_tet_grad()
    return np.einsum("ic,jd->cdij", g, g) / 6.0
