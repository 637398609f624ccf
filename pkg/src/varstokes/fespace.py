"""Discrete spaces: P2 vector velocity, P0 pressure, and the interface trace space.

Velocity fields and pressure fields are plain coefficient arrays:
velocity dof ``3*node + comp`` over the P2 nodes (vertices then edge
midpoints), one pressure dof per cell.  Trace-side objects get thin wrappers
because two different length-3*Ng vectors live on the interface:

* :class:`TraceField`   -- coefficients of a P2 surface field (H^{1/2} side),
* :class:`CotraceDensity` -- the action of a functional on the trace basis
  (H^{-1/2} side, stored as a moment vector).

The pairing between them is the plain dot product; the dual norm is taken
through the inverse interface mass matrix.  The lifting of a trace field is
the coefficient copy: interface dofs set, all others zero, which vanishes on
the truncation boundary by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import _PERMS, Mesh
from .quadrature import tri_rule

LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


# ---------------------------------------------------------------------------
# reference bases


def p2_tet_basis(pts: np.ndarray) -> np.ndarray:
    """P2 shape functions on the reference tetrahedron, shape (Q, 10)."""
    lam = _tet_bary(pts)
    vals = np.empty((pts.shape[0], 10))
    for i in range(4):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
    for k, (a, b) in enumerate(LOCAL_EDGES):
        vals[:, 4 + k] = 4.0 * lam[:, a] * lam[:, b]
    return vals


def p2_tet_grad(pts: np.ndarray) -> np.ndarray:
    """Reference gradients of the P2 shape functions, shape (Q, 10, 3)."""
    lam = _tet_bary(pts)
    gl = np.array([[-1.0, -1.0, -1.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    grads = np.empty((pts.shape[0], 10, 3))
    for i in range(4):
        grads[:, i, :] = (4.0 * lam[:, i, None] - 1.0) * gl[i]
    for k, (a, b) in enumerate(LOCAL_EDGES):
        grads[:, 4 + k, :] = 4.0 * (lam[:, a, None] * gl[b] + lam[:, b, None] * gl[a])
    return grads


def p2_tri_basis(pts: np.ndarray) -> np.ndarray:
    """P2 shape functions on the reference triangle, shape (Q, 6).

    Node order: 3 vertices then the edge midpoints (01), (02), (12).
    """
    lam = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)
    vals = np.empty((pts.shape[0], 6))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
    for k, (a, b) in enumerate([(0, 1), (0, 2), (1, 2)]):
        vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
    return vals


def p1_tet_basis(pts: np.ndarray) -> np.ndarray:
    return _tet_bary(pts)


def p1_tet_grad() -> np.ndarray:
    return np.array([[-1.0, -1.0, -1.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def _tet_bary(pts):
    return np.stack(
        [1.0 - pts[:, 0] - pts[:, 1] - pts[:, 2], pts[:, 0], pts[:, 1], pts[:, 2]],
        axis=1,
    )


# ---------------------------------------------------------------------------
# trace-side containers


@dataclass
class TraceField:
    """Coefficients of a P2 vector field on the interface, ``3*trace_node + comp``."""

    coeffs: np.ndarray

    def __add__(self, other):
        return TraceField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return TraceField(self.coeffs - other.coeffs)

    def __mul__(self, s):
        return TraceField(self.coeffs * s)

    __rmul__ = __mul__


@dataclass
class CotraceDensity:
    """A functional on the trace space stored by its moment (action) vector."""

    actions: np.ndarray

    def __add__(self, other):
        return CotraceDensity(self.actions + other.actions)

    def __sub__(self, other):
        return CotraceDensity(self.actions - other.actions)

    def __mul__(self, s):
        return CotraceDensity(self.actions * s)

    __rmul__ = __mul__


@dataclass
class QuotientDensity:
    """A density representing a class modulo the normal: ``<rep, Riesz(nu)> = 0``."""

    representative: CotraceDensity


def pair(density: CotraceDensity, field: TraceField) -> float:
    """Duality pairing between a density and a trace field."""
    return float(density.actions @ field.coeffs)


# ---------------------------------------------------------------------------
# spaces


@dataclass
class VelocitySpace:
    """Continuous P2 vector space, dofs ordered ``3*node + comp``."""

    node_xyz: np.ndarray
    tet_nodes: np.ndarray
    outer_nodes: np.ndarray
    nvertices: int

    @property
    def nnodes(self) -> int:
        return self.node_xyz.shape[0]

    @property
    def ndof(self) -> int:
        return 3 * self.nnodes

    @cached_property
    def constrained_dofs(self) -> np.ndarray:
        return (3 * self.outer_nodes[:, None] + np.arange(3)).ravel()

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.nonzero(mask)[0]


@dataclass
class PressureSpace:
    """Piecewise-constant pressure, one dof per grid cube.

    Per-tetrahedron constants on the translation-invariant 6-tet split carry
    three spurious modes against the quadratic velocity space (measured rank
    deficiency 4); aggregating to the cubes removes them while keeping the
    body indicator exactly representable.
    """

    volumes: np.ndarray
    cube_of_cell: np.ndarray

    @property
    def ndof(self) -> int:
        return self.volumes.shape[0]


@dataclass
class TraceSpace:
    """Restriction of the velocity space to the interface nodes."""

    gamma_nodes: np.ndarray
    node_to_trace: np.ndarray
    face_nodes_trace: np.ndarray
    face_vertices: np.ndarray
    face_normals: np.ndarray
    face_areas: np.ndarray
    node_xyz: np.ndarray

    @property
    def nnodes(self) -> int:
        return self.gamma_nodes.shape[0]

    @property
    def ndof(self) -> int:
        return 3 * self.nnodes

    @cached_property
    def vel_dofs(self) -> np.ndarray:
        """Velocity dof index of each trace dof (trace-node major)."""
        return (3 * self.gamma_nodes[:, None] + np.arange(3)).ravel()

    @cached_property
    def mass(self) -> sp.csr_matrix:
        """Interface mass matrix pairing two trace fields."""
        pts, wts = tri_rule(4)
        basis = p2_tri_basis(pts)
        mref = np.einsum("q,qi,qj->ij", wts, basis, basis)
        nt = self.nnodes
        scalar = sp.coo_matrix(
            (
                (2.0 * self.face_areas[:, None, None] * mref).ravel(),
                (
                    np.repeat(self.face_nodes_trace, 6, axis=1).ravel(),
                    np.tile(self.face_nodes_trace, (1, 6)).ravel(),
                ),
            ),
            shape=(nt, nt),
        ).tocsr()
        return sp.kron(scalar, sp.eye(3), format="csr")

    @cached_property
    def _mass_factor(self):
        return spla.splu(self.mass.tocsc())

    def riesz(self, density: CotraceDensity) -> TraceField:
        """The trace field representing a density in the interface L2 pairing."""
        return TraceField(self._mass_factor.solve(density.actions))

    def dual_norm(self, density: CotraceDensity) -> float:
        a = density.actions
        return float(np.sqrt(max(a @ self._mass_factor.solve(a), 0.0)))

    def field_norm(self, field: TraceField) -> float:
        c = field.coeffs
        return float(np.sqrt(max(c @ (self.mass @ c), 0.0)))

    def normal_pairing(self, nu: CotraceDensity, field: TraceField) -> float:
        return pair(nu, field)

    def quotient(self, density: CotraceDensity, nu: CotraceDensity) -> QuotientDensity:
        """Normalize a density to the representative with <rep, Riesz(nu)> = 0."""
        z = self._mass_factor.solve(nu.actions)
        c = (density.actions @ z) / (nu.actions @ z)
        return QuotientDensity(CotraceDensity(density.actions - c * nu.actions))


def build_spaces(mesh: Mesh) -> tuple[VelocitySpace, PressureSpace, TraceSpace]:
    """Build the P2 velocity, P0 pressure and interface trace spaces."""
    nv = mesh.vertices.shape[0]
    tet_edges = np.sort(mesh.tets[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, edge_of = np.unique(tet_edges, axis=0, return_inverse=True)
    edge_of = edge_of.reshape(-1, 6)
    node_xyz = np.concatenate(
        [mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])]
    )
    tet_nodes = np.hstack([mesh.tets, nv + edge_of])

    ekeys = edges[:, 0].astype(np.int64) * (nv + 1) + edges[:, 1]

    def face_p2_nodes(faces):
        fe = np.stack(
            [faces[:, [0, 1]], faces[:, [0, 2]], faces[:, [1, 2]]], axis=1
        )
        keys = fe[:, :, 0].astype(np.int64) * (nv + 1) + fe[:, :, 1]
        idx = np.searchsorted(ekeys, keys)
        return np.hstack([faces, nv + idx])

    gamma_face_nodes = face_p2_nodes(mesh.gamma_faces)
    outer_face_nodes = face_p2_nodes(mesh.outer_faces)

    gamma_nodes = np.unique(gamma_face_nodes)
    outer_nodes = np.unique(outer_face_nodes)
    node_to_trace = np.full(node_xyz.shape[0], -1, dtype=np.int64)
    node_to_trace[gamma_nodes] = np.arange(gamma_nodes.shape[0])

    vspace = VelocitySpace(
        node_xyz=node_xyz, tet_nodes=tet_nodes, outer_nodes=outer_nodes, nvertices=nv
    )
    pspace = PressureSpace(
        volumes=mesh.cell_volumes.reshape(-1, 6).sum(axis=1),
        cube_of_cell=mesh.cube_of_cell,
    )
    tspace = TraceSpace(
        gamma_nodes=gamma_nodes,
        node_to_trace=node_to_trace,
        face_nodes_trace=node_to_trace[gamma_face_nodes],
        face_vertices=mesh.gamma_faces,
        face_normals=mesh.gamma_normals,
        face_areas=mesh.gamma_areas,
        node_xyz=node_xyz,
    )
    return vspace, pspace, tspace


# ---------------------------------------------------------------------------
# trace / lift and interpolation


def trace(tspace: TraceSpace, u: np.ndarray, side: str = "plus") -> TraceField:
    """One-sided trace of a velocity field; sides agree for conforming fields."""
    if side not in ("plus", "minus"):
        raise ValueError(f"unknown side {side!r}")
    return TraceField(u[tspace.vel_dofs].copy())


def lift(tspace: TraceSpace, phi: TraceField, ndof: int) -> np.ndarray:
    """Right inverse of the trace: copy interface dofs, zero everywhere else."""
    u = np.zeros(ndof)
    u[tspace.vel_dofs] = phi.coeffs
    return u


def interpolate_velocity(vspace: VelocitySpace, func) -> np.ndarray:
    """Nodal P2 interpolation of a callable (N,3)->(N,3)."""
    return np.asarray(func(vspace.node_xyz), dtype=float).reshape(-1)


def trace_from_function(tspace: TraceSpace, func) -> TraceField:
    """Interpolate a callable onto the interface nodes."""
    vals = np.asarray(func(tspace.node_xyz[tspace.gamma_nodes]), dtype=float)
    return TraceField(vals.reshape(-1))


def density_from_function(tspace: TraceSpace, func, with_normal: bool = False) -> CotraceDensity:
    """Assemble the moments of an L2 surface density against the trace basis.

    `func(y)` returns values of shape (..., 3); with `with_normal` the callable
    receives the per-face outward normal as second argument.
    """
    pts, wts = tri_rule(4)
    basis = p2_tri_basis(pts)
    p0 = tspace.node_xyz[tspace.face_vertices[:, 0]]
    p1 = tspace.node_xyz[tspace.face_vertices[:, 1]]
    p2 = tspace.node_xyz[tspace.face_vertices[:, 2]]
    # physical quadrature points, shape (F, Q, 3)
    y = (
        p0[:, None, :]
        + pts[None, :, 0, None] * (p1 - p0)[:, None, :]
        + pts[None, :, 1, None] * (p2 - p0)[:, None, :]
    )
    if with_normal:
        vals = func(y, tspace.face_normals[:, None, :])
    else:
        vals = func(y.reshape(-1, 3)).reshape(y.shape)
    contrib = 2.0 * np.einsum(
        "f,q,qk,fqc->fkc", tspace.face_areas, wts, basis, np.broadcast_to(vals, y.shape)
    )
    actions = np.zeros((tspace.nnodes, 3))
    np.add.at(actions, tspace.face_nodes_trace.ravel(), contrib.reshape(-1, 3))
    return CotraceDensity(actions.ravel())


# ---------------------------------------------------------------------------
# point evaluation

_PERM_INDEX = {p: i for i, p in enumerate(_PERMS)}


def evaluate_velocity(mesh: Mesh, vspace: VelocitySpace, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate a velocity field at arbitrary points inside the box, (P,3)->(P,3)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, R, h = mesh.spec.n, mesh.spec.R, mesh.spec.h
    cube = np.clip(np.floor((pts + R) / h).astype(int), 0, n - 1)
    local = (pts + R) / h - cube
    order = np.argsort(-local, axis=1, kind="stable")
    perm_idx = np.array([_PERM_INDEX[tuple(o)] for o in order])
    cube_id = (cube[:, 0] * n + cube[:, 1]) * n + cube[:, 2]
    tet_id = cube_id * 6 + perm_idx

    verts = mesh.vertices[mesh.tets[tet_id]]
    mats = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    lam = np.linalg.solve(mats, (pts - verts[:, 0, :])[:, :, None])[:, :, 0]
    basis = p2_tet_basis(lam)
    nodal = u.reshape(-1, 3)[vspace.tet_nodes[tet_id]]
    return np.einsum("pk,pkc->pc", basis, nodal)


def evaluate_pressure(mesh: Mesh, p: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate a piecewise-constant pressure field at points, (P,3)->(P,)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, R, h = mesh.spec.n, mesh.spec.R, mesh.spec.h
    cube = np.clip(np.floor((pts + R) / h).astype(int), 0, n - 1)
    cube_id = (cube[:, 0] * n + cube[:, 1]) * n + cube[:, 2]
    return p[cube_id]
