"""Structured tetrahedral geometry for the interface cube and the truncation box.

The inner body is the cube (-a, a)^3; its complement is truncated to the box
(-R, R)^3.  Both are meshed together by a uniform grid of n cells per axis,
each cube split into 6 tetrahedra (Kuhn split), so the interface surface
lies exactly on cell faces.  Cells are tagged INTERIOR/EXTERIOR, boundary
faces GAMMA (interface) / OUTER (truncation box), and every GAMMA face stores
the unit normal pointing from the interior region into the exterior one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError

# Kuhn split: one tetrahedron per permutation of the axes, all sharing the
# cube diagonal (0,0,0)-(1,1,1).  Odd permutations get two corners swapped so
# every tetrahedron is positively oriented.
_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _perm_sign(p):
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


class CellRegion(IntEnum):
    INTERIOR = 0
    EXTERIOR = 1


class FaceTag(IntEnum):
    GAMMA = 0
    OUTER = 1


@dataclass(frozen=True)
class GeometrySpec:
    """Half-widths of the inner cube (a) and truncation box (R), cells per axis (n)."""

    a: float = 1.0
    R: float = 2.0
    n: int = 4

    def validate(self):
        if not (0 < self.a < self.R):
            raise ConfigError(f"need 0 < a < R, got a={self.a}, R={self.R}")
        if self.n < 2 or self.n % 2 != 0:
            raise ConfigError(f"cells per axis must be even and >= 2, got n={self.n}")
        m = self.a * self.n / (2.0 * self.R)
        if abs(m - round(m)) > 1e-12 or round(m) < 1:
            raise ConfigError(
                f"interface not grid aligned: a={self.a}, R={self.R}, n={self.n} "
                f"put the cube face at {m} cells from the center plane"
            )

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n


@dataclass
class Mesh:
    """Tagged tetrahedral mesh of the truncation box.

    vertices       (V, 3) coordinates
    tets           (T, 4) vertex indices, positively oriented
    cell_region    (T,)   CellRegion values
    gamma_faces    (F, 3) vertex indices of interface triangles
    gamma_normals  (F, 3) unit normal per interface face, interior -> exterior
    gamma_areas    (F,)
    gamma_cell_in  (F,)   the INTERIOR cell of each interface face
    gamma_cell_out (F,)   the EXTERIOR cell of each interface face
    outer_faces    (Fo, 3) triangles on the truncation box boundary
    outer_cells    (Fo,)
    """

    spec: GeometrySpec
    vertices: np.ndarray
    tets: np.ndarray
    cell_region: np.ndarray
    gamma_faces: np.ndarray
    gamma_normals: np.ndarray
    gamma_areas: np.ndarray
    gamma_cell_in: np.ndarray
    gamma_cell_out: np.ndarray
    outer_faces: np.ndarray
    outer_cells: np.ndarray
    cell_volumes: np.ndarray = field(repr=False, default=None)

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def R(self) -> float:
        return self.spec.R

    @property
    def num_cells(self) -> int:
        return self.tets.shape[0]

    @property
    def num_cubes(self) -> int:
        """Grid cubes; tets are stored cube-major, 6 per cube."""
        return self.tets.shape[0] // 6

    @property
    def cube_of_cell(self) -> np.ndarray:
        return np.arange(self.num_cells) // 6

    @property
    def cube_region(self) -> np.ndarray:
        """Region tag per grid cube (constant over its 6 tets)."""
        return self.cell_region[::6]

    def interior_cells(self) -> np.ndarray:
        return np.nonzero(self.cell_region == CellRegion.INTERIOR)[0]

    def exterior_cells(self) -> np.ndarray:
        return np.nonzero(self.cell_region == CellRegion.EXTERIOR)[0]

    def interior_cubes(self) -> np.ndarray:
        return np.nonzero(self.cube_region == CellRegion.INTERIOR)[0]

    def exterior_cubes(self) -> np.ndarray:
        return np.nonzero(self.cube_region == CellRegion.EXTERIOR)[0]


def build_box_mesh(spec: GeometrySpec) -> Mesh:
    """Mesh the box (-R,R)^3 with 6 tetrahedra per grid cube and tag everything."""
    spec.validate()
    n = spec.n
    side = np.linspace(-spec.R, spec.R, n + 1)
    X, Y, Z = np.meshgrid(side, side, side, indexing="ij")
    vertices = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    ii, jj, kk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    corner = {}
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                corner[(di, dj, dk)] = vid(ii + di, jj + dj, kk + dk)

    tets = []
    for perm in _PERMS:
        steps = [(0, 0, 0)]
        cur = [0, 0, 0]
        for ax in perm:
            cur = cur.copy()
            cur[ax] += 1
            steps.append(tuple(cur))
        quad = [corner[s] for s in steps]
        if _perm_sign(perm) < 0:
            quad[2], quad[3] = quad[3], quad[2]
        tets.append(np.stack(quad, axis=1))
    # group the 6 tets of each cube together
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    centroids = vertices[tets].mean(axis=1)
    inside = np.all(np.abs(centroids) < spec.a, axis=1)
    cell_region = np.where(inside, CellRegion.INTERIOR, CellRegion.EXTERIOR).astype(np.int8)
    # the interface is grid aligned, so a cube never straddles it
    per_cube = cell_region.reshape(-1, 6)
    if not np.all(per_cube == per_cube[:, :1]):
        raise ConfigError("internal error: region tag varies inside one grid cube")

    e1 = vertices[tets[:, 1]] - vertices[tets[:, 0]]
    e2 = vertices[tets[:, 2]] - vertices[tets[:, 0]]
    e3 = vertices[tets[:, 3]] - vertices[tets[:, 0]]
    cell_volumes = np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0
    if cell_volumes.min() <= 0:
        raise ConfigError("negative cell volume: inconsistent orientation")

    gamma, outer = _classify_faces(tets, cell_region)
    g_faces, g_in, g_out = gamma
    normals, areas = _face_normals(vertices, tets, g_faces, g_in)

    return Mesh(
        spec=spec,
        vertices=vertices,
        tets=tets,
        cell_region=cell_region,
        gamma_faces=g_faces,
        gamma_normals=normals,
        gamma_areas=areas,
        gamma_cell_in=g_in,
        gamma_cell_out=g_out,
        outer_faces=outer[0],
        outer_cells=outer[1],
        cell_volumes=cell_volumes,
    )


_FACE_LOCAL = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


def _classify_faces(tets, cell_region):
    T = tets.shape[0]
    faces = np.sort(tets[:, _FACE_LOCAL], axis=2).reshape(-1, 3)
    owner = np.repeat(np.arange(T), 4)
    uniq, inv, counts = np.unique(faces, axis=0, return_inverse=True, return_counts=True)
    order = np.argsort(inv, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])

    first = owner[order[starts[:-1]]]
    second = np.full(len(uniq), -1)
    two = counts == 2
    second[two] = owner[order[starts[:-1][two] + 1]]

    boundary = counts == 1
    internal = two
    ra = cell_region[first]
    rb = np.where(internal, cell_region[np.where(second >= 0, second, 0)], ra)
    is_gamma = internal & (ra != rb)

    g_first, g_second = first[is_gamma], second[is_gamma]
    g_in = np.where(cell_region[g_first] == CellRegion.INTERIOR, g_first, g_second)
    g_out = np.where(cell_region[g_first] == CellRegion.INTERIOR, g_second, g_first)
    return (uniq[is_gamma], g_in, g_out), (uniq[boundary], first[boundary])


def _face_normals(vertices, tets, faces, inner_cells):
    p0, p1, p2 = (vertices[faces[:, k]] for k in range(3))
    nvec = np.cross(p1 - p0, p2 - p0)
    areas = 0.5 * np.linalg.norm(nvec, axis=1)
    normals = nvec / np.linalg.norm(nvec, axis=1)[:, None]
    # orient away from the interior cell
    cent_face = (p0 + p1 + p2) / 3.0
    cent_cell = vertices[tets[inner_cells]].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, cent_face - cent_cell) < 0
    normals[flip] *= -1.0
    return normals, areas


def indicator_omega_plus(mesh: Mesh) -> np.ndarray:
    """Pressure field of the body indicator: 1 on interior pressure cells.

    Pressure dofs live on the grid cubes (see fespace); the interface is a
    union of cube faces, so the indicator is exactly representable.
    """
    return (mesh.cube_region == CellRegion.INTERIOR).astype(float)


def normal_density(mesh: Mesh, trace_space) -> "fespace.CotraceDensity":
    """The interface normal as a density: action on a trace field is its flux."""
    from . import fespace  # local import; mesh stays importable on its own

    return fespace.density_from_function(
        trace_space, lambda y, nu: nu, with_normal=True
    )


def save_mesh_txt(mesh: Mesh, path):
    """Plain-text debug dump: counted sections of vertices, cells, tags, faces."""
    with open(path, "w") as fh:
        fh.write(
            "# varstokes mesh dump\n"
            "# sections: vertices(x y z) | tets(v0 v1 v2 v3 region) | "
            "gamma_faces(v0 v1 v2 nx ny nz) | outer_faces(v0 v1 v2)\n"
        )
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        fh.write(f"tets {len(mesh.tets)}\n")
        for t, r in zip(mesh.tets, mesh.cell_region):
            fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]} {int(r)}\n")
        fh.write(f"gamma_faces {len(mesh.gamma_faces)}\n")
        for f, nu in zip(mesh.gamma_faces, mesh.gamma_normals):
            fh.write(f"{f[0]} {f[1]} {f[2]} {nu[0]:.17g} {nu[1]:.17g} {nu[2]:.17g}\n")
        fh.write(f"outer_faces {len(mesh.outer_faces)}\n")
        for f in mesh.outer_faces:
            fh.write(f"{f[0]} {f[1]} {f[2]}\n")
