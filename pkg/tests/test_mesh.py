import numpy as np
import pytest

from varstokes.errors import ConfigError
from varstokes.fespace import build_spaces
from varstokes.mesh import (
    CellRegion,
    GeometrySpec,
    build_box_mesh,
    indicator_omega_plus,
    normal_density,
    save_mesh_txt,
)


@pytest.fixture(scope="module")
def mesh4():
    return build_box_mesh(GeometrySpec(a=1.0, R=2.0, n=4))


def test_structured_split_counts(mesh4):
    assert mesh4.tets.shape == (4**3 * 6, 4)
    assert mesh4.cell_volumes.min() > 0
    assert np.isclose(mesh4.cell_volumes.sum(), 4.0**3)
    # interior region is the 2x2x2 block of cubes around the origin
    assert len(mesh4.interior_cells()) == 8 * 6
    assert len(mesh4.interior_cells()) + len(mesh4.exterior_cells()) == mesh4.num_cells


def test_gamma_is_closed_surface(mesh4):
    flux = (mesh4.gamma_areas[:, None] * mesh4.gamma_normals).sum(axis=0)
    assert np.linalg.norm(flux) < 1e-14
    assert np.isclose(mesh4.gamma_areas.sum(), 6 * (2.0 * 1.0) ** 2)


def test_gamma_faces_separate_regions(mesh4):
    assert np.all(mesh4.cell_region[mesh4.gamma_cell_in] == CellRegion.INTERIOR)
    assert np.all(mesh4.cell_region[mesh4.gamma_cell_out] == CellRegion.EXTERIOR)
    # every gamma vertex lies on the cube surface
    v = mesh4.vertices[np.unique(mesh4.gamma_faces)]
    assert np.all(np.isclose(np.abs(v).max(axis=1), 1.0))
    # normals point away from the interior: nu . x > 0 at face centroids
    cent = mesh4.vertices[mesh4.gamma_faces].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", cent, mesh4.gamma_normals) > 0)


def test_outer_faces_belong_to_exterior_cells(mesh4):
    assert np.all(mesh4.cell_region[mesh4.outer_cells] == CellRegion.EXTERIOR)
    v = mesh4.vertices[np.unique(mesh4.outer_faces)]
    assert np.all(np.isclose(np.abs(v).max(axis=1), 2.0))
    # closed box: total outer area
    areas = _tri_areas(mesh4.vertices, mesh4.outer_faces)
    assert np.isclose(areas.sum(), 6 * 4.0**2)


def _tri_areas(vertices, faces):
    p0, p1, p2 = (vertices[faces[:, k]] for k in range(3))
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


def test_refinement_preserves_gamma_geometry():
    m1 = build_box_mesh(GeometrySpec(a=1.0, R=2.0, n=4))
    m2 = build_box_mesh(GeometrySpec(a=1.0, R=2.0, n=8))
    assert np.isclose(m1.gamma_areas.sum(), m2.gamma_areas.sum())
    # coarse interface vertices reappear in the fine interface vertex set
    fine = {tuple(np.round(v, 12)) for v in m2.vertices[np.unique(m2.gamma_faces)]}
    for v in m1.vertices[np.unique(m1.gamma_faces)]:
        assert tuple(np.round(v, 12)) in fine


def test_misaligned_spec_raises():
    with pytest.raises(ConfigError) as err:
        build_box_mesh(GeometrySpec(a=1.0, R=2.0, n=6))
    assert "a=1.0" in str(err.value) and "n=6" in str(err.value)
    with pytest.raises(ConfigError):
        GeometrySpec(a=2.0, R=1.0, n=4).validate()
    with pytest.raises(ConfigError):
        GeometrySpec(a=1.0, R=2.0, n=5).validate()


def test_indicator_field(mesh4):
    chi = indicator_omega_plus(mesh4)
    assert chi.shape == (mesh4.num_cubes,)
    assert np.all(chi[mesh4.interior_cubes()] == 1.0)
    assert np.all(chi[mesh4.exterior_cubes()] == 0.0)
    cube_vol = mesh4.cell_volumes.reshape(-1, 6).sum(axis=1)
    assert np.isclose(chi @ cube_vol, (2.0 * 1.0) ** 3)


def test_normal_density_actions(mesh4):
    _, _, tspace = build_spaces(mesh4)
    nu = normal_density(mesh4, tspace)
    # constant field: closed surface flux vanishes
    const = np.tile([1.0, -2.0, 0.5], tspace.nnodes)
    assert abs(nu.actions @ const) < 1e-12
    # position field: divergence theorem gives 3 |Omega_+|
    pos = tspace.node_xyz[tspace.gamma_nodes].reshape(-1)
    assert nu.actions @ pos == pytest.approx(3.0 * 8.0, rel=1e-13)
    # per component the normal integrates to zero
    for c in range(3):
        e = np.zeros(3)
        e[c] = 1.0
        assert abs(nu.actions @ np.tile(e, tspace.nnodes)) < 1e-13
    # trace of a discretely divergence-free field: flux vanishes
    from varstokes.fespace import interpolate_velocity, trace

    vspace = build_spaces(mesh4)[0]
    rot = interpolate_velocity(vspace, lambda x: np.cross(np.array([0.7, -0.2, 1.1]), x))
    assert abs(nu.actions @ trace(tspace, rot).coeffs) < 1e-12


def test_mesh_txt_roundtrip(tmp_path, mesh4):
    path = tmp_path / "mesh.txt"
    save_mesh_txt(mesh4, path)
    lines = path.read_text().splitlines()
    assert lines[2].startswith("vertices ")
    nv = int(lines[2].split()[1])
    assert nv == len(mesh4.vertices)
    first = np.array([float(t) for t in lines[3].split()])
    assert np.allclose(first, mesh4.vertices[0])
