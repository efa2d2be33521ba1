import numpy as np
import pytest

from wavectrl import mesh as wm


def exhaustive_h(m):
    # independent oracle: max over triangles of max pairwise vertex distance
    best = 0.0
    for tri in m.triangles:
        p = m.vertices[tri]
        for i in range(3):
            for j in range(i + 1, 3):
                best = max(best, float(np.hypot(*(p[i] - p[j]))))
    return best


def test_2x2_counts():
    m = wm.build_rect_mesh(2.0, 2, 2)
    assert len(m.vertices) == 9
    assert len(m.triangles) == 8
    assert len(m.edges) == 16


@pytest.mark.parametrize("nx,nt", [(1, 2), (2, 1)])
def test_min_resolution_rejected(nx, nt):
    with pytest.raises(ValueError):
        wm.build_rect_mesh(2.0, nx, nt)


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        wm.build_rect_mesh(-1.0, 4, 4)
    with pytest.raises(ValueError):
        wm.build_rect_mesh(2.0, 4, 4, jitter=0.4)
    with pytest.raises(ValueError):
        wm.build_rect_mesh(2.0, 4, 4, pattern="fan")


def test_h_by_exhaustive_scan():
    m = wm.build_rect_mesh(2.5, 16, 40)
    assert wm.mesh_size(m) == pytest.approx(exhaustive_h(m), rel=0, abs=0)
    assert wm.mesh_size(m) == pytest.approx(np.hypot(1 / 16, 2.5 / 40), rel=1e-14)


def test_mesh_size_2x2():
    m = wm.build_rect_mesh(2.0, 2, 2)
    assert wm.mesh_size(m) == pytest.approx(np.hypot(0.5, 1.0), rel=1e-14)
    assert wm.mesh_size(m) > 0


def test_refinement_halves_h():
    for pattern in ("alternating", "crisscross"):
        m1 = wm.build_rect_mesh(2.0, 4, 8, pattern)
        m2 = wm.build_rect_mesh(2.0, 8, 16, pattern)
        assert wm.mesh_size(m2) == pytest.approx(0.5 * wm.mesh_size(m1), rel=1e-14)


@pytest.mark.parametrize("pattern,jitter", [("alternating", 0.0), ("alternating", 0.15),
                                            ("crisscross", 0.0), ("crisscross", 0.1)])
def test_invariants(pattern, jitter):
    m = wm.build_rect_mesh(1.5, 5, 7, pattern, jitter=jitter, seed=3)
    nv, ne, nf = len(m.vertices), len(m.edges), len(m.triangles)
    assert nv - ne + nf == 1  # Euler relation for a disk
    assert m.signed_areas().min() > 0
    assert m.signed_areas().sum() == pytest.approx(1.5 * 1.0, rel=1e-12)
    assert m.h == pytest.approx(exhaustive_h(m), abs=0)

    interior = m.edge_tris[:, 1] >= 0
    assert np.all(m.boundary_tag[interior] == wm.INTERIOR)
    assert np.all(m.boundary_tag[~interior] > 0)
    for ie in np.nonzero(~interior)[0]:
        tag = m.boundary_tag[ie]
        coords = m.vertices[m.edges[ie]]
        target = {wm.BOTTOM: ("t", 0.0), wm.TOP: ("t", 1.5),
                  wm.LEFT: ("x", 0.0), wm.RIGHT: ("x", 1.0)}[tag]
        col = 0 if target[0] == "t" else 1
        assert np.all(np.abs(coords[:, col] - target[1]) <= 1e-12)


def test_edge_adjacency_symmetric():
    m = wm.build_rect_mesh(2.0, 4, 4, jitter=0.1, seed=1)
    for ie in m.interior_edges():
        fp = m.face_pair(ie)
        a, b = m.edges[ie]
        for tri_id in (fp.left, fp.right):
            assert {a, b} <= set(m.triangles[tri_id])
        assert np.linalg.norm(fp.normal) == pytest.approx(1.0, rel=1e-14)
        assert np.allclose(fp.flipped().normal, -fp.normal)


def test_boundary_normals_point_outward():
    m = wm.build_rect_mesh(2.0, 3, 3)
    normals = m.edge_normals()
    expected = {wm.BOTTOM: (-1, 0), wm.TOP: (1, 0), wm.LEFT: (0, -1), wm.RIGHT: (0, 1)}
    for tag, n in expected.items():
        for ie in m.boundary_edges(tag):
            assert np.allclose(normals[ie], n, atol=1e-14)


def test_jitter_determinism_and_bounds():
    m1 = wm.build_rect_mesh(2.0, 6, 10, jitter=0.2, seed=11)
    m2 = wm.build_rect_mesh(2.0, 6, 10, jitter=0.2, seed=11)
    assert np.array_equal(m1.vertices, m2.vertices)
    m3 = wm.build_rect_mesh(2.0, 6, 10, jitter=0.2, seed=12)
    assert not np.array_equal(m1.vertices, m3.vertices)

    ref = wm.build_rect_mesh(2.0, 6, 10)
    delta = 0.2 * min(1 / 6, 2.0 / 10)
    assert np.abs(m1.vertices - ref.vertices).max() <= delta + 1e-15
    # corners never move
    for corner in [(0, 0), (0, 1), (2, 0), (2, 1)]:
        assert any(np.allclose(v, corner, atol=0) for v in m1.vertices)


def test_serialization_roundtrip(tmp_path):
    m = wm.build_rect_mesh(2.5, 4, 6, jitter=0.1, seed=5)
    path = tmp_path / "m.txt"
    wm.save_mesh(m, path)
    m2 = wm.load_mesh(path)
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert m.content_hash() == m2.content_hash()
    with pytest.raises(ValueError):
        wm.deserialize("not-a-mesh v0\n")
