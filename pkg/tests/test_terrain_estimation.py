"""Terrain estimation tests: entropy-optimal neighborhoods, PCA normals, map."""

import numpy as np
import pytest

from wbcsim.terrain_estimation import (
    DegenerateNeighborhoodError,
    InsufficientNeighborhoodError,
    NormalFilter,
    NormalMap,
    PointCloud,
    eigenvalue_entropy,
    estimate_normal,
    incline_angle,
    optimal_neighborhood,
    query_normal,
)

UP = np.array([0.0, 0.0, 1.0])


def plane_cloud(rng, n=200, normal=UP, offset=0.0, extent=1.0, noise=0.0):
    """Points on (or near) the plane normal . p = offset."""
    normal = np.asarray(normal, float) / np.linalg.norm(normal)
    a = np.array([1.0, 0.0, 0.0])
    if abs(normal @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(normal, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    c = rng.uniform(-extent, extent, (n, 2))
    pts = offset * normal + c[:, :1] * t1 + c[:, 1:] * t2
    if noise > 0.0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    return PointCloud(points=pts)


def brute_force_k(cloud, query, k_min, k_max):
    ents = []
    for k in range(k_min, min(k_max, len(cloud)) + 1):
        _, idx = cloud.tree.query(query, k=k)
        pts = cloud.points[idx]
        lam = np.linalg.eigvalsh(np.cov(pts.T, bias=True))
        ents.append(eigenvalue_entropy(lam))
    return k_min + int(np.argmin(ents))


# -- optimal neighborhood ---------------------------------------------------

def test_planar_cloud_entropy_and_tiebreak():
    rng = np.random.default_rng(0)
    cloud = plane_cloud(rng, n=100)
    q = np.zeros(3)
    _, idx = cloud.tree.query(q, k=20)
    lam = np.linalg.eigvalsh(np.cov(cloud.points[idx].T, bias=True))
    # isotropic planar spread: eta = (1/2, 1/2, 0), entropy = ln 2
    assert eigenvalue_entropy(lam) == pytest.approx(np.log(2.0), abs=0.05)
    # all k tie near ln 2; the scan must still agree with brute force
    k = optimal_neighborhood(cloud, q, 10, 40)
    assert k == brute_force_k(cloud, q, 10, 40)


def test_optimal_neighborhood_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(10):
        cloud = PointCloud(points=rng.normal(size=(120, 3)))
        q = rng.normal(size=3)
        assert optimal_neighborhood(cloud, q, 5, 30) == brute_force_k(cloud, q, 5, 30)


def test_optimal_neighborhood_excludes_curved_region():
    rng = np.random.default_rng(2)
    # planar patch around the query adjoining a strongly curved (spherical) region
    flat = plane_cloud(rng, n=60, extent=0.5)
    phi = rng.uniform(0, np.pi / 2, 80)
    th = rng.uniform(0, 2 * np.pi, 80)
    sphere = np.column_stack([
        1.0 + 0.5 * np.sin(phi) * np.cos(th),
        0.5 * np.sin(phi) * np.sin(th),
        0.5 * np.cos(phi) - 0.5,
    ])
    cloud = PointCloud(points=np.vstack([flat.points, sphere]))
    q = np.array([-0.3, 0.0, 0.0])
    k_min, k_max = 10, 100
    k = optimal_neighborhood(cloud, q, k_min, k_max)
    assert k == brute_force_k(cloud, q, k_min, k_max)
    assert k < k_max

    def entropy_at(kk):
        _, idx = cloud.tree.query(q, k=kk)
        return eigenvalue_entropy(np.linalg.eigvalsh(np.cov(cloud.points[idx].T, bias=True)))

    assert entropy_at(k) < entropy_at(k_max)


def test_optimal_neighborhood_insufficient_points():
    cloud = PointCloud(points=np.zeros((5, 3)))
    with pytest.raises(InsufficientNeighborhoodError):
        optimal_neighborhood(cloud, np.zeros(3), 10, 20)


# -- normal estimation ------------------------------------------------------

def test_flat_plane_normal():
    rng = np.random.default_rng(3)
    cloud = plane_cloud(rng, n=50)
    est = estimate_normal(cloud, np.zeros(3), 30)
    assert np.allclose(est.normal, UP, atol=1e-12)
    assert est.eigenvalues[2] == pytest.approx(0.0, abs=1e-20)


def test_inclined_plane_normal():
    rng = np.random.default_rng(4)
    n45 = np.array([np.sqrt(0.5), 0.0, np.sqrt(0.5)])
    cloud = plane_cloud(rng, n=80, normal=n45, offset=0.3)
    est = estimate_normal(cloud, cloud.points[0], 40)
    assert np.allclose(est.normal, n45, atol=1e-10)


def test_normal_rotation_equivariance():
    from wbcsim.rotations import exp_so3
    rng = np.random.default_rng(5)
    cloud = plane_cloud(rng, n=100, normal=np.array([0.2, -0.1, 1.0]))
    est = estimate_normal(cloud, np.zeros(3), 40)
    R = exp_so3(np.array([0.05, -0.1, 0.4]))
    cloud2 = PointCloud(points=cloud.points @ R.T)
    est2 = estimate_normal(cloud2, np.zeros(3), 40)
    n_rot = R @ est.normal
    if n_rot[2] < 0:
        n_rot = -n_rot
    assert np.allclose(est2.normal, n_rot, atol=1e-8)


def test_normal_noisy_plane_monte_carlo():
    rng = np.random.default_rng(6)
    ang = np.deg2rad(15.0)
    n_true = np.array([np.sin(ang), 0.0, np.cos(ang)])
    errs = []
    for _ in range(200):
        cloud = plane_cloud(rng, n=120, normal=n_true, extent=0.5, noise=0.01)
        est = estimate_normal(cloud, np.zeros(3), 30)
        errs.append(np.degrees(np.arccos(np.clip(est.normal @ n_true, -1, 1))))
    assert np.mean(errs) < 2.0


def test_degenerate_collinear_neighborhood():
    t = np.linspace(0, 1, 30)
    cloud = PointCloud(points=np.column_stack([t, t, t]))
    with pytest.raises(DegenerateNeighborhoodError):
        estimate_normal(cloud, np.zeros(3), 20)


def test_rejects_nan_points():
    with pytest.raises(ValueError):
        PointCloud(points=np.array([[0.0, 0.0, np.nan]]))


# -- normal map -------------------------------------------------------------

def test_update_map_flat_ground():
    rng = np.random.default_rng(7)
    cloud = plane_cloud(rng, n=500, extent=1.0)
    nmap = NormalMap(cell_size=0.25)
    written = nmap.update(cloud)
    assert written > 0
    for cell in nmap.cells.values():
        assert np.allclose(cell.normal, UP, atol=1e-9)
        assert abs(np.linalg.norm(cell.normal) - 1.0) < 1e-9


def test_update_map_union_of_disjoint_clouds():
    rng = np.random.default_rng(8)
    c1 = plane_cloud(rng, n=200, extent=0.5)
    c2 = PointCloud(points=plane_cloud(rng, n=200, extent=0.5).points + [5.0, 0.0, 0.0])
    nmap = NormalMap(cell_size=0.25)
    nmap.update(c1)
    keys1 = set(nmap.cells)
    nmap.update(c2)
    assert keys1 <= set(nmap.cells)
    assert len(nmap.cells) > len(keys1)


def test_update_map_idempotent():
    rng = np.random.default_rng(9)
    cloud = plane_cloud(rng, n=300, normal=np.array([0.3, 0.0, 1.0]))
    nmap = NormalMap(cell_size=0.25)
    nmap.update(cloud)
    before = {k: c.normal.copy() for k, c in nmap.cells.items()}
    nmap.update(cloud)
    assert set(before) == set(nmap.cells)
    for k in before:
        assert np.allclose(nmap.cells[k].normal, before[k], atol=1e-12)


def test_map_csv_export(tmp_path):
    rng = np.random.default_rng(10)
    nmap = NormalMap(cell_size=0.25)
    nmap.update(plane_cloud(rng, n=200))
    path = tmp_path / "map.csv"
    nmap.export_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "ix,iy,nx,ny,nz,count"
    first = lines[1].split(",")
    assert len(first) == 6
    n = np.array([float(v) for v in first[2:5]])
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-6)


def test_pointcloud_file_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    cloud = plane_cloud(rng, n=50)
    path = tmp_path / "cloud.xyz"
    cloud.to_xyz_file(str(path))
    back = PointCloud.from_xyz_file(str(path))
    assert np.allclose(back.points, cloud.points, atol=1e-8)


# -- query + filter ---------------------------------------------------------

def test_query_empty_map_returns_up():
    nmap = NormalMap()
    filt = NormalFilter(alpha=0.1)
    n = query_normal(nmap, np.zeros(2), np.array([1.0, 0.0, 0.0]), 0.9, filt)
    assert np.allclose(n, UP)


def test_query_converges_to_cell_normal():
    rng = np.random.default_rng(12)
    ang = np.deg2rad(10.0)
    slope_n = np.array([np.sin(ang), 0.0, np.cos(ang)])
    nmap = NormalMap(cell_size=0.25)
    nmap.update(plane_cloud(rng, n=400, normal=slope_n))
    filt = NormalFilter(alpha=0.2)
    for _ in range(int(5 / 0.2)):
        n = query_normal(nmap, np.zeros(2), np.array([1.0, 0.0]), 0.0, filt)
    assert np.degrees(np.arccos(np.clip(n @ slope_n, -1, 1))) < 0.5


def test_filter_step_response_first_order():
    # step flat -> 15 deg: after ceil(1/a) samples the response passes ~63%
    a = 0.1
    filt = NormalFilter(alpha=a)
    filt.push(UP)
    ang = np.deg2rad(15.0)
    n_slope = np.array([np.sin(ang), 0.0, np.cos(ang)])
    incl = 0.0
    for _ in range(int(round(1 / a))):
        incl = incline_angle(filt.push(n_slope))
    assert incl == pytest.approx(15.0 * 0.63, rel=0.12)


def test_incline_angle():
    assert incline_angle(UP) == pytest.approx(0.0)
    assert incline_angle(np.array([np.sqrt(0.5), 0.0, np.sqrt(0.5)])) == pytest.approx(45.0)


def test_lookahead_targets_correct_cell():
    nmap = NormalMap(cell_size=0.5)
    ang = np.deg2rad(20.0)
    n_slope = np.array([np.sin(ang), 0.0, np.cos(ang)])
    # build cells directly: flat at origin, slope 0.9 m ahead
    from wbcsim.terrain_estimation import MapCell
    nmap.cells = {
        nmap.key_of(0.0, 0.0): MapCell(UP.copy(), 1, 0.0),
        nmap.key_of(0.9, 0.0): MapCell(n_slope.copy(), 1, 0.0),
    }
    filt = NormalFilter(alpha=1.0)
    n = query_normal(nmap, np.zeros(2), np.array([1.0, 0.0]), 0.9, filt)
    assert np.allclose(n, n_slope)
