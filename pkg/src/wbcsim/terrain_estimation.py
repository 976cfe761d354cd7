"""Ground-normal estimation from point clouds.

Adaptive-neighborhood PCA: for a query point, the neighbor count k is
chosen to minimize the Shannon entropy of the normalized covariance
eigenvalues; the normal is the eigenvector of the smallest eigenvalue.
Estimates are cached in a sparse 2D grid map and served through a
lookahead query with exponential smoothing.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

UP = np.array([0.0, 0.0, 1.0])


class InsufficientNeighborhoodError(ValueError):
    pass


class DegenerateNeighborhoodError(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray                 # (n, 3), inertia frame
    timestamp: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts
        self._tree = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    @classmethod
    def from_xyz_file(cls, path: str, timestamp: float | None = None) -> "PointCloud":
        """ASCII ingestion: one 'x y z' triple per line, meters."""
        return cls(points=np.loadtxt(path, dtype=float).reshape(-1, 3),
                   timestamp=timestamp)

    def to_xyz_file(self, path: str) -> None:
        np.savetxt(path, self.points, fmt="%.9g")


@dataclass
class NormalEstimate:
    normal: np.ndarray
    k: int
    entropy: float
    eigenvalues: np.ndarray            # descending


def eigenvalue_entropy(lam: np.ndarray) -> float:
    """Shannon entropy of the normalized eigenvalues; 0*ln(0) taken as 0."""
    lam = np.maximum(np.asarray(lam, dtype=float), 0.0)
    total = lam.sum()
    if total <= 0.0:
        return 0.0
    eta = lam / total
    nz = eta[eta > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _neighborhood_eigen(cloud: PointCloud, query_point: np.ndarray, k: int):
    _, idx = cloud.tree.query(np.asarray(query_point, float), k=k)
    pts = cloud.points[np.atleast_1d(idx)]
    cov = np.cov(pts.T, bias=True)
    lam, vec = np.linalg.eigh(cov)
    return lam[::-1], vec[:, ::-1]     # descending


def optimal_neighborhood(cloud: PointCloud, query_point: np.ndarray,
                         k_min: int = 10, k_max: int = 60) -> int:
    """Neighbor count in [k_min, k_max] minimizing the eigenvalue entropy.

    Ties break toward smaller k.  The scan shares one sorted k_max query:
    prefix sums give every prefix covariance, and the 3x3 eigenvalues are
    batched, so the cost is one tree query per call instead of one per k.
    """
    if not 3 <= k_min < k_max:
        raise ValueError("require 3 <= k_min < k_max")
    if len(cloud) < k_min:
        raise InsufficientNeighborhoodError(
            f"insufficient neighborhood: cloud has {len(cloud)} < k_min={k_min} points")
    k_hi = min(k_max, len(cloud))
    _, idx = cloud.tree.query(np.asarray(query_point, float), k=k_hi)
    pts = cloud.points[np.atleast_1d(idx)]       # sorted by distance
    pts = pts - pts.mean(axis=0)                 # center once for stability
    ks = np.arange(k_min, k_hi + 1)
    csum = np.cumsum(pts, axis=0)[ks - 1]
    csum2 = np.cumsum(pts[:, :, None] * pts[:, None, :], axis=0)[ks - 1]
    mu = csum / ks[:, None]
    cov = csum2 / ks[:, None, None] - mu[:, :, None] * mu[:, None, :]
    lam = np.maximum(np.linalg.eigvalsh(cov), 0.0)
    tot = lam.sum(axis=1)
    eta = lam / np.where(tot > 0.0, tot, 1.0)[:, None]
    h = -np.where(eta > 0.0, eta * np.log(np.where(eta > 0.0, eta, 1.0)), 0.0).sum(axis=1)
    h[tot <= 0.0] = 0.0
    # argmin returns the first minimum: exact ties keep the smaller k
    return int(ks[np.argmin(h)])


def estimate_normal(cloud: PointCloud, query_point: np.ndarray, k: int) -> NormalEstimate:
    """PCA normal from the k nearest neighbors, oriented upward."""
    if len(cloud) < k or k < 3:
        raise InsufficientNeighborhoodError(
            f"insufficient neighborhood: need k={k} of {len(cloud)} points")
    lam, vec = _neighborhood_eigen(cloud, query_point, k)
    if lam[1] <= 1e-12 * max(lam[0], 1e-300) or lam[0] <= 0.0:
        raise DegenerateNeighborhoodError("degenerate neighborhood: points are collinear")
    n = vec[:, 2]
    if n[2] < 0.0 or (n[2] == 0.0 and n[0] < 0.0):
        n = -n
    return NormalEstimate(normal=n, k=k, entropy=eigenvalue_entropy(lam),
                          eigenvalues=np.maximum(lam, 0.0))


@dataclass
class MapCell:
    normal: np.ndarray
    sample_count: int
    last_update: float


class NormalMap:
    """Sparse 2D grid of estimated ground normals.

    Single-writer / multi-reader: cell values are replaced atomically under
    a lock, so a concurrent query always sees a consistent normal.
    """

    def __init__(self, cell_size: float = 0.10, k_min: int = 10, k_max: int = 60):
        if cell_size <= 0.0:
            raise ValueError("cell size must be positive")
        self.cell_size = float(cell_size)
        self.k_min = int(k_min)
        self.k_max = int(k_max)
        self.cells: dict[tuple[int, int], MapCell] = {}
        self.skipped_degenerate = 0
        self._lock = threading.Lock()

    def key_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(np.floor(x / self.cell_size)), int(np.floor(y / self.cell_size)))

    def cell_center(self, key: tuple[int, int]) -> np.ndarray:
        return (np.array(key, dtype=float) + 0.5) * self.cell_size

    def update(self, cloud: PointCloud) -> int:
        """Re-estimate every cell occupied by the cloud; untouched cells persist.

        Returns the number of cells written.  Degenerate cells are skipped and
        counted, never aborting the batch.
        """
        if len(cloud) == 0:
            raise ValueError("cannot update the map from an empty cloud")
        t = cloud.timestamp if cloud.timestamp is not None else 0.0
        occupied: dict[tuple[int, int], list] = {}
        for p in cloud.points:
            key = self.key_of(p[0], p[1])
            if key in occupied:
                occupied[key][0] += 1
                occupied[key][1] += p[2]
            else:
                occupied[key] = [1, p[2]]
        written = 0
        for key, (count, z_sum) in occupied.items():
            if len(cloud) < self.k_min:
                self.skipped_degenerate += 1
                continue
            center = self.cell_center(key)
            query = np.array([center[0], center[1], z_sum / count])
            try:
                k = optimal_neighborhood(cloud, query, self.k_min, self.k_max)
                est = estimate_normal(cloud, query, k)
            except (InsufficientNeighborhoodError, DegenerateNeighborhoodError):
                self.skipped_degenerate += 1
                continue
            cell = MapCell(normal=est.normal, sample_count=count, last_update=t)
            with self._lock:
                self.cells[key] = cell
            written += 1
        return written

    def lookup(self, x: float, y: float, search_radius: float = 0.5) -> np.ndarray | None:
        """Normal of the cell at (x, y), falling back to the nearest occupied
        cell within the search radius; None when nothing is found."""
        with self._lock:
            cell = self.cells.get(self.key_of(x, y))
            if cell is not None:
                return cell.normal.copy()
            if not self.cells:
                return None
            keys = list(self.cells.keys())
            centers = np.array([self.cell_center(k) for k in keys])
            d2 = ((centers - [x, y]) ** 2).sum(axis=1)
            i = int(np.argmin(d2))
            if d2[i] <= search_radius**2:
                return self.cells[keys[i]].normal.copy()
        return None

    def export_csv(self, path: str) -> None:
        """CSV export: ix,iy,nx,ny,nz,count."""
        with self._lock, open(path, "w") as f:
            f.write("ix,iy,nx,ny,nz,count\n")
            for (ix, iy), cell in sorted(self.cells.items()):
                n = cell.normal
                f.write(f"{ix},{iy},{n[0]:.9g},{n[1]:.9g},{n[2]:.9g},{cell.sample_count}\n")


@dataclass
class NormalFilter:
    """Exponential moving average over queried normals (low-pass)."""

    alpha: float = 0.1
    value: np.ndarray = field(default_factory=lambda: UP.copy())
    initialized: bool = False

    def push(self, n: np.ndarray) -> np.ndarray:
        if not self.initialized:
            self.value = np.asarray(n, dtype=float).copy()
            self.initialized = True
        else:
            blended = (1.0 - self.alpha) * self.value + self.alpha * np.asarray(n, float)
            self.value = blended / np.linalg.norm(blended)
        return self.value.copy()


def query_normal(nmap: NormalMap, position_xy: np.ndarray, heading: np.ndarray,
                 lookahead: float, filt: NormalFilter,
                 search_radius: float = 0.5) -> np.ndarray:
    """Filtered map normal at `position + lookahead * heading` (total with
    vertical fallback when the map is empty there)."""
    h = np.asarray(heading, dtype=float)[:2]
    nh = np.linalg.norm(h)
    target = np.asarray(position_xy, dtype=float)[:2]
    if nh > 1e-12:
        target = target + lookahead * h / nh
    n = nmap.lookup(target[0], target[1], search_radius)
    if n is None:
        n = UP.copy()
    return filt.push(n)


def incline_angle(n: np.ndarray) -> float:
    """Inclination of an upward unit normal, in degrees."""
    return float(np.degrees(np.arccos(np.clip(np.asarray(n, float)[2], -1.0, 1.0))))
