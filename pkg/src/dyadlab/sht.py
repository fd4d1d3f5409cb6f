"""Dyadic cubes and Haar bases on finite quasi-metric point clouds.

Nets are greedy maximal delta^k-separated subsets, nested by seeding each
level with the previous centers; cubes assign each point to its nearest
center among the children of its current cube (ties to the smallest center
id), which forces the partition and nestedness properties by construction.
Ball constants are measured and reported against the c1 = c0/(3 A0^2),
C1 = 2 A0 C0 targets rather than guaranteed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWeightError


@dataclass
class QuasiMetricCloud:
    """Finite point set with a symmetric distance matrix and point masses."""

    dist: np.ndarray
    mass: np.ndarray
    A0: float = 1.0

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        n = self.dist.shape[0]
        if self.dist.shape != (n, n):
            raise ValueError("distance matrix must be square")
        if self.mass is None:
            self.mass = np.ones(n)
        self.mass = np.asarray(self.mass, dtype=float)
        if np.min(self.mass) <= 0:
            raise DegenerateWeightError("point masses must be positive")

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def validate(self, check_quasi_triangle: bool = True) -> dict:
        """Exhaustive checks of the quasi-metric axioms (n <= 512 is cheap)."""
        d = self.dist
        report = {"symmetric": bool(np.allclose(d, d.T))}
        report["positive_definite"] = bool(
            np.all(np.diag(d) == 0.0) and np.all(d + np.eye(self.n) > 0)
        )
        if check_quasi_triangle:
            worst = 1.0
            for z in range(self.n):
                through = d[:, z][:, None] + d[z, :][None, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(through > 0, d / through, 0.0)
                worst = max(worst, float(np.max(ratio)))
            report["quasi_triangle_constant"] = worst
            report["A0_ok"] = worst <= self.A0 * (1 + 1e-12)
        return report

    @classmethod
    def from_points(cls, xy: np.ndarray, mass=None) -> "QuasiMetricCloud":
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        n = xy.shape[0]
        return cls(dist, np.ones(n) if mass is None else mass, A0=1.0)

    @classmethod
    def from_csv(cls, path) -> "QuasiMetricCloud":
        """Load `id,x,y[,mass]` rows (Euclidean) or `id_i,id_j,distance` edges."""
        with open(path) as fh:
            rows = list(csv.reader(fh))
        header = [h.strip().lower() for h in rows[0]]
        body = rows[1:]
        if header[:3] == ["id", "x", "y"]:
            order = np.argsort([int(r[0]) for r in body])
            xy = np.array([[float(body[i][1]), float(body[i][2])] for i in order])
            mass = (
                np.array([float(body[i][3]) for i in order])
                if len(header) > 3
                else None
            )
            return cls.from_points(xy, mass)
        if header[:3] == ["id_i", "id_j", "distance"]:
            ids = sorted({int(r[0]) for r in body} | {int(r[1]) for r in body})
            index = {pid: k for k, pid in enumerate(ids)}
            n = len(ids)
            dist = np.zeros((n, n))
            for r in body:
                i, j, dv = index[int(r[0])], index[int(r[1])], float(r[2])
                dist[i, j] = dist[j, i] = dv
            cloud = cls(dist, np.ones(n), A0=1.0)
            cloud.A0 = cloud.validate()["quasi_triangle_constant"]
            return cloud
        raise ValueError("unrecognized cloud CSV header")


def lattice_cloud(n_points: int, metric: str = "euclidean") -> QuasiMetricCloud:
    """Uniform 1-D lattice of midpoints (i+1/2)/n on [0,1).

    metric="dyadic" uses the ultrametric d(x,y) = |smallest dyadic interval
    containing both|, under which nearest-center cubes are exactly the
    classical dyadic blocks.
    """
    xs = (np.arange(n_points) + 0.5) / n_points
    if metric == "euclidean":
        return QuasiMetricCloud.from_points(xs[:, None])
    if metric != "dyadic":
        raise ValueError("metric must be 'euclidean' or 'dyadic'")
    if n_points & (n_points - 1):
        raise ValueError("dyadic lattice metric needs a power-of-two size")
    depth = n_points.bit_length() - 1
    dist = np.zeros((n_points, n_points))
    for i in range(n_points):
        for j in range(i + 1, n_points):
            block = (i ^ j).bit_length()  # cells in the smallest common block: 2^block
            # scale by 0.9 so delta=1/2 nets at level k sit one per
            # generation-k block and nearest centers are strict
            dist[i, j] = dist[j, i] = 0.9 * 2.0 ** (block - depth)
    return QuasiMetricCloud(dist, np.ones(n_points), A0=1.0)


def build_nets(cloud: QuasiMetricCloud, delta: float, k_max: int | None = None):
    """Nested greedy maximal delta^k-separated center sets for k = 0.. .

    Level k candidates are the previous centers first (so nets are nested),
    then the remaining points in id order.  Auto mode extends k until every
    point is a center (all cubes become singletons) or 64 levels.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0,1)")
    if cloud.n == 0:
        raise ValueError("empty cloud")
    nets = []
    prev: list[int] = []
    limit = k_max + 1 if k_max is not None else 64
    for k in range(limit):
        radius = delta ** k
        seen = set(prev)
        order = list(prev) + [i for i in range(cloud.n) if i not in seen]
        centers: list[int] = []
        dmin = np.full(cloud.n, np.inf)
        for pid in order:
            if dmin[pid] >= radius:
                centers.append(pid)
                dmin = np.minimum(dmin, cloud.dist[pid])
        nets.append(np.array(centers))
        prev = centers
        if k_max is None and len(centers) == cloud.n:
            break
    return nets


@dataclass
class CubeSystem:
    cloud: QuasiMetricCloud
    delta: float
    centers: list[np.ndarray]  # per level, point ids of the centers
    assignment: list[np.ndarray]  # per level, point -> cube index
    parent: list[np.ndarray] = field(default_factory=list)  # per level>0, cube -> parent cube

    @property
    def n_levels(self) -> int:
        return len(self.centers)

    def cube_points(self, level: int, cube: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[level] == cube)

    def children(self, level: int, cube: int) -> np.ndarray:
        if level + 1 >= self.n_levels:
            return np.array([], dtype=int)
        return np.flatnonzero(self.parent[level + 1] == cube)

    def verify(self) -> dict:
        """Partition, nestedness, and measured inner/outer ball constants."""
        report = {"partition_ok": True, "nested_ok": True}
        for level in range(self.n_levels):
            a = self.assignment[level]
            if np.any(a < 0) or np.any(a >= len(self.centers[level])):
                report["partition_ok"] = False
        for level in range(1, self.n_levels):
            child_of_point = self.assignment[level]
            implied_parent = self.parent[level][child_of_point]
            if not np.array_equal(implied_parent, self.assignment[level - 1]):
                report["nested_ok"] = False
        inner, outer = math.inf, 0.0
        for level in range(self.n_levels):
            scale = self.delta ** level
            for cube, center in enumerate(self.centers[level]):
                pts = self.cube_points(level, cube)
                if pts.size == 0:
                    report["partition_ok"] = False
                    continue
                outer = max(outer, float(self.cloud.dist[center, pts].max()) / scale)
                others = np.setdiff1d(np.arange(self.cloud.n), pts, assume_unique=False)
                if others.size:
                    inner = min(inner, float(self.cloud.dist[center, others].min()) / scale)
        a0 = self.cloud.A0
        report["outer_ball_constant"] = outer
        report["inner_ball_constant"] = inner if inner < math.inf else 1.0
        report["outer_target_2A0C0"] = 2.0 * a0
        report["inner_target_c0_over_3A0sq"] = 1.0 / (3.0 * a0 ** 2)
        return report


def assign_cubes(nets, cloud: QuasiMetricCloud, delta: float) -> CubeSystem:
    """Hierarchically constrained nearest-center assignment.

    At the top level every point takes its nearest center (ties to the
    smallest center id).  Below, a point chooses among the centers whose own
    cube at the previous level equals the point's cube, which makes each
    generation a partition refining the previous one.
    """
    centers = [np.asarray(c) for c in nets]
    assignment = []
    parents = [np.array([], dtype=int)]
    top = centers[0]
    a0 = np.array(
        [_nearest(cloud, p, top) for p in range(cloud.n)], dtype=int
    )
    assignment.append(a0)
    for level in range(1, len(centers)):
        cs = centers[level]
        parent_of_center = np.array(
            [assignment[level - 1][c] for c in cs], dtype=int
        )
        assign = np.empty(cloud.n, dtype=int)
        for p in range(cloud.n):
            allowed = np.flatnonzero(parent_of_center == assignment[level - 1][p])
            assign[p] = allowed[_nearest(cloud, p, cs[allowed])]
        assignment.append(assign)
        parents.append(parent_of_center)
    return CubeSystem(cloud, delta, centers, assignment, parents)


def _nearest(cloud: QuasiMetricCloud, p: int, candidate_ids) -> int:
    d = cloud.dist[p, candidate_ids]
    return int(np.argmin(d))  # argmin takes the first minimum: smallest id wins ties


def build_cube_system(
    cloud: QuasiMetricCloud, delta: float = 0.5, k_max: int | None = None
) -> CubeSystem:
    return assign_cubes(build_nets(cloud, delta, k_max), cloud, delta)


# -- Haar system -------------------------------------------------------------


@dataclass
class SHTHaarFunction:
    level: int
    cube: int
    index: int  # 1..N(Q)-1
    values: np.ndarray  # dense over the cloud, zero off the cube


@dataclass
class SHTHaarSystem:
    system: CubeSystem
    functions: list[SHTHaarFunction]
    top_cubes: int

    def coefficient_count(self) -> int:
        return len(self.functions)


def build_sht_haar(system: CubeSystem) -> SHTHaarSystem:
    """Peeling construction of the Haar functions, one fewer than children.

    Children are enumerated by decreasing mass (ties by descending child id,
    which orients equal-mass binary splits like the classical Haar function);
    E^1 = Q, E^{i+1} = E^i minus the i-th child, and
    h^i = a 1_{child_i} - b 1_{E^{i+1}} with a, b forced by L^2(mu)
    normalization and mean zero.
    """
    cloud = system.cloud
    mu = cloud.mass
    functions = []
    for level in range(system.n_levels - 1):
        for cube in range(len(system.centers[level])):
            kids = system.children(level, cube)
            if kids.size < 2:
                continue  # wait until the cube subdivides
            masses = np.array(
                [mu[system.cube_points(level + 1, k)].sum() for k in kids]
            )
            if np.any(masses <= 0):
                raise DegenerateWeightError("child cube with zero mass")
            order = sorted(range(kids.size), key=lambda i: (-masses[i], -kids[i]))
            remaining = list(system.cube_points(level, cube))
            rem_mask = np.zeros(cloud.n, dtype=bool)
            rem_mask[remaining] = True
            for i, oi in enumerate(order[:-1]):
                child_pts = system.cube_points(level + 1, kids[oi])
                plus = np.zeros(cloud.n, dtype=bool)
                plus[child_pts] = True
                minus = rem_mask & ~plus
                m_plus = float(mu[plus].sum())
                m_minus = float(mu[minus].sum())
                m_all = m_plus + m_minus
                a = math.sqrt(m_minus / (m_all * m_plus))
                b = math.sqrt(m_plus / (m_all * m_minus))
                vals = np.zeros(cloud.n)
                vals[plus] = a
                vals[minus] = -b
                functions.append(SHTHaarFunction(level, cube, i + 1, vals))
                rem_mask = minus
    return SHTHaarSystem(system, functions, top_cubes=len(system.centers[0]))


def sht_expand(f: np.ndarray, basis: SHTHaarSystem):
    """Coefficients against the Haar system plus the per-top-cube means."""
    mu = basis.system.cloud.mass
    f = np.asarray(f, dtype=float)
    coeffs = np.array([float(np.sum(f * h.values * mu)) for h in basis.functions])
    tops = []
    for cube in range(len(basis.system.centers[0])):
        pts = basis.system.cube_points(0, cube)
        tops.append(float(np.sum(f[pts] * mu[pts]) / np.sum(mu[pts])))
    return coeffs, np.array(tops)


def sht_reconstruct(coeffs: np.ndarray, tops: np.ndarray, basis: SHTHaarSystem) -> np.ndarray:
    out = np.zeros(basis.system.cloud.n)
    for c, h in zip(coeffs, basis.functions):
        out += c * h.values
    for cube, mean in enumerate(tops):
        out[basis.system.cube_points(0, cube)] += mean
    return out


def gram_matrix(basis: SHTHaarSystem) -> np.ndarray:
    mu = basis.system.cloud.mass
    H = np.array([h.values for h in basis.functions])
    return H @ (mu[:, None] * H.T)


def sht_projection(f: np.ndarray, basis: SHTHaarSystem, level: int, cube: int) -> np.ndarray:
    """Projection of f onto the mean-zero span over the children of one cube."""
    mu = basis.system.cloud.mass
    out = np.zeros(basis.system.cloud.n)
    for h in basis.functions:
        if h.level == level and h.cube == cube:
            out += float(np.sum(f * h.values * mu)) * h.values
    return out
