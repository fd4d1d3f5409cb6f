"""Step functions on a dyadic mesh and the fast Haar transform.

A mesh is a root interval subdivided to depth J, giving N = 2^J equal cells.
Step functions are value arrays over the cells; every integral below is an
exact cell sum.  Intervals inside the mesh are addressed by (level, pos):
level 0 is the root, level J the cells, pos runs left to right.  The Haar
coefficient tree lives on levels 0..J-1; the root mean is carried separately
because the truncated Haar system spans only mean-zero functions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightError, MeshMismatchError, ResolutionError
from .grid import DyadicInterval, GridParameters, standard_grid


@dataclass(frozen=True)
class Mesh:
    root: DyadicInterval
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("mesh depth must be at least 1")
        self.root.grid.check_generation(self.root.j + self.depth)

    @property
    def grid(self) -> GridParameters:
        return self.root.grid

    @property
    def n_cells(self) -> int:
        return 1 << self.depth

    @property
    def cell_length(self) -> float:
        return self.root.length / self.n_cells

    def level_length(self, level: int) -> float:
        return self.root.length * 2.0 ** (-level)

    def first_index(self, level: int) -> int:
        """Grid index of the leftmost level-`level` descendant of the root."""
        k = self.root.k
        for j in range(self.root.j + 1, self.root.j + level + 1):
            k = 2 * k + self.grid.bit(j)
        return k

    def interval(self, level: int, pos: int) -> DyadicInterval:
        if not 0 <= level <= self.depth:
            raise ResolutionError(f"level {level} outside mesh levels 0..{self.depth}")
        if not 0 <= pos < (1 << level):
            raise ResolutionError(f"position {pos} outside level {level}")
        return self.grid.interval(self.root.j + level, self.first_index(level) + pos)

    def position_of(self, interval: DyadicInterval) -> tuple[int, int]:
        if interval.grid != self.grid:
            raise ResolutionError("interval belongs to a different grid")
        level = interval.j - self.root.j
        if not 0 <= level <= self.depth:
            raise ResolutionError(f"interval generation {interval.j} not resolvable on mesh")
        pos = interval.k - self.first_index(level)
        if not 0 <= pos < (1 << level):
            raise ResolutionError("interval lies outside the mesh root")
        return (level, pos)

    def cell_edges(self) -> np.ndarray:
        """The N+1 cell endpoints, exact integer arithmetic scaled by r last."""
        base = self.root._unscaled_left_numerator()
        step = 1 << (self.grid.j_max - self.root.j - self.depth)
        nums = base + step * np.arange(self.n_cells + 1, dtype=float)
        return self.grid.r * (nums / float(1 << self.grid.j_max))

    def cell_midpoints(self) -> np.ndarray:
        e = self.cell_edges()
        return 0.5 * (e[:-1] + e[1:])

    def cell_slice(self, level: int, pos: int) -> slice:
        width = 1 << (self.depth - level)
        return slice(pos * width, (pos + 1) * width)


@dataclass
class StepFunction:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_cells,):
            raise ValueError(f"expected {self.mesh.n_cells} cell values, got {vals.shape}")
        self.values = vals

    def integral(self) -> float:
        return float(self.values.sum() * self.mesh.cell_length)

    def prefix_integrals(self) -> np.ndarray:
        """P[i] = integral over the first i cells (length N+1)."""
        out = np.zeros(self.mesh.n_cells + 1)
        np.cumsum(self.values * self.mesh.cell_length, out=out[1:])
        return out

    def integrate_range(self, a: float, b: float) -> float:
        """Exact integral of the zero-extended step function over [a, b)."""
        edges = self.mesh.cell_edges()
        pref = self.prefix_integrals()
        return float(_prefix_at(edges, pref, self.values, np.array([b]))[0]
                     - _prefix_at(edges, pref, self.values, np.array([a]))[0])

    def __add__(self, other):
        return StepFunction(self.mesh, self.values + _coerce(self, other))

    def __sub__(self, other):
        return StepFunction(self.mesh, self.values - _coerce(self, other))

    def __mul__(self, other):
        return StepFunction(self.mesh, self.values * _coerce(self, other))

    __rmul__ = __mul__

    def __abs__(self):
        return StepFunction(self.mesh, np.abs(self.values))

    def to_csv(self, path, meta_path=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell_index", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])
        if meta_path is not None:
            meta = {
                "root_left": self.mesh.root.left,
                "root_right": self.mesh.root.right,
                "depth": self.mesh.depth,
            }
            with open(meta_path, "w") as fh:
                json.dump(meta, fh)

    @classmethod
    def from_csv(cls, path, meta_path, grid: GridParameters | None = None) -> "StepFunction":
        """Load a signal; the root is located on `grid` (default: the standard
        grid), using the side file's root_left and length."""
        with open(meta_path) as fh:
            meta = json.load(fh)
        left, right = float(meta["root_left"]), float(meta["root_right"])
        depth = int(meta["depth"])
        length = right - left
        if grid is None:
            j_root = round(-math.log2(length))
            if abs(2.0 ** -j_root - length) > 1e-12 * length:
                raise ValueError("root must be a standard dyadic interval")
            grid = standard_grid(min(j_root, 0) - 1, j_root + depth + 1)
        else:
            j_root = round(math.log2(grid.r / length))
            if abs(grid.generation_length(j_root) - length) > 1e-12 * length:
                raise ValueError("root length does not match a grid generation")
        root = grid.locate(left + 0.25 * length, j_root)
        if abs(root.left - left) > 1e-9 * max(1.0, abs(left)):
            raise ValueError("root_left is not a grid interval endpoint")
        mesh = Mesh(root, depth)
        vals = np.zeros(mesh.n_cells)
        with open(path) as fh:
            for row in csv.DictReader(fh):
                vals[int(row["cell_index"])] = float(row["value"])
        return cls(mesh, vals)


def _coerce(f: StepFunction, other) -> np.ndarray:
    if isinstance(other, StepFunction):
        if other.mesh != f.mesh:
            raise MeshMismatchError("step functions live on different meshes")
        return other.values
    return np.asarray(other, dtype=float)


def _prefix_at(edges, pref, values, xs):
    """Primitive of the zero-extended step function at arbitrary points."""
    xs = np.asarray(xs, dtype=float)
    idx = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, len(values) - 1)
    inside = (xs > edges[0]) & (xs < edges[-1])
    out = np.where(xs >= edges[-1], pref[-1], 0.0)
    out = np.where(inside, pref[idx] + values[idx] * (xs - edges[idx]), out)
    return out


@dataclass
class HaarSpectrum:
    """Root mean plus the Haar coefficient tree, one array per level 0..J-1."""

    mesh: Mesh
    mean: float
    levels: list[np.ndarray]

    def __post_init__(self):
        if len(self.levels) != self.mesh.depth:
            raise ValueError("spectrum must carry one array per coefficient level")
        self.levels = [np.asarray(a, dtype=float) for a in self.levels]

    def coefficient(self, level: int, pos: int) -> float:
        return float(self.levels[level][pos])

    def energy(self) -> float:
        """Sum of squared Haar coefficients (mean term excluded)."""
        return float(sum(float(np.dot(a, a)) for a in self.levels))

    def copy_scaled(self, factors) -> "HaarSpectrum":
        return HaarSpectrum(
            self.mesh, self.mean, [a * f for a, f in zip(self.levels, factors)]
        )


def _resolve(mesh: Mesh, where) -> tuple[int, int]:
    if isinstance(where, DyadicInterval):
        return mesh.position_of(where)
    level, pos = where
    if not (0 <= level <= mesh.depth and 0 <= pos < (1 << level)):
        raise ResolutionError(f"({level},{pos}) not addressable on this mesh")
    return (int(level), int(pos))


def average(f: StepFunction, where) -> float:
    """Lebesgue average of f over a mesh interval."""
    level, pos = _resolve(f.mesh, where)
    return float(f.values[f.mesh.cell_slice(level, pos)].mean())


def inner(f: StepFunction, g: StepFunction) -> float:
    if f.mesh != g.mesh:
        raise MeshMismatchError("inner product needs a common mesh")
    return float(np.dot(f.values, g.values) * f.mesh.cell_length)


def lp_norm(f: StepFunction, p: float, w: StepFunction | None = None) -> float:
    if p < 1:
        raise ValueError("lp_norm needs p >= 1")
    dens = f.mesh.cell_length if w is None else w.values * f.mesh.cell_length
    if p == math.inf:
        return float(np.max(np.abs(f.values)))
    return float(np.sum(np.abs(f.values) ** p * dens) ** (1.0 / p))


def means_pyramid(f: StepFunction) -> list[np.ndarray]:
    """Per-interval averages for levels 0..J; level J is the cell values."""
    out = [f.values.copy()]
    cur = f.values
    for _ in range(f.mesh.depth):
        cur = cur.reshape(-1, 2).mean(axis=1)
        out.append(cur)
    out.reverse()
    return out


def haar_function(mesh: Mesh, where) -> StepFunction:
    """h_I = |I|^{-1/2} (1_{I_right} - 1_{I_left}); I must sit above cell level."""
    level, pos = _resolve(mesh, where)
    if level >= mesh.depth:
        raise ResolutionError("Haar function of a cell is not representable on the mesh")
    vals = np.zeros(mesh.n_cells)
    sl = mesh.cell_slice(level, pos)
    half = (sl.stop - sl.start) // 2
    amp = 1.0 / math.sqrt(mesh.level_length(level))
    vals[sl.start : sl.start + half] = -amp
    vals[sl.start + half : sl.stop] = amp
    return StepFunction(mesh, vals)


def analyze(f: StepFunction) -> HaarSpectrum:
    """O(N) bottom-up pyramid of pairwise sums and differences."""
    mesh = f.mesh
    levels: list[np.ndarray | None] = [None] * mesh.depth
    cur = f.values
    for level in range(mesh.depth - 1, -1, -1):
        pairs = cur.reshape(-1, 2)
        scale = 0.5 * math.sqrt(mesh.level_length(level))
        levels[level] = (pairs[:, 1] - pairs[:, 0]) * scale
        cur = pairs.mean(axis=1)
    return HaarSpectrum(mesh, float(cur[0]), levels)


def synthesize(s: HaarSpectrum) -> StepFunction:
    mesh = s.mesh
    cur = np.array([s.mean])
    for level in range(mesh.depth):
        amp = 1.0 / math.sqrt(mesh.level_length(level))
        cur = np.repeat(cur, 2)
        cur[0::2] -= s.levels[level] * amp
        cur[1::2] += s.levels[level] * amp
    return StepFunction(mesh, cur)


def analyze_direct(f: StepFunction) -> HaarSpectrum:
    """O(N^2) analysis by direct inner products; retained as a test oracle."""
    mesh = f.mesh
    levels = []
    for level in range(mesh.depth):
        levels.append(
            np.array([inner(f, haar_function(mesh, (level, p))) for p in range(1 << level)])
        )
    return HaarSpectrum(mesh, average(f, (0, 0)), levels)


# -- weighted Haar system --------------------------------------------------


def _weight_masses(w: StepFunction, level: int, pos: int):
    sl = w.mesh.cell_slice(level, pos)
    half = (sl.stop - sl.start) // 2
    cl = w.mesh.cell_length
    m_left = float(w.values[sl.start : sl.start + half].sum() * cl)
    m_right = float(w.values[sl.start + half : sl.stop].sum() * cl)
    if m_left <= 0.0 or m_right <= 0.0:
        raise DegenerateWeightError("weighted Haar function needs positive mass on both halves")
    return sl, half, m_left, m_right


def weighted_haar(w: StepFunction, where) -> StepFunction:
    """h^w_I, normalized in L^2(w) and of w-mean zero on I."""
    level, pos = _resolve(w.mesh, where)
    if level >= w.mesh.depth:
        raise ResolutionError("weighted Haar function of a cell is not representable")
    sl, half, m_left, m_right = _weight_masses(w, level, pos)
    m = m_left + m_right
    a = math.sqrt(m_left / (m * m_right))
    b = math.sqrt(m_right / (m * m_left))
    vals = np.zeros(w.mesh.n_cells)
    vals[sl.start : sl.start + half] = -b
    vals[sl.start + half : sl.stop] = a
    return StepFunction(w.mesh, vals)


def weighted_decomposition(w: StepFunction, where) -> tuple[float, float]:
    """Coefficients (alpha, beta) with h_I = alpha h^w_I + beta 1_I/sqrt(|I|).

    Solving the two constant-value equations on the halves of I gives
    alpha = 2/(sqrt(|I|)(a+b)) and beta = (b-a)/(a+b) with a, b the weighted
    Haar amplitudes.  The bounds |alpha| <= sqrt(<w>_I) and
    |beta| <= |Delta_I w|/<w>_I follow.
    """
    level, pos = _resolve(w.mesh, where)
    if level >= w.mesh.depth:
        raise ResolutionError("decomposition below cell level")
    _, _, m_left, m_right = _weight_masses(w, level, pos)
    m = m_left + m_right
    a = math.sqrt(m_left / (m * m_right))
    b = math.sqrt(m_right / (m * m_left))
    length = w.mesh.level_length(level)
    alpha = 2.0 / (math.sqrt(length) * (a + b))
    beta = (b - a) / (a + b)
    return (alpha, beta)
