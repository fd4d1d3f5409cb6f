"""Weights, their characteristics, Carleson sequences, and Bellman lemmas.

Characteristic suprema run over the mesh's own dyadic tree and, optionally,
over intervals of extra user-supplied grids (the default trio being the
1/3-shifted grids), with foreign-interval averages computed exactly from the
step-function prefix integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightError
from .grid import third_grid
from .signal import Mesh, StepFunction, _prefix_at, means_pyramid
from . import operators


class Weight(StepFunction):
    """A strictly positive step function."""

    def __post_init__(self):
        super().__post_init__()
        if np.min(self.values) <= 0.0:
            raise DegenerateWeightError("weight values must be strictly positive")

    def reciprocal(self) -> "Weight":
        return Weight(self.mesh, 1.0 / self.values)

    def dual(self, p: float) -> "Weight":
        """The dual weight w^{-1/(p-1)}."""
        return Weight(self.mesh, self.values ** (-1.0 / (p - 1.0)))


def power_weight(mesh: Mesh, alpha: float, x0: float | None = None) -> Weight:
    """|x - x0|^alpha represented by its exact cell averages (alpha > -1)."""
    if alpha <= -1.0:
        raise DegenerateWeightError("power weight needs alpha > -1 for integrable cells")
    if x0 is None:
        x0 = mesh.root.left
    e = mesh.cell_edges() - x0

    def prim(t):
        return np.sign(t) * np.abs(t) ** (alpha + 1.0) / (alpha + 1.0)

    avg = (prim(e[1:]) - prim(e[:-1])) / np.diff(e)
    return Weight(mesh, avg)


def log_symbol(mesh: Mesh, x0: float | None = None) -> StepFunction:
    """log|x - x0| by exact cell averages; the canonical unbounded BMO symbol."""
    if x0 is None:
        x0 = mesh.root.left
    e = mesh.cell_edges() - x0

    def prim(t):
        out = np.zeros_like(t)
        nz = t != 0.0
        out[nz] = t[nz] * np.log(np.abs(t[nz])) - t[nz]
        return out

    avg = (prim(e[1:]) - prim(e[:-1])) / np.diff(e)
    return StepFunction(mesh, avg)


# -- tree helpers ----------------------------------------------------------


def _tree_max_product(pyr_a, pyr_b, exponent_b=1.0):
    """max over tree intervals of  a_I * b_I^exponent_b, with argmax position."""
    best, arg = -math.inf, (0, 0)
    for level, (a, b) in enumerate(zip(pyr_a, pyr_b)):
        prod = a * b ** exponent_b
        pos = int(np.argmax(prod))
        if prod[pos] > best:
            best, arg = float(prod[pos]), (level, pos)
    return best, arg


def _deltas(pyr, level):
    fine = pyr[level + 1]
    return fine[1::2] - fine[0::2]


def ap_characteristic(w: Weight, p: float, grids=None) -> float:
    return ap_characteristic_report(w, p, grids)["value"]


def ap_characteristic_report(w: Weight, p: float, grids=None) -> dict:
    """sup over intervals of <w>_I <w^{-1/(p-1)}>_I^{p-1}.

    Scans the mesh's own dyadic tree plus any supplied extra grids; pass
    grids="thirds" for the three 1/3-shifted grids.  Extra-grid intervals are
    restricted to those inside the mesh root.
    """
    if p <= 1:
        raise ValueError("A_p characteristic needs p > 1")
    mesh = w.mesh
    sigma = w.dual(p)
    best, arg = _tree_max_product(means_pyramid(w), means_pyramid(sigma), p - 1.0)
    scanned = ["mesh"]
    if grids == "thirds":
        j_cell = mesh.root.j + mesh.depth
        grids = [third_grid(i, mesh.root.j - 1, j_cell + 2) for i in range(3)]
    for gi, g in enumerate(grids or []):
        scanned.append(f"grid{gi}")
        val = _foreign_sup(w, sigma, p, g)
        if val > best:
            best = val
            arg = None
    return {
        "characteristic_name": f"A_{p:g}",
        "value": float(best),
        "argmax_interval": arg,
        "grids_scanned": scanned,
        "mesh_depth": mesh.depth,
    }


def _foreign_sup(w: Weight, sigma: Weight, p: float, g) -> float:
    mesh = w.mesh
    edges = mesh.cell_edges()
    left, right = edges[0], edges[-1]
    pw, ps = w.prefix_integrals(), sigma.prefix_integrals()
    best = -math.inf
    for j in range(g.j_min, g.j_max + 1):
        length = g.generation_length(j)
        if length > right - left:
            continue
        off = g.r * float(g.shift(j))
        k_lo = math.ceil((left - off) / length - 1e-12)
        k_hi = math.floor((right - off) / length + 1e-12) - 1
        if k_hi < k_lo:
            continue
        lefts = off + np.arange(k_lo, k_hi + 1) * length
        rights = lefts + length
        aw = (_prefix_at(edges, pw, w.values, rights) - _prefix_at(edges, pw, w.values, lefts)) / length
        as_ = (_prefix_at(edges, ps, sigma.values, rights) - _prefix_at(edges, ps, sigma.values, lefts)) / length
        val = float(np.max(aw * as_ ** (p - 1.0)))
        best = max(best, val)
    return best


def a_infty_fujii_wilson(w: Weight) -> float:
    """Fujii-Wilson characteristic sup_I (1/w(I)) int_I M^D(w 1_I).

    For x in I the dyadic maximal function of w 1_I is the maximum of <w>_J
    over dyadic J with x in J subset I (larger J only dilute the average), so
    each level is handled with a running maximum down its subtrees.
    """
    mesh = w.mesh
    pyr = means_pyramid(w)
    cl = mesh.cell_length
    best = 1.0
    for level in range(mesh.depth + 1):
        running = pyr[level].copy()
        for lower in range(level + 1, mesh.depth + 1):
            running = np.maximum(np.repeat(running, 2), pyr[lower])
        integrals = running.reshape(1 << level, -1).sum(axis=1) * cl
        masses = pyr[level] * mesh.level_length(level)
        best = max(best, float(np.max(integrals / masses)))
    return best


def a_infty_classical(w: Weight) -> float:
    """Classical (exponential) A_infty characteristic sup_I <w>_I exp(-<log w>_I).

    Optional companion to the Fujii-Wilson characteristic; this is the one the
    sharp constant 8 in the oscillation-sum bound is calibrated against.
    """
    pw = means_pyramid(w)
    pl = means_pyramid(StepFunction(w.mesh, np.log(w.values)))
    return max(float(np.max(a * np.exp(-b))) for a, b in zip(pw, pl))


def rh_q(w: Weight, q: float) -> float:
    """Reverse Holder characteristic sup_I <w^q>_I^{1/q} / <w>_I."""
    if q <= 1:
        raise ValueError("RH_q needs q > 1")
    wq = StepFunction(w.mesh, w.values ** q)
    best, _ = _tree_max_product(
        [a ** (1.0 / q) for a in means_pyramid(wq)],
        [1.0 / a for a in means_pyramid(w)],
    )
    return best


def bmo_dyadic_norm(b: StepFunction) -> float:
    """sup_I (<|b - <b>_I|^2>_I)^{1/2} over the mesh tree."""
    pyr = means_pyramid(b)
    pyr2 = means_pyramid(StepFunction(b.mesh, b.values ** 2))
    best = 0.0
    for m, m2 in zip(pyr, pyr2):
        best = max(best, float(np.max(np.maximum(m2 - m ** 2, 0.0))))
    return math.sqrt(best)


def bmo_weighted_norm(b: StepFunction, mu: Weight) -> float:
    """Weighted oscillation norm sup_I (1/mu(I)) int_I |b - <b>_I|."""
    mesh = b.mesh
    best = 0.0
    for level in range(mesh.depth + 1):
        for pos in range(1 << level):
            sl = mesh.cell_slice(level, pos)
            chunk = b.values[sl]
            osc = float(np.sum(np.abs(chunk - chunk.mean())) * mesh.cell_length)
            mass = float(np.sum(mu.values[sl]) * mesh.cell_length)
            best = max(best, osc / mass)
    return best


# -- Carleson sequences ----------------------------------------------------


@dataclass
class CarlesonSequence:
    """Nonnegative values indexed by mesh tree intervals (levels 0..depth)."""

    mesh: Mesh
    levels: list[np.ndarray]

    def __post_init__(self):
        if len(self.levels) != self.mesh.depth + 1:
            raise ValueError("need one entry array per tree level, cells included")
        self.levels = [np.asarray(a, dtype=float) for a in self.levels]
        if any(np.min(a) < 0 for a in self.levels if a.size):
            raise ValueError("Carleson sequence entries must be nonnegative")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "CarlesonSequence":
        return cls(mesh, [np.zeros(1 << level) for level in range(mesh.depth + 1)])

    @classmethod
    def from_entries(cls, mesh: Mesh, entries: dict) -> "CarlesonSequence":
        seq = cls.zeros(mesh)
        for (level, pos), lam in entries.items():
            seq.levels[level][pos] = lam
        return seq

    def subtree_sums(self) -> list[np.ndarray]:
        sums = [None] * (self.mesh.depth + 1)
        sums[self.mesh.depth] = self.levels[self.mesh.depth].copy()
        for level in range(self.mesh.depth - 1, -1, -1):
            sums[level] = self.levels[level] + sums[level + 1].reshape(-1, 2).sum(axis=1)
        return sums

    def scaled(self, factor_levels) -> "CarlesonSequence":
        return CarlesonSequence(
            self.mesh, [a * f for a, f in zip(self.levels, factor_levels)]
        )


def carleson_intensity(seq: CarlesonSequence, v: Weight | None = None) -> float:
    """sup_J sum_{I subset J} lambda_I / v(J); v omitted means Lebesgue measure."""
    mesh = seq.mesh
    sums = seq.subtree_sums()
    if v is None:
        masses = [np.full(1 << level, mesh.level_length(level)) for level in range(mesh.depth + 1)]
    else:
        masses = [m * mesh.level_length(level) for level, m in enumerate(means_pyramid(v))]
    return max(float(np.max(s / m)) for s, m in zip(sums, masses))


def fkp_sequence(w: Weight) -> CarlesonSequence:
    """{ |Delta_I w / <w>_I|^2 |I| } on the coefficient levels."""
    mesh = w.mesh
    pyr = means_pyramid(w)
    seq = CarlesonSequence.zeros(mesh)
    for level in range(mesh.depth):
        seq.levels[level] = (_deltas(pyr, level) / pyr[level]) ** 2 * mesh.level_length(level)
    return seq


def alpha_sequence(w: Weight, alpha: float) -> CarlesonSequence:
    """Beznosova's alpha-lemma sequence mu_I for an A_2 weight.

    For alpha >= 1/2 the intensity bound comes from factoring out
    (<w>_I <w^{-1}>_I)^{alpha - 1/4} <= [w]^{alpha - 1/4} and the alpha = 1/4
    case; the sequence itself is the same expression for every alpha > 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    mesh = w.mesh
    winv = w.reciprocal()
    pw, pi = means_pyramid(w), means_pyramid(winv)
    seq = CarlesonSequence.zeros(mesh)
    for level in range(mesh.depth):
        pw0, pi0 = pw[level], pi[level]
        ratio2 = (_deltas(pw, level) / pw0) ** 2 + (_deltas(pi, level) / pi0) ** 2
        seq.levels[level] = (pw0 * pi0) ** alpha * mesh.level_length(level) * ratio2
    return seq


def ntv_alpha_sequence(u_inv: Weight, v: Weight) -> CarlesonSequence:
    """{ (|Delta_I v|/<v>_I) (|Delta_I u^{-1}|/<u^{-1}>_I) |I| }."""
    mesh = v.mesh
    pv, pu = means_pyramid(v), means_pyramid(u_inv)
    seq = CarlesonSequence.zeros(mesh)
    for level in range(mesh.depth):
        seq.levels[level] = (
            np.abs(_deltas(pv, level)) / pv[level]
            * np.abs(_deltas(pu, level)) / pu[level]
            * mesh.level_length(level)
        )
    return seq


def little_lemma_map(seq: CarlesonSequence, w: Weight) -> CarlesonSequence:
    """{ lambda_I / <w^{-1}>_I }: w-Carleson with intensity at most 4x the unit one."""
    pyr = means_pyramid(w.reciprocal())
    return seq.scaled([1.0 / m for m in pyr])


def weighted_carleson_check(
    seq: CarlesonSequence, v: Weight | None, F: StepFunction
) -> tuple[float, float]:
    """Both sides of the weighted Carleson embedding for a nonnegative F.

    lhs = sum_I lambda_I inf_I F, rhs = intensity * int F v; the lemma says
    lhs <= rhs.
    """
    if np.min(F.values) < 0:
        raise ValueError("F must be nonnegative")
    mesh = seq.mesh
    mins = [F.values.copy()]
    cur = F.values
    for _ in range(mesh.depth):
        cur = cur.reshape(-1, 2).min(axis=1)
        mins.append(cur)
    mins.reverse()
    lhs = sum(float(np.dot(lam, mn)) for lam, mn in zip(seq.levels, mins))
    A = carleson_intensity(seq, v)
    dens = np.ones(mesh.n_cells) if v is None else v.values
    rhs = A * float(np.sum(F.values * dens) * mesh.cell_length)
    return (lhs, rhs)


# -- Bellman function lemmas ------------------------------------------------

BELLMAN_DOMAIN_DOC = "{(u,v,l): u,v>0, uv>=1, 0<=l<=1}"


def in_bellman_domain(u: float, v: float, l: float) -> bool:
    return u > 0 and v > 0 and u * v >= 1.0 and 0.0 <= l <= 1.0


def bellman_B(u: float, v: float, l: float) -> float:
    if not in_bellman_domain(u, v, l):
        raise ValueError(f"({u},{v},{l}) outside the Bellman domain {BELLMAN_DOMAIN_DOC}")
    return u - 1.0 / (v * (1.0 + l))


def _bellman_gradient(u, v, l):
    return np.array([1.0, 1.0 / (v ** 2 * (1.0 + l)), 1.0 / (v * (1.0 + l) ** 2)])


def _bellman_hessian(u, v, l):
    h = np.zeros((3, 3))
    h[1, 1] = -2.0 / (v ** 3 * (1.0 + l))
    h[1, 2] = h[2, 1] = -1.0 / (v ** 2 * (1.0 + l) ** 2)
    h[2, 2] = -2.0 / (v * (1.0 + l) ** 3)
    return h


def _sample_domain(rng, n):
    u = np.exp(rng.uniform(-2.5, 2.5, n))
    s = np.exp(rng.uniform(0.0, 5.0, n))  # uv = s >= 1
    v = s / u
    l = rng.uniform(0.0, 1.0, n)
    return u, v, l


def bellman_verify(sample_count: int = 10 ** 4, seed: int = 0, fd_step: float = 1e-5) -> dict:
    """Sample the Bellman function lemma conditions; returns violation counts.

    Checks, on random domain points and random admissible midpoint triples:
    the range 0 <= B <= u, the derivative bound dB/dl >= 1/(4v), negative
    semidefiniteness of the Hessian (closed form, with a finite-difference
    cross-check), and the dyadic convexity inequality with gain alpha/(4v).
    """
    rng = np.random.default_rng(seed)
    tol = 1e-12
    report = {
        "samples": sample_count,
        "range_violations": 0,
        "derivative_violations": 0,
        "hessian_violations": 0,
        "fd_hessian_max_error": 0.0,
        "convexity_violations": 0,
        "convexity_checked": 0,
    }
    u, v, l = _sample_domain(rng, sample_count)
    for ui, vi, li in zip(u, v, l):
        B = bellman_B(ui, vi, li)
        if not (-tol <= B <= ui + tol):
            report["range_violations"] += 1
        if _bellman_gradient(ui, vi, li)[2] < 1.0 / (4.0 * vi) - tol:
            report["derivative_violations"] += 1
        H = _bellman_hessian(ui, vi, li)
        if np.max(np.linalg.eigvalsh(H)) > tol * max(1.0, np.abs(H).max()):
            report["hessian_violations"] += 1
    # finite-difference guard on the Hessian algebra at a subsample
    for ui, vi, li in zip(u[:50], v[:50], l[:50]):
        if not (fd_step < li < 1 - fd_step and vi > 10 * fd_step):
            continue
        H = _bellman_hessian(ui, vi, li)
        fd = np.zeros((3, 3))
        x0 = np.array([ui, vi, li])
        for i in range(3):
            for j in range(3):
                xpp = x0.copy(); xpp[i] += fd_step; xpp[j] += fd_step
                xpm = x0.copy(); xpm[i] += fd_step; xpm[j] -= fd_step
                xmp = x0.copy(); xmp[i] -= fd_step; xmp[j] += fd_step
                xmm = x0.copy(); xmm[i] -= fd_step; xmm[j] -= fd_step
                vals = [u0 - 1.0 / (v0 * (1.0 + l0)) for u0, v0, l0 in (xpp, xpm, xmp, xmm)]
                fd[i, j] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * fd_step ** 2)
        err = float(np.max(np.abs(fd - H)) / max(1.0, np.abs(H).max()))
        report["fd_hessian_max_error"] = max(report["fd_hessian_max_error"], err)
    # dyadic convexity on admissible triples x - (x+ + x-)/2 = (0,0,alpha)
    up, vp, lp = _sample_domain(rng, sample_count)
    um, vm, lm = _sample_domain(rng, sample_count)
    for i in range(sample_count):
        lmid = 0.5 * (lp[i] + lm[i])
        alpha = rng.uniform(0.0, 1.0 - lmid)
        x = (0.5 * (up[i] + um[i]), 0.5 * (vp[i] + vm[i]), lmid + alpha)
        if not in_bellman_domain(*x):
            continue
        gain = bellman_B(*x) - 0.5 * (
            bellman_B(up[i], vp[i], lp[i]) + bellman_B(um[i], vm[i], lm[i])
        )
        report["convexity_checked"] += 1
        if gain < alpha / (4.0 * x[1]) - tol:
            report["convexity_violations"] += 1
    report["ok"] = (
        report["range_violations"] == 0
        and report["derivative_violations"] == 0
        and report["hessian_violations"] == 0
        and report["convexity_violations"] == 0
        and report["fd_hessian_max_error"] < 1e-4
    )
    return report


# -- two-weight NTV report ---------------------------------------------------


def ntv_conditions(u: Weight, v: Weight, norm_tol: float = 1e-8, norm_iters: int = 10 ** 4) -> dict:
    """Joint A2, the two Carleson testing conditions, and the positive operator norm.

    Reports  [u,v]_A2 = sup <u^{-1}>_I <v>_I,  the u^{-1}-intensity of
    {|I| |Delta_I u^{-1}|^2 <v>_I},  the v-intensity of
    {|I| |Delta_I v|^2 <u^{-1}>_I},  and a power-iteration estimate of
    ||T_0||_{L^2(u) -> L^2(v)}  for  T_0 f = sum (alpha_I/|I|) <f>_I 1_I.
    """
    if u.mesh != v.mesh:
        raise ValueError("u and v must share a mesh")
    mesh = u.mesh
    u_inv = u.reciprocal()
    pu, pv = means_pyramid(u_inv), means_pyramid(v)
    joint, _ = _tree_max_product(pu, pv)
    seq_ii = CarlesonSequence.zeros(mesh)
    seq_iii = CarlesonSequence.zeros(mesh)
    for level in range(mesh.depth):
        ll = mesh.level_length(level)
        seq_ii.levels[level] = ll * _deltas(pu, level) ** 2 * pv[level]
        seq_iii.levels[level] = ll * _deltas(pv, level) ** 2 * pu[level]
    alpha_seq = ntv_alpha_sequence(u_inv, v)
    t0 = operators.positive_dyadic_operator(alpha_seq)
    norm = operators.operator_norm_two_weight(
        t0, u, v, tol=norm_tol, iters=norm_iters
    )
    return {
        "joint_a2": joint,
        "carleson_u_inv_intensity": carleson_intensity(seq_ii, u_inv),
        "carleson_v_intensity": carleson_intensity(seq_iii, v),
        "alpha_unit_intensity": carleson_intensity(alpha_seq),
        "t0_norm": norm,
        "mesh_depth": mesh.depth,
    }
