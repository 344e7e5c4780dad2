"""Analysis of the pair-sum map (k1, k2) -> k1 + k2 on a convex curve.

The map folds the torus of ordered curve pairs onto an annular region of
the plane; its Jacobian in arc-length coordinates is |sin theta| with
theta the angle between the normals, and it vanishes exactly on the
diagonal and on the antipodal graph.  This module provides:

* the Jacobian and a batched preimage counter (coarse grid scan of the
  2-d residual, bucket lookup, Newton refinement),
* an area-formula cross check (quadrature of |J| against a Monte Carlo
  estimate of the preimage-count integral),
* volume-measure estimates over separated antipodal windows, and
* counting of separated point pairs mapped into a rectangle, with the
  matching volume bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .curves import Curve, TWO_PI
from .errors import (
    DegenerateRegionError,
    EmptyWindowError,
    EpsilonTooLargeError,
)

DEGENERACY_THRESHOLD = 1e-6    # |sin theta| below this marks an antipodal pair
BALL_VOLUME_CONSTANT = np.pi / 4.0   # area of B_{r/2} over r^2 on the flat product


# ----------------------------------------------------------------------
# Jacobian

def jacobian_sin_theta(curve: Curve, phi1, phi2):
    """|sin| of the angle between the normals at phi1 and phi2.

    Equals the area-scaling factor of the pair-sum map in arc-length
    coordinates; symmetric in its arguments and zero iff the points are
    equal or antipodal.
    """
    n1 = curve.normal(phi1)
    n2 = curve.normal(phi2)
    return np.abs(n1[..., 0] * n2[..., 1] - n1[..., 1] * n2[..., 0])


# ----------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class PreimageResult:
    """Solutions of position(phi1) + position(phi2) = q."""

    q: tuple
    tol: float
    solutions: tuple          # ordered (phi1, phi2) pairs
    sin_thetas: tuple
    degenerate: bool          # some solution is within the antipodal band
    infinite: bool            # whole antipodal graph maps to q
    n_warnings: int

    @property
    def count(self) -> int:
        return len(self.solutions)

    @property
    def min_sin_theta(self) -> float:
        return min(self.sin_thetas) if self.sin_thetas else float("nan")


@dataclass(frozen=True)
class RegionRect:
    """Rectangle with one side pair parallel to a reference normal axis."""

    center: tuple
    axis: tuple               # unit direction; extent L1 runs along it
    L1: float
    L2: float
    eps: float = 0.0

    def __post_init__(self):
        if self.L1 <= 0.0 or self.L2 <= 0.0:
            raise ValueError("rectangle extents must be positive")
        a = np.asarray(self.axis, dtype=float)
        norm = float(np.hypot(a[0], a[1]))
        if abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "axis", tuple(a / norm))

    @property
    def perp(self) -> np.ndarray:
        ax = np.asarray(self.axis)
        return np.array([-ax[1], ax[0]])

    @property
    def area(self) -> float:
        return self.L1 * self.L2

    def contains(self, points) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        du = np.abs(d @ np.asarray(self.axis))
        dv = np.abs(d @ self.perp)
        return (du <= 0.5 * self.L1) & (dv <= 0.5 * self.L2)

    def contains_inflated(self, points, eps: float) -> np.ndarray:
        """Membership in the eps-neighborhood (Euclidean distance to the rect)."""
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        du = np.maximum(np.abs(d @ np.asarray(self.axis)) - 0.5 * self.L1, 0.0)
        dv = np.maximum(np.abs(d @ self.perp) - 0.5 * self.L2, 0.0)
        return du * du + dv * dv <= eps * eps


@dataclass(frozen=True)
class SeparatedSet:
    """Curve points with pairwise arc distance at least eps."""

    phis: tuple
    eps: float
    arclens: tuple

    @property
    def size(self) -> int:
        return len(self.phis)


def separated_set(curve: Curve, phis, eps: float) -> SeparatedSet:
    """Validate pairwise arc separation (exhaustively) and build the set."""
    phis = np.sort(np.mod(np.asarray(phis, dtype=float), TWO_PI))
    s = np.asarray(curve.arclen(phis))
    d = curve.arc_distance(s[:, None], s[None, :])
    np.fill_diagonal(d, np.inf)
    if float(np.min(d)) < eps * (1.0 - 1e-12):
        i, k = np.unravel_index(int(np.argmin(d)), d.shape)
        raise ValueError(
            f"points {i} and {k} are {d[i, k]:.6g} apart, below eps = {eps:.6g}")
    return SeparatedSet(tuple(map(float, phis)), float(eps), tuple(map(float, s)))


def equispaced_separated_set(curve: Curve, count: int) -> SeparatedSet:
    """count points uniform in arc length; separation is length/count."""
    s = curve.length * np.arange(count) / count
    phis = curve.phi_at_arclen(s)
    return separated_set(curve, phis, curve.length / count)


@dataclass(frozen=True)
class AntipodalWindow:
    """Arc window around a reference point and its antipode.

    Pairs live within omega2 of the reference orbit while keeping
    arc distance at least omega1 from each other's antipodal orbit.
    """

    p_phi: float
    omega1: float
    omega2: float

    def __post_init__(self):
        if not (0.0 < self.omega1 < 0.5 * self.omega2):
            raise ValueError("need 0 < omega1 < omega2 / 2")


# ----------------------------------------------------------------------
# batched preimage solver

class _SumMapSolver:
    """Grid-scan + Newton preimage counter for the pair-sum map.

    The parameter domain (full torus or a rectangle E) is cut into cells;
    each cell's image bounding box (padded for curvature bulge) is hashed
    into a uniform bucket grid over the image plane.  A query point pulls
    the cells whose boxes contain it and polishes each candidate with a
    capped 2-d Newton iteration.
    """

    def __init__(self, curve: Curve, grid_n: int = 720, domain=None):
        self.curve = curve
        if domain is None:
            self.torus = True
            bounds = ((0.0, TWO_PI), (0.0, TWO_PI))
            n1 = n2 = grid_n
        else:
            self.torus = False
            bounds = tuple((float(a), float(b)) for a, b in domain)
            base = TWO_PI / grid_n
            n1 = int(np.clip(np.ceil((bounds[0][1] - bounds[0][0]) / base), 64, 2048))
            n2 = int(np.clip(np.ceil((bounds[1][1] - bounds[1][0]) / base), 64, 2048))
        self.bounds = bounds
        self.n1, self.n2 = n1, n2

        nodes1 = np.linspace(bounds[0][0], bounds[0][1], n1 + 1)
        nodes2 = np.linspace(bounds[1][0], bounds[1][1], n2 + 1)
        p1 = curve.position(nodes1)
        p2 = curve.position(nodes2)
        self.h1 = (bounds[0][1] - bounds[0][0]) / n1
        self.h2 = (bounds[1][1] - bounds[1][0]) / n2
        self.cell_mid1 = 0.5 * (nodes1[:-1] + nodes1[1:])
        self.cell_mid2 = 0.5 * (nodes2[:-1] + nodes2[1:])

        acc = np.max(np.abs(curve.acceleration(
            np.linspace(0.0, TWO_PI, 1024, endpoint=False))))
        pad = 0.25 * acc * max(self.h1, self.h2) ** 2   # curvature bulge bound

        cmin1 = np.minimum(p1[:-1], p1[1:])
        cmax1 = np.maximum(p1[:-1], p1[1:])
        cmin2 = np.minimum(p2[:-1], p2[1:])
        cmax2 = np.maximum(p2[:-1], p2[1:])

        self.bminx = (cmin1[:, None, 0] + cmin2[None, :, 0] - pad).ravel()
        self.bmaxx = (cmax1[:, None, 0] + cmax2[None, :, 0] + pad).ravel()
        self.bminy = (cmin1[:, None, 1] + cmin2[None, :, 1] - pad).ravel()
        self.bmaxy = (cmax1[:, None, 1] + cmax2[None, :, 1] + pad).ravel()

        wx = float(np.max(self.bmaxx - self.bminx)) * 1.000001
        wy = float(np.max(self.bmaxy - self.bminy)) * 1.000001
        self.x0 = float(np.min(self.bminx))
        self.y0 = float(np.min(self.bminy))
        self.wx, self.wy = wx, wy
        self.nbx = int((np.max(self.bmaxx) - self.x0) // wx) + 1
        self.nby = int((np.max(self.bmaxy) - self.y0) // wy) + 1

        ix0 = ((self.bminx - self.x0) // wx).astype(np.int64)
        ix1 = ((self.bmaxx - self.x0) // wx).astype(np.int64)
        iy0 = ((self.bminy - self.y0) // wy).astype(np.int64)
        iy1 = ((self.bmaxy - self.y0) // wy).astype(np.int64)

        nx = ix1 - ix0 + 1
        ny = iy1 - iy0 + 1
        counts = nx * ny
        offsets = np.concatenate([[0], np.cumsum(counts)])
        total = int(offsets[-1])
        rep = np.repeat(np.arange(counts.size), counts)
        kk = np.arange(total) - np.repeat(offsets[:-1], counts)
        dx = kk % nx[rep]
        dy = kk // nx[rep]
        keys = (ix0[rep] + dx) * self.nby + (iy0[rep] + dy)

        order = np.argsort(keys, kind="stable")
        self._keys_sorted = keys[order]
        self._cells_sorted = rep[order].astype(np.int64)

        # curvature and speed scale for the Newton step cap
        self._step_cap = 3.0 * max(self.h1, self.h2)

    # -- candidate lookup ------------------------------------------------

    def _candidates(self, q):
        qx, qy = q[:, 0], q[:, 1]
        ix = ((qx - self.x0) // self.wx).astype(np.int64)
        iy = ((qy - self.y0) // self.wy).astype(np.int64)
        ok = (ix >= 0) & (ix < self.nbx) & (iy >= 0) & (iy < self.nby)
        keys = np.where(ok, ix * self.nby + iy, -1)
        left = np.searchsorted(self._keys_sorted, keys, side="left")
        right = np.searchsorted(self._keys_sorted, keys, side="right")
        cnt = np.where(ok, right - left, 0)
        qidx = np.repeat(np.arange(q.shape[0]), cnt)
        if qidx.size == 0:
            return qidx, qidx.astype(np.int64)
        starts = np.concatenate([[0], np.cumsum(cnt)])[:-1]
        pos = np.arange(qidx.size) - np.repeat(starts, cnt) + np.repeat(left, cnt)
        cells = self._cells_sorted[pos]
        keep = ((self.bminx[cells] <= qx[qidx]) & (qx[qidx] <= self.bmaxx[cells])
                & (self.bminy[cells] <= qy[qidx]) & (qy[qidx] <= self.bmaxy[cells]))
        return qidx[keep], cells[keep]

    # -- Newton ----------------------------------------------------------

    def _newton(self, x1, x2, q, atol):
        curve = self.curve
        x1 = x1.copy()
        x2 = x2.copy()
        bad = np.zeros(x1.shape, dtype=bool)

        def step(capped):
            nonlocal x1, x2, bad
            f = curve.position(x1) + curve.position(x2) - q
            v1 = curve.velocity(x1)
            v2 = curve.velocity(x2)
            det = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
            sing = np.abs(det) < 1e-13
            bad |= sing
            det = np.where(sing, 1.0, det)
            d1 = (-f[:, 0] * v2[:, 1] + f[:, 1] * v2[:, 0]) / det
            d2 = (-v1[:, 0] * f[:, 1] + v1[:, 1] * f[:, 0]) / det
            if capped:
                d1 = np.clip(d1, -self._step_cap, self._step_cap)
                d2 = np.clip(d2, -self._step_cap, self._step_cap)
            x1 = np.where(bad, x1, x1 + d1)
            x2 = np.where(bad, x2, x2 + d2)
            return f

        # capped phase keeps iterates near their cell
        for _ in range(15):
            f = step(capped=True)
            if np.max(np.abs(f)) <= 0.25 * atol:
                break
        # unconditional free phase collapses valley crawlers onto true
        # roots, so near-fold duplicates merge in the dedup pass
        for _ in range(4):
            step(capped=False)
        f = curve.position(x1) + curve.position(x2) - q
        resid = np.hypot(f[:, 0], f[:, 1])
        converged = (resid <= atol) & ~bad & np.isfinite(resid)
        return x1, x2, converged, bad

    # -- public counting -------------------------------------------------

    def solve_batch(self, q, tol):
        """Roots for every query row; returns per-root and per-query data.

        Output: (qidx, root_phi1, root_phi2, sin_theta, n_warnings) with
        roots deduplicated per query at radius 10 * tol in parameter space.
        """
        q = np.asarray(q, dtype=float).reshape(-1, 2)
        atol = min(tol, 1e-8)
        qidx, cells = self._candidates(q)
        if qidx.size == 0:
            z = np.zeros(0)
            return qidx, z, z, z, 0

        i1 = cells // self.n2
        i2 = cells % self.n2
        x1 = self.cell_mid1[i1]
        x2 = self.cell_mid2[i2]
        qq = q[qidx]
        r1, r2, conv, bad = self._newton(x1, x2, qq, atol)
        n_warn = int(np.count_nonzero(bad))

        # near the fold two roots can share a cell: reseed from the corners
        sin_c = jacobian_sin_theta(self.curve, r1, r2)
        close = conv & (sin_c < 0.05)
        if np.any(close):
            sel = np.nonzero(close)[0]
            offs = 0.49 * np.array([(self.h1, self.h2), (-self.h1, self.h2),
                                    (self.h1, -self.h2), (-self.h1, -self.h2)])
            extra_q = np.repeat(qidx[sel], 4)
            ex1 = (x1[sel][:, None] + offs[None, :, 0]).ravel()
            ex2 = (x2[sel][:, None] + offs[None, :, 1]).ravel()
            er1, er2, econv, ebad = self._newton(ex1, ex2, q[extra_q], atol)
            qidx = np.concatenate([qidx[conv], extra_q[econv]])
            r1 = np.concatenate([r1[conv], er1[econv]])
            r2 = np.concatenate([r2[conv], er2[econv]])
        else:
            qidx, r1, r2 = qidx[conv], r1[conv], r2[conv]

        if self.torus:
            r1 = np.mod(r1, TWO_PI)
            r2 = np.mod(r2, TWO_PI)
        else:
            (a1, b1), (a2, b2) = self.bounds
            inside = ((r1 >= a1 - 1e-12) & (r1 <= b1 + 1e-12)
                      & (r2 >= a2 - 1e-12) & (r2 <= b2 + 1e-12))
            qidx, r1, r2 = qidx[inside], r1[inside], r2[inside]

        if qidx.size == 0:
            z = np.zeros(0)
            return qidx, z, z, z, n_warn

        # dedup: sort by (query, phi1) and drop rows close to their predecessor
        order = np.lexsort((r2, r1, qidx))
        qidx, r1, r2 = qidx[order], r1[order], r2[order]
        thr = 10.0 * tol
        same_q = np.diff(qidx) == 0
        d1 = np.abs(np.diff(r1))
        d2 = np.abs(np.diff(r2))
        if self.torus:
            d1 = np.minimum(d1, TWO_PI - d1)
            d2 = np.minimum(d2, TWO_PI - d2)
        dup = np.concatenate([[False], same_q & (d1 <= thr) & (d2 <= thr)])
        keep = ~dup
        qidx, r1, r2 = qidx[keep], r1[keep], r2[keep]
        sin_t = jacobian_sin_theta(self.curve, r1, r2)
        return qidx, r1, r2, sin_t, n_warn

    def count_batch(self, q, tol):
        """Per-query root count, minimum |sin theta| and degeneracy flag."""
        q = np.asarray(q, dtype=float).reshape(-1, 2)
        m = q.shape[0]
        qidx, _, _, sin_t, n_warn = self.solve_batch(q, tol)
        counts = np.bincount(qidx.astype(np.int64), minlength=m).astype(np.int64)
        min_sin = np.where(counts > 0, np.inf, np.nan)
        if qidx.size:
            np.minimum.at(min_sin, qidx.astype(np.int64), sin_t)
        degenerate = (counts > 0) & (min_sin < DEGENERACY_THRESHOLD)
        return counts, min_sin, degenerate, n_warn


def _solver_for(curve: Curve, grid_n: int) -> _SumMapSolver:
    solver = curve._preimage_solvers.get(grid_n)
    if solver is None:
        solver = _SumMapSolver(curve, grid_n=grid_n)
        curve._preimage_solvers[grid_n] = solver
    return solver


def preimage_count(curve: Curve, q, tol: float = 1e-9,
                   grid_n: int = 720) -> PreimageResult:
    """All ordered pairs summing to q, by grid scan plus Newton polish.

    For a centrally symmetric curve and |q| within tolerance of zero the
    whole antipodal graph solves the equation, reported by the infinite
    flag.  Solutions closer than 10 * tol in parameter space are merged.
    """
    if not (1e-10 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-10, 1e-4]")
    q = np.asarray(q, dtype=float)
    atol = min(tol, 1e-8)
    if curve.centrally_symmetric and float(np.hypot(q[0], q[1])) <= atol:
        return PreimageResult(q=tuple(q), tol=tol, solutions=(), sin_thetas=(),
                              degenerate=True, infinite=True, n_warnings=0)
    solver = _solver_for(curve, grid_n)
    qidx, r1, r2, sin_t, n_warn = solver.solve_batch(q.reshape(1, 2), tol)
    sols = tuple((float(a), float(b)) for a, b in zip(r1, r2))
    sins = tuple(float(x) for x in sin_t)
    degenerate = any(x < DEGENERACY_THRESHOLD for x in sins)
    return PreimageResult(q=tuple(q), tol=tol, solutions=sols, sin_thetas=sins,
                          degenerate=degenerate, infinite=False,
                          n_warnings=n_warn)


def preimage_count_batch(curve: Curve, q, tol: float = 1e-9, grid_n: int = 720,
                         chunk: int = 200_000):
    """Vectorized count_batch over many query points (chunked)."""
    solver = _solver_for(curve, grid_n)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    counts = np.zeros(q.shape[0], dtype=np.int64)
    min_sin = np.full(q.shape[0], np.nan)
    degenerate = np.zeros(q.shape[0], dtype=bool)
    n_warn = 0
    for lo in range(0, q.shape[0], chunk):
        hi = min(lo + chunk, q.shape[0])
        c, ms, dg, w = solver.count_batch(q[lo:hi], tol)
        counts[lo:hi] = c
        min_sin[lo:hi] = ms
        degenerate[lo:hi] = dg
        n_warn += w
    return counts, min_sin, degenerate, n_warn


# ----------------------------------------------------------------------
# area formula

@dataclass(frozen=True)
class AreaFormulaResult:
    lhs: float
    rhs: float
    rel_err: float
    mc_stderr: float
    box_area: float
    samples: int


def area_formula_check(curve: Curve, E, samples: int = 1_000_000,
                       seed: int = 0, quad_n: int = 512,
                       tol: float = 1e-9) -> AreaFormulaResult:
    """Quadrature of |J| over E against Monte Carlo of the count integral.

    E is a parameter rectangle ((phi1_lo, phi1_hi), (phi2_lo, phi2_hi)).
    The left side integrates |sin theta| in arc-length measure; the right
    side samples image points uniformly over a bounding box of the image
    of E and averages the number of preimages inside E.
    """
    (a1, b1), (a2, b2) = ((float(a), float(b)) for a, b in E)
    if b1 <= a1 or b2 <= a2:
        if b1 == a1 or b2 == a2:
            return AreaFormulaResult(0.0, 0.0, 0.0, 0.0, 0.0, 0)
        raise ValueError("parameter rectangle must have nonnegative extents")
    if samples < 100_000:
        raise ValueError("need at least 1e5 samples")

    n = quad_n + (quad_n % 2 == 0)   # odd node count for Simpson
    g1 = np.linspace(a1, b1, n)
    g2 = np.linspace(a2, b2, n)
    sin_t = jacobian_sin_theta(curve, g1[:, None], g2[None, :])
    if float(np.max(sin_t)) < 1e-3:
        raise DegenerateRegionError(
            "integrand below 1e-3 everywhere; region hugs the antipodal graph")
    f = sin_t * curve.speed(g1)[:, None] * curve.speed(g2)[None, :]
    lhs = float(simpson(simpson(f, x=g2, axis=1), x=g1))

    p1 = curve.position(g1)
    p2 = curve.position(g2)
    sums_x = p1[:, None, 0] + p2[None, :, 0]
    sums_y = p1[:, None, 1] + p2[None, :, 1]
    inflate = 3.0 * float(np.max(curve.speed(g1))) * max(b1 - a1, b2 - a2) / n
    box = (float(sums_x.min()) - inflate, float(sums_x.max()) + inflate,
           float(sums_y.min()) - inflate, float(sums_y.max()) + inflate)
    box_area = (box[1] - box[0]) * (box[3] - box[2])

    solver = _SumMapSolver(curve, grid_n=720, domain=((a1, b1), (a2, b2)))
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 200_000
    while done < samples:
        m = min(chunk, samples - done)
        y = np.column_stack([rng.uniform(box[0], box[1], m),
                             rng.uniform(box[2], box[3], m)])
        counts = solver.count_batch(y, tol)[0]
        total += float(np.sum(counts))
        total_sq += float(np.sum(counts.astype(float) ** 2))
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    rhs = box_area * mean
    mc_stderr = box_area * np.sqrt(var / samples)
    rel = abs(lhs - rhs) / lhs if lhs > 0 else 0.0
    return AreaFormulaResult(lhs=lhs, rhs=rhs, rel_err=rel,
                             mc_stderr=float(mc_stderr),
                             box_area=box_area, samples=samples)


# ----------------------------------------------------------------------
# measure of separated windows

@dataclass(frozen=True)
class MeasureRatioResult:
    ratio: float
    stderr: float
    mu: float
    hits: int
    samples: int
    window_measure: float


def _window_intervals(curve: Curve, window: AntipodalWindow):
    """Disjoint arc intervals covering the omega2 window of p and its antipode."""
    total = curve.length
    s_p = float(curve.arclen(window.p_phi))
    s_ext, a_ext = curve._antipodal_arclen_table()

    def a_lift(s):
        k, rem = divmod(s, total)
        return float(np.interp(rem, s_ext, a_ext)) + k * total

    raw = [(s_p - window.omega2, s_p + window.omega2),
           (a_lift(s_p - window.omega2), a_lift(s_p + window.omega2))]
    segs = []
    for lo, hi in raw:
        ln = min(hi - lo, total)
        lo_m = lo % total
        if lo_m + ln <= total:
            segs.append((lo_m, ln))
        else:
            segs.append((lo_m, total - lo_m))
            segs.append((0.0, lo_m + ln - total))
    segs.sort()
    merged = []
    for lo, ln in segs:
        if merged and lo <= merged[-1][0] + merged[-1][1] + 1e-12:
            prev_lo, prev_ln = merged[-1]
            merged[-1] = (prev_lo, max(prev_ln, lo + ln - prev_lo))
        else:
            merged.append((lo, ln))
    if len(merged) > 1:
        lo0, ln0 = merged[0]
        lo1, ln1 = merged[-1]
        if lo1 + ln1 >= total + lo0 - 1e-12:   # last wraps onto first
            new_len = min(max(ln1, total - lo1 + lo0 + ln0), total)
            merged = merged[1:-1] + [(lo1, new_len)]
    return merged


def measure_ratio(curve: Curve, window: AntipodalWindow, A: RegionRect,
                  samples: int = 1_000_000, seed: int = 0) -> MeasureRatioResult:
    """Monte Carlo estimate of mu(preimage of A within the window) / m(A).

    Pairs are sampled uniformly (in arc-length measure) from the window
    arcs; the ratio and its standard error come from the hit indicator.
    """
    if samples < 100_000:
        raise ValueError("need at least 1e5 samples")
    segs = _window_intervals(curve, window)
    lens = np.array([ln for _, ln in segs])
    los = np.array([lo for lo, _ in segs])
    d_measure = float(np.sum(lens))
    cum = np.concatenate([[0.0], np.cumsum(lens)])

    rng = np.random.default_rng(seed)

    def draw(m):
        u = rng.uniform(0.0, d_measure, m)
        idx = np.searchsorted(cum, u, side="right") - 1
        idx = np.clip(idx, 0, len(segs) - 1)
        return (los[idx] + (u - cum[idx])) % curve.length

    hits = 0
    sep_hits = 0
    done = 0
    chunk = 250_000
    while done < samples:
        m = min(chunk, samples - done)
        s1 = draw(m)
        s2 = draw(m)
        d12 = curve.arc_distance(s1, s2)
        da12 = curve.arc_distance(curve.antipodal_arclen(s1), s2)
        sep = np.minimum(d12, da12) >= window.omega1
        sep_hits += int(np.count_nonzero(sep))
        if np.any(sep):
            phi1 = curve.phi_at_arclen(s1[sep])
            phi2 = curve.phi_at_arclen(s2[sep])
            q = curve.position(phi1) + curve.position(phi2)
            hits += int(np.count_nonzero(A.contains(q)))
        done += m
    if sep_hits == 0:
        raise EmptyWindowError(
            f"no sampled pair satisfied the omega1 = {window.omega1} separation")
    p_hit = hits / samples
    mu = d_measure * d_measure * p_hit
    stderr = d_measure * d_measure * np.sqrt(max(p_hit * (1 - p_hit), 0.0) / samples)
    return MeasureRatioResult(ratio=mu / A.area, stderr=float(stderr / A.area),
                              mu=mu, hits=hits, samples=samples,
                              window_measure=d_measure)


# ----------------------------------------------------------------------
# separated-set counting

@dataclass(frozen=True)
class SeparatedCountResult:
    count: int
    bound: float
    mu_inflated: float


def separated_count(curve: Curve, gamma: SeparatedSet, A: RegionRect,
                    quad_n: int = 1024,
                    v_const: float = BALL_VOLUME_CONSTANT) -> SeparatedCountResult:
    """Exact pair count with image in A, next to its volume bound.

    The companion bound is mu(preimage of the eps-inflated A) / (eps^2 V)
    with the inflated preimage measure from a uniform arc-length grid.
    """
    phis = np.asarray(gamma.phis)
    p = curve.position(phis)
    q = p[:, None, :] + p[None, :, :]
    count = int(np.count_nonzero(A.contains(q.reshape(-1, 2))))

    s = curve.length * np.arange(quad_n) / quad_n
    pg = curve.position(curve.phi_at_arclen(s))
    cell = (curve.length / quad_n) ** 2
    inside = 0
    for lo in range(0, quad_n, 256):
        hi = min(lo + 256, quad_n)
        qq = pg[lo:hi, None, :] + pg[None, :, :]
        inside += int(np.count_nonzero(
            A.contains_inflated(qq.reshape(-1, 2), gamma.eps)))
    mu = inside * cell
    bound = mu / (gamma.eps ** 2 * v_const)
    return SeparatedCountResult(count=count, bound=float(bound), mu_inflated=mu)


def ball_volume_ratio(curve: Curve, eps: float, samples: int = 200_000,
                      seed: int = 0) -> float:
    """Monte Carlo of mu(B_{r/2}(x)) / r^2 on the product manifold, r = eps.

    Samples offset points uniformly in the r-square around random centers
    and measures the fraction within product arc distance r/2.  For the
    flat product arc-length metric this converges to pi / 4 when eps is
    small against the curve length.
    """
    rng = np.random.default_rng(seed)
    total = curve.length
    x = rng.uniform(0.0, total, size=(samples, 2))
    y = np.mod(x + rng.uniform(-eps / 2, eps / 2, size=(samples, 2)), total)
    d = np.hypot(curve.arc_distance(x[:, 0], y[:, 0]),
                 curve.arc_distance(x[:, 1], y[:, 1]))
    return float(np.mean(d <= eps / 2))


@dataclass(frozen=True)
class RectBoundResult:
    count: int
    bound: float
    const: float
    core: float
    p_phi: float


def rect_bound_check(curve: Curve, gamma: SeparatedSet, A: RegionRect,
                     omega1: float, omega2: float,
                     const: float = 1.0) -> RectBoundResult:
    """Count separated pairs in the antipodal window mapped into A.

    The companion bound is const / (omega1 * eps^2) * (L1 + eps * omega2)
    * (L2 + eps); const is a fitted geometry constant.  The reference
    point is recovered from the rectangle axis (a curve normal direction).
    """
    eps = gamma.eps
    if not eps < omega1 / 4.0:
        raise EpsilonTooLargeError(f"eps = {eps:.6g} >= omega1/4 = {omega1/4.0:.6g}")
    p_phi = curve.phi_from_normal(np.asarray(A.axis))
    AntipodalWindow(p_phi=p_phi, omega1=omega1, omega2=omega2)  # radii validation

    s = np.asarray(gamma.arclens)
    s_p = float(curve.arclen(p_phi))
    a_s = curve.antipodal_arclen(s)
    near_p = np.minimum(curve.arc_distance(s, s_p),
                        curve.arc_distance(a_s, s_p)) <= omega2

    phis = np.asarray(gamma.phis)
    p = curve.position(phis)
    d12 = curve.arc_distance(s[:, None], s[None, :])
    da12 = curve.arc_distance(a_s[:, None], s[None, :])
    in_window = (np.minimum(d12, da12) >= omega1) & near_p[:, None] & near_p[None, :]
    q = p[:, None, :] + p[None, :, :]
    hit = A.contains(q.reshape(-1, 2)).reshape(in_window.shape) & in_window
    count = int(np.count_nonzero(hit))

    core = (A.L1 + eps * omega2) * (A.L2 + eps) / (omega1 * eps * eps)
    return RectBoundResult(count=count, bound=float(const * core),
                           const=float(const), core=float(core), p_phi=p_phi)
