"""Momentum-conservation sector counting at one and two scales.

The reachable sums of points drawn from a family of oriented rectangles
form a zonotope (their Minkowski sum); a tuple of sectors is consistent
with a target rectangle exactly when that zonotope meets the target.
Intersection is decided by a separating-axis test over the generator
perpendiculars plus the target axes, which is exact for convex polytopes.

Enumeration walks candidate anchor tuples slot by slot, pruning partial
sums whose reachable set cannot meet the target, then applies the exact
test to the survivors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curves import Curve, TWO_PI
from .errors import (
    DegenerateSweepError,
    RatioTooSmallError,
    ScaleOrderError,
    TooManyTuplesError,
)
from .sectors import OrientedRect, Sectorization, build_sectorization, sector_rect_at
from .summap import preimage_count

DEFAULT_MAX_TUPLES = 10 ** 9


# ----------------------------------------------------------------------
# zonotopes and exact feasibility

@dataclass(frozen=True)
class Zonotope:
    """Minkowski sum of oriented rectangles: center plus +-1 generator spans."""

    center: tuple
    generators: tuple     # half-extent side vectors

    @classmethod
    def from_rects(cls, rects) -> "Zonotope":
        center = np.zeros(2)
        gens = []
        for r in rects:
            center = center + np.asarray(r.center)
            gens.append(tuple(np.asarray(r.axis_u) * r.half_u))
            gens.append(tuple(np.asarray(r.axis_v) * r.half_v))
        return cls(tuple(center), tuple(gens))

    def support(self, axis) -> float:
        axis = np.asarray(axis, dtype=float)
        return float(sum(abs(float(np.dot(g, axis))) for g in self.generators))

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Exact membership via facet normals (generator perpendiculars).

        Generator directions are tested too, which closes the degenerate
        rank-one (segment) case.
        """
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        ok = np.ones(p.shape[0], dtype=bool)
        for g in self.generators:
            g = np.asarray(g)
            norm = np.hypot(g[0], g[1])
            if norm == 0.0:
                continue
            for axis in (np.array([-g[1], g[0]]) / norm, g / norm):
                ok &= np.abs(p @ axis) <= self.support(axis) + tol
        if not self.generators:
            ok &= np.hypot(p[:, 0], p[:, 1]) <= tol
        return ok[0] if single else ok

    def bounding_radius(self) -> float:
        return float(sum(np.hypot(g[0], g[1]) for g in self.generators))


def minkowski_feasible(rects, target: OrientedRect, tol: float = 0.0) -> bool:
    """True iff the Minkowski sum of the rectangles meets the target.

    Separating-axis test over all generator perpendiculars and the target
    axes; exact up to floating rounding for these convex polytopes.
    """
    if not rects:
        raise ValueError("need at least one rectangle")
    z = Zonotope.from_rects(rects)
    d = np.asarray(target.center) - np.asarray(z.center)
    axes = []
    for g in z.generators:
        g = np.asarray(g)
        norm = np.hypot(g[0], g[1])
        if norm > 0.0:
            axes.append(np.array([-g[1], g[0]]) / norm)
    axes.append(np.asarray(target.axis_u, dtype=float))
    axes.append(np.asarray(target.axis_v, dtype=float))
    for a in axes:
        reach = (z.support(a) + target.half_u * abs(float(np.dot(target.axis_u, a)))
                 + target.half_v * abs(float(np.dot(target.axis_v, a))))
        if abs(float(np.dot(d, a))) > reach + tol:
            return False
    return True


# ----------------------------------------------------------------------
# queries

@dataclass(frozen=True)
class MomQuery:
    """Single-scale counting query: anchor tuples summing into a sector.

    ``omega`` is three times the largest, over ordered interval pairs, of
    min(dist(I_i, I_j), dist(I_i, a(I_j))); the counting bound is asserted
    only when omega / 3 exceeds max(delta, 4 l), reported by
    ``bound_hypothesis_ok``.
    """

    sectorization: Sectorization
    p_phi: float
    n: int
    intervals: tuple           # 2n-1 arc intervals (lo, hi)
    delta: float
    omega: float
    bound_hypothesis_ok: bool

    @property
    def delta_over_l(self) -> float:
        return self.delta / self.sectorization.l


@dataclass(frozen=True)
class ConsQuery:
    """Two-scale query: fine sectors meeting coarse ones, sum conserved."""

    fine: Sectorization
    coarse: Sectorization
    s1_index: int
    coarse_indices: tuple
    k_tol: float
    omega_prime: float
    certifying_pair: tuple
    bound_hypothesis_ok: bool

    @property
    def n(self) -> int:
        return 1 + len(self.coarse_indices)

    @property
    def scale_gap(self) -> int:
        return self.fine.j - self.coarse.j


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    sweep_values: tuple
    max_counts: tuple


@dataclass(frozen=True)
class CountReport:
    """Result of one enumeration: exact count next to its bound."""

    kind: str
    params: dict
    exact_count: int
    bound_value: float
    fitted_constant: float
    runtime_ms: float
    scaling_fit: Optional[ScalingFit] = None
    extras: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# interval helpers (arc coordinates, cyclic)

def _interval_distance(iv1, iv2, total) -> float:
    lo1, hi1 = iv1
    lo2, hi2 = iv2
    start = (lo2 - lo1) % total
    len1 = hi1 - lo1
    len2 = hi2 - lo2
    if start <= len1 or start + len2 >= total:
        return 0.0
    return min(start - len1, total - start - len2)


def _antipodal_interval(curve: Curve, iv):
    s_ext, a_ext = curve._antipodal_arclen_table()
    total = curve.length

    def lift(s):
        k, rem = divmod(s, total)
        return float(np.interp(rem, s_ext, a_ext)) + k * total

    return (lift(iv[0]), lift(iv[1]))


def interval_separation(curve: Curve, intervals) -> float:
    """Largest over ordered pairs of min(direct, antipodal) interval distance."""
    total = curve.length
    a_ivs = [_antipodal_interval(curve, iv) for iv in intervals]
    best = 0.0
    for i, iv1 in enumerate(intervals):
        for k, iv2 in enumerate(intervals):
            if i == k:
                continue
            d = min(_interval_distance(iv1, iv2, total),
                    _interval_distance(iv1, a_ivs[k], total))
            best = max(best, d)
    return best


def make_mom_query(sectorization: Sectorization, p_phi: float, n: int,
                   intervals) -> MomQuery:
    """Assemble a single-scale query; computes delta and the separation omega."""
    if n < 2:
        raise ValueError("n must be >= 2")
    intervals = tuple((float(lo), float(hi)) for lo, hi in intervals)
    if len(intervals) != 2 * n - 1:
        raise ValueError(f"need {2 * n - 1} intervals, got {len(intervals)}")
    delta = max(hi - lo for lo, hi in intervals)
    l = sectorization.l
    if delta < l * (1.0 - 1e-12):
        raise ValueError(f"interval length {delta:.6g} below sector length {l:.6g}")
    omega = 3.0 * interval_separation(sectorization.curve, intervals)
    ok = omega / 3.0 > max(delta, 4.0 * l)
    return MomQuery(sectorization=sectorization, p_phi=float(p_phi), n=n,
                    intervals=intervals, delta=delta, omega=omega,
                    bound_hypothesis_ok=ok)


def make_cons_query(fine: Sectorization, coarse: Sectorization, s1_index: int,
                    coarse_indices, k_tol: float = 1.0) -> ConsQuery:
    """Assemble a two-scale query; certifies the separated coarse pair."""
    if coarse.j >= fine.j:
        raise ScaleOrderError(f"need coarse scale {coarse.j} < fine scale {fine.j}")
    if fine.l >= coarse.l / 4.0:
        raise RatioTooSmallError(
            f"fine length {fine.l:.6g} not below coarse length / 4 = {coarse.l / 4.0:.6g}")
    coarse_indices = tuple(int(i) for i in coarse_indices)
    curve = fine.curve
    total = curve.length
    ivs = [coarse.sectors[i].arc_interval for i in coarse_indices]
    a_ivs = [_antipodal_interval(curve, iv) for iv in ivs]
    omega_p = 0.0
    pair = (0, 0)
    for i in range(len(ivs)):
        for k in range(len(ivs)):
            if i == k:
                continue
            d = min(_interval_distance(ivs[i], ivs[k], total),
                    _interval_distance(ivs[i], a_ivs[k], total))
            if d > omega_p:
                omega_p = d
                pair = (coarse_indices[i], coarse_indices[k])
    ok = omega_p >= 4.0 * coarse.l
    return ConsQuery(fine=fine, coarse=coarse, s1_index=int(s1_index),
                     coarse_indices=coarse_indices, k_tol=float(k_tol),
                     omega_prime=omega_p, certifying_pair=pair,
                     bound_hypothesis_ok=ok)


# ----------------------------------------------------------------------
# batched feasibility over candidate tuples

def _slot_arrays(sectorization: Sectorization, indices):
    secs = sectorization.sectors
    centers = np.array([secs[i].rect.center for i in indices])
    us = np.array([secs[i].rect.axis_u for i in indices])
    vs = np.array([secs[i].rect.axis_v for i in indices])
    return {"centers": centers, "us": us, "vs": vs,
            "hu": secs[indices[0]].rect.half_u if indices else 0.0,
            "hv": secs[indices[0]].rect.half_v if indices else 0.0}


def _count_feasible(slots, target: OrientedRect, max_tuples: float) -> tuple:
    """Exact count of feasible tuples over the slot candidate lists.

    Partial sums are pruned with a reach bound before the separating-axis
    test; returns (count, tuples_tested).
    """
    sizes = [s["centers"].shape[0] for s in slots]
    if any(sz == 0 for sz in sizes):
        return 0, 0
    projected = float(np.prod([float(sz) for sz in sizes]))
    if projected > max_tuples:
        raise TooManyTuplesError(
            f"projected {projected:.3g} candidate tuples exceeds {max_tuples:.3g}")

    t_center = np.asarray(target.center)
    t_radius = target.half_u + target.half_v
    radii = [s["hu"] + s["hv"] for s in slots]
    max_center = [float(np.max(np.hypot(s["centers"][:, 0], s["centers"][:, 1])))
                  for s in slots]
    # reach of all slots after position k
    tail = np.zeros(len(slots) + 1)
    for k in range(len(slots) - 1, -1, -1):
        tail[k] = tail[k + 1] + max_center[k] + radii[k]

    # partial tuples: index columns + running center sums
    idx = np.zeros((1, 0), dtype=np.int64)
    csum = np.zeros((1, 2))
    acc_r = 0.0
    for k, slot in enumerate(slots):
        m = sizes[k]
        t = idx.shape[0]
        if t * m > 5e7:
            raise TooManyTuplesError(
                f"{t * m:.3g} live partial tuples at slot {k}; tighten intervals")
        new_idx = np.concatenate(
            [np.repeat(idx, m, axis=0),
             np.tile(np.arange(m, dtype=np.int64), t)[:, None]], axis=1)
        new_csum = np.repeat(csum, m, axis=0) + np.tile(slot["centers"], (t, 1))
        acc_r += radii[k]
        dist = np.hypot(new_csum[:, 0] - t_center[0], new_csum[:, 1] - t_center[1])
        keep = dist <= acc_r + tail[k + 1] + t_radius + 1e-12
        idx = new_idx[keep]
        csum = new_csum[keep]
        if idx.shape[0] == 0:
            return 0, 0

    t = idx.shape[0]
    d = csum - t_center
    ok = np.ones(t, dtype=bool)
    # support radius of the whole tuple zonotope on a batch of unit axes
    def tuple_support(axes):
        out = np.zeros(axes.shape[0])
        for k, slot in enumerate(slots):
            u = slot["us"][idx[:, k]]
            v = slot["vs"][idx[:, k]]
            out = out + slot["hu"] * np.abs(np.einsum("ij,ij->i", u, axes)) \
                      + slot["hv"] * np.abs(np.einsum("ij,ij->i", v, axes))
        return out

    t_u = np.asarray(target.axis_u)
    t_v = np.asarray(target.axis_v)
    axis_sources = [("fixed", t_u), ("fixed", t_v)]
    for k in range(len(slots)):
        axis_sources.append(("slot_u", k))
        axis_sources.append(("slot_v", k))

    for src in axis_sources:
        if src[0] == "fixed":
            axes = np.broadcast_to(src[1], (t, 2))
        elif src[0] == "slot_u":
            axes = slots[src[1]]["us"][idx[:, src[1]]]
        else:
            axes = slots[src[1]]["vs"][idx[:, src[1]]]
        reach = tuple_support(axes) \
            + target.half_u * np.abs(axes @ t_u) \
            + target.half_v * np.abs(axes @ t_v)
        ok &= np.abs(np.einsum("ij,ij->i", d, axes)) <= reach + 1e-12
        if not np.any(ok):
            break
    return int(np.count_nonzero(ok)), t


# ----------------------------------------------------------------------
# enumerations

def enumerate_mom(q: MomQuery, constant: float = 1.0,
                  max_tuples: float = DEFAULT_MAX_TUPLES) -> CountReport:
    """Exact count of anchor tuples feasible for the target sector of p.

    An anchor k_i qualifies for slot i when its arc position lies in I_i;
    a tuple counts when the Minkowski sum of its sector rectangles meets
    the sector rectangle anchored at p.  The companion bound is
    constant * n^2 * (delta/l + 1)^(2n-3) * (1 + Lambda / (l * omega)).
    """
    t0 = time.perf_counter()
    sec = q.sectorization
    curve = sec.curve
    total = curve.length
    anchors = sec.anchor_arclens

    slot_indices = []
    for lo, hi in q.intervals:
        inside = (anchors - lo) % total <= (hi - lo) + 1e-12
        slot_indices.append(np.nonzero(inside)[0])
    slots = [_slot_arrays(sec, list(ix)) for ix in slot_indices]

    target = sector_rect_at(curve, q.p_phi, sec.l, sec.M ** (-sec.j + 1)).rect
    count, tested = _count_feasible(slots, target, max_tuples)

    l = sec.l
    core = (q.n ** 2) * (q.delta / l + 1.0) ** (2 * q.n - 3) \
        * (1.0 + sec.Lambda / (l * q.omega)) if q.omega > 0 else np.inf
    report = CountReport(
        kind="mom",
        params={"j": sec.j, "M": sec.M, "n": q.n, "l": l,
                "Lambda": sec.Lambda, "delta": q.delta, "omega": q.omega,
                "delta_over_l": q.delta_over_l,
                "bound_hypothesis_ok": q.bound_hypothesis_ok},
        exact_count=count,
        bound_value=float(constant * core),
        fitted_constant=float(constant),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        extras={"slot_sizes": tuple(len(ix) for ix in slot_indices),
                "tuples_tested": tested},
    )
    return report


def _rects_intersect_batch(centers, us, vs, hu, hv, rect: OrientedRect):
    """Separating-axis test of many rectangles against one, vectorized."""
    m = centers.shape[0]
    d = np.asarray(rect.center) - centers
    ok = np.ones(m, dtype=bool)
    r_u = np.asarray(rect.axis_u)
    r_v = np.asarray(rect.axis_v)
    for axes, own in ((us, True), (vs, True),
                      (np.broadcast_to(r_u, (m, 2)), False),
                      (np.broadcast_to(r_v, (m, 2)), False)):
        proj = np.abs(np.einsum("ij,ij->i", d, axes))
        reach = (hu * np.abs(np.einsum("ij,ij->i", us, axes))
                 + hv * np.abs(np.einsum("ij,ij->i", vs, axes))
                 + rect.half_u * np.abs(axes @ r_u)
                 + rect.half_v * np.abs(axes @ r_v))
        ok &= proj <= reach + 1e-12
    return ok


def enumerate_cons(q: ConsQuery, constant: float = 1.0,
                   max_tuples: float = DEFAULT_MAX_TUPLES) -> CountReport:
    """Exact two-scale count of fine tuples conserving momentum.

    Fine candidates for slot m are the fine sectors whose rectangle meets
    the coarse rectangle of slot m; a tuple counts when the sum zonotope
    of (s1, chosen fine sectors) meets the square of half-extent
    k_tol * M^-j at the origin.  The companion bound is
    constant * (l'/l)^(n-3) * (1 + 1 / (M^(j-1) l omega')).
    """
    t0 = time.perf_counter()
    fine, coarse = q.fine, q.coarse
    curve = fine.curve
    n_fine = fine.count
    all_idx = np.arange(n_fine)
    fine_centers = np.array([s.rect.center for s in fine.sectors])
    fine_us = np.array([s.rect.axis_u for s in fine.sectors])
    fine_vs = np.array([s.rect.axis_v for s in fine.sectors])
    hu = fine.sectors[0].rect.half_u
    hv = fine.sectors[0].rect.half_v

    slots = []
    slot_sizes = []
    for ci in q.coarse_indices:
        crect = coarse.sectors[ci].rect
        hit = _rects_intersect_batch(fine_centers, fine_us, fine_vs, hu, hv, crect)
        ix = list(all_idx[hit])
        slot_sizes.append(len(ix))
        slots.append(_slot_arrays(fine, ix))

    # conservation target: square of half-extent k_tol * M^-j at the origin;
    # the fixed sector s1 joins the sum as a single-candidate slot
    half = q.k_tol * fine.M ** (-fine.j)
    target = OrientedRect(center=(0.0, 0.0), axis_u=(1.0, 0.0),
                          axis_v=(0.0, 1.0), half_u=half, half_v=half)
    slots = [_slot_arrays(fine, [q.s1_index])] + slots
    count, tested = _count_feasible(slots, target, max_tuples)

    lp, l = coarse.l, fine.l
    core = (lp / l) ** (q.n - 3) * (
        1.0 + 1.0 / (fine.M ** (fine.j - 1) * l * q.omega_prime)) \
        if q.omega_prime > 0 else np.inf
    return CountReport(
        kind="cons",
        params={"i": coarse.j, "j": fine.j, "M": fine.M, "n": q.n,
                "l": l, "l_prime": lp, "omega_prime": q.omega_prime,
                "k_tol": q.k_tol, "scale_gap": q.scale_gap,
                "certifying_pair": q.certifying_pair,
                "bound_hypothesis_ok": q.bound_hypothesis_ok},
        exact_count=count,
        bound_value=float(constant * core),
        fitted_constant=float(constant),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        extras={"slot_sizes": tuple(slot_sizes), "tuples_tested": tested},
    )


def enumerate_query(q, constant: float = 1.0,
                    max_tuples: float = DEFAULT_MAX_TUPLES) -> CountReport:
    if isinstance(q, MomQuery):
        return enumerate_mom(q, constant, max_tuples)
    if isinstance(q, ConsQuery):
        return enumerate_cons(q, constant, max_tuples)
    raise TypeError(f"not a counting query: {type(q).__name__}")


# ----------------------------------------------------------------------
# sweeps

def sweep_value(q, sweep_var: str) -> float:
    if sweep_var == "delta_over_l":
        return q.delta_over_l
    if sweep_var == "omega1":
        return q.omega if isinstance(q, MomQuery) else q.omega_prime
    if sweep_var == "scale_gap":
        if not isinstance(q, ConsQuery):
            raise TypeError("scale_gap sweeps need two-scale queries")
        return float(q.fine.M ** q.scale_gap)
    raise ValueError(f"unknown sweep variable {sweep_var!r}")


def bound_sweep(queries, sweep_var: str, constant: float = 1.0,
                max_tuples: float = DEFAULT_MAX_TUPLES) -> ScalingFit:
    """Log-log least squares of max counts against the sweep variable.

    Queries sharing a sweep value are pooled by their maximum count.
    Needs at least 3 distinct values spanning a factor of 4; values whose
    maximum count is zero are dropped from the fit.
    """
    groups: dict = {}
    for q in queries:
        v = sweep_value(q, sweep_var)
        c = enumerate_query(q, constant, max_tuples).exact_count
        groups[v] = max(groups.get(v, 0), c)
    values = np.array(sorted(groups))
    if values.size < 3 or values[-1] / values[0] < 4.0 * (1.0 - 1e-9):
        raise ValueError("need >= 3 sweep values spanning a factor >= 4")
    counts = np.array([groups[v] for v in values], dtype=float)
    if np.all(counts == 0):
        raise DegenerateSweepError("all sweep points produced zero counts")
    mask = counts > 0
    x = np.log(values[mask])
    y = np.log(counts[mask])
    if x.size < 2:
        raise DegenerateSweepError("fewer than two nonzero sweep points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(x.size - 2, 1)
    sxx = float(np.sum((x - np.mean(x)) ** 2))
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof / sxx)) if sxx > 0 else np.inf
    return ScalingFit(exponent=float(slope), stderr=stderr,
                      sweep_values=tuple(map(float, values)),
                      max_counts=tuple(map(float, counts)))


# ----------------------------------------------------------------------
# instance construction

@dataclass(frozen=True)
class MomPlacement:
    """A feasible single-scale configuration: points summing onto the curve.

    Closed unit-side polygons are rigid for three legs (a rhombus with the
    target), so on centrally symmetric curves every n = 2 configuration
    contains a near-antipodal pair; separation quality therefore mirrors
    the omega definition (best pair), while distinctness is a plain
    arc-distance floor over all pairs.
    """

    j: int
    M: float
    p_phi: float
    point_arclens: tuple       # 2n-1 arc positions; sums of positions hit p
    plain_quality: float       # smallest pairwise arc distance
    sep_quality: float         # largest pairwise min(direct, antipodal) distance


def _placement_qualities(curve: Curve, arclens) -> tuple:
    s = np.asarray(arclens)
    a_s = curve.antipodal_arclen(s)
    d = curve.arc_distance(s[:, None], s[None, :])
    da = curve.arc_distance(a_s[:, None], s[None, :])
    off = ~np.eye(len(s), dtype=bool)
    plain = float(np.min(d[off]))
    sep = float(np.max(np.minimum(d, da)[off]))
    return plain, sep


def mom_placement(curve: Curve, j: int, M: float, n: int,
                  seed: int = 0, plain_floor: float = 0.3,
                  sep_floor: float = 1.0, attempts: int = 400) -> MomPlacement:
    """Seeded search for 2n-1 distinct points summing into the curve.

    Free points are drawn uniformly in arc length; the last two come from
    a preimage solve of the residual, so the sum of all positions equals
    the position of the target point exactly.
    """
    rng = np.random.default_rng(seed)
    total = curve.length
    r_max = float(np.max(curve.radius(np.linspace(0, TWO_PI, 512))))
    for _ in range(attempts):
        p_phi = float(rng.uniform(0.0, TWO_PI))
        free_s = rng.uniform(0.0, total, size=2 * n - 3)
        free_phi = curve.phi_at_arclen(free_s)
        resid = curve.position(p_phi) - np.atleast_2d(
            curve.position(free_phi)).sum(axis=0)
        mag = float(np.hypot(resid[0], resid[1]))
        if not 0.3 <= mag <= 1.85 * r_max:
            continue
        sol = preimage_count(curve, resid, tol=1e-9)
        best = None
        for (phi1, phi2), sin_t in zip(sol.solutions, sol.sin_thetas):
            if sin_t < 0.05:
                continue
            arcs = tuple(np.atleast_1d(curve.arclen(
                np.concatenate([[phi1, phi2], np.atleast_1d(free_phi)]))))
            plain, sep = _placement_qualities(curve, arcs)
            if plain >= plain_floor and (best is None or sep > best[2]):
                best = (arcs, plain, sep)
        if best is not None and best[2] >= sep_floor:
            return MomPlacement(j=j, M=M, p_phi=p_phi,
                                point_arclens=tuple(map(float, best[0])),
                                plain_quality=best[1], sep_quality=best[2])
    raise RuntimeError("no well-separated feasible placement found")


def mom_query_from_placement(curve: Curve, placement: MomPlacement,
                             delta_ratio: float,
                             anchor_offset: float = 0.0) -> MomQuery:
    """Intervals of length delta_ratio * l centered on the placement points."""
    sec_l = placement.M ** (-placement.j / 2.0)
    sec = build_sectorization(curve, placement.j, sec_l, placement.M,
                              anchor_offset=anchor_offset)
    delta = delta_ratio * sec.l
    intervals = [(s - 0.5 * delta, s + 0.5 * delta)
                 for s in placement.point_arclens]
    n = (len(placement.point_arclens) + 1) // 2
    return make_mom_query(sec, placement.p_phi, n, intervals)


@dataclass(frozen=True)
class ConsPlacement:
    """Zero-sum configuration of n curve points for two-scale counting.

    The first point anchors the fine sector; the rest anchor coarse
    sectors, so ``sep_quality`` is measured over pairs of those.
    """

    n: int
    point_arclens: tuple
    plain_quality: float
    sep_quality: float


def cons_placement(curve: Curve, n: int = 3, seed: int = 0,
                   plain_floor: float = 0.3, sep_floor: float = 0.7,
                   attempts: int = 400) -> ConsPlacement:
    """Seeded search for n well-separated points with positions summing to 0."""
    rng = np.random.default_rng(seed)
    total = curve.length
    r_max = float(np.max(curve.radius(np.linspace(0, TWO_PI, 512))))
    for _ in range(attempts):
        free_s = rng.uniform(0.0, total, size=n - 2)
        free_phi = curve.phi_at_arclen(free_s)
        resid = -np.atleast_2d(curve.position(free_phi)).sum(axis=0)
        mag = float(np.hypot(resid[0], resid[1]))
        if not 0.3 <= mag <= 1.85 * r_max:
            continue
        sol = preimage_count(curve, resid, tol=1e-9)
        best = None
        for (phi1, phi2), sin_t in zip(sol.solutions, sol.sin_thetas):
            if sin_t < 0.05:
                continue
            arcs = tuple(np.atleast_1d(curve.arclen(
                np.concatenate([[phi1, phi2], np.atleast_1d(free_phi)]))))
            plain, _ = _placement_qualities(curve, arcs)
            _, sep = _placement_qualities(curve, arcs[1:])
            if plain >= plain_floor and (best is None or sep > best[2]):
                best = (arcs, plain, sep)
        if best is not None and best[2] >= sep_floor:
            return ConsPlacement(n=n, point_arclens=tuple(map(float, best[0])),
                                 plain_quality=best[1], sep_quality=best[2])
    raise RuntimeError("no well-separated zero-sum placement found")


def cons_query_from_placement(curve: Curve, placement: ConsPlacement,
                              i: int, j: int, M: float = 10.0,
                              k_tol: float = 1.0) -> ConsQuery:
    """Anchor the placement: fine sector at the first point, coarse at the rest."""
    fine = build_sectorization(curve, j, M ** (-j / 2.0), M)
    coarse = build_sectorization(curve, i, M ** (-i / 2.0), M)
    pts = placement.point_arclens
    s1 = int(np.argmin(np.abs(
        (fine.anchor_arclens - pts[0] + 0.5 * curve.length) % curve.length
        - 0.5 * curve.length)))
    coarse_idx = []
    for s in pts[1:]:
        ci = int(np.argmin(np.abs(
            (coarse.anchor_arclens - s + 0.5 * curve.length) % curve.length
            - 0.5 * curve.length)))
        coarse_idx.append(ci)
    return make_cons_query(fine, coarse, s1, coarse_idx, k_tol=k_tol)
