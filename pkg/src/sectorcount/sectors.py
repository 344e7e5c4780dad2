"""Shells and multiscale sectorizations of a convex curve.

A shell at scale j is the momentum region where the dispersion magnitude
lies in [M^-j, M^-(j-1)].  A sector is a flat oriented rectangle anchored
on the curve: tangential side of length l, normal half-extent M^-(j-1) so
the rectangle spans the whole shell on both sides of the curve.
Membership bookkeeping for covering invariants uses the anchored arc
interval rather than the rectangle.

The default anisotropic schedule is l = M^(-j/2), Lambda = M^-j with
M = 10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import Curve
from .errors import InadmissibleWidthError, SectorTooLongError

_REL_TOL = 1e-9


@dataclass(frozen=True)
class Shell:
    """Scale-j dispersion shell: M^-j <= |dispersion| <= M^-(j-1)."""

    j: int
    M: float = 10.0

    def __post_init__(self):
        if self.j < 2:
            raise ValueError("shell scale j must be >= 2")
        if self.M < 10.0:
            raise ValueError("shell base M must be >= 10")

    @property
    def inner(self) -> float:
        return self.M ** -self.j

    @property
    def outer(self) -> float:
        return self.M ** (-self.j + 1)

    def contains(self, curve: Curve, k) -> np.ndarray:
        d = np.abs(curve.dispersion(k))
        return (d >= self.inner) & (d <= self.outer)


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle given by center, orthonormal axes and half extents."""

    center: tuple
    axis_u: tuple
    axis_v: tuple
    half_u: float
    half_v: float

    def corners(self) -> np.ndarray:
        c = np.asarray(self.center)
        u = np.asarray(self.axis_u) * self.half_u
        v = np.asarray(self.axis_v) * self.half_v
        return np.array([c + u + v, c - u + v, c - u - v, c + u - v])

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        du = np.abs(p @ np.asarray(self.axis_u))
        dv = np.abs(p @ np.asarray(self.axis_v))
        return (du <= self.half_u + tol) & (dv <= self.half_v + tol)


@dataclass(frozen=True)
class Sector:
    """One sector: anchored rectangle plus its arc interval on the curve."""

    j: int
    center_phi: float
    length: float          # tangential side l
    width: float           # nominal width Lambda used in counting bounds
    rect: OrientedRect
    arc_interval: tuple    # (s_lo, s_hi), s_hi - s_lo == length, not wrapped
    phi_interval: tuple

    @property
    def corners(self) -> np.ndarray:
        return self.rect.corners()


@dataclass
class Sectorization:
    """Covering family of sectors at one scale.

    ``l`` is the realized sector length; when the requested length admits
    no valid uniform layout it is nudged downward and ``nudge`` reports the
    relative adjustment.
    """

    curve: Curve
    sectors: list
    j: int
    M: float
    l: float
    Lambda: float
    spacing: float
    overlap: float
    requested_l: float
    nudge: float

    @property
    def count(self) -> int:
        return len(self.sectors)

    @property
    def anchor_arclens(self) -> np.ndarray:
        return np.array([0.5 * (s.arc_interval[0] + s.arc_interval[1])
                         for s in self.sectors])

    @property
    def overlaps(self) -> np.ndarray:
        """Arc overlap of each sector with its predecessor (cyclic)."""
        return np.array([_cyclic_overlap(
            self.sectors[i].arc_interval,
            self.sectors[i - 1].arc_interval,
            self.curve.length) for i in range(len(self.sectors))])


@dataclass(frozen=True)
class Violation:
    rule: str
    sectors: tuple
    detail: str


def sector_rect_at(curve: Curve, phi: float, length: float, half_normal: float,
                   j: int = 0, width: float = 0.0) -> Sector:
    """Sector-shaped rectangle anchored at an arbitrary curve point."""
    c = curve.position(phi)
    t = curve.tangent(phi)
    n = curve.normal(phi)
    rect = OrientedRect(tuple(c), tuple(t), tuple(n), 0.5 * length, half_normal)
    s_c = float(curve.arclen(phi))
    lo, hi = s_c - 0.5 * length, s_c + 0.5 * length
    return Sector(j=j, center_phi=float(phi), length=length, width=width,
                  rect=rect, arc_interval=(lo, hi),
                  phi_interval=(float(curve.phi_at_arclen(lo)),
                                float(curve.phi_at_arclen(hi))))


def build_sectorization(curve: Curve, j: int, l: float, M: float = 10.0,
                        enforce_anisotropy: bool = True,
                        anchor_offset: float = 0.0) -> Sectorization:
    """Uniform sectorization of length l at scale j.

    The sector count N is the largest integer with overlap = l - len/N in
    [l/16, l/8]; when no integer qualifies, l is nudged down to the nearest
    admissible value (realizing the target overlap l/8 exactly) and the
    adjustment is recorded.

    ``enforce_anisotropy`` requires the width M^-j to lie in [l^2, l]; turn
    it off to study layout arithmetic at lengths outside that window.
    ``anchor_offset`` rotates the whole family along the curve (arc units);
    counting experiments take maxima over such phases.
    """
    if j < 2:
        raise ValueError("scale j must be >= 2")
    if M < 10.0:
        raise ValueError("base M must be >= 10")
    total = curve.length
    if l >= total / 4.0:
        raise SectorTooLongError(f"l = {l:.6g} >= length/4 = {total / 4.0:.6g}")
    lam = M ** -j
    if enforce_anisotropy and not (l * l <= lam * (1.0 + _REL_TOL)
                                   and lam <= l * (1.0 + _REL_TOL)):
        raise InadmissibleWidthError(
            f"Lambda = {lam:.6g} outside [l^2, l] = [{l * l:.6g}, {l:.6g}]")

    lo_n = 16.0 * total / (15.0 * l)
    hi_n = 8.0 * total / (7.0 * l)
    n = int(np.floor(hi_n * (1.0 + 1e-12)))
    if n >= lo_n:
        l_real = l
    else:
        n += 1
        l_real = 8.0 * total / (7.0 * n)   # overlap lands exactly on l/8

    spacing = total / n
    overlap = l_real - spacing
    half_n = M ** (-j + 1)
    anchors = (anchor_offset + spacing * np.arange(n)) % total
    sectors = []
    for s_c in anchors:
        phi_c = float(curve.phi_at_arclen(s_c))
        sec = sector_rect_at(curve, phi_c, l_real, half_n, j=j, width=lam)
        lo, hi = s_c - 0.5 * l_real, s_c + 0.5 * l_real
        sec = Sector(j=j, center_phi=phi_c, length=l_real, width=lam,
                     rect=sec.rect, arc_interval=(lo, hi),
                     phi_interval=(float(curve.phi_at_arclen(lo)),
                                   float(curve.phi_at_arclen(hi))))
        sectors.append(sec)

    return Sectorization(curve=curve, sectors=sectors, j=j, M=M, l=l_real,
                         Lambda=lam, spacing=spacing, overlap=overlap,
                         requested_l=l, nudge=1.0 - l_real / l)


def _cyclic_overlap(iv1, iv2, total) -> float:
    """Intersection length of two arc intervals on a circle of given length."""
    lo1, hi1 = iv1
    lo2, hi2 = iv2
    len1, len2 = hi1 - lo1, hi2 - lo2
    if len1 >= total or len2 >= total:
        return min(len1, len2, total)
    start = (lo2 - lo1) % total
    out = 0.0
    for s2 in (start, start - total):
        lo = max(0.0, s2)
        hi = min(len1, s2 + len2)
        if hi > lo:
            out += hi - lo
    return out


def validate_sectorization(sec: Sectorization) -> list:
    """Check cover, two-neighbor, overlap-range and count invariants.

    Returns an empty list when all hold; otherwise one Violation per broken
    rule with the offending sector indices.
    """
    total = sec.curve.length
    n = len(sec.sectors)
    out = []
    if n == 0:
        return [Violation("cover", (), "no sectors")]

    ivs = [s.arc_interval for s in sec.sectors]
    tol = _REL_TOL * max(total, 1.0)

    # cover: walk intervals sorted by start, tracking reach around the circle
    order = sorted(range(n), key=lambda i: ivs[i][0] % total)
    lo0 = ivs[order[0]][0] % total
    reach = lo0
    for idx in order:
        lo = ivs[idx][0] % total
        length = ivs[idx][1] - ivs[idx][0]
        if lo > reach + tol:
            out.append(Violation("cover", (idx,),
                                 f"gap of {lo - reach:.6g} before s = {lo:.6g}"))
            break
        reach = max(reach, lo + length)
    else:
        if reach < lo0 + total - tol:
            out.append(Violation(
                "cover", (order[-1], order[0]),
                f"gap of {lo0 + total - reach:.6g} at wraparound"))

    # two neighbors: positive-length intersection with exactly two others
    for i in range(n):
        mates = [k for k in range(n) if k != i
                 and _cyclic_overlap(ivs[i], ivs[k], total) > tol]
        if len(mates) != 2:
            out.append(Violation("neighbors", (i, *mates),
                                 f"sector {i} intersects {len(mates)} others"))

    # overlap range on cyclically consecutive sectors
    l = sec.l
    for i in range(n):
        o = _cyclic_overlap(ivs[i], ivs[(i + 1) % n], total)
        if not (l / 16.0 - tol <= o <= l / 8.0 + tol):
            out.append(Violation("overlap", (i, (i + 1) % n),
                                 f"overlap {o:.6g} outside [{l/16.0:.6g}, {l/8.0:.6g}]"))

    # count bound: at most 2 * length / l sectors
    if n * l > 2.0 * total * (1.0 + _REL_TOL):
        out.append(Violation("count", tuple(range(n)),
                             f"{n} sectors exceeds 2*length/l = {2.0 * total / l:.6g}"))
    return out


def locate_sectors(sec: Sectorization, k) -> list:
    """Indices of sectors containing k: shell bound plus arc projection.

    Returns [] outside the closed M^(1-j) dispersion neighborhood; inside,
    the nearest-point projection is tested against each sector's arc
    interval, which yields one index, or two in an overlap region.
    """
    curve = sec.curve
    k = np.asarray(k, dtype=float)
    if abs(float(curve.dispersion(k))) > sec.M ** (-sec.j + 1) * (1.0 + _REL_TOL):
        return []
    s_star = _project_arclen(curve, k)
    total = curve.length
    out = []
    for i, s in enumerate(sec.sectors):
        lo, hi = s.arc_interval
        if (s_star - lo) % total <= (hi - lo) + 1e-12:
            out.append(i)
    return out


def _project_arclen(curve: Curve, k) -> float:
    """Arc coordinate of the nearest curve point (Newton, polar-angle start)."""
    phi = float(np.arctan2(k[1], k[0]))
    for _ in range(40):
        d = k - curve.position(phi)
        v = curve.velocity(phi)
        g = float(d @ v)
        gp = float(d @ curve.acceleration(phi)) - float(v @ v)
        step = g / gp
        phi -= step
        if abs(step) < 1e-13:
            break
    else:
        # dense fallback; only reachable far from the curve
        grid = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        pts = curve.position(grid)
        phi = float(grid[int(np.argmin(np.sum((pts - k) ** 2, axis=-1)))])
    return float(curve.arclen(phi))
