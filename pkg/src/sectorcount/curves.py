"""Strictly convex closed planar curves given by a radial profile.

A curve is described by a positive radial profile r(phi) about the origin,

    p(phi) = (r(phi) cos phi, r(phi) sin phi),

oriented counterclockwise.  Supported profile families: circles, ellipses
(centered, axis-aligned), and truncated trigonometric series
r(phi) = r0 + sum_m (a_m cos(m phi) + b_m sin(m phi)).

Validation enforces r > 0 and curvature bounded away from zero on a dense
grid, so the tangent angle psi(phi) = phi + atan2(r, r') is a strictly
increasing lift with total increase 2*pi.  That monotonicity is what makes
the antipodal point (the unique second point with parallel tangent) solvable
by guaranteed bracketing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    ConvergenceFailureError,
    NonConvexError,
    NonPositiveRadiusError,
    OriginSingularError,
    OutOfChartError,
)

TWO_PI = 2.0 * np.pi

_SYMMETRY_TOL = 1e-9       # radial residual below which a symmetry is accepted
_MAX_DIHEDRAL = 12         # largest rotation order searched


@dataclass(frozen=True)
class CurveSpec:
    """Radial-profile description of a closed planar curve.

    Use the constructors :meth:`circle`, :meth:`ellipse` and
    :meth:`radial_series` rather than filling fields by hand.
    """

    family: str
    params: tuple
    sample_count: int = 4096

    @classmethod
    def circle(cls, r0: float, sample_count: int = 4096) -> "CurveSpec":
        return cls("circle", (float(r0),), sample_count)

    @classmethod
    def ellipse(cls, a: float, b: float, sample_count: int = 4096) -> "CurveSpec":
        return cls("ellipse", (float(a), float(b)), sample_count)

    @classmethod
    def radial_series(cls, r0, terms, sample_count: int = 4096) -> "CurveSpec":
        """Profile r0 + sum of (m, a_m, b_m) harmonics."""
        clean = tuple((int(m), float(a), float(b)) for m, a, b in terms)
        return cls("radial_series", (float(r0), clean), sample_count)

    def __post_init__(self):
        if self.family not in ("circle", "ellipse", "radial_series"):
            raise ValueError(f"unknown curve family {self.family!r}")
        if self.sample_count < 4096:
            raise ValueError("sample_count must be at least 4096")


@dataclass(frozen=True)
class CurvePoint:
    """Geometry of one curve point: frame, curvature and arc coordinate."""

    phi: float
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float
    arclen: float
    tangent_angle: float


@dataclass(frozen=True)
class SymmetryReport:
    """Symmetry diagnostics of a curve.

    ``dihedral_order`` is the largest m <= 12 whose rotation by 2*pi/m is a
    radial symmetry together with some reflection axis; it is None when no
    reflection axis exists, and None with ``continuous_rotation`` set for
    circles.  ``asymmetry_margin_min`` is the grid minimum of
    |curvature(k) - curvature(a(k))| over antipodal pairs.
    """

    centrally_symmetric: bool
    central_residual: float
    continuous_rotation: bool
    dihedral_order: Optional[int]
    reflection_axis: Optional[float]
    asymmetry_margin_min: float
    classification: str


class Curve:
    """Validated strictly convex closed curve with cached arc-length tables.

    Instances are immutable after construction; all evaluation methods are
    pure reads and accept scalars or arrays of angles.
    """

    def __init__(self, spec: CurveSpec):
        self.spec = spec
        n = spec.sample_count
        grid = np.linspace(0.0, TWO_PI, n, endpoint=False)
        r, r1, r2 = self._radial_all(grid)

        if np.min(r) <= 0.0:
            bad = grid[int(np.argmin(r))]
            raise NonPositiveRadiusError(
                f"radius {np.min(r):.6g} <= 0 at phi = {bad:.6g}")

        kappa = _polar_curvature(r, r1, r2)
        if np.min(kappa) <= 0.0:
            bad = grid[int(np.argmin(kappa))]
            raise NonConvexError(
                f"curvature {np.min(kappa):.6g} <= 0 at phi = {bad:.6g}")

        self._grid = grid
        self._grid_kappa = kappa
        self.kappa_min, self.kappa_max = self._refined_kappa_range(grid, kappa)
        if self.kappa_min <= 0.0:
            raise NonConvexError(
                f"refined curvature minimum {self.kappa_min:.6g} <= 0")

        # cumulative trapezoid arc-length table on the closed grid
        grid_ext = np.append(grid, TWO_PI)
        r_ext, r1_ext, _ = self._radial_all(grid_ext)
        speed_ext = np.hypot(r_ext, r1_ext)
        seg = 0.5 * (speed_ext[:-1] + speed_ext[1:]) * np.diff(grid_ext)
        self._s_table = np.concatenate([[0.0], np.cumsum(seg)])
        self._grid_ext = grid_ext
        self.length = float(self._s_table[-1])

        self._antipodal_table = None
        self._symmetry: Optional[SymmetryReport] = None
        self._preimage_solvers: dict = {}

    # ------------------------------------------------------------------
    # radial profile and derivatives

    def _radial_all(self, phi):
        """Return r, r', r'' of the radial profile at phi (vectorized)."""
        phi = np.asarray(phi, dtype=float)
        family = self.spec.family
        if family == "circle":
            (r0,) = self.spec.params
            z = np.zeros_like(phi)
            return np.full_like(phi, r0), z, z.copy()
        if family == "ellipse":
            a, b = self.spec.params
            d = (b * np.cos(phi)) ** 2 + (a * np.sin(phi)) ** 2
            d1 = (a * a - b * b) * np.sin(2.0 * phi)
            d2 = 2.0 * (a * a - b * b) * np.cos(2.0 * phi)
            ab = a * b
            r = ab * d ** -0.5
            r1 = -0.5 * ab * d ** -1.5 * d1
            r2 = ab * (0.75 * d ** -2.5 * d1 * d1 - 0.5 * d ** -1.5 * d2)
            return r, r1, r2
        r0, terms = self.spec.params
        r = np.full_like(phi, r0)
        r1 = np.zeros_like(phi)
        r2 = np.zeros_like(phi)
        for m, am, bm in terms:
            c, s = np.cos(m * phi), np.sin(m * phi)
            r += am * c + bm * s
            r1 += m * (-am * s + bm * c)
            r2 += m * m * (-am * c - bm * s)
        return r, r1, r2

    def radius(self, phi):
        return self._radial_all(phi)[0]

    def _refined_kappa_range(self, grid, kappa):
        """Grid extrema of curvature polished by bounded scalar minimization."""
        def k_of(phi):
            r, r1, r2 = self._radial_all(phi)
            return _polar_curvature(r, r1, r2)

        lo, hi = float(np.min(kappa)), float(np.max(kappa))
        n = len(grid)
        h = TWO_PI / n
        for sign in (1.0, -1.0):
            vals = sign * kappa
            local = np.nonzero((vals < np.roll(vals, 1)) & (vals < np.roll(vals, -1)))[0]
            for i in local:
                res = minimize_scalar(
                    lambda x, s=sign: s * k_of(x),
                    bounds=(grid[i] - h, grid[i] + h), method="bounded",
                    options={"xatol": 1e-12})
                val = sign * res.fun
                if sign > 0:
                    lo = min(lo, val)
                else:
                    hi = max(hi, val)
        return lo, hi

    # ------------------------------------------------------------------
    # pointwise geometry

    def position(self, phi):
        phi = np.asarray(phi, dtype=float)
        r = self._radial_all(phi)[0]
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)

    def velocity(self, phi):
        """d position / d phi."""
        phi = np.asarray(phi, dtype=float)
        r, r1, _ = self._radial_all(phi)
        c, s = np.cos(phi), np.sin(phi)
        return np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)

    def speed(self, phi):
        phi = np.asarray(phi, dtype=float)
        r, r1, _ = self._radial_all(phi)
        return np.hypot(r, r1)

    def acceleration(self, phi):
        """d^2 position / d phi^2."""
        phi = np.asarray(phi, dtype=float)
        r, r1, r2 = self._radial_all(phi)
        c, s = np.cos(phi), np.sin(phi)
        return np.stack([(r2 - r) * c - 2.0 * r1 * s,
                         (r2 - r) * s + 2.0 * r1 * c], axis=-1)

    def tangent(self, phi):
        v = self.velocity(phi)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def normal(self, phi):
        """Inward unit normal (tangent rotated by +90 degrees)."""
        t = self.tangent(phi)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def curvature(self, phi):
        r, r1, r2 = self._radial_all(phi)
        return _polar_curvature(r, r1, r2)

    def tangent_angle(self, phi):
        """Continuous strictly increasing lift of the tangent direction.

        Equals phi + atan2(r, r'); the arctan term is 2*pi-periodic and
        stays in (0, pi) because r > 0, so the lift is global.
        """
        phi = np.asarray(phi, dtype=float)
        r, r1, _ = self._radial_all(phi)
        return phi + np.arctan2(r, r1)

    def tangent_angle_deriv(self, phi):
        return self.curvature(phi) * self.speed(phi)

    def arclen(self, phi):
        """Arc length from phi = 0, by linear interpolation of the table."""
        phi = np.mod(np.asarray(phi, dtype=float), TWO_PI)
        return np.interp(phi, self._grid_ext, self._s_table)

    def phi_at_arclen(self, s):
        """Inverse of :meth:`arclen` (the table is strictly increasing)."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        return np.interp(s, self._s_table, self._grid_ext)

    def arc_distance(self, s1, s2):
        """Shorter-way arc distance between arc coordinates (cyclic)."""
        d = np.mod(np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float),
                   self.length)
        return np.minimum(d, self.length - d)

    def point_at(self, phi: float) -> CurvePoint:
        phi = float(np.mod(phi, TWO_PI))
        return CurvePoint(
            phi=phi,
            position=self.position(phi),
            tangent=self.tangent(phi),
            normal=self.normal(phi),
            curvature=float(self.curvature(phi)),
            arclen=float(self.arclen(phi)),
            tangent_angle=float(self.tangent_angle(phi)),
        )

    # ------------------------------------------------------------------
    # antipodal map

    def solve_tangent_angle(self, target, lo, hi, tol: float = 1e-10):
        """Solve psi(x) = target on the bracket (lo, hi), elementwise.

        psi must change sign across the bracket; bisection down to 1e-6,
        then safeguarded Newton to ``tol`` in the tangent angle.
        """
        lo = np.asarray(lo, dtype=float).copy()
        hi = np.asarray(hi, dtype=float).copy()
        x = 0.5 * (lo + hi)
        # bisection: bracket width 2*pi / 2^24 < 1e-6
        for _ in range(24):
            neg = (self.tangent_angle(x) - target) < 0.0
            lo = np.where(neg, x, lo)
            hi = np.where(neg, hi, x)
            x = 0.5 * (lo + hi)
        # Newton with midpoint fallback: every round at least halves the
        # bracket, so 40 rounds cover the stalled pure-bisection worst case
        for _ in range(40):
            f = self.tangent_angle(x) - target
            if np.max(np.abs(f)) <= 0.25 * tol:
                break
            step = f / self.tangent_angle_deriv(x)
            xn = x - step
            outside = (xn < lo) | (xn > hi)
            xn = np.where(outside, 0.5 * (lo + hi), xn)
            neg = (self.tangent_angle(xn) - target) < 0.0
            lo = np.where(neg, xn, lo)
            hi = np.where(neg, hi, xn)
            x = xn
        resid = np.abs(self.tangent_angle(x) - target)
        if np.max(resid) > tol:
            raise ConvergenceFailureError(
                f"tangent-angle solve residual {np.max(resid):.3g} > {tol:.3g}")
        return x

    def antipodal(self, phi, tol: float = 1e-10):
        """Angle of the unique second point with parallel tangent.

        The lifted tangent angle increases by exactly 2*pi per revolution,
        so psi(x) = psi(phi) + pi has one root in (phi, phi + 2*pi).
        """
        phi = np.asarray(phi, dtype=float)
        scalar = phi.ndim == 0
        phi = np.atleast_1d(phi)
        target = self.tangent_angle(phi) + np.pi
        x = self.solve_tangent_angle(target, phi + 1e-12, phi + TWO_PI - 1e-12,
                                     tol=tol)
        out = np.mod(x, TWO_PI)
        return float(out[0]) if scalar else out

    def phi_from_normal(self, axis, tol: float = 1e-10) -> float:
        """Angle whose inward normal points along the given unit direction."""
        axis = np.asarray(axis, dtype=float)
        target_psi = float(np.arctan2(axis[1], axis[0])) - 0.5 * np.pi
        psi0 = float(self.tangent_angle(0.0))
        target = psi0 + np.mod(target_psi - psi0, TWO_PI)
        x = self.solve_tangent_angle(np.atleast_1d(target),
                                     np.atleast_1d(1e-12),
                                     np.atleast_1d(TWO_PI - 1e-12), tol=tol)
        return float(np.mod(x[0], TWO_PI))

    def _antipodal_arclen_table(self):
        """Lifted arc-coordinate antipodal map on a dense grid, for interp."""
        if self._antipodal_table is None:
            n = self.spec.sample_count
            s_grid = np.linspace(0.0, self.length, n, endpoint=False)
            a_phi = self.antipodal(self.phi_at_arclen(s_grid))
            a_s = np.asarray(self.arclen(a_phi))
            # the map is increasing; lift wraps so interp sees a monotone table
            lift = np.cumsum(np.r_[0.0, (np.diff(a_s) < 0.0) * self.length])
            a_lift = a_s + lift
            s_ext = np.append(s_grid, self.length)
            a_ext = np.append(a_lift, a_lift[0] + self.length)
            self._antipodal_table = (s_ext, a_ext)
        return self._antipodal_table

    def antipodal_arclen(self, s):
        """Arc coordinate of the antipodal point, by table interpolation.

        Accurate to about (length/sample_count)^2; use :meth:`antipodal`
        when full precision is needed.
        """
        s_ext, a_ext = self._antipodal_arclen_table()
        s = np.mod(np.asarray(s, dtype=float), self.length)
        return np.mod(np.interp(s, s_ext, a_ext), self.length)

    # ------------------------------------------------------------------
    # local graph and dispersion

    def local_graph(self, phi: float, s: float) -> float:
        """Normal offset x with k + s*t_k + x*n_k on the curve, near k.

        The chart is restricted to |s| <= 0.1 / kappa_max, where the
        tangential coordinate is strictly monotone along the curve.
        """
        s = float(s)
        s_max = 0.1 / self.kappa_max
        if abs(s) > s_max:
            raise OutOfChartError(f"|s| = {abs(s):.6g} exceeds chart radius {s_max:.6g}")
        k = self.position(phi)
        t = self.tangent(phi)
        n = np.array([-t[1], t[0]])
        x = float(phi)
        for _ in range(60):
            diff = self.position(x) - k
            f = float(diff @ t) - s
            if abs(f) <= 1e-14 * max(1.0, abs(s)):
                break
            du = float(self.velocity(x) @ t)
            x -= f / du
        else:
            raise ConvergenceFailureError("local graph solve did not converge")
        return float((self.position(x) - k) @ n)

    def dispersion(self, k):
        """Signed distance proxy |k| - r(arg k); zero exactly on the curve."""
        k = np.asarray(k, dtype=float)
        mag = np.linalg.norm(k, axis=-1)
        if np.any(mag == 0.0):
            raise OriginSingularError("dispersion undefined at the origin")
        ang = np.arctan2(k[..., 1], k[..., 0])
        return mag - self.radius(ang)

    # ------------------------------------------------------------------
    # symmetry diagnostics

    def classify_symmetry(self) -> SymmetryReport:
        if self._symmetry is None:
            self._symmetry = self._classify_symmetry()
        return self._symmetry

    @property
    def centrally_symmetric(self) -> bool:
        return self.classify_symmetry().centrally_symmetric

    def _classify_symmetry(self) -> SymmetryReport:
        grid = self._grid
        r = self._radial_all(grid)[0]

        central_residual = float(np.max(np.abs(self._radial_all(grid + np.pi)[0] - r)))
        centrally = central_residual < _SYMMETRY_TOL
        continuous = float(np.max(r) - np.min(r)) < _SYMMETRY_TOL

        dihedral = None
        axis = None
        if not continuous:
            axis = self._find_reflection_axis(grid, r)
            if axis is not None:
                for m in range(_MAX_DIHEDRAL, 0, -1):
                    rot = np.max(np.abs(self._radial_all(grid + TWO_PI / m)[0] - r))
                    if rot < _SYMMETRY_TOL:
                        dihedral = m
                        break

        margin = float(np.min(np.abs(
            self.curvature(grid) - self.curvature(self.antipodal(grid)))))

        if continuous:
            classification = "circle"
        elif centrally:
            classification = "centrally_symmetric"
        elif dihedral is not None and dihedral >= 3 and dihedral % 2 == 1:
            classification = "quasi_symmetric"
        elif margin > _SYMMETRY_TOL:
            classification = "strongly_asymmetric"
        else:
            classification = "quasi_asymmetric"

        return SymmetryReport(
            centrally_symmetric=centrally,
            central_residual=central_residual,
            continuous_rotation=continuous,
            dihedral_order=dihedral,
            reflection_axis=axis,
            asymmetry_margin_min=margin,
            classification=classification,
        )

    def _find_reflection_axis(self, grid, r) -> Optional[float]:
        """Best axis angle beta with r(2*beta - phi) = r(phi), or None."""
        coarse = grid[:: max(1, len(grid) // 1024)]
        r_coarse = self._radial_all(coarse)[0]
        betas = np.linspace(0.0, np.pi, 720, endpoint=False)
        resid = np.array([
            np.max(np.abs(self._radial_all(2.0 * b - coarse)[0] - r_coarse))
            for b in betas
        ])
        b0 = betas[int(np.argmin(resid))]
        res = minimize_scalar(
            lambda b: np.max(np.abs(self._radial_all(2.0 * b - grid)[0] - r)),
            bounds=(b0 - 0.01, b0 + 0.01), method="bounded",
            options={"xatol": 1e-12})
        return float(res.x) if res.fun < _SYMMETRY_TOL else None


def _polar_curvature(r, r1, r2):
    """Curvature of a polar graph: (r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^1.5."""
    num = r * r + 2.0 * r1 * r1 - r * r2
    den = (r * r + r1 * r1) ** 1.5
    return num / den


def make_curve(spec: CurveSpec) -> Curve:
    """Validate a spec and build the curve with its cached tables.

    Raises NonPositiveRadiusError or NonConvexError for inadmissible
    profiles.
    """
    return Curve(spec)
