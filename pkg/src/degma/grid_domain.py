"""Convex domains, Dirichlet traces, uniform masked grids, and discrete calculus.

Conventions used throughout the package:

* Fields live on uniform Cartesian grids covering the bounding box of a
  convex domain.  Arrays are indexed ``values[i, j]`` with ``i`` along x and
  ``j`` along y; node coordinates are ``x = x0 + i*spacing``,
  ``y = y0 + j*spacing``.
* A node mask distinguishes EXTERIOR nodes (outside the domain, never read
  by calculus), BOUNDARY nodes (inside, but with an exterior 4-neighbor)
  and INTERIOR nodes.
* ``nu`` denotes the outward unit normal to the level sets of a field
  (direction of increasing values), ``tau`` its +90-degree rotation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FloatArray = np.ndarray

EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2

_MIN_NODES = 16


class ConvexityError(ValueError):
    """Raised when a domain fails its convexity certificate."""


@dataclass(frozen=True)
class ConvexDomain:
    """A bounded convex domain: disk, axis-aligned ellipse, or convex polygon.

    Polygon vertices must be listed in order (either orientation); convexity
    is certified at construction by checking that the cross products of
    consecutive edges share one sign.
    """

    kind: str                       # "disk" | "ellipse" | "polygon"
    center: tuple[float, float] = (0.0, 0.0)
    radii: tuple[float, float] = (1.0, 1.0)   # disk uses radii[0]
    vertices: Optional[FloatArray] = None     # polygon only, shape (m, 2)

    def __post_init__(self) -> None:
        if self.kind == "disk":
            if self.radii[0] <= 0:
                raise ValueError(f"degenerate domain: disk radius {self.radii[0]} (zero area)")
        elif self.kind == "ellipse":
            if min(self.radii) <= 0:
                raise ValueError(f"degenerate domain: ellipse radii {self.radii}")
        elif self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise ValueError("polygon needs at least 3 vertices of shape (m, 2)")
            object.__setattr__(self, "vertices", v)
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(np.abs(cross) < 1e-14 * np.max(np.abs(v)) ** 2):
                raise ConvexityError("not convex: collinear or repeated polygon vertices")
            if not (np.all(cross > 0) or np.all(cross < 0)):
                raise ConvexityError("not convex: polygon has a reflex vertex")
            if np.abs(cross.sum()) <= 0:
                raise ValueError("degenerate domain: polygon has zero area")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    # -- geometry ---------------------------------------------------------

    @classmethod
    def disk(cls, radius: float, center: tuple[float, float] = (0.0, 0.0)) -> "ConvexDomain":
        return cls(kind="disk", center=center, radii=(radius, radius))

    @classmethod
    def ellipse(cls, a: float, b: float, center: tuple[float, float] = (0.0, 0.0)) -> "ConvexDomain":
        return cls(kind="ellipse", center=center, radii=(a, b))

    @classmethod
    def polygon(cls, vertices) -> "ConvexDomain":
        v = np.asarray(vertices, dtype=float)
        c = v.mean(axis=0)
        return cls(kind="polygon", center=(float(c[0]), float(c[1])), vertices=v)

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        cx, cy = self.center
        if self.kind in ("disk", "ellipse"):
            a, b = self.radii if self.kind == "ellipse" else (self.radii[0], self.radii[0])
            return (cx - a, cx + a, cy - b, cy + b)
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 0].max()),
                float(v[:, 1].min()), float(v[:, 1].max()))

    def contains(self, x: FloatArray, y: FloatArray) -> np.ndarray:
        """Strict interior test, vectorized."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        cx, cy = self.center
        if self.kind == "disk":
            r = self.radii[0]
            return (x - cx) ** 2 + (y - cy) ** 2 < r * r
        if self.kind == "ellipse":
            a, b = self.radii
            return ((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 < 1.0
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        orient = np.sign(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        for k in range(v.shape[0]):
            s = (x - v[k, 0]) * e[k, 1] - (y - v[k, 1]) * e[k, 0]
            inside &= orient * s < 0
        return inside

    def boundary_crossing(self, px: FloatArray, py: FloatArray,
                          qx: FloatArray, qy: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Crossing of segments P->Q with the boundary, P inside and Q outside.

        Returns (s, cx, cy) with s in (0, 1] the segment fraction.  Bisection;
        valid for any convex domain since the segment crosses exactly once.
        """
        px, py = np.asarray(px, float), np.asarray(py, float)
        qx, qy = np.asarray(qx, float), np.asarray(qy, float)
        lo = np.zeros_like(px)
        hi = np.ones_like(px)
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            inside = self.contains(px + mid * (qx - px), py + mid * (qy - py))
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        s = 0.5 * (lo + hi)
        return s, px + s * (qx - px), py + s * (qy - py)

    def boundary_angle(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Angle of a point about the domain center (boundary parameter)."""
        cx, cy = self.center
        return np.arctan2(np.asarray(y, float) - cy, np.asarray(x, float) - cx)

    def boundary_point(self, angle: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Boundary point in direction ``angle`` from the center (star parametrization)."""
        angle = np.asarray(angle, float)
        cx, cy = self.center
        if self.kind == "disk":
            r = self.radii[0]
            return cx + r * np.cos(angle), cy + r * np.sin(angle)
        if self.kind == "ellipse":
            a, b = self.radii
            # radial ray from the center: scale until the ellipse is hit
            c, s = np.cos(angle), np.sin(angle)
            t = 1.0 / np.sqrt((c / a) ** 2 + (s / b) ** 2)
            return cx + t * c, cy + t * s
        far = 2.0 * max(abs(v) for v in self.bounding_box()) + 1.0
        qx = cx + far * np.cos(angle)
        qy = cy + far * np.sin(angle)
        ones = np.ones_like(angle)
        _, bx, by = self.boundary_crossing(cx * ones, cy * ones, qx, qy)
        return bx, by

    def in_unit_ball(self) -> bool:
        """On-demand check that the domain sits inside the unit ball at the origin."""
        xmin, xmax, ymin, ymax = self.bounding_box()
        if self.kind == "polygon":
            return bool(np.all(np.hypot(self.vertices[:, 0], self.vertices[:, 1]) < 1.0))
        ang = np.linspace(-np.pi, np.pi, 720, endpoint=False)
        bx, by = self.boundary_point(ang)
        return bool(np.all(np.hypot(bx, by) < 1.0))


@dataclass
class BoundaryData:
    """Dirichlet trace of the density on the domain boundary.

    Stores strictly positive density values phi at boundary sample angles and
    the matching pressure trace ``phibar = q^(2/3) * phi^(1/q)``.  Queries
    interpolate periodically in the angle parameter.
    """

    domain: ConvexDomain
    angles: FloatArray          # sorted in (-pi, pi]
    phi: FloatArray
    q: float
    phibar: FloatArray = field(init=False)

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if np.any(self.phi <= 0):
            k = int(np.argmin(self.phi))
            raise ValueError(f"boundary density must be strictly positive; phi={self.phi[k]} at sample {k}")
        order = np.argsort(self.angles)
        self.angles = self.angles[order]
        self.phi = self.phi[order]
        self.phibar = self.q ** (2.0 / 3.0) * self.phi ** (1.0 / self.q)

    @classmethod
    def constant(cls, domain: ConvexDomain, value: float, q: float, samples: int = 256) -> "BoundaryData":
        ang = np.linspace(-np.pi, np.pi, samples, endpoint=False)
        return cls(domain, ang, np.full(samples, float(value)), q)

    @classmethod
    def from_function(cls, domain: ConvexDomain, fn: Callable[[FloatArray, FloatArray], FloatArray],
                      q: float, samples: int = 256) -> "BoundaryData":
        ang = np.linspace(-np.pi, np.pi, samples, endpoint=False)
        bx, by = domain.boundary_point(ang)
        return cls(domain, ang, np.asarray(fn(bx, by), dtype=float), q)

    def _interp(self, values: FloatArray, x: FloatArray, y: FloatArray) -> FloatArray:
        ang = self.domain.boundary_angle(x, y)
        a = np.concatenate([self.angles, [self.angles[0] + 2 * np.pi]])
        v = np.concatenate([values, [values[0]]])
        return np.interp(np.mod(ang - a[0], 2 * np.pi) + a[0], a, v)

    def density_at(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """phi at boundary points (x, y), periodic linear interpolation in angle."""
        return self._interp(self.phi, x, y)

    def pressure_at(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """phibar at boundary points (x, y)."""
        return self._interp(self.phibar, x, y)

    def check_consistency(self, rtol: float = 1e-12) -> None:
        """Pressure trace must equal the transform of the density trace."""
        expected = self.q ** (2.0 / 3.0) * self.phi ** (1.0 / self.q)
        err = np.max(np.abs(self.phibar - expected) / np.abs(expected))
        if err > rtol:
            raise ValueError(f"pressure trace inconsistent with density trace: rel err {err:.3e}")


@dataclass
class ScalarField2D:
    """A grid-sampled scalar on the bounding box of a convex domain."""

    x0: float
    y0: float
    spacing: float
    values: FloatArray          # shape (nx, ny), indexed [i, j]
    mask: np.ndarray            # int8, same shape; EXTERIOR/INTERIOR/BOUNDARY
    domain: Optional[ConvexDomain] = None

    def __post_init__(self) -> None:
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.values.shape != self.mask.shape:
            raise ValueError(f"values shape {self.values.shape} != mask shape {self.mask.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    def x(self) -> FloatArray:
        return self.x0 + self.spacing * np.arange(self.nx)

    def y(self) -> FloatArray:
        return self.y0 + self.spacing * np.arange(self.ny)

    def meshgrid(self) -> tuple[FloatArray, FloatArray]:
        return np.meshgrid(self.x(), self.y(), indexing="ij")

    def inside(self) -> np.ndarray:
        return self.mask != EXTERIOR

    def like(self, values: FloatArray) -> "ScalarField2D":
        """New field with the same grid metadata and fresh values."""
        return ScalarField2D(self.x0, self.y0, self.spacing,
                             np.array(values, dtype=float), self.mask.copy(), self.domain)

    def copy(self) -> "ScalarField2D":
        return self.like(self.values.copy())

    # -- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        """Row-major CSV with header x,y,value,mask and 17 significant digits."""
        X, Y = self.meshgrid()
        buf = io.StringIO()
        buf.write("x,y,value,mask\n")
        xf = X.ravel()
        yf = Y.ravel()
        vf = self.values.ravel()
        mf = self.mask.ravel()
        for k in range(xf.size):
            buf.write(f"{xf[k]:.17g},{yf[k]:.17g},{vf[k]:.17g},{int(mf[k])}\n")
        return buf.getvalue()


def make_grid(domain: ConvexDomain, n: int) -> ScalarField2D:
    """Uniform grid skeleton over the domain bounding box.

    ``n`` nodes span the box width, so ``spacing = width / (n - 1)``; enough
    rows are allocated at the same spacing to cover the box height.  The mask
    marks interior, boundary (inside with an exterior 4-neighbor) and
    exterior nodes.  Values start at zero.
    """
    if n < _MIN_NODES:
        raise ValueError(f"grid too small: n={n} < {_MIN_NODES}")
    xmin, xmax, ymin, ymax = domain.bounding_box()
    width = xmax - xmin
    height = ymax - ymin
    if width <= 0 or height <= 0:
        raise ValueError("degenerate domain: zero area bounding box")
    spacing = width / (n - 1)
    ny = int(np.ceil(height / spacing)) + 1
    X, Y = np.meshgrid(xmin + spacing * np.arange(n), ymin + spacing * np.arange(ny), indexing="ij")
    inside = domain.contains(X, Y)
    mask = np.where(inside, INTERIOR, EXTERIOR).astype(np.int8)
    # boundary band: inside nodes with an exterior axis neighbor (or on the grid rim)
    ext = ~inside
    rim = np.zeros_like(inside)
    rim[:1, :] = rim[-1:, :] = rim[:, :1] = rim[:, -1:] = True
    nbr_ext = rim.copy()
    nbr_ext[1:, :] |= ext[:-1, :]
    nbr_ext[:-1, :] |= ext[1:, :]
    nbr_ext[:, 1:] |= ext[:, :-1]
    nbr_ext[:, :-1] |= ext[:, 1:]
    mask[inside & nbr_ext] = BOUNDARY
    return ScalarField2D(xmin, ymin, spacing, np.zeros((n, ny)), mask, domain)


# -- discrete calculus ----------------------------------------------------


def _diff_axis(values: FloatArray, valid: np.ndarray, h: float, axis: int
               ) -> tuple[FloatArray, np.ndarray]:
    """Mask-aware first derivative along ``axis``.

    Central where both neighbors are valid (second order), one-sided where
    only one side is (first order, flagged), NaN elsewhere.
    """
    v = np.moveaxis(values, axis, 0)
    ok = np.moveaxis(valid, axis, 0)
    out = np.full_like(v, np.nan)
    degraded = np.zeros(v.shape, dtype=bool)

    okp = np.zeros_like(ok)
    okm = np.zeros_like(ok)
    okp[:-1] = ok[1:]
    okm[1:] = ok[:-1]
    vp = np.empty_like(v)
    vm = np.empty_like(v)
    vp[:-1] = v[1:]
    vm[1:] = v[:-1]

    central = ok & okp & okm
    out[central] = (vp[central] - vm[central]) / (2 * h)
    fwd = ok & okp & ~okm
    out[fwd] = (vp[fwd] - v[fwd]) / h
    bwd = ok & okm & ~okp
    out[bwd] = (v[bwd] - vm[bwd]) / h
    degraded[fwd | bwd] = True
    return np.moveaxis(out, 0, axis), np.moveaxis(degraded, 0, axis)


def _diff2_axis(values: FloatArray, valid: np.ndarray, h: float, axis: int
                ) -> tuple[FloatArray, np.ndarray]:
    """Mask-aware second derivative along ``axis`` (central, else one-sided 3-point)."""
    v = np.moveaxis(values, axis, 0)
    ok = np.moveaxis(valid, axis, 0)
    n = v.shape[0]
    out = np.full_like(v, np.nan)
    degraded = np.zeros(v.shape, dtype=bool)

    def shifted(arr, k):
        res = np.full_like(arr, np.nan if arr.dtype.kind == "f" else False)
        if k > 0:
            res[:-k] = arr[k:]
        elif k < 0:
            res[-k:] = arr[:k]
        else:
            res = arr
        return res

    okp1, okm1 = shifted(ok.astype(bool), 1), shifted(ok.astype(bool), -1)
    okp2, okm2 = shifted(ok.astype(bool), 2), shifted(ok.astype(bool), -2)
    vp1, vm1 = shifted(v, 1), shifted(v, -1)
    vp2, vm2 = shifted(v, 2), shifted(v, -2)

    central = ok & okp1 & okm1
    out[central] = (vp1[central] - 2 * v[central] + vm1[central]) / h**2
    fwd = ok & okp1 & okp2 & ~central
    out[fwd] = (v[fwd] - 2 * vp1[fwd] + vp2[fwd]) / h**2
    bwd = ok & okm1 & okm2 & ~central & ~fwd
    out[bwd] = (v[bwd] - 2 * vm1[bwd] + vm2[bwd]) / h**2
    degraded[fwd | bwd] = True
    return np.moveaxis(out, 0, axis), np.moveaxis(degraded, 0, axis)


@dataclass
class GradientField:
    gx: FloatArray
    gy: FloatArray
    first_order: np.ndarray     # True where a one-sided stencil was used

    def magnitude(self) -> FloatArray:
        return np.hypot(self.gx, self.gy)


@dataclass
class HessianField:
    fxx: FloatArray
    fxy: FloatArray
    fyy: FloatArray
    first_order: np.ndarray

    def det(self) -> FloatArray:
        return self.fxx * self.fyy - self.fxy**2

    def trace(self) -> FloatArray:
        return self.fxx + self.fyy


def gradient(f: ScalarField2D) -> GradientField:
    """Mask-aware gradient; second order at interior nodes, flagged first order at mask edges."""
    if min(f.shape) < 3:
        raise ValueError("gradient needs at least 3 nodes per axis")
    valid = f.inside()
    gx, dx = _diff_axis(f.values, valid, f.spacing, axis=0)
    gy, dy = _diff_axis(f.values, valid, f.spacing, axis=1)
    return GradientField(gx, gy, dx | dy)


def hessian(f: ScalarField2D) -> HessianField:
    """Mask-aware Hessian, symmetric by construction.

    The cross derivative is the symmetrized gradient-of-gradient, which
    reduces to the standard 4-point cross stencil at full interior nodes.
    """
    if min(f.shape) < 3:
        raise ValueError("hessian needs at least 3 nodes per axis")
    valid = f.inside()
    fxx, d1 = _diff2_axis(f.values, valid, f.spacing, axis=0)
    fyy, d2 = _diff2_axis(f.values, valid, f.spacing, axis=1)
    gx, dgx = _diff_axis(f.values, valid, f.spacing, axis=0)
    gy, dgy = _diff_axis(f.values, valid, f.spacing, axis=1)
    fxy1, d3 = _diff_axis(gx, valid & np.isfinite(gx), f.spacing, axis=1)
    fyx1, d4 = _diff_axis(gy, valid & np.isfinite(gy), f.spacing, axis=0)
    fxy = np.where(np.isfinite(fxy1) & np.isfinite(fyx1), 0.5 * (fxy1 + fyx1),
                   np.where(np.isfinite(fxy1), fxy1, fyx1))
    return HessianField(fxx, fxy, fyy, d1 | d2 | d3 | d4 | dgx | dgy)


@dataclass
class LevelFrame:
    """Unit outward normal / tangent to the level sets of a field.

    ``nu`` points in the direction of increasing field values; ``tau`` is
    ``nu`` rotated by +90 degrees.  Both are defined only where the gradient
    magnitude clears the floor.
    """

    nux: FloatArray
    nuy: FloatArray
    taux: FloatArray
    tauy: FloatArray
    defined: np.ndarray


def level_frame(g: ScalarField2D, floor: float = 1e-6) -> LevelFrame:
    """Normal/tangent frame of the level sets of g where |Dg| >= floor."""
    if floor <= 0:
        raise ValueError(f"gradient floor must be positive, got {floor}")
    grad = gradient(g)
    mag = grad.magnitude()
    defined = np.isfinite(mag) & (mag >= floor)
    with np.errstate(invalid="ignore", divide="ignore"):
        nux = np.where(defined, grad.gx / mag, np.nan)
        nuy = np.where(defined, grad.gy / mag, np.nan)
    return LevelFrame(nux, nuy, -nuy, nux, defined)


def directional_second(f: ScalarField2D, frame: LevelFrame,
                       hess: Optional[HessianField] = None
                       ) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Second derivatives in the level-set frame: (g_nn, g_nt, g_tt).

    g_nn = nu^T (D^2 g) nu, g_nt = nu^T (D^2 g) tau, g_tt = tau^T (D^2 g) tau.
    Undefined frame nodes yield NaN.
    """
    H = hess if hess is not None else hessian(f)
    nx_, ny_, tx, ty = frame.nux, frame.nuy, frame.taux, frame.tauy
    g_nn = H.fxx * nx_**2 + 2 * H.fxy * nx_ * ny_ + H.fyy * ny_**2
    g_nt = H.fxx * nx_ * tx + H.fxy * (nx_ * ty + ny_ * tx) + H.fyy * ny_ * ty
    g_tt = H.fxx * tx**2 + 2 * H.fxy * tx * ty + H.fyy * ty**2
    bad = ~frame.defined
    for arr in (g_nn, g_nt, g_tt):
        arr[bad] = np.nan
    return g_nn, g_nt, g_tt
