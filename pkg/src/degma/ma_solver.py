"""Projected nodewise solver for det D^2 f = h f^p with Dirichlet data.

Discretization: 9-point Hessian, det D^2 f = f_xx f_yy - f_xy^2.  Each sweep
solves, at every inside node, the discrete relation as a quadratic in the
center value u.  With arm-weighted second differences f_xx = Cx (ax - u),
f_yy = Cy (ay - u) and the cross term c frozen at neighboring values, the
equation becomes (ax - u)(ay - u) = (S + c^2)/(Cx Cy) with lagged source
S = h f_prev^p, and the root

    u = (ax + ay)/2 - sqrt(((ax - ay)/2)^2 + K)

is the one keeping both pure second differences nonnegative.  Boundary data
enters through cut-cell arms (Shortley-Weller): where a stencil arm crosses
the domain boundary, the Dirichlet value at the crossing is interpolated
onto the shortened arm.  Nonnegativity and the vanishing set are realized by
projecting f <- max(f, 0) after each sweep; where a node's Hessian leaves
the convex cone the update falls back to the monotone min over the two
orthogonal direction pairs (axis and diagonal) of products of second
differences.  Red-black coloring keeps sweeps vectorized.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import ConvexHull

from .grid_domain import (
    BOUNDARY,
    EXTERIOR,
    BoundaryData,
    ConvexDomain,
    FloatArray,
    ScalarField2D,
    gradient,
    hessian,
    make_grid,
)
from .transforms import ExponentPack, pressure_from_density, _fill_exterior

__all__ = ["SolveConfig", "ConvergenceReport", "PressureSolution", "Interface",
           "solve_ma", "extract_interface", "free_boundary_relation"]


@dataclass
class SolveConfig:
    """Sweep controls for the nodewise solver."""

    n: int = 129
    max_sweeps: int = 100000
    tol: float = 1e-10              # fixed-point tolerance: sup-norm of the sweep update
    omega: float = 1.3              # overrelaxation of the nodewise solve
    source_lag: str = "sweep"       # "sweep" | "halfsweep": when the source h f^p refreshes
    convexity_mode: str = "monotone-blend"   # "monotone-blend" | "off"
    nonconvex_threshold: float = 0.05        # tolerated fallback fraction at convergence
    lam: float = 1e-6               # lower forcing bound to enforce nodewise

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError(f"fixed-point tolerance must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"relaxation omega must lie in (0, 2), got {self.omega}")
        if self.source_lag not in ("sweep", "halfsweep"):
            raise ValueError(f"unknown source-lag mode {self.source_lag!r}")
        if self.convexity_mode not in ("monotone-blend", "off"):
            raise ValueError(f"unknown convexity-enforcement mode {self.convexity_mode!r}")


@dataclass
class ConvergenceReport:
    converged: bool
    sweeps: int
    final_update: float
    residual_sup: float             # |det D^2 f - h f^p| on the checked region
    nonconvex_nodes: int            # fallback nodes in the final sweep
    seconds: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


@dataclass
class Interface:
    """Closed free-boundary polyline with per-vertex curvature and pressure slope."""

    vertices: FloatArray            # (M, 2), angle-ordered
    kappa: FloatArray               # (M,)
    g_nu: FloatArray                # (M,)
    window_stride: int

    @property
    def size(self) -> int:
        return self.vertices.shape[0]

    def mean_radius(self, center=(0.0, 0.0)) -> float:
        return float(np.hypot(self.vertices[:, 0] - center[0],
                              self.vertices[:, 1] - center[1]).mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,kappa,gnu\n")
        for k in range(self.size):
            buf.write(f"{self.vertices[k, 0]:.17g},{self.vertices[k, 1]:.17g},"
                      f"{self.kappa[k]:.17g},{self.g_nu[k]:.17g}\n")
        return buf.getvalue()


@dataclass
class PressureSolution:
    """Solved density/pressure pair with its vanishing set and interface."""

    f: ScalarField2D
    g: ScalarField2D
    pack: ExponentPack
    h: ScalarField2D
    report: ConvergenceReport
    interface: Optional[Interface] = None
    boundary: Optional[BoundaryData] = None

    @property
    def spacing(self) -> float:
        return self.f.spacing

    def extended_pressure(self) -> ScalarField2D:
        """Pressure with exterior rim values extended through the boundary trace.

        Interpolants built from the raw masked field degrade within two cells
        of the outer boundary; extending linearly through the known pressure
        trace keeps ray fits and patch models clean all the way to the rim.
        Falls back to the raw field when no boundary data is attached.
        """
        if self.boundary is None or self.g.domain is None:
            return self.g
        return _extend_through_boundary(self.g, self.g.domain, self.boundary)

    def positivity_mask(self) -> np.ndarray:
        return (self.f.values > 0) & self.f.inside()

    def vanishing_mask(self) -> np.ndarray:
        return (self.f.values == 0) & self.f.inside()

    def distance_to_vanishing(self) -> FloatArray:
        """Distance (in length units) to the nearest vanishing node."""
        lam = self.vanishing_mask()
        if not lam.any():
            return np.full(self.f.shape, np.inf)
        return ndimage.distance_transform_edt(~lam) * self.spacing

    def distance_to_interface(self) -> FloatArray:
        """Distance to the extracted free-boundary polyline (sub-grid accurate).

        Node-center distances to the vanishing set overestimate the distance
        to the actual interface by up to one spacing; nodes within a few
        cells are refined against the polyline vertices.
        """
        edt = self.distance_to_vanishing()
        if self.interface is None or not np.isfinite(edt).any():
            return edt
        refine = edt <= 6.0 * self.spacing
        if not refine.any():
            return edt
        X, Y = self.f.meshgrid()
        px = X[refine]
        py = Y[refine]
        verts = self.interface.vertices
        out = edt.copy()
        d2 = np.full(px.shape, np.inf)
        for k0 in range(0, verts.shape[0], 64):
            chunk = verts[k0:k0 + 64]
            d2 = np.minimum(d2, ((px[:, None] - chunk[None, :, 0]) ** 2
                                 + (py[:, None] - chunk[None, :, 1]) ** 2).min(axis=1))
        out[refine] = np.sqrt(d2)
        return out

    def solution_csv(self) -> str:
        X, Y = self.f.meshgrid()
        buf = io.StringIO()
        buf.write("x,y,f,g,mask\n")
        xf, yf = X.ravel(), Y.ravel()
        ff, gf, mf = self.f.values.ravel(), self.g.values.ravel(), self.f.mask.ravel()
        for k in range(xf.size):
            buf.write(f"{xf[k]:.17g},{yf[k]:.17g},{ff[k]:.17g},{gf[k]:.17g},{int(mf[k])}\n")
        return buf.getvalue()


def _extend_through_boundary(g: ScalarField2D, domain: ConvexDomain,
                             boundary: BoundaryData) -> ScalarField2D:
    """Copy of g whose near-rim exterior nodes extend the pressure linearly
    through the Dirichlet trace along center rays; the mask marks them inside
    so downstream interpolants trust the values."""
    out = g.copy()
    ins = g.inside()
    ext = ~ins
    near = np.zeros_like(ins)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                sl_src_i = slice(max(di, 0), g.nx + min(di, 0))
                sl_dst_i = slice(max(-di, 0), g.nx + min(-di, 0))
                sl_src_j = slice(max(dj, 0), g.ny + min(dj, 0))
                sl_dst_j = slice(max(-dj, 0), g.ny + min(-dj, 0))
                near[sl_dst_i, sl_dst_j] |= ins[sl_src_i, sl_src_j]
    ghost = ext & near
    if not ghost.any():
        return out
    X, Y = g.meshgrid()
    gx, gy = X[ghost], Y[ghost]
    ang = domain.boundary_angle(gx, gy)
    bxp, byp = domain.boundary_point(ang)
    phibar = boundary.pressure_at(bxp, byp)
    cx0, cy0 = domain.center
    un = np.hypot(gx - cx0, gy - cy0)
    ux = np.where(un > 0, (gx - cx0) / np.maximum(un, 1e-300), 1.0)
    uy = (gy - cy0) / np.maximum(un, 1e-300)
    dx = g.spacing
    depth = 1.6 * dx
    d_ghost = np.hypot(gx - bxp, gy - byp)
    mx = bxp - depth * ux
    my = byp - depth * uy
    ii = np.clip((mx - g.x0) / dx, 0, g.nx - 1 - 1e-9)
    jj = np.clip((my - g.y0) / dx, 0, g.ny - 1 - 1e-9)
    i0, j0 = ii.astype(int), jj.astype(int)
    tx, ty = ii - i0, jj - j0
    gm = ((1 - tx) * (1 - ty) * g.values[i0, j0] + tx * (1 - ty) * g.values[i0 + 1, j0]
          + (1 - tx) * ty * g.values[i0, j0 + 1] + tx * ty * g.values[i0 + 1, j0 + 1])
    cell_ok = ins[i0, j0] & ins[i0 + 1, j0] & ins[i0, j0 + 1] & ins[i0 + 1, j0 + 1]
    vals = np.where(cell_ok, phibar + (d_ghost / depth) * (phibar - gm), phibar)
    out.values[ghost] = vals
    out.mask[ghost] = BOUNDARY
    return out


# -- initialization ---------------------------------------------------------


def _convex_hull_interpolation(grid: ScalarField2D, domain: ConvexDomain,
                               boundary: BoundaryData, samples: int = 256) -> FloatArray:
    """Lower convex envelope of the boundary data, clipped at zero.

    The envelope at P is the max over the downward facets of the convex hull
    of the lifted boundary samples (x, y, phi); for constant data it reduces
    to the constant.
    """
    ang = np.linspace(-np.pi, np.pi, samples, endpoint=False)
    bx, by = domain.boundary_point(ang)
    phi = boundary.density_at(bx, by)
    X, Y = grid.meshgrid()
    if phi.max() - phi.min() < 1e-12 * max(phi.max(), 1.0):
        return np.full(grid.shape, max(phi.max(), 0.0))
    pts = np.column_stack([bx, by, phi])
    hull = ConvexHull(pts)
    vals = np.full(grid.shape, -np.inf)
    for eq in hull.equations:          # eq: a*x + b*y + c*z + d = 0, outward normal
        a, b, c, d = eq
        if c >= -1e-12:                # keep downward-facing facets only
            continue
        vals = np.maximum(vals, -(a * X + b * Y + d) / c)
    return np.clip(vals, 0.0, None)


# -- sweep machinery --------------------------------------------------------


class _Stencil:
    """Static geometry of the sweep: arms, Dirichlet values, ghost fill."""

    def __init__(self, grid: ScalarField2D, domain: ConvexDomain, boundary: BoundaryData):
        self.spacing = dx = grid.spacing
        ins = grid.inside()
        self.inside = ins
        nxg, nyg = grid.shape
        X, Y = grid.meshgrid()

        def shift(arr, di, dj, fill):
            out = np.full_like(arr, fill)
            src_i = slice(max(di, 0), nxg + min(di, 0))
            dst_i = slice(max(-di, 0), nxg + min(-di, 0))
            src_j = slice(max(dj, 0), nyg + min(dj, 0))
            dst_j = slice(max(-dj, 0), nyg + min(-dj, 0))
            out[dst_i, dst_j] = arr[src_i, src_j]
            return out

        self._shift = shift
        self.arm = {}
        self.dval = {}
        for name, (di, dj) in {"E": (1, 0), "W": (-1, 0), "N": (0, 1), "S": (0, -1)}.items():
            nbr_in = shift(ins, di, dj, False)
            cut = ins & ~nbr_in
            arm = np.full(grid.shape, dx)
            dval = np.zeros(grid.shape)
            if cut.any():
                px, py = X[cut], Y[cut]
                qx, qy = px + di * dx, py + dj * dx
                s, cx, cy = domain.boundary_crossing(px, py, qx, qy)
                s = np.clip(s, 1e-6, 1.0)
                arm[cut] = s * dx
                dval[cut] = boundary.density_at(cx, cy)
            self.arm[name] = arm
            self.dval[name] = dval
            setattr(self, f"cut{name}", cut)

        # ghost values for diagonal reads: exterior nodes 8-adjacent to an inside
        # node, extrapolated through the boundary by reflection,
        # ghost = 2*phi(proj) - f(mirror), so cross terms stay consistent at the rim
        ext = ~ins
        near = np.zeros_like(ins)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    near |= shift(ins, di, dj, False)
        self.ghost = ext & near
        gx, gy = X[self.ghost], Y[self.ghost]
        ang = domain.boundary_angle(gx, gy)
        bxp, byp = domain.boundary_point(ang)
        self.ghost_phi = boundary.density_at(bxp, byp)
        # anchor point a fixed depth inside along the center ray; the ghost is the
        # linear extension of f through the boundary value along that ray
        cx0, cy0 = domain.center
        ux = np.where(np.hypot(gx - cx0, gy - cy0) > 0, (gx - cx0), 1.0)
        uy = gy - cy0
        un = np.hypot(ux, uy)
        ux, uy = ux / un, uy / un
        depth = 1.6 * dx
        d_ghost = np.hypot(gx - bxp, gy - byp)
        mx = bxp - depth * ux
        my = byp - depth * uy
        self._m_ratio = d_ghost / depth
        ii = np.clip((mx - grid.x0) / dx, 0, nxg - 1 - 1e-9)
        jj = np.clip((my - grid.y0) / dx, 0, nyg - 1 - 1e-9)
        i0, j0 = ii.astype(int), jj.astype(int)
        self._m_idx = (i0, j0)
        self._m_wts = (ii - i0, jj - j0)
        # only extrapolate where the whole bilinear cell is inside; else keep phi(proj)
        cell_ok = ins[i0, j0] & ins[i0 + 1, j0] & ins[i0, j0 + 1] & ins[i0 + 1, j0 + 1]
        self._m_ok = cell_ok

        # nodes whose full 8-point stencil lies inside (cone test applies here;
        # ghost-backed rim nodes always take the accurate update)
        full8 = ins.copy()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    full8 &= shift(ins, di, dj, False)
        self.full8 = full8

        self.red = ((np.indices(grid.shape).sum(axis=0)) % 2 == 0) & ins
        self.black = ins & ~self.red

    def with_ghosts(self, values: FloatArray) -> FloatArray:
        out = values.copy()
        i0, j0 = self._m_idx
        tx, ty = self._m_wts
        fm = ((1 - tx) * (1 - ty) * values[i0, j0] + tx * (1 - ty) * values[i0 + 1, j0]
              + (1 - tx) * ty * values[i0, j0 + 1] + tx * ty * values[i0 + 1, j0 + 1])
        extrapolated = self.ghost_phi + self._m_ratio * (self.ghost_phi - fm)
        out[self.ghost] = np.where(self._m_ok, extrapolated, self.ghost_phi)
        return out


def _half_sweep(f: FloatArray, color: np.ndarray, st: _Stencil, S: FloatArray,
                cfg: SolveConfig) -> tuple[FloatArray, int]:
    dx = st.spacing
    sh = st._shift
    fg = st.with_ghosts(f)
    vE = np.where(st.cutE, st.dval["E"], sh(f, 1, 0, 0.0))
    vW = np.where(st.cutW, st.dval["W"], sh(f, -1, 0, 0.0))
    vN = np.where(st.cutN, st.dval["N"], sh(f, 0, 1, 0.0))
    vS = np.where(st.cutS, st.dval["S"], sh(f, 0, -1, 0.0))
    hE, hW, hN, hS = st.arm["E"], st.arm["W"], st.arm["N"], st.arm["S"]

    ax = (hW * vE + hE * vW) / (hE + hW)
    Cx = 2.0 / (hE * hW)
    ay = (hS * vN + hN * vS) / (hN + hS)
    Cy = 2.0 / (hN * hS)

    fNE, fSW = sh(fg, 1, 1, 0.0), sh(fg, -1, -1, 0.0)
    fNW, fSE = sh(fg, -1, 1, 0.0), sh(fg, 1, -1, 0.0)
    c = (fNE + fSW - fNW - fSE) / (4.0 * dx * dx)

    K = (S + c * c) / (Cx * Cy)
    u_acc = 0.5 * (ax + ay) - np.sqrt(0.25 * (ax - ay) ** 2 + K)

    nonconvex = 0
    if cfg.convexity_mode == "monotone-blend":
        # cone test at the current center value: a node whose axis or diagonal
        # second differences are negative has left the convex cone and takes
        # the monotone (cross-term-free) update instead.  Nodes bordering the
        # vanishing set are exempt: the clipped kink makes midpoint tests
        # vacuous there and the nonnegativity projection governs.
        ad = 0.5 * (fNE + fSW)
        bd = 0.5 * (fNW + fSE)
        zero_nbr = ((sh(f, 1, 0, 1.0) <= 0) | (sh(f, -1, 0, 1.0) <= 0)
                    | (sh(f, 0, 1, 1.0) <= 0) | (sh(f, 0, -1, 1.0) <= 0)
                    | (fNE <= 0) | (fSW <= 0) | (fNW <= 0) | (fSE <= 0))
        tol_cone = 1e-10
        bad = color & st.full8 & ~zero_nbr & ((ax - f < -tol_cone) | (ay - f < -tol_cone)
                                              | (ad - f < -tol_cone) | (bd - f < -tol_cone))
        if bad.any():
            K0 = S / (Cx * Cy)
            u_ax = 0.5 * (ax + ay) - np.sqrt(0.25 * (ax - ay) ** 2 + K0)
            u_dg = 0.5 * (ad + bd) - np.sqrt(0.25 * (ad - bd) ** 2 + S * dx**4)
            u_mono = np.minimum(u_ax, u_dg)
            u_acc = np.where(bad, u_mono, u_acc)
            nonconvex = int(np.count_nonzero(bad))

    out = f.copy()
    out[color] = f[color] + cfg.omega * (u_acc[color] - f[color])
    return out, nonconvex


def _lagged_source(h: FloatArray, f: FloatArray, p: float) -> FloatArray:
    return h * np.maximum(f, 0.0) ** p


def solve_ma(domain: ConvexDomain, boundary: BoundaryData, h: ScalarField2D,
             pack: ExponentPack, cfg: SolveConfig,
             init: Optional[ScalarField2D] = None,
             extract: bool = True) -> PressureSolution:
    """Solve det D^2 f = h f^p on the domain with Dirichlet density data.

    ``init`` warm-starts the sweep (e.g. with a supersolution); the default
    start is the convex-hull interpolation of the boundary data clipped at
    zero, which begins above the solution and descends.
    """
    grid = make_grid(domain, cfg.n)
    if h.shape != grid.shape:
        raise ValueError(f"forcing grid {h.shape} does not match solve grid {grid.shape}")
    ins = grid.inside()
    hv = h.values
    hmin = float(hv[ins].min())
    hmax = float(hv[ins].max())
    if hmin <= cfg.lam or hmax >= 1.0 / cfg.lam:
        raise ValueError(
            "forcing violates the bound 0 < lambda < h < 1/lambda nodewise: "
            f"range [{hmin:.4g}, {hmax:.4g}] with lambda={cfg.lam:.4g}")
    boundary.check_consistency()

    st = _Stencil(grid, domain, boundary)
    if init is not None:
        if init.shape != grid.shape:
            raise ValueError(f"init grid {init.shape} does not match solve grid {grid.shape}")
        f = np.clip(init.values.copy(), 0.0, None)
    else:
        f = _convex_hull_interpolation(grid, domain, boundary)
    f[~ins] = 0.0

    t0 = time.perf_counter()
    sweeps_used = cfg.max_sweeps
    update = math.inf
    nonconvex = 0
    converged = False
    for sweep in range(1, cfg.max_sweeps + 1):
        f_start = f
        S = _lagged_source(hv, f_start, pack.p)
        f1, nc1 = _half_sweep(f_start, st.red, st, S, cfg)
        if cfg.source_lag == "halfsweep":
            S = _lagged_source(hv, f1, pack.p)
        f2, nc2 = _half_sweep(f1, st.black, st, S, cfg)
        f = np.maximum(f2, 0.0)
        f[~ins] = 0.0
        update = float(np.max(np.abs(f - f_start)))
        nonconvex = nc1 + nc2
        if update < cfg.tol:
            sweeps_used = sweep
            converged = True
            break

    n_inside = int(np.count_nonzero(ins))
    if nonconvex > cfg.nonconvex_threshold * n_inside:
        raise RuntimeError(
            f"convexity enforcement active at {nonconvex}/{n_inside} nodes at termination "
            f"(threshold {cfg.nonconvex_threshold:.2%})")

    ffield = grid.like(f)
    gfield = pressure_from_density(ffield, pack)
    residual = _equation_residual_sup(ffield, gfield, hv, pack)
    report = ConvergenceReport(converged=converged, sweeps=sweeps_used,
                               final_update=update, residual_sup=residual,
                               nonconvex_nodes=nonconvex,
                               seconds=time.perf_counter() - t0)
    sol = PressureSolution(f=ffield, g=gfield, pack=pack, h=h, report=report,
                           boundary=boundary)
    if extract and sol.vanishing_mask().any():
        try:
            sol.interface = extract_interface(sol)
        except ValueError:
            sol.interface = None
    return sol


def _stencil_clean(inside: np.ndarray, cells: int = 2) -> np.ndarray:
    """Erosion of the inside set: nodes whose full (2*cells+1)^2 footprint is inside."""
    out = inside.copy()
    for _ in range(cells):
        nxt = out.copy()
        nxt[1:, :] &= out[:-1, :]
        nxt[:-1, :] &= out[1:, :]
        nxt[:, 1:] &= out[:, :-1]
        nxt[:, :-1] &= out[:, 1:]
        nxt[:1, :] = nxt[-1:, :] = nxt[:, :1] = nxt[:, -1:] = False
        out = nxt
    return out


def _equation_residual_sup(f: ScalarField2D, g: ScalarField2D, hv: FloatArray,
                           pack: ExponentPack) -> float:
    """sup |det D^2 f - h f^p| over stencil-clean positivity nodes >= 3 spacings from the interface.

    Stencil-clean means the full 5x5 Hessian footprint lies inside the domain,
    so the check is independent of the cut-cell rim treatment.
    """
    H = hessian(f)
    det = H.det()
    res = np.abs(det - hv * np.maximum(f.values, 0.0) ** pack.p)
    lam = (f.values == 0) & f.inside()
    if lam.any():
        dist = ndimage.distance_transform_edt(~lam) * f.spacing
    else:
        dist = np.full(f.shape, np.inf)
    region = (f.values > 0) & _stencil_clean(f.inside()) \
        & ~H.first_order & (dist >= 3 * f.spacing) & np.isfinite(res)
    return float(res[region].max()) if region.any() else float("nan")


# -- interface extraction ---------------------------------------------------


def _circle_curvature(pts: FloatArray) -> float:
    """Curvature 1/R of the least-squares circumscribed circle through the points."""
    x, y = pts[:, 0], pts[:, 1]
    A = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    b = x**2 + y**2
    (cx, cy, c), *_ = np.linalg.lstsq(A, b, rcond=None)
    r2 = c + cx**2 + cy**2
    if r2 <= 0:
        return 0.0
    return 1.0 / math.sqrt(r2)


def extract_interface(sol: PressureSolution, n_ray: int = 10,
                      ray_start: float = 2.0, ray_end: float = 8.0,
                      window_fraction: float = 1.0 / 12.0) -> Interface:
    """Extract the free boundary from the pressure level set g = eps0.

    Grid-edge crossings of the level eps0 = 2*spacing*max|Dg| are extrapolated
    along the gradient direction to g = 0 by a quadratic fit of ray samples
    taken between ``ray_start`` and ``ray_end`` grid spacings outside each
    crossing (the offset keeps the fit clear of interpolation artifacts at
    the pressure kink); crossings are ordered by angle around the
    vanishing-set centroid into a closed polyline.  Curvature uses
    circumscribed-circle differencing over a 5-vertex window whose stride
    spreads the window over about ``window_fraction`` of the perimeter for
    noise control; the pressure slope at each vertex is the fitted gradient
    at the extrapolated root.
    """
    g = sol.g
    dx = g.spacing
    lam = sol.vanishing_mask()
    if not lam.any():
        raise ValueError("empty vanishing set: no interface to extract")
    li, lj = np.nonzero(lam)
    if max(li.max() - li.min(), lj.max() - lj.min()) < 2:
        raise ValueError("vanishing set smaller than 2 cells: interface not resolved")
    ext_adjacent = lam & _dilate(g.mask == EXTERIOR)
    if ext_adjacent.any():
        raise ValueError("vanishing set touches the outer boundary: open interface unsupported")

    grad = gradient(g)
    mag = grad.magnitude()
    gmax = float(np.nanmax(mag[np.isfinite(mag)]))
    eps0 = 2.0 * dx * gmax

    gv = g.values
    ins = g.inside()
    sgn = gv - eps0
    crossings = []
    # axis edges with a sign change, both endpoints inside
    for axis in (0, 1):
        a = sgn
        b = np.roll(sgn, -1, axis=axis)
        ok = ins & np.roll(ins, -1, axis=axis)
        if axis == 0:
            ok[-1, :] = False
        else:
            ok[:, -1] = False
        cross = ok & (a * b < 0)
        ii, jj = np.nonzero(cross)
        t = a[cross] / (a[cross] - b[cross])
        if axis == 0:
            cx = g.x0 + (ii + t) * dx
            cy = g.y0 + jj * dx
        else:
            cx = g.x0 + ii * dx
            cy = g.y0 + (jj + t) * dx
        crossings.append(np.column_stack([cx, cy]))
    pts = np.vstack(crossings)
    if pts.shape[0] < 8:
        raise ValueError(f"only {pts.shape[0]} level crossings found: interface not resolved")

    gext = sol.extended_pressure()
    gsp = RectBivariateSpline(gext.x(), gext.y(), _fill_exterior(gext), kx=3, ky=3, s=0)

    cx_lam = (g.x0 + li.mean() * dx, g.y0 + lj.mean() * dx)
    ang = np.arctan2(pts[:, 1] - cx_lam[1], pts[:, 0] - cx_lam[0])
    order = np.argsort(ang)
    pts = pts[order]

    # outward ray extrapolation to g = 0 at each crossing
    tgrid = np.linspace(ray_start * dx, ray_end * dx, n_ray)
    verts = np.empty_like(pts)
    g_nu = np.empty(pts.shape[0])
    t_min = -(ray_start + 6.0) * dx
    for k, (px, py) in enumerate(pts):
        nx_ = gsp.ev(px, py, dx=1)
        ny_ = gsp.ev(px, py, dy=1)
        nn = math.hypot(nx_, ny_)
        nx_, ny_ = nx_ / nn, ny_ / nn
        sx = px + tgrid * nx_
        sy = py + tgrid * ny_
        gs = gsp.ev(sx, sy)
        A = np.vander(tgrid, 3, increasing=True)
        c0, c1, c2 = np.linalg.lstsq(A, gs, rcond=None)[0]
        if abs(c2) < 1e-14:
            t_root = -c0 / c1
        else:
            disc = c1**2 - 4 * c0 * c2
            t_root = (-c1 + math.sqrt(max(disc, 0.0))) / (2 * c2)
            if not t_min < t_root <= tgrid[0]:
                t_root = (-c1 - math.sqrt(max(disc, 0.0))) / (2 * c2)
        t_root = float(np.clip(t_root, t_min, tgrid[0]))
        verts[k] = (px + t_root * nx_, py + t_root * ny_)
        g_nu[k] = c1 + 2 * c2 * t_root

    m = verts.shape[0]
    stride = max(1, int(round(window_fraction * m / 4.0)))
    kappa = np.empty(m)
    for k in range(m):
        idx = [(k + s * stride) % m for s in (-2, -1, 0, 1, 2)]
        kappa[k] = _circle_curvature(verts[idx])
    return Interface(vertices=verts, kappa=kappa, g_nu=g_nu, window_stride=stride)


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def free_boundary_relation(iface: Interface, h: ScalarField2D,
                           pack: ExponentPack) -> FloatArray:
    """Per-vertex residual of the interface balance theta * g_nu^3 * kappa = h."""
    hsp = RectBivariateSpline(h.x(), h.y(), _fill_exterior(h), kx=1, ky=1, s=0)
    hv = hsp.ev(iface.vertices[:, 0], iface.vertices[:, 1])
    return pack.theta * iface.g_nu**3 * iface.kappa - hv
