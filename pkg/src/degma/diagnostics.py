"""A-priori estimate quantities and identity checks for candidate solutions.

Everything here evaluates, it never solves: the degenerate operator

    P[g] = g det D^2 g + theta (g_y^2 g_xx - 2 g_x g_y g_xy + g_x^2 g_yy),

sub/super/solution classification against a forcing h, the comparison
principle as a checkable property, the second-order quantities that stay
uniformly bounded up to the free boundary (the frame matrix M, the
rotation-invariant G, the directional maximum Q, the defect Z), and the
hodograph-side coefficient bounds (matrix A, drift b) with their identity
cross-checks.  Interface-limit values are taken by one-sided extrapolation
from interior layers; all nodewise scans are restricted to a stencil-clean
region a fixed number of cells away from the free boundary, where second
differences of the pressure are trustworthy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RectBivariateSpline

from .grid_domain import FloatArray, ScalarField2D, gradient, hessian, level_frame, directional_second
from .ma_solver import (
    Interface,
    PressureSolution,
    _stencil_clean,
    extract_interface,
    free_boundary_relation,
)
from .transforms import (
    ExponentPack,
    HodographPatch,
    build_hodograph_patch,
    hodograph_residual,
    patch_holder_seminorms,
)

__all__ = ["EstimateReport", "PatchReport", "Classification", "ComparisonResult",
           "operator_P", "classify", "comparison_check", "estimate_suite",
           "hodograph_suite", "linearized_apply", "default_patch_width"]

REPORT_SCHEMA_VERSION = 1


def operator_P(g: ScalarField2D, pack: ExponentPack) -> FloatArray:
    """Nodewise degenerate operator P[g]; NaN where second differences are unavailable.

    On vanishing nodes the first term drops and the value reduces to the
    interface limit theta g_nu^2 g_tautau automatically.
    """
    gr = gradient(g)
    H = hessian(g)
    G = gr.gy**2 * H.fxx - 2.0 * gr.gx * gr.gy * H.fxy + gr.gx**2 * H.fyy
    return g.values * H.det() + pack.theta * G


def _band_distance(sol_or_field) -> FloatArray:
    """Distance (length units) to the free boundary; +inf when there is none.

    Solutions with an extracted interface get sub-grid polyline distances;
    bare fields fall back to node distances to the vanishing set.
    """
    if isinstance(sol_or_field, PressureSolution):
        return sol_or_field.distance_to_interface()
    f = sol_or_field
    lam = (f.values == 0) & f.inside()
    if not lam.any():
        return np.full(f.shape, np.inf)
    return ndimage.distance_transform_edt(~lam) * f.spacing


@dataclass
class Classification:
    kind: str                    # "solution" | "supersolution" | "subsolution" | "neither"
    interior_excess: float       # max of P[g] - h over the scan region
    interior_deficit: float      # min of P[g] - h
    boundary_excess: float       # max of theta g_nu^3 kappa - h over interface vertices
    boundary_deficit: float
    convex_ok: bool
    witness_high: tuple          # node index of the worst interior excess
    witness_low: tuple


def _midpoint_convexity_ok(f: ScalarField2D, n_pairs: int = 10000,
                           seed: int = 0) -> tuple[bool, float]:
    """Sampled midpoint inequality f((P+Q)/2) <= (f(P)+f(Q))/2 + 2*dx*max|Df|."""
    rng = np.random.default_rng(seed)
    ins = np.argwhere(f.inside())
    idx1 = ins[rng.integers(0, len(ins), n_pairs)]
    idx2 = ins[rng.integers(0, len(ins), n_pairs)]
    mid = (idx1 + idx2) // 2
    ok_mid = f.inside()[mid[:, 0], mid[:, 1]]
    v1 = f.values[idx1[:, 0], idx1[:, 1]]
    v2 = f.values[idx2[:, 0], idx2[:, 1]]
    vmid = f.values[mid[:, 0], mid[:, 1]]
    gr = gradient(f)
    gmax = float(np.nanmax(gr.magnitude()))
    slack = 2.0 * f.spacing * gmax
    viol = (vmid - 0.5 * (v1 + v2) - slack)[ok_mid]
    worst = float(viol.max()) if viol.size else 0.0
    return worst <= 0.0, worst


def classify(g: ScalarField2D, h: ScalarField2D, pack: ExponentPack, tol: float,
             iface: Optional[Interface] = None,
             f_assoc: Optional[ScalarField2D] = None) -> Classification:
    """Classify a candidate pressure against the forcing within tolerance ``tol``.

    Interior test: sign of P[g] - h on the positivity set away from a 3-cell
    interface band.  Boundary test: sign of theta g_nu^3 kappa - h over
    interface vertices (skipped when the vanishing set is empty).  A
    non-convex associated density forces "neither".
    """
    from .transforms import density_from_pressure
    f = f_assoc if f_assoc is not None else density_from_pressure(g, pack)
    convex_ok, _ = _midpoint_convexity_ok(f)

    P = operator_P(g, pack)
    pseudo = PressureSolution(f=f, g=g, pack=pack, h=h, report=None, interface=iface)
    dist = pseudo.distance_to_interface()
    region = (g.values > 0) & _stencil_clean(g.inside()) & (dist >= 3 * g.spacing) & np.isfinite(P)
    diff = P - h.values
    if not region.any():
        raise ValueError("no admissible interior nodes to classify on")
    interior_excess = float(diff[region].max())
    interior_deficit = float(diff[region].min())
    flat = np.where(region, diff, np.nan)
    witness_high = tuple(int(v) for v in np.unravel_index(np.nanargmax(flat), flat.shape))
    witness_low = tuple(int(v) for v in np.unravel_index(np.nanargmin(flat), flat.shape))

    boundary_excess = 0.0
    boundary_deficit = 0.0
    lam_nonempty = bool(((f.values == 0) & f.inside()).any())
    if lam_nonempty:
        if iface is None:
            pseudo = PressureSolution(f=f, g=g, pack=pack, h=h, report=None)
            iface = extract_interface(pseudo)
        bres = free_boundary_relation(iface, h, pack)
        boundary_excess = float(bres.max())
        boundary_deficit = float(bres.min())

    is_super = interior_excess <= tol and boundary_excess <= tol
    is_sub = interior_deficit >= -tol and boundary_deficit >= -tol
    if not convex_ok:
        kind = "neither"
    elif is_super and is_sub:
        kind = "solution"
    elif is_super:
        kind = "supersolution"
    elif is_sub:
        kind = "subsolution"
    else:
        kind = "neither"
    return Classification(kind, interior_excess, interior_deficit,
                          boundary_excess, boundary_deficit, convex_ok,
                          witness_high, witness_low)


@dataclass
class ComparisonResult:
    passed: bool
    boundary_hypothesis_ok: bool
    support_hypothesis_ok: bool
    max_violation: float
    violation_map: np.ndarray    # True where g2 > g1 + tol

    def summary(self) -> str:
        if not self.boundary_hypothesis_ok:
            return "hypothesis violated: sub-solution exceeds super-solution on the outer boundary"
        if not self.support_hypothesis_ok:
            return "hypothesis violated: positivity set of the sub-solution not contained"
        if self.passed:
            return "comparison holds"
        return f"conclusion violated at {int(self.violation_map.sum())} nodes " \
               f"(max excess {self.max_violation:.3e})"


def comparison_check(g1: ScalarField2D, g2: ScalarField2D, tol: float) -> ComparisonResult:
    """Check the comparison principle: super-solution g1 dominates sub-solution g2.

    Hypotheses checked first (and reported distinctly): g2 <= g1 on the outer
    boundary ring and positivity-set containment.  Conclusion: g2 <= g1 + tol
    at every inside node, with a violation map of offenders.
    """
    if g1.shape != g2.shape:
        raise ValueError(f"grids differ: {g1.shape} vs {g2.shape}")
    ring = (g1.mask == 2)
    b_ok = bool(np.all(g2.values[ring] <= g1.values[ring] + tol))
    ins = g1.inside()
    s_ok = bool(np.all((g2.values > 0) & ins <= ((g1.values > 0) & ins)))
    viol = ((g2.values > g1.values + tol) & ins)
    max_v = float(np.max(np.where(ins, g2.values - g1.values, -np.inf)))
    passed = b_ok and s_ok and not viol.any()
    return ComparisonResult(passed, b_ok, s_ok, max_v, viol)


# -- estimate suite ----------------------------------------------------------


@dataclass
class PatchReport:
    base_point: tuple[float, float]
    A_eig_min: float
    A_eig_max: float
    b_min: float
    b_max: float
    b1_min: float
    b1_max: float
    det_identity_sup: float       # sup |(z det D2q - theta qz qyy)/qz^4 - H| off the band
    b_identity_rel: float         # sup rel mismatch of b vs g_x (3h + g det D2g) off the band
    residual_sup: float
    seminorms: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["base_point"] = list(self.base_point)
        return d


@dataclass
class EstimateReport:
    """Machine-readable record of every a-priori quantity on one solution."""

    grad_min: float
    grad_max: float
    m_eig_min: float
    m_eig_max: float
    g_quantity_min: float
    g_quantity_max: float
    q_quantity_min: float
    q_quantity_max: float
    q_interface_min: float        # limit theta g_nu^2 over interface vertices
    q_interface_max: float
    z_quantity_min: float
    fb_relation_sup: float
    det_m_identity_sup: float
    f_form_eig_min: float         # density-form matrix echo of M
    f_form_eig_max: float
    patch_reports: list[PatchReport] = field(default_factory=list)
    holder_alpha: float = 0.5
    band_cells: int = 3
    empty_positivity_set: bool = False
    schema_version: int = REPORT_SCHEMA_VERSION

    def complete(self) -> bool:
        scalars = [self.grad_min, self.grad_max, self.m_eig_min, self.m_eig_max,
                   self.g_quantity_min, self.g_quantity_max, self.q_quantity_min,
                   self.q_quantity_max, self.z_quantity_min, self.fb_relation_sup,
                   self.det_m_identity_sup]
        if any(not np.isfinite(v) for v in scalars):
            return False
        if not self.patch_reports:
            return False
        return all(np.isfinite(list(p.seminorms.values())).all() and len(p.seminorms) == 5
                   for p in self.patch_reports)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["patch_reports"] = [p.to_dict() for p in self.patch_reports]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def default_patch_width(sol: PressureSolution, band_cells: int = 3) -> float:
    """Default patch half-width.

    eta = 10 * spacing * max(1, max|Dg|) keeps second differences in sqrt(z)
    resolvable; the width is raised when necessary so the deepest rows map
    past the primal interface band (the two-route identity checks need that
    on fine grids) and capped at 0.3 of the smallest interface curvature
    radius so the tangential window stays locally flat.
    """
    gr = gradient(sol.g)
    gmax = float(np.nanmax(gr.magnitude()))
    dx = sol.spacing
    eta = max(10.0 * dx * max(1.0, gmax), math.sqrt((band_cells + 3.0) * dx * gmax))
    if sol.interface is not None and sol.interface.kappa.max() > 0:
        eta = min(eta, 0.3 / float(sol.interface.kappa.max()))
    return eta


def _eig_bounds_sym(a11, a12, a22, region) -> tuple[float, float]:
    half_tr = 0.5 * (a11 + a22)
    rad = np.sqrt(np.maximum((0.5 * (a11 - a22)) ** 2 + a12**2, 0.0))
    lo = (half_tr - rad)[region]
    hi = (half_tr + rad)[region]
    return float(lo.min()), float(hi.max())


def estimate_suite(sol: PressureSolution, patches: Optional[Sequence[HodographPatch]] = None,
                   n_patches: int = 4, alpha: float = 0.5,
                   band_cells: int = 3) -> EstimateReport:
    """All second-order estimate quantities of one solved pressure.

    Nodewise scans run over the stencil-clean positivity region at least
    ``band_cells`` spacings from the free boundary; interface limits come
    from the extracted polyline (the gradient minimum is attained there, so
    the reported gradient bound folds the vertex slopes in).  Patch-side
    quantities are delegated to :func:`hodograph_suite`.
    """
    g = sol.g
    pack = sol.pack
    dx = sol.spacing
    dist = _band_distance(sol)
    region = (g.values > 0) & _stencil_clean(g.inside()) & (dist >= band_cells * dx)
    if not region.any():
        return EstimateReport(*([float("nan")] * 15), patch_reports=[],
                              empty_positivity_set=True)

    gr = gradient(g)
    H = hessian(g)
    mag = gr.magnitude()
    frame = level_frame(g, floor=1e-6)
    g_nn, g_nt, g_tt = directional_second(g, frame, H)
    gv = g.values

    if sol.interface is None:
        sol.interface = extract_interface(sol)
    iface = sol.interface
    grad_min = min(float(mag[region].min()), float(iface.g_nu.min()))
    grad_max = max(float(mag[region].max()), float(iface.g_nu.max()))

    m11 = gv * g_nn + pack.theta * mag**2
    m12 = np.sqrt(np.maximum(gv, 0.0)) * g_nt
    m22 = g_tt
    reg_m = region & np.isfinite(m11) & np.isfinite(m12) & np.isfinite(m22)
    m_lo, m_hi = _eig_bounds_sym(m11, m12, m22, reg_m)

    G = gr.gy**2 * H.fxx - 2.0 * gr.gx * gr.gy * H.fxy + gr.gx**2 * H.fyy
    g_lo, g_hi = float(G[reg_m].min()), float(G[reg_m].max())

    # Q as larger eigenvalue of g D^2 g + theta Dg (x) Dg
    q11 = gv * H.fxx + pack.theta * gr.gx**2
    q12 = gv * H.fxy + pack.theta * gr.gx * gr.gy
    q22 = gv * H.fyy + pack.theta * gr.gy**2
    half_tr = 0.5 * (q11 + q22)
    rad = np.sqrt(np.maximum((0.5 * (q11 - q22)) ** 2 + q12**2, 0.0))
    Q = half_tr + rad
    q_lo, q_hi = float(Q[reg_m].min()), float(Q[reg_m].max())
    q_gamma = pack.theta * iface.g_nu**2
    z_quantity = np.sqrt(np.maximum(gv, 0.0)) * H.det()
    z_lo = float(z_quantity[reg_m].min())

    det_m = m11 * m22 - m12**2
    det_m_sup = float(np.abs(det_m - sol.h.values)[reg_m].max())
    fb_sup = float(np.abs(free_boundary_relation(iface, sol.h, pack)).max())

    # density-form echo of M (identical entries in exact arithmetic); evaluated
    # on the scan region only, where f is safely positive
    f = sol.f
    Hf = hessian(f)
    framef = level_frame(f, floor=1e-9)
    f_nn, f_nt, f_tt = directional_second(f, framef, Hf)
    reg_f = reg_m & framef.defined & np.isfinite(f_nn) & np.isfinite(f_nt) & np.isfinite(f_tt) \
        & (f.values > 0)
    fv = f.values[reg_f]
    e11 = pack.q ** (1.0 / 3.0) * fv ** ((1.0 - 2.0 * pack.p) / 3.0) * f_nn[reg_f]
    e12 = fv ** (-pack.p / 2.0) * f_nt[reg_f]
    e22 = pack.q ** (-1.0 / 3.0) * fv ** (-(1.0 + pack.p) / 3.0) * f_tt[reg_f]
    f_lo, f_hi = _eig_bounds_sym(e11, e12, e22, np.ones(fv.shape, dtype=bool))

    if patches is None:
        patches = build_default_patches(sol, n_patches)
    patch_reports = hodograph_suite(sol, patches, pack, alpha=alpha, band_cells=band_cells)

    return EstimateReport(
        grad_min=grad_min, grad_max=grad_max,
        m_eig_min=m_lo, m_eig_max=m_hi,
        g_quantity_min=g_lo, g_quantity_max=g_hi,
        q_quantity_min=q_lo, q_quantity_max=q_hi,
        q_interface_min=float(q_gamma.min()), q_interface_max=float(q_gamma.max()),
        z_quantity_min=z_lo,
        fb_relation_sup=fb_sup,
        det_m_identity_sup=det_m_sup,
        f_form_eig_min=f_lo, f_form_eig_max=f_hi,
        patch_reports=list(patch_reports),
        holder_alpha=alpha, band_cells=band_cells,
    )


def _patch_residual_scaled(patch: HodographPatch, pack: ExponentPack) -> float:
    return float(np.abs(hodograph_residual(patch, pack)).max()
                 / max(float(np.abs(patch.H).max()), 1e-12))


def _patch_healthy(patch: HodographPatch, pack: ExponentPack,
                   res_tol: float = 0.05) -> bool:
    """Residual small relative to the forcing scale, A positive definite, b positive."""
    if _patch_residual_scaled(patch, pack) > res_tol:
        return False
    a11 = -patch.qyy / patch.qz**4
    a12 = patch.wsqzy / patch.qz**4
    a22 = (pack.theta * patch.qz - patch.wzqzz) / patch.qz**4
    eig_min = 0.5 * (a11 + a22) - np.sqrt(np.maximum((0.5 * (a11 - a22)) ** 2 + a12**2, 0.0))
    b = (4.0 * (patch.wzqzz * patch.qyy - patch.wsqzy**2)
         - 3.0 * pack.theta * patch.qz * patch.qyy) / patch.qz**5
    return bool((eig_min > 0).all() and (b > 0).all())


def build_default_patches(sol: PressureSolution, n_patches: int = 4,
                          band_cells: int = 3, max_shrink: int = 4) -> list[HodographPatch]:
    """Patches at evenly spaced interface angles.

    The half-width starts at the default and shrinks by 0.7 per attempt until
    the patch is healthy (small equation residual, positive definite A,
    positive b); the paper-side width is only known to be "sufficiently
    small", so the achieved eta is recorded per patch in its metadata.
    """
    if sol.interface is None:
        sol.interface = extract_interface(sol)
    eta0 = default_patch_width(sol, band_cells)
    verts = sol.interface.vertices
    angles = np.arctan2(verts[:, 1], verts[:, 0])
    targets = np.linspace(-np.pi, np.pi, n_patches, endpoint=False) + np.pi / n_patches
    patches = []
    for t in targets:
        k = int(np.argmin(np.abs(np.angle(np.exp(1j * (angles - t))))))
        eta = eta0
        attempts: list[tuple[float, HodographPatch]] = []
        last_err: Optional[Exception] = None
        chosen = None
        for _ in range(max_shrink + 1):
            try:
                patch = build_hodograph_patch(sol, tuple(verts[k]), eta, h=sol.h, deg_y=6)
            except ValueError as err:
                last_err = err
                eta *= 0.7
                continue
            if _patch_healthy(patch, sol.pack):
                chosen = patch
                break
            attempts.append((_patch_residual_scaled(patch, sol.pack), patch))
            eta *= 0.7
        if chosen is None:
            if not attempts:
                raise RuntimeError(
                    f"patch construction failed at base point {tuple(verts[k])}: {last_err}")
            # keep the lowest-residual attempt; its defects surface in the report
            chosen = min(attempts, key=lambda pair: pair[0])[1]
        patches.append(chosen)
    return patches


def hodograph_suite(sol: PressureSolution, patches: Sequence[HodographPatch],
                    pack: ExponentPack, alpha: float = 0.5,
                    band_cells: int = 3) -> list[PatchReport]:
    """Coefficient bounds and identity cross-checks on each hodograph patch.

    The determinant identity and the two-route check of the drift b against
    g_x (3h + g det D^2 g) are evaluated off the interface band (estimated
    nodewise as z q_z >= band_cells * spacing); positivity of the matrix A
    and of b is required at every patch node including the z = 0 row.
    """
    g = sol.g
    dx = sol.spacing
    gext = sol.extended_pressure()
    gsp = RectBivariateSpline(gext.x(), gext.y(), _filled(gext), kx=3, ky=3, s=0)
    # primal Hessian restricted to the positivity set: stencils must not
    # straddle the pressure kink at the free boundary
    from .grid_domain import EXTERIOR
    gpos = g.copy()
    gpos.mask = np.where((g.values > 0) & g.inside(), g.mask, EXTERIOR).astype(np.int8)
    detg_f = gpos.like(np.nan_to_num(hessian(gpos).det()))
    detg_f.mask = gpos.mask
    detg_sp = RectBivariateSpline(g.x(), g.y(), _filled(detg_f), kx=1, ky=1, s=0)
    hsp = RectBivariateSpline(g.x(), g.y(), _filled(sol.h), kx=1, ky=1, s=0)

    reports = []
    for patch in patches:
        wd = patch.wzqzz * patch.qyy - patch.wsqzy**2
        a11 = -patch.qyy / patch.qz**4
        a12 = patch.wsqzy / patch.qz**4
        a22 = (pack.theta * patch.qz - patch.wzqzz) / patch.qz**4
        all_nodes = np.ones(patch.shape, dtype=bool)
        a_lo, a_hi = _eig_bounds_sym(a11, a12, a22, all_nodes)
        b = (4.0 * wd - 3.0 * pack.theta * patch.qz * patch.qyy) / patch.qz**5
        b1 = (4.0 * wd - (3.0 * pack.theta + 1.0) * patch.qz * patch.qyy) / patch.qz**5

        det_id = (wd - pack.theta * patch.qz * patch.qyy) / patch.qz**4
        # patch-intrinsic band in the singular metric: skip the w-rows whose
        # weighted fields come from the one-sided interface extrapolation
        dy_patch = patch.y[1] - patch.y[0]
        s_res = max(patch.delta, dy_patch)
        s_band = np.sqrt(patch.z)[:, None] >= band_cells * s_res
        off_band = np.broadcast_to(s_band, patch.shape)
        det_sup = float(np.abs(det_id - patch.H)[off_band].max())

        # two-route check of b: primal evaluation g_x (3h + g det D^2 g) at
        # patch nodes mapping past the primal interface band (z q_z estimates
        # the mapped distance)
        px, py = patch.to_grid_points()
        ca, sa = math.cos(patch.rotation), math.sin(patch.rotation)
        gx_rot = (ca * gsp.ev(px.ravel(), py.ravel(), dx=1)
                  + sa * gsp.ev(px.ravel(), py.ravel(), dy=1)).reshape(patch.shape)
        g_at = gsp.ev(px.ravel(), py.ravel()).reshape(patch.shape)
        detg_at = detg_sp.ev(px.ravel(), py.ravel()).reshape(patch.shape)
        h_at = hsp.ev(px.ravel(), py.ravel()).reshape(patch.shape)
        b_primal = gx_rot * (3.0 * h_at + g_at * detg_at)
        mapped_off = (patch.z[:, None] * patch.qz) >= band_cells * dx
        if not mapped_off.any():
            mapped_off = np.zeros(patch.shape, dtype=bool)
            mapped_off[-1] = True          # shallow patch: use the deepest row
        b_rel = float((np.abs(b - b_primal) / np.abs(b_primal))[mapped_off].max())

        res_sup = float(np.abs(hodograph_residual(patch, pack)).max())
        sems = patch_holder_seminorms(patch, alpha=alpha)
        reports.append(PatchReport(
            base_point=patch.base_point,
            A_eig_min=a_lo, A_eig_max=a_hi,
            b_min=float(b.min()), b_max=float(b.max()),
            b1_min=float(b1.min()), b1_max=float(b1.max()),
            det_identity_sup=det_sup, b_identity_rel=b_rel,
            residual_sup=res_sup, seminorms=sems,
        ))
    return reports


def _filled(fld: ScalarField2D) -> FloatArray:
    from .transforms import _fill_exterior
    return _fill_exterior(fld)


# -- linearization -----------------------------------------------------------


def _difference_on_core(values: FloatArray, z: FloatArray, y: FloatArray):
    """Direction-field derivatives with the same singular-coordinate conventions.

    Operates on the patch core grid only (no padding available): central
    stencils inside, one-sided at edges, w = 0 row by quadratic extrapolation
    of the weighted fields from the first three interior layers.
    """
    w = np.sqrt(z)
    delta = w[1] - w[0]
    dy = y[1] - y[0]
    v = values
    qw = np.empty_like(v)
    qww = np.empty_like(v)
    qw[1:-1] = (v[2:] - v[:-2]) / (2 * delta)
    qw[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * delta)
    qw[0] = 0.0
    qww[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / delta**2
    qww[-1] = (v[-1] - 2 * v[-2] + v[-3]) / delta**2
    qww[0] = 2.0 * (v[1] - v[0]) / delta**2
    vy = np.empty_like(v)
    vyy = np.empty_like(v)
    vy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * dy)
    vy[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * dy)
    vy[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * dy)
    vyy[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / dy**2
    vyy[:, 0] = (v[:, 0] - 2 * v[:, 1] + v[:, 2]) / dy**2
    vyy[:, -1] = (v[:, -1] - 2 * v[:, -2] + v[:, -3]) / dy**2
    vwy = np.empty_like(v)
    vwy[1:-1] = (vy[2:] - vy[:-2]) / (2 * delta)
    vwy[-1] = (3 * vy[-1] - 4 * vy[-2] + vy[-3]) / (2 * delta)
    vwy[0] = 0.0

    wcol = w[:, None]
    vz = np.empty_like(v)
    wzvzz = np.empty_like(v)
    wsvzy = np.empty_like(v)
    vz[1:] = qw[1:] / (2 * wcol[1:])
    wzvzz[1:] = (qww[1:] - qw[1:] / wcol[1:]) / 4.0
    wsvzy[1:] = vwy[1:] / 2.0
    for arr in (vz, wzvzz, wsvzy):
        arr[0] = 3 * arr[1] - 3 * arr[2] + arr[3]
    return vz, vy, wzvzz, wsvzy, vyy


def linearized_apply(patch: HodographPatch, pack: ExponentPack,
                     direction: FloatArray, form: str = "direct") -> FloatArray:
    """Apply the linearized hodograph operator to a direction field.

    ``direct`` assembles
        [-z q_yy t_zz + 2 z q_zy t_zy + (theta q_z - z q_zz) t_yy] / q_z^4
            + b t_z
    from the patch coefficient fields; ``canonical`` assembles
        z a11 t_zz + 2 sqrt(z) a12 t_zy + a22 t_yy + b t_z
    from the matrix A and drift b.  The two paths are the same algebra and
    agree exactly.  The forcing is held frozen, so there is no zeroth-order
    term and constants are annihilated.
    """
    if form not in ("direct", "canonical"):
        raise ValueError(f"unknown assembly form {form!r}")
    t = np.asarray(direction, dtype=float)
    if t.shape != patch.shape:
        raise ValueError(f"direction shape {t.shape} does not match patch {patch.shape}")
    tz, ty, wztzz, wstzy, tyy = _difference_on_core(t, patch.z, patch.y)
    b = (4.0 * (patch.wzqzz * patch.qyy - patch.wsqzy**2)
         - 3.0 * pack.theta * patch.qz * patch.qyy) / patch.qz**5
    if form == "direct":
        second = (-patch.qyy * wztzz + 2.0 * patch.wsqzy * wstzy
                  + (pack.theta * patch.qz - patch.wzqzz) * tyy) / patch.qz**4
    else:
        a11 = -patch.qyy / patch.qz**4
        a12 = patch.wsqzy / patch.qz**4
        a22 = (pack.theta * patch.qz - patch.wzqzz) / patch.qz**4
        second = a11 * wztzz + 2.0 * a12 * wstzy + a22 * tyy
    return second + b * tz
