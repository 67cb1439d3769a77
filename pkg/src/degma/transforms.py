"""Pressure/density transform, singular-metric Hoelder norms, hodograph patches.

The pressure of a nonnegative density f is ``g = q^(2/3) f^(1/q)`` with
``q = 3/(2-p)``.  Near an interface point the map ``x = q(z, y)`` inverts
``z = g(x, y)`` along lines of a rotated frame; its natural geometry is the
singular metric ``ds^2 = dz^2/z + dy^2`` with distance
``s(Q1,Q2) = |sqrt(z1)-sqrt(z2)| + |y1-y2|``, so patches are discretized
uniformly in ``w = sqrt(z)`` and derivatives are formed in (w, y) before
being chain-ruled back:

    q_z = q_w / (2w),   z*q_zz = (q_ww - q_w/w)/4,   sqrt(z)*q_zy = q_wy/2.

The well-conditioned weighted combinations are exactly the quantities that
stay bounded and continuous up to z = 0, so they are stored directly.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator, RectBivariateSpline

from .grid_domain import EXTERIOR, FloatArray, ScalarField2D

__all__ = [
    "ExponentPack",
    "pressure_from_density",
    "density_from_pressure",
    "singular_distance",
    "holder_seminorm_s",
    "HodographPatch",
    "build_hodograph_patch",
    "hodograph_residual",
    "dilate_patch",
    "patch_from_callable",
    "patch_holder_seminorms",
]


@dataclass(frozen=True)
class ExponentPack:
    """Exponents of the problem: source exponent p, pressure exponent q, drift theta.

    q = 3/(2-p) and theta = (1+p)/(2-p) = q - 1.
    """

    p: float
    q: float = field(init=False)
    theta: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 2.0:
            raise ValueError(f"source exponent must satisfy 0 < p < 2, got {self.p}")
        object.__setattr__(self, "q", 3.0 / (2.0 - self.p))
        object.__setattr__(self, "theta", (1.0 + self.p) / (2.0 - self.p))


def pressure_from_density(f: ScalarField2D, pack: ExponentPack) -> ScalarField2D:
    """g = q^(2/3) f^(1/q) nodewise; zeros map to zeros exactly."""
    vals = f.values
    neg = (vals < 0) & (f.mask != EXTERIOR)
    if np.any(neg):
        i, j = np.argwhere(neg)[0]
        raise ValueError(f"negative density at node (i={i}, j={j}): f={vals[i, j]}")
    out = np.zeros_like(vals)
    inside = f.inside()
    out[inside] = pack.q ** (2.0 / 3.0) * np.maximum(vals[inside], 0.0) ** (1.0 / pack.q)
    return f.like(out)


def density_from_pressure(g: ScalarField2D, pack: ExponentPack) -> ScalarField2D:
    """f = (q^(-2/3) g)^q nodewise; inverse of pressure_from_density."""
    vals = g.values
    neg = (vals < 0) & (g.mask != EXTERIOR)
    if np.any(neg):
        i, j = np.argwhere(neg)[0]
        raise ValueError(f"negative pressure at node (i={i}, j={j}): g={vals[i, j]}")
    out = np.zeros_like(vals)
    inside = g.inside()
    out[inside] = (pack.q ** (-2.0 / 3.0) * np.maximum(vals[inside], 0.0)) ** pack.q
    return g.like(out)


def singular_distance(q1, q2) -> Union[float, FloatArray]:
    """Distance s(Q1, Q2) = |sqrt(z1) - sqrt(z2)| + |y1 - y2| for Q = (z, y)."""
    z1, y1 = np.asarray(q1[0], float), np.asarray(q1[1], float)
    z2, y2 = np.asarray(q2[0], float), np.asarray(q2[1], float)
    if np.any(z1 < 0) or np.any(z2 < 0):
        raise ValueError("singular distance needs z >= 0")
    out = np.abs(np.sqrt(z1) - np.sqrt(z2)) + np.abs(y1 - y2)
    return float(out) if out.ndim == 0 else out


def holder_seminorm_s(z: FloatArray, y: FloatArray, values: FloatArray,
                      alpha: float, sigma: float) -> float:
    """Hoelder seminorm in the singular distance over all node pairs separated by >= sigma.

    Returns max |u(Q1) - u(Q2)| / s(Q1, Q2)^alpha over admissible pairs.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma <= 0:
        raise ValueError(f"minimum separation sigma must be positive, got {sigma}")
    z = np.asarray(z, float).ravel()
    y = np.asarray(y, float).ravel()
    u = np.asarray(values, float).ravel()
    if np.any(z < 0):
        raise ValueError("holder_seminorm_s needs z >= 0")
    keep = np.isfinite(u)
    z, y, u = z[keep], y[keep], u[keep]
    w = np.sqrt(z)
    s = np.abs(w[:, None] - w[None, :]) + np.abs(y[:, None] - y[None, :])
    admissible = s >= sigma
    np.fill_diagonal(admissible, False)
    if np.count_nonzero(admissible) < 2:
        raise ValueError(f"fewer than 2 node pairs separated by sigma={sigma}")
    du = np.abs(u[:, None] - u[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(admissible, du / s**alpha, 0.0)
    return float(ratio.max())


# -- hodograph patches ------------------------------------------------------


@dataclass
class HodographPatch:
    """The inverted map x = q(z, y) near one interface point.

    Boundary patches (zshift = 0) live on the box 0 <= z <= eta^2,
    |y| <= eta, with nodes uniform in w = sqrt(z); ``wzqzz`` stores z*q_zz
    and ``wsqzy`` stores sqrt(z)*q_zy.  Dilated patches (zshift = 1) live on
    a uniform (z, y) grid with z possibly negative; their weights use
    ztilde = 1 + z instead.
    """

    base_point: tuple[float, float]
    rotation: float             # angle such that rotating by -rotation sends P0/|P0| to e1
    eta: float
    delta: float                # w-step (boundary) or z-step (dilated)
    z: FloatArray               # (K,) z-coordinates of rows
    y: FloatArray               # (J,) tangential offsets in the rotated frame
    q: FloatArray               # (K, J)
    qz: FloatArray
    qy: FloatArray
    wzqzz: FloatArray           # (zshift + z) * q_zz
    wsqzy: FloatArray           # sqrt(zshift + z) * q_zy
    qyy: FloatArray
    H: FloatArray               # forcing evaluated on the patch
    zshift: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape

    def zy_mesh(self) -> tuple[FloatArray, FloatArray]:
        return np.meshgrid(self.z, self.y, indexing="ij")

    def to_grid_points(self) -> tuple[FloatArray, FloatArray]:
        """Unrotated domain coordinates of all patch nodes."""
        Z, Y = self.zy_mesh()
        xr = self.q
        yr = Y + 0.0
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return c * xr - s * yr, s * xr + c * yr

    def raw_qzz(self) -> FloatArray:
        """q_zz where the weight is invertible (NaN on a boundary patch's z=0 row)."""
        w = self.zshift + self.z[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, self.wzqzz / w, np.nan)

    def raw_qzy(self) -> FloatArray:
        w = self.zshift + self.z[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, self.wsqzy / np.sqrt(np.maximum(w, 0.0)), np.nan)

    def to_csv(self) -> str:
        Z, Y = self.zy_mesh()
        buf = io.StringIO()
        buf.write("z,y,q,qz,qy,zqzz,sqzqzy,qyy,H\n")
        cols = (Z, Y, self.q, self.qz, self.qy, self.wzqzz, self.wsqzy, self.qyy, self.H)
        flat = [c.ravel() for c in cols]
        for k in range(flat[0].size):
            buf.write(",".join(f"{c[k]:.17g}" for c in flat) + "\n")
        return buf.getvalue()

    def metadata_json(self) -> str:
        md = {
            "base_point": list(self.base_point),
            "rotation": self.rotation,
            "eta": self.eta,
            "delta": self.delta,
            "zshift": self.zshift,
            "shape": list(self.shape),
        }
        md.update({k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, list))})
        return json.dumps(md, indent=2, sort_keys=True)


def _pressure_field_of(g_or_solution) -> ScalarField2D:
    if isinstance(g_or_solution, ScalarField2D):
        return g_or_solution
    if hasattr(g_or_solution, "extended_pressure"):
        return g_or_solution.extended_pressure()
    return g_or_solution.g


def _forcing_of(g_or_solution, h):
    if h is not None:
        return h
    return getattr(g_or_solution, "h", None)


def _spline(fieldvals: FloatArray, x: FloatArray, y: FloatArray) -> RectBivariateSpline:
    return RectBivariateSpline(x, y, fieldvals, kx=3, ky=3, s=0)


def _fill_exterior(f: ScalarField2D) -> FloatArray:
    """Values with exterior nodes replaced by iterative nearest-inside averages."""
    vals = f.values.astype(float).copy()
    known = f.inside()
    if known.all():
        return vals
    vals[~known] = np.nan
    for _ in range(max(f.shape)):
        if not np.isnan(vals).any():
            break
        padded = np.pad(vals, 1, constant_values=np.nan)
        stack = np.stack([padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]])
        have = np.isfinite(stack)
        count = have.sum(axis=0)
        total = np.where(have, stack, 0.0).sum(axis=0)
        fill = np.divide(total, count, out=np.full(vals.shape, np.nan), where=count > 0)
        missing = np.isnan(vals)
        vals[missing] = fill[missing]
    vals[np.isnan(vals)] = 0.0
    return vals


def _fit_local_model(samples_s: FloatArray, samples_y: FloatArray, values: FloatArray,
                     deg_s: int, deg_y: int) -> tuple[FloatArray, float, float, float, float]:
    """Least-squares tensor polynomial model of the pressure near the interface.

    Fits values(s, y) over the clean sample cloud in scaled coordinates;
    returns (coefficients, s_center, s_scale, y_center, y_scale).
    """
    sc, ss = samples_s.mean(), max(np.ptp(samples_s) / 2.0, 1e-12)
    yc, yscl = samples_y.mean(), max(np.ptp(samples_y) / 2.0, 1e-12)
    S = (samples_s - sc) / ss
    Y = (samples_y - yc) / yscl
    cols = [S**m * Y**n for m in range(deg_s + 1) for n in range(deg_y + 1)]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    return coef.reshape(deg_s + 1, deg_y + 1), sc, ss, yc, yscl


def _eval_local_model(coef: FloatArray, sc: float, ss: float, yc: float, yscl: float,
                      s: FloatArray, y: FloatArray) -> FloatArray:
    S = (np.asarray(s, float) - sc) / ss
    Y = (np.asarray(y, float) - yc) / yscl
    out = np.zeros(np.broadcast(S, Y).shape)
    for m in range(coef.shape[0]):
        for n in range(coef.shape[1]):
            out += coef[m, n] * S**m * Y**n
    return out


def build_hodograph_patch(g_or_solution, p0: tuple[float, float], eta: float,
                          h=None, nw: int = 13, ny: int = 21,
                          deg_s: int = 4, deg_y: int = 4,
                          clean_offset: float = 2.0) -> HodographPatch:
    """Invert z = g(x, y) along rotated x-lines near the interface point p0.

    The frame is rotated so that p0/|p0| becomes e1.  The pressure is sampled
    on a rectangle of rotated lines around the interface and its clean part
    (above the extraction level, clear of interpolation artifacts at the
    pressure kink) is condensed into a local tensor-polynomial model; each
    line's monotone inverse x = q(z, y_j) is then built by monotone cubic
    interpolation through dense model samples anchored at the model's zero
    crossing.  Working from the smooth local model keeps the tangential
    second derivatives of the patch well conditioned, which raw per-line
    inversion cannot do (grid interpolation noise is amplified by 1/dy^2).

    Derivatives are formed on a w = sqrt(z) grid padded by two rows/columns
    so the returned window uses central stencils; the z = 0 row of the
    weighted fields is produced by one-sided quadratic extrapolation from
    the first three interior w-rows.
    """
    gfield = _pressure_field_of(g_or_solution)
    hsrc = _forcing_of(g_or_solution, h)
    if eta <= 0:
        raise ValueError(f"patch half-width eta must be positive, got {eta}")
    x0, y0 = float(p0[0]), float(p0[1])
    r0 = math.hypot(x0, y0)
    if r0 <= 0:
        raise ValueError("base point must be away from the origin to define its frame")
    angle = math.atan2(y0, x0)
    ca, sa = math.cos(angle), math.sin(angle)

    dx = gfield.spacing
    gvals = _fill_exterior(gfield)
    gsp = _spline(gvals, gfield.x(), gfield.y())

    def sample(s: FloatArray, yv: FloatArray) -> FloatArray:
        gx = ca * s - sa * yv
        gy = sa * s + ca * yv
        return gsp.ev(gx, gy)

    inside = gfield.inside()
    gmax = float(np.nanmax(np.where(inside, gvals, 0.0)))
    eps_line = min(2.0 * dx * _grad_sup(gfield), 0.5 * gmax)

    # pilot pass along y = 0: bracket the crossing, estimate anchor and slope
    s_pilot = np.arange(r0 - eta**2 - 8.0 * dx - eta, r0 + eta + 8.0 * dx, dx / 2.0)
    gl = sample(s_pilot, np.zeros_like(s_pilot))
    above = np.nonzero(gl >= eps_line)[0]
    if above.size == 0 or above[0] == 0:
        raise ValueError("no interface crossing bracketed near the base point")
    s_cross = s_pilot[above[0]]
    win = (s_pilot >= s_cross) & (s_pilot <= s_cross + 6.0 * dx)
    slope0 = max(np.polyfit(s_pilot[win], gl[win], 1)[0], 1e-12)

    # sample rectangle for the local model; the model window is wider than the
    # patch in y so the patch core sits away from the fit's edge bias
    ws = np.linspace(0.0, eta, nw)
    delta = ws[1] - ws[0]
    dy = 2.0 * eta / (ny - 1)
    n_pad = 2
    ys_pad = np.linspace(-eta - n_pad * dy, eta + n_pad * dy, ny + 2 * n_pad)
    w_pad = np.concatenate([ws, [eta + delta, eta + 2 * delta]])
    z_pad = w_pad**2
    z_top = z_pad[-1]
    y_fit = 1.4 * (eta + n_pad * dy)
    s_lo = s_cross - 4.0 * dx - y_fit**2 / (2.0 * r0)
    s_hi = s_cross + z_top / slope0 + 8.0 * dx
    s_grid = np.arange(s_lo, s_hi, dx / 2.0)
    y_grid = np.arange(-y_fit, y_fit + dx / 2.0, dx / 2.0)
    Sm, Ym = np.meshgrid(s_grid, y_grid, indexing="ij")
    G = sample(Sm.ravel(), Ym.ravel()).reshape(Sm.shape)

    # trust only samples clear of the interpolation ringing at the pressure kink:
    # about (2 + clean_offset) cells out, measured with the local slope
    eps_fit = (2.0 + clean_offset) * dx * slope0
    clean = G >= eps_fit
    if clean.sum() < 4 * (deg_s + 1) * (deg_y + 1):
        raise ValueError("too few clean samples to fit the local pressure model "
                         f"({int(clean.sum())} nodes); eta too large or grid too coarse")
    coef, sc, ss_, yc, yscl = _fit_local_model(Sm[clean], Ym[clean], G[clean], deg_s, deg_y)

    def model(s, yv):
        return _eval_local_model(coef, sc, ss_, yc, yscl, s, yv)

    # per-line monotone inversion through dense model samples
    q_pad = np.empty((w_pad.size, ys_pad.size))
    anchors = np.empty(ys_pad.size)
    s_dense = np.arange(s_lo, s_hi, dx / 4.0)
    for j, yj in enumerate(ys_pad):
        gm = model(s_dense, np.full_like(s_dense, yj))
        pos = np.nonzero(gm > 0)[0]
        if pos.size == 0 or pos[0] == 0:
            raise ValueError(f"local model has no zero crossing on line y={yj:.6g}")
        k0 = pos[0]
        seg = slice(max(k0 - 1, 0), s_dense.size)
        gseg = gm[seg]
        sseg = s_dense[seg]
        dgr = np.diff(gseg)
        if np.any(dgr <= 0):
            kbad = int(np.argmax(dgr <= 0))
            raise ValueError(
                f"non-monotone pressure along sample line y={yj:.6g} near x'={sseg[kbad]:.6g}")
        # anchor: linear root between the bracketing dense samples
        t = gseg[0] / (gseg[0] - gseg[1]) if gseg[0] < 0 else 0.0
        anchor = sseg[0] + t * (sseg[1] - sseg[0])
        anchors[j] = anchor
        zs = np.concatenate([[0.0], gseg[1:]])
        xs = np.concatenate([[anchor], sseg[1:]])
        keep = np.concatenate([[True], np.diff(zs) > 1e-14])
        zs, xs = zs[keep], xs[keep]
        if zs[-1] < z_top:
            raise ValueError(
                f"eta too large: line y={yj:.6g} reaches z={zs[-1]:.4g} < {z_top:.4g} "
                "(patch escapes the positivity region)")
        inv = PchipInterpolator(zs, xs)
        q_pad[:, j] = inv(z_pad)

    core = slice(n_pad, n_pad + ny)
    q, qy, qyy, qz, wzqzz, wsqzy = _difference_padded(q_pad, ws, delta, dy, n_pad, nw, ny)

    ys = ys_pad[core]
    H = _eval_forcing(hsrc, q, ys, ca, sa)
    return HodographPatch(
        base_point=(x0, y0), rotation=angle, eta=eta, delta=delta,
        z=ws**2, y=ys, q=q, qz=qz, qy=qy, wzqzz=wzqzz, wsqzy=wsqzy, qyy=qyy,
        H=H, zshift=0.0,
        meta={"anchors": anchors[core].tolist(), "eps_line": eps_line,
              "deg_s": deg_s, "deg_y": deg_y},
    )


def _difference_padded(q_pad: FloatArray, ws: FloatArray, delta: float, dy: float,
                       n_pad: int, nw: int, ny: int):
    """Singular-coordinate derivative fields from values on the padded (w, y) grid.

    Central stencils everywhere in the core window; the w = 0 row of the
    weighted fields comes from one-sided quadratic extrapolation of the first
    three interior w-layers.
    """
    qw = np.empty_like(q_pad)
    qww = np.empty_like(q_pad)
    qw[1:-1] = (q_pad[2:] - q_pad[:-2]) / (2 * delta)
    qw[-1] = (3 * q_pad[-1] - 4 * q_pad[-2] + q_pad[-3]) / (2 * delta)
    qw[0] = 0.0                                  # q is even in w at the interface
    qww[1:-1] = (q_pad[2:] - 2 * q_pad[1:-1] + q_pad[:-2]) / delta**2
    qww[-1] = (q_pad[-1] - 2 * q_pad[-2] + q_pad[-3]) / delta**2
    qww[0] = 2.0 * (q_pad[1] - q_pad[0]) / delta**2
    qy_pad = np.empty_like(q_pad)
    qyy_pad = np.empty_like(q_pad)
    qy_pad[:, 1:-1] = (q_pad[:, 2:] - q_pad[:, :-2]) / (2 * dy)
    qy_pad[:, 0] = qy_pad[:, 1]
    qy_pad[:, -1] = qy_pad[:, -2]
    qyy_pad[:, 1:-1] = (q_pad[:, 2:] - 2 * q_pad[:, 1:-1] + q_pad[:, :-2]) / dy**2
    qyy_pad[:, 0] = qyy_pad[:, 1]
    qyy_pad[:, -1] = qyy_pad[:, -2]
    qwy = np.empty_like(q_pad)
    qwy[1:-1] = (qy_pad[2:] - qy_pad[:-2]) / (2 * delta)
    qwy[-1] = (3 * qy_pad[-1] - 4 * qy_pad[-2] + qy_pad[-3]) / (2 * delta)
    qwy[0] = 0.0

    core = slice(n_pad, n_pad + ny)
    rows = slice(0, nw)
    q = q_pad[rows, core]
    qy = qy_pad[rows, core]
    qyy = qyy_pad[rows, core]
    wcol = ws[:, None]
    qz = np.empty_like(q)
    wzqzz = np.empty_like(q)
    wsqzy = np.empty_like(q)
    qz[1:] = qw[1:nw, core] / (2 * wcol[1:])
    wzqzz[1:] = (qww[1:nw, core] - qw[1:nw, core] / wcol[1:]) / 4.0
    wsqzy[1:] = qwy[1:nw, core] / 2.0
    for arr in (qz, wzqzz, wsqzy):
        arr[0] = 3 * arr[1] - 3 * arr[2] + arr[3]

    if np.any(qz <= 0):
        k = np.argwhere(qz <= 0)[0]
        raise ValueError(f"q_z <= 0 at patch node (row {k[0]}, col {k[1]}): inversion not monotone")
    return q, qy, qyy, qz, wzqzz, wsqzy


def patch_from_callable(qfun, eta: float, nw: int = 13, ny: int = 21,
                        hfun=None, base_point: tuple[float, float] = (1.0, 0.0),
                        rotation: float = 0.0) -> HodographPatch:
    """Patch built from exact map values q(z, y) (test harness entry point).

    Runs the same padded singular-coordinate differencing as the grid-based
    construction, so discretization order and linearization consistency can
    be measured against analytic fields without grid-inversion error.
    """
    nw = int(nw)
    ny = int(ny)
    ws = np.linspace(0.0, eta, nw)
    delta = ws[1] - ws[0]
    dy = 2.0 * eta / (ny - 1)
    n_pad = 2
    ys_pad = np.linspace(-eta - n_pad * dy, eta + n_pad * dy, ny + 2 * n_pad)
    w_pad = np.concatenate([ws, [eta + delta, eta + 2 * delta]])
    Z, Y = np.meshgrid(w_pad**2, ys_pad, indexing="ij")
    q_pad = np.asarray(qfun(Z, Y), dtype=float)
    core = slice(n_pad, n_pad + ny)
    q, qy, qyy, qz, wzqzz, wsqzy = _difference_padded(q_pad, ws, delta, dy, n_pad, nw, ny)
    ys = ys_pad[core]
    Zc, Yc = np.meshgrid(ws**2, ys, indexing="ij")
    H = np.ones_like(q) if hfun is None else np.asarray(hfun(Zc, Yc), dtype=float)
    return HodographPatch(base_point=base_point, rotation=rotation, eta=eta,
                          delta=delta, z=ws**2, y=ys, q=q, qz=qz, qy=qy,
                          wzqzz=wzqzz, wsqzy=wsqzy, qyy=qyy, H=H, zshift=0.0,
                          meta={"source": "callable"})


def _grad_sup(gfield: ScalarField2D) -> float:
    from .grid_domain import gradient
    mag = gradient(gfield).magnitude()
    mag = mag[np.isfinite(mag)]
    return float(mag.max()) if mag.size else 1.0


def _eval_forcing(hsrc, qvals: FloatArray, ys: FloatArray, ca: float, sa: float) -> FloatArray:
    if hsrc is None:
        return np.ones_like(qvals)
    if np.isscalar(hsrc):
        return np.full_like(qvals, float(hsrc))
    if isinstance(hsrc, ScalarField2D):
        hsp = _spline(_fill_exterior(hsrc), hsrc.x(), hsrc.y())
        Y = np.broadcast_to(ys[None, :], qvals.shape)
        gx = ca * qvals - sa * Y
        gy = sa * qvals + ca * Y
        return hsp.ev(gx.ravel(), gy.ravel()).reshape(qvals.shape)
    # callable h(x, y)
    Y = np.broadcast_to(ys[None, :], qvals.shape)
    gx = ca * qvals - sa * Y
    gy = sa * qvals + ca * Y
    return np.asarray(hsrc(gx, gy), dtype=float)


def hodograph_residual(patch: HodographPatch, pack: ExponentPack) -> FloatArray:
    """Residual of the hodograph equation on the patch; near zero for true solutions.

    Boundary patches verify (-z det D^2 q + theta q_z q_yy)/q_z^4 + H; dilated
    patches verify the same with ztilde = 1 + z in place of z.
    """
    weighted_det = patch.wzqzz * patch.qyy - patch.wsqzy**2
    return (-weighted_det + pack.theta * patch.qz * patch.qyy) / patch.qz**4 + patch.H


def dilate_patch(patch: HodographPatch, r: float, y_r: float,
                 mu: float = 0.5, nnodes: int = 17) -> HodographPatch:
    """Zoom the patch about the point (r^2, y_r): q^r(z,y) = q(r^2 + r^2 z, y_r + r y)/r^2.

    The dilated map satisfies the shifted equation with ztilde = 1 + z and
    forcing H^r(z,y) = H(r^2 + r^2 z, y_r + r y).  The image square
    [-mu, mu]^2 (which contains the disk D_mu) must map inside the source
    patch.
    """
    if patch.zshift != 0.0:
        raise ValueError("dilate_patch expects a boundary patch")
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    zimg_max = r**2 * (1.0 + mu)
    zimg_min = r**2 * (1.0 - mu)
    ymax = abs(y_r) + r * mu
    if zimg_max > patch.z[-1] or zimg_min < 0 or ymax > patch.y[-1]:
        raise ValueError(
            f"dilation image escapes patch: z-range [{zimg_min:.4g}, {zimg_max:.4g}] vs "
            f"[0, {patch.z[-1]:.4g}], |y| up to {ymax:.4g} vs {patch.y[-1]:.4g}")

    wsrc = np.sqrt(patch.z)
    qsp = RectBivariateSpline(wsrc, patch.y, patch.q, kx=3, ky=3, s=0)
    hsp = RectBivariateSpline(wsrc, patch.y, patch.H, kx=3, ky=3, s=0)

    zz = np.linspace(-mu, mu, nnodes)
    yy = np.linspace(-mu, mu, nnodes)
    Z, Y = np.meshgrid(zz, yy, indexing="ij")
    Wsrc = r * np.sqrt(1.0 + Z)
    Ysrc = y_r + r * Y
    q = qsp.ev(Wsrc.ravel(), Ysrc.ravel()).reshape(Z.shape) / r**2
    H = hsp.ev(Wsrc.ravel(), Ysrc.ravel()).reshape(Z.shape)

    dz = zz[1] - zz[0]
    dy = yy[1] - yy[0]
    qz = np.gradient(q, dz, axis=0, edge_order=2)
    qy = np.gradient(q, dy, axis=1, edge_order=2)
    qzz = np.gradient(qz, dz, axis=0, edge_order=2)
    qzy = np.gradient(qz, dy, axis=1, edge_order=2)
    qyy = np.gradient(qy, dy, axis=1, edge_order=2)
    ztilde = 1.0 + zz[:, None]
    return HodographPatch(
        base_point=patch.base_point, rotation=patch.rotation, eta=patch.eta,
        delta=dz, z=zz, y=yy, q=q, qz=qz, qy=qy,
        wzqzz=ztilde * qzz, wsqzy=np.sqrt(ztilde) * qzy, qyy=qyy, H=H,
        zshift=1.0,
        meta={"r": r, "y_r": y_r, "mu": mu, "parent": list(patch.base_point)},
    )


def patch_holder_seminorms(patch: HodographPatch, alpha: float = 0.5,
                           sigma: Optional[float] = None) -> dict[str, float]:
    """Singular-metric Hoelder seminorms of the five second-order component fields.

    sigma defaults to twice the patch resolution in the singular distance.
    """
    if patch.zshift != 0.0:
        raise ValueError("Hoelder seminorms are defined on boundary patches")
    if sigma is None:
        dy = patch.y[1] - patch.y[0]
        sigma = 2.0 * max(patch.delta, dy)
    Z, Y = patch.zy_mesh()
    fields = {"qz": patch.qz, "qy": patch.qy, "zqzz": patch.wzqzz,
              "sqzqzy": patch.wsqzy, "qyy": patch.qyy}
    return {name: holder_seminorm_s(Z, Y, vals, alpha, sigma)
            for name, vals in fields.items()}
