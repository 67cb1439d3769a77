"""Radial free-boundary profiles: the 1D ground truth for the 2D solver.

A radial density f(r) with interface at r = rho satisfies

    f'' f' / r = h0 f^p,        f(rho) = f'(rho) = 0,

with local behavior f ~ A (r - rho)^q, q = 3/(2-p).  Matching leading and
next-to-leading orders of the two-term series f = A s^q (1 + c1 s), s = r-rho,
gives

    A  = (h0 rho / (q^2 (q-1)))^(1/(2-p)),
    c1 = 1 / (rho ((q+1)(2q-1)/(q(q-1)) - p)).

The profile is integrated in the rescaled variables u = f/(A s^q),
v = f'/(A q s^(q-1)) against tau = log s:

    du/dtau = q (v - u),
    dv/dtau = (q-1) ((1 + e^tau/rho) u^p / v - v),

which keeps every quantity O(1) down to the interface (the fixed point
u = v = 1 is attracting forward in tau, so the series launch is stable).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .grid_domain import ConvexDomain, FloatArray, ScalarField2D, make_grid
from .transforms import ExponentPack

__all__ = ["RadialSolution", "leading_coefficient", "series_correction",
           "solve_radial", "radial_pressure", "radial_to_field"]


def _check_params(p: float, rho: float, h0: float) -> None:
    if not 0.0 < p < 2.0:
        raise ValueError(f"need 0 < p < 2, got p={p}")
    if rho <= 0:
        raise ValueError(f"need rho > 0, got rho={rho}")
    if h0 <= 0:
        raise ValueError(f"need h0 > 0, got h0={h0}")


def leading_coefficient(p: float, rho: float, h0: float) -> float:
    """A = (h0 rho / (q^2 (q-1)))^(1/(2-p)), the interface series leading coefficient."""
    _check_params(p, rho, h0)
    q = 3.0 / (2.0 - p)
    return (h0 * rho / (q * q * (q - 1.0))) ** (1.0 / (2.0 - p))


def series_correction(p: float, rho: float) -> float:
    """First-order series correction c1 in f = A s^q (1 + c1 s + ...)."""
    if not 0.0 < p < 2.0:
        raise ValueError(f"need 0 < p < 2, got p={p}")
    q = 3.0 / (2.0 - p)
    return 1.0 / (rho * ((q + 1.0) * (2.0 * q - 1.0) / (q * (q - 1.0)) - p))


@dataclass
class RadialSolution:
    """Integrated radial profile with interface radius rho and outer radius R."""

    p: float
    rho: float
    h0: float
    R: float
    A: float
    c1: float
    tol: float
    r: FloatArray
    f: FloatArray
    fprime: FloatArray
    g: FloatArray
    gprime: FloatArray
    _tau: FloatArray = field(repr=False)
    _u: FloatArray = field(repr=False)
    _v: FloatArray = field(repr=False)
    _u_interp: Optional[PchipInterpolator] = field(default=None, repr=False)
    _v_interp: Optional[PchipInterpolator] = field(default=None, repr=False)

    @property
    def q(self) -> float:
        return 3.0 / (2.0 - self.p)

    @property
    def theta(self) -> float:
        return (1.0 + self.p) / (2.0 - self.p)

    def _interps(self):
        if self._u_interp is None:
            self._u_interp = PchipInterpolator(self._tau, self._u)
            self._v_interp = PchipInterpolator(self._tau, self._v)
        return self._u_interp, self._v_interp

    def _uv_at(self, s: FloatArray) -> tuple[FloatArray, FloatArray]:
        ui, vi = self._interps()
        s = np.asarray(s, float)
        tau = np.log(np.maximum(s, 1e-300))
        tau_lo = self._tau[0]
        u = np.where(tau < tau_lo, 1.0 + self.c1 * s, ui(np.clip(tau, tau_lo, self._tau[-1])))
        v = np.where(tau < tau_lo, 1.0 + (self.q + 1.0) * self.c1 * s / self.q,
                     vi(np.clip(tau, tau_lo, self._tau[-1])))
        return u, v

    def density_at(self, r: FloatArray) -> FloatArray:
        """f(r); zero for r <= rho, series/interpolated profile outside."""
        r = np.asarray(r, float)
        if np.any(r > self.R * (1 + 1e-12)):
            raise ValueError(f"radius {float(np.max(r)):.6g} exceeds profile range R={self.R}")
        s = np.maximum(r - self.rho, 0.0)
        u, _ = self._uv_at(np.maximum(s, 1e-300))
        return np.where(s > 0, self.A * s**self.q * u, 0.0)

    def dd_density_at(self, r: FloatArray) -> FloatArray:
        """f'(r)."""
        r = np.asarray(r, float)
        s = np.maximum(r - self.rho, 0.0)
        _, v = self._uv_at(np.maximum(s, 1e-300))
        return np.where(s > 0, self.A * self.q * s ** (self.q - 1.0) * v, 0.0)

    def pressure_at(self, r: FloatArray) -> FloatArray:
        """g(r) = q^(2/3) f(r)^(1/q)."""
        r = np.asarray(r, float)
        s = np.maximum(r - self.rho, 0.0)
        u, _ = self._uv_at(np.maximum(s, 1e-300))
        return np.where(s > 0, self.q ** (2.0 / 3.0) * self.A ** (1.0 / self.q) * s
                        * u ** (1.0 / self.q), 0.0)

    def pressure_slope_at(self, r: FloatArray) -> FloatArray:
        """g'(r) = q^(-1/3) f^(1/q - 1) f' for r > rho."""
        r = np.asarray(r, float)
        s = np.maximum(r - self.rho, 0.0)
        u, v = self._uv_at(np.maximum(s, 1e-300))
        base = self.q ** (2.0 / 3.0) * self.A ** (1.0 / self.q)
        return np.where(s > 0, base * u ** (1.0 / self.q - 1.0) * v, 0.0)

    def interface_pressure_slope(self) -> float:
        """g'(rho+) = q^(2/3) A^(1/q); equals (h0 rho / theta)^(1/3) identically."""
        return self.q ** (2.0 / 3.0) * self.A ** (1.0 / self.q)

    def exponent_fit(self, s_min: float = 1e-3, s_max: float = 1e-1) -> float:
        """Log-log slope of f vs (r - rho) over [s_min, s_max]."""
        s = np.geomspace(s_min, min(s_max, self.R - self.rho), 64)
        fvals = self.density_at(self.rho + s)
        slope = np.polyfit(np.log(s), np.log(fvals), 1)[0]
        return float(slope)

    def ode_residual(self, n: int = 400) -> float:
        """max |f'' f' - r h0 f^p| / (1 + |f'' f'|) with f'' from independent differencing."""
        s = np.geomspace(1.2 * (self.r[0] - self.rho), 0.98 * (self.R - self.rho), n)
        r = self.rho + s
        ds = 1e-4 * s
        fp_plus = self.dd_density_at(r + ds)
        fp_minus = self.dd_density_at(r - ds)
        fpp = (fp_plus - fp_minus) / (2 * ds)
        fp = self.dd_density_at(r)
        fv = self.density_at(r)
        res = np.abs(fpp * fp - r * self.h0 * fv**self.p) / (1.0 + np.abs(fpp * fp))
        return float(res.max())

    # -- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,f,fprime,g,gprime\n")
        for k in range(self.r.size):
            buf.write(f"{self.r[k]:.17g},{self.f[k]:.17g},{self.fprime[k]:.17g},"
                      f"{self.g[k]:.17g},{self.gprime[k]:.17g}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "p": self.p, "rho": self.rho, "h0": self.h0, "R": self.R,
            "A": self.A, "c1": self.c1,
            "gprime_interface": self.interface_pressure_slope(),
            "gprime_interface_closed_form": (self.h0 * self.rho / self.theta) ** (1.0 / 3.0),
            "exponent_fit": self.exponent_fit(),
            "q": self.q, "theta": self.theta, "tol": self.tol,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def solve_radial(p: float, rho: float, h0: float, R: float,
                 tol: float = 1e-9, n_samples: int = 600,
                 eps_factor: float = 1e-6) -> RadialSolution:
    """Integrate the radial profile outward from the two-term series launch.

    Starts at s = eps_factor * rho with the series initial data and adaptive
    embedded Runge-Kutta stepping (relative tolerance ``tol``) in the
    rescaled log variables; samples are geometric in s down to the launch.
    """
    _check_params(p, rho, h0)
    if R <= rho:
        raise ValueError(f"outer radius R={R} must exceed rho={rho}")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    q = 3.0 / (2.0 - p)
    A = leading_coefficient(p, rho, h0)
    c1 = series_correction(p, rho)
    eps = eps_factor * rho
    if c1 * eps > 1e-2:
        raise ValueError(f"series launch too far from the interface: c1*eps={c1 * eps:.3g}")
    tau0, tau1 = math.log(eps), math.log(R - rho)

    def rhs(tau, uv):
        u, v = uv
        if v <= 0:
            raise FloatingPointError(f"f' underflow at tau={tau:.4g} (launch eps too small)")
        s = math.exp(tau)
        return [q * (v - u), (q - 1.0) * ((1.0 + s / rho) * u**p / v - v)]

    u0 = 1.0 + c1 * eps
    v0 = 1.0 + (q + 1.0) * c1 * eps / q
    sol = solve_ivp(rhs, (tau0, tau1), [u0, v0], method="RK45",
                    rtol=tol, atol=1e-12, dense_output=True, max_step=0.25)
    if not sol.success:
        raise RuntimeError(f"radial integration failed: {sol.message} (step-size collapse)")

    tau = np.linspace(tau0, tau1, n_samples)
    u, v = sol.sol(tau)
    s = np.exp(tau)
    r = rho + s
    f = A * s**q * u
    fp = A * q * s ** (q - 1.0) * v
    g = q ** (2.0 / 3.0) * A ** (1.0 / q) * s * u ** (1.0 / q)
    gp = q ** (2.0 / 3.0) * A ** (1.0 / q) * u ** (1.0 / q - 1.0) * v
    return RadialSolution(p=p, rho=rho, h0=h0, R=R, A=A, c1=c1, tol=tol,
                          r=r, f=f, fprime=fp, g=g, gprime=gp,
                          _tau=tau, _u=u, _v=v)


def radial_pressure(sol: RadialSolution, pack: ExponentPack) -> tuple[FloatArray, FloatArray]:
    """Pressure samples (g, g') of a radial profile.

    The interface slope g'(rho+) equals (h0 rho / theta)^(1/3); the stored
    samples converge to it as r -> rho+.
    """
    if abs(pack.p - sol.p) > 1e-12:
        raise ValueError(f"exponent pack p={pack.p} does not match profile p={sol.p}")
    return sol.g.copy(), sol.gprime.copy()


def radial_to_field(sol: RadialSolution, domain: ConvexDomain, n: int) -> ScalarField2D:
    """Rotationally extend the radial profile onto a 2D grid over a centered disk."""
    if domain.kind != "disk" or domain.center != (0.0, 0.0):
        raise ValueError("radial extension needs a disk domain centered at the origin")
    if domain.radii[0] > sol.R * (1 + 1e-12):
        raise ValueError(f"domain radius {domain.radii[0]} exceeds profile range R={sol.R}")
    fld = make_grid(domain, n)
    X, Y = fld.meshgrid()
    rr = np.hypot(X, Y)
    vals = np.zeros_like(rr)
    inside = fld.inside()
    vals[inside] = sol.density_at(np.minimum(rr[inside], sol.R))
    fld.values = vals
    return fld
