"""Method of continuity: explicit supersolution, forcing family, t-march.

The supersolution is the radial profile psi1(P) = c1 (|P|^2 - rho^2)_+^q whose
forcing ratio is available in closed form on the positivity set,

    det D^2 psi1 / psi1^p = c1^(2-p) q^2 ((8q - 4) r^2 - 4 rho^2),

increasing in r, so a bisection on c1 places the ratio range inside
(2*lam, 1/2).  The family h_t = (1-t) hbar + t is marched from t = 0 (where
the start iterate is psi itself) to t = 1, re-solving warm-started at each
step, running the full estimate suite, and checking the working hypotheses:

    H1  domain inside the unit ball,
    H2  B_rho contained in the vanishing set (within one cell),
    H3  strict convexity of the density on its positivity set,
    H4  complete estimate report with positive frame-matrix and patch bounds
        not degraded more than 2x from the t = 0 baseline.

A failed step halves the increment and retries; exhaustion of the increment
floor ends the march, reporting the largest achieved t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid_domain import BoundaryData, ConvexDomain, FloatArray, ScalarField2D, make_grid
from .ma_solver import PressureSolution, SolveConfig, solve_ma
from .transforms import ExponentPack, pressure_from_density
from .diagnostics import EstimateReport, _midpoint_convexity_ok, estimate_suite

__all__ = ["Supersolution", "ContinuationState", "build_supersolution",
           "forcing_at", "run_continuation", "supersolution_trace"]

DELTA_FLOOR = 1e-3


@dataclass
class Supersolution:
    """psi1 = c1 (|P|^2 - rho^2)_+^q with its exact forcing ratio."""

    c1: float
    rho: float
    p: float
    lam: float                  # recorded lower forcing bound (the target lambda)
    psi: ScalarField2D
    hbar: ScalarField2D         # analytic ratio, extended inside B_rho by its interface limit
    hbar_min: float             # achieved bounds of the ratio on the positivity set
    hbar_max: float

    @property
    def q(self) -> float:
        return 3.0 / (2.0 - self.p)

    def psi_at(self, x: FloatArray, y: FloatArray) -> FloatArray:
        r2 = np.asarray(x, float) ** 2 + np.asarray(y, float) ** 2
        return self.c1 * np.maximum(r2 - self.rho**2, 0.0) ** self.q

    def ratio_at(self, r: FloatArray) -> FloatArray:
        """det D^2 psi1 / psi1^p as a function of radius, clamped below rho.

        The clamp extends the forcing smoothly into the vanishing set, where
        the ratio is otherwise 0/0; the extension never affects solutions
        (the source carries a factor f^p) but keeps h_t inside its bounds.
        """
        q = self.q
        r_eff = np.maximum(np.asarray(r, float), self.rho)
        return self.c1 ** (2.0 - self.p) * q * q * ((8 * q - 4) * r_eff**2 - 4 * self.rho**2)


def supersolution_trace(sup: Supersolution, domain: ConvexDomain,
                        samples: int = 256) -> BoundaryData:
    """Boundary data equal to the supersolution trace (the standard march setup).

    With this data the ceiling f(.; t) <= psi holds for the whole family by
    comparison, so every hypothesis monitor has an exact reference.
    """
    return BoundaryData.from_function(domain, lambda x, y: sup.psi_at(x, y),
                                      q=sup.q, samples=samples)


def build_supersolution(p: float, rho: float, domain: ConvexDomain,
                        boundary: Optional[BoundaryData], lam_target: float,
                        n: int) -> Supersolution:
    """Pick c1 by bisection so the forcing ratio lies in (2*lam_target, 1/2).

    The ratio scales as c1^(2-p), so the bracket is monotone.  When boundary
    data is supplied, dominance phi >= psi1 on the outer boundary is
    verified; boundary modification to equality is not performed.
    """
    if not 0.0 < p < 2.0:
        raise ValueError(f"need 0 < p < 2, got p={p}")
    if not 0.0 < lam_target < 0.25:
        raise ValueError(f"lam_target must lie in (0, 0.25), got {lam_target}")
    q = 3.0 / (2.0 - p)
    ang = np.linspace(-np.pi, np.pi, 720, endpoint=False)
    bx, by = domain.boundary_point(ang)
    r_bdry = np.hypot(bx, by)
    r_max = float(r_bdry.max())
    if rho >= float(r_bdry.min()):
        raise ValueError(f"rho={rho} does not fit strictly inside the domain "
                         f"(min boundary radius {float(r_bdry.min()):.4g})")

    B_min = q * q * ((8 * q - 8) * rho**2)              # ratio/c1^(2-p) at r -> rho+
    B_max = q * q * ((8 * q - 4) * r_max**2 - 4 * rho**2)
    if B_max / B_min >= 1.0 / (4.0 * lam_target):
        raise ValueError(
            "no admissible c1: ratio spread "
            f"{B_max / B_min:.3g} exceeds (1/2)/(2*lam_target) = {1 / (4 * lam_target):.3g}; "
            "shrink the domain, grow rho, or lower lam_target")

    lo, hi = 1e-12, 1e6
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        scale = mid ** (2.0 - p)
        if scale * B_min <= 2.0 * lam_target:
            lo = mid
        elif scale * B_max >= 0.5:
            hi = mid
        else:
            c1 = mid
            break
    else:
        raise ValueError("bisection for c1 failed to terminate")

    if boundary is not None:
        phi_b = boundary.density_at(bx, by)
        psi_b = c1 * np.maximum(r_bdry**2 - rho**2, 0.0) ** q
        if np.any(phi_b < psi_b * (1 - 1e-12)):
            k = int(np.argmax(psi_b - phi_b))
            raise ValueError(
                f"boundary dominance violated: phi={phi_b[k]:.6g} < psi1={psi_b[k]:.6g} "
                f"at boundary angle {ang[k]:.4f}")

    grid = make_grid(domain, n)
    X, Y = grid.meshgrid()
    rr = np.hypot(X, Y)
    sup = Supersolution(c1=c1, rho=rho, p=p, lam=lam_target,
                        psi=grid.like(np.zeros(grid.shape)),
                        hbar=grid.like(np.zeros(grid.shape)),
                        hbar_min=float(c1 ** (2.0 - p) * B_min),
                        hbar_max=float(c1 ** (2.0 - p) * B_max))
    sup.psi.values[:] = sup.psi_at(X, Y)
    sup.psi.values[~grid.inside()] = 0.0
    sup.hbar.values[:] = sup.ratio_at(rr)
    return sup


def forcing_at(t: float, hbar: ScalarField2D) -> ScalarField2D:
    """h_t = (1 - t) hbar + t, nodewise convex combination."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"continuation parameter t={t} outside [0, 1]")
    return hbar.like((1.0 - t) * hbar.values + t)


@dataclass
class ContinuationState:
    t: float
    delta: float
    h_t: ScalarField2D
    sol: PressureSolution
    report: EstimateReport
    flags: dict[str, bool]
    ceiling_ok: bool            # f(.; t) <= psi + tol nodewise
    monotone_ok: bool           # f decreased and the vanishing set grew vs previous state

    def accepted(self) -> bool:
        return all(self.flags.values()) and self.sol.report.converged

    def ledger_record(self) -> dict:
        return {
            "t": self.t,
            "delta": self.delta,
            "sweeps": self.sol.report.sweeps,
            "residual": self.sol.report.residual_sup,
            "flags": dict(self.flags),
            "ceiling_ok": self.ceiling_ok,
            "monotone_ok": self.monotone_ok,
            "grad_min": self.report.grad_min,
            "grad_max": self.report.grad_max,
            "m_eig_min": self.report.m_eig_min,
            "b_min": min((p.b_min for p in self.report.patch_reports), default=float("nan")),
            "fb_relation_sup": self.report.fb_relation_sup,
        }


def _hypothesis_flags(domain: ConvexDomain, sup: Supersolution, sol: PressureSolution,
                      report: EstimateReport, baseline: Optional[EstimateReport]) -> dict[str, bool]:
    dx = sol.spacing
    X, Y = sol.f.meshgrid()
    rr = np.hypot(X, Y)
    core = sol.f.inside() & (rr <= sup.rho - math.sqrt(2.0) * dx)
    h2 = bool(np.all(sol.f.values[core] == 0.0)) if core.any() else False
    h3, _ = _midpoint_convexity_ok(sol.f)
    h4 = report.complete() and report.m_eig_min > 0 \
        and all(p.A_eig_min > 0 and p.b_min > 0 for p in report.patch_reports)
    if baseline is not None and h4:
        h4 = (report.grad_min >= 0.5 * baseline.grad_min
              and report.grad_max <= 2.0 * baseline.grad_max
              and report.m_eig_min >= 0.5 * baseline.m_eig_min)
    return {"H1": domain.in_unit_ball(), "H2": h2, "H3": h3, "H4": h4}


def run_continuation(sup: Supersolution, domain: ConvexDomain, boundary: BoundaryData,
                     pack: ExponentPack, cfg: SolveConfig, delta0: float = 0.1,
                     comparison_tol: Optional[float] = None,
                     on_state: Optional[Callable[[ContinuationState], None]] = None
                     ) -> list[ContinuationState]:
    """March h_t from the supersolution forcing to the constant forcing.

    Starts at t = 0 from f = psi, warm-starts each re-solve from the previous
    accepted solution, halves the step on rejection (floor 1e-3) and returns
    the accepted states; the march ends early with the largest achieved t
    when the floor is reached.  The comparison tolerance defaults to 2% of
    the supersolution amplitude (the t = 0 state equals psi only up to
    discretization error).
    """
    if not 0.0 < delta0 <= 1.0:
        raise ValueError(f"delta0 must lie in (0, 1], got {delta0}")
    if abs(pack.p - sup.p) > 1e-12:
        raise ValueError(f"pack p={pack.p} does not match supersolution p={sup.p}")
    if comparison_tol is None:
        comparison_tol = max(1e-10, 0.02 * float(sup.psi.values.max()))

    states: list[ContinuationState] = []
    psi_vals = sup.psi.values

    def attempt(t: float, delta: float, init: ScalarField2D,
                baseline: Optional[EstimateReport]) -> Optional[ContinuationState]:
        h_t = forcing_at(t, sup.hbar)
        sol = solve_ma(domain, boundary, h_t, pack, cfg, init=init)
        if not sol.report.converged or sol.interface is None:
            return None
        report = estimate_suite(sol)
        flags = _hypothesis_flags(domain, sup, sol, report, baseline)
        ceiling = bool(np.all(sol.f.values <= psi_vals + comparison_tol))
        if states:
            prev = states[-1].sol
            mono_f = bool(np.all(sol.f.values <= prev.f.values + comparison_tol))
            grew = _vanishing_grew(prev, sol)
            monotone = mono_f and grew
        else:
            monotone = True
        state = ContinuationState(t=t, delta=delta, h_t=h_t, sol=sol, report=report,
                                  flags=flags, ceiling_ok=ceiling, monotone_ok=monotone)
        return state if state.accepted() else None

    state0 = attempt(0.0, 0.0, sup.psi, None)
    if state0 is None:
        raise RuntimeError("continuation could not establish the t = 0 state from psi")
    states.append(state0)
    if on_state:
        on_state(state0)
    baseline = state0.report

    t = 0.0
    delta = delta0
    while t < 1.0:
        t_next = t + delta
        if t_next >= 1.0 - 1e-12:
            t_next = 1.0
        state = attempt(t_next, delta, states[-1].sol.f, baseline)
        if state is None:
            delta *= 0.5
            if delta < DELTA_FLOOR:
                break
            continue
        states.append(state)
        if on_state:
            on_state(state)
        t = t_next
    return states


def _vanishing_grew(prev: PressureSolution, cur: PressureSolution) -> bool:
    """Vanishing-set monotonicity within one cell: every old vanishing node is
    within one cell of a new vanishing node."""
    old = prev.vanishing_mask()
    new = cur.vanishing_mask()
    grown = new.copy()
    grown[1:, :] |= new[:-1, :]
    grown[:-1, :] |= new[1:, :]
    grown[:, 1:] |= new[:, :-1]
    grown[:, :-1] |= new[:, 1:]
    return bool(np.all(grown[old]))


def ledger_jsonl(states: list[ContinuationState]) -> str:
    """One JSON record per accepted state, byte-stable under fixed inputs."""
    lines = [json.dumps(s.ledger_record(), sort_keys=True) for s in states]
    return "\n".join(lines) + "\n"
