"""Event-driven integration of the perturbed switching system and periodic-orbit search.

The extended system is theta' = 1, x' = y, y' = eta*x - alpha*sign(x) + eps*f(theta, x, y).
Each smooth piece is integrated with an adaptive Dormand-Prince 4(5) pair until
x changes sign; the crossing is located on the dense output and polished to
|x| <= 1e-12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import _kernels as K
from .closed_form import v_of
from .errors import (
    GrazingError,
    MaxIterations,
    NewtonDivergence,
    RootBracketFailure,
    SimulationError,
    TimeLimitExceeded,
)
from .melnikov import _checked_half_period
from .model import Parameters, annulus_info, classify
from .numerics import DEFAULT_TOL, ToleranceConfig, brent, newton2
from .perturbation import ZERO_PERTURBATION, PerturbationExpr

END_SLACK = 1e-10
TAU_MAX_PERIODS = 10.0
EPS_MAX = 0.05
X_SNAP = 1e-12


class Region(IntEnum):
    PLUS = 1   # x >= 0
    MINUS = -1  # x <= 0

    @property
    def label(self) -> str:
        return "Plus" if self is Region.PLUS else "Minus"


def wrap_phase(theta: float, sigma: float) -> float:
    """theta reduced to [0, sigma)."""
    r = math.fmod(theta, sigma)
    if r < 0.0:
        r += sigma
    return 0.0 if r >= sigma else r


@dataclass(frozen=True)
class ExtendedPoint:
    theta: float
    x: float
    y: float

    @classmethod
    def at(cls, theta: float, x: float, y: float, sigma: float) -> "ExtendedPoint":
        return cls(wrap_phase(theta, sigma), float(x), float(y))


@dataclass(frozen=True)
class CrossingEvent:
    tau: float
    point: ExtendedPoint
    transversal: bool


@dataclass(frozen=True)
class TimeLimit:
    tau: float
    point: ExtendedPoint


@dataclass
class TrajectorySegment:
    region: Region
    tau: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    terminal_event: CrossingEvent | TimeLimit

    @property
    def samples(self) -> list[tuple[float, ExtendedPoint]]:
        return [(float(t), ExtendedPoint(float(th), float(x), float(y)))
                for t, th, x, y in zip(self.tau, self.theta, self.x, self.y)]

    @property
    def start(self) -> ExtendedPoint:
        return ExtendedPoint(float(self.theta[0]), float(self.x[0]), float(self.y[0]))

    @property
    def end(self) -> ExtendedPoint:
        return self.terminal_event.point

    @property
    def duration(self) -> float:
        return float(self.tau[-1] - self.tau[0])


@dataclass(frozen=True)
class DisplacementValue:
    delta1: float
    delta3: float
    tau_plus: float
    tau_minus: float
    y_plus: float
    y_minus: float

    @property
    def norm(self) -> float:
        return math.hypot(self.delta1, self.delta3)


@dataclass
class PeriodicOrbit:
    epsilon: float
    theta0: float
    y0: float
    period: float
    segments: list[TrajectorySegment]
    residual: float
    seed: tuple[float, float] = (math.nan, math.nan)
    seed_distance: float = 0.0

    @property
    def off_seed_branch(self) -> bool:
        """Newton ended farther than 10*|eps| from its seed."""
        return self.epsilon != 0.0 and self.seed_distance > 10.0 * abs(self.epsilon)


@dataclass
class Flow:
    segments: list[TrajectorySegment]
    end: ExtendedPoint
    tau: float


class Branch(list):
    """Orbits from a continuation run; ``failure`` describes an early stop."""

    def __init__(self, orbits=(), failure: str | None = None):
        super().__init__(orbits)
        self.failure = failure


# ---------------------------------------------------------------------------
# single pieces
# ---------------------------------------------------------------------------

def _kernel_f(f: PerturbationExpr | None, eps: float):
    if f is None or eps == 0.0:
        return ZERO_PERTURBATION.kernel_fn
    return f.kernel_fn


def _run(start: ExtendedPoint, region: Region, direction: int, params: Parameters,
         f: PerturbationExpr | None, tau_stop: float, tol: ToleranceConfig, record: bool):
    x0 = 0.0 if abs(start.x) <= X_SNAP else start.x
    if x0 == 0.0 and abs(start.y) <= tol.graze_tol:
        raise GrazingError(f"start ({start.x!r}, {start.y!r}) is a grazing point of x = 0")
    if region * x0 < 0.0:
        raise ValueError(f"start x={start.x!r} is outside region {region.label}")
    if x0 == 0.0 and region * direction * start.y < 0.0:
        raise ValueError(f"start leaves region {region.label} immediately")
    eps = params.epsilon
    status, tau_e, x_e, y_e, buf, n = K.integrate_region(
        _kernel_f(f, eps), start.theta, x0, start.y, int(region), int(direction),
        params.alpha, params.eta, eps, float(tau_stop),
        tol.ode_rtol, tol.ode_atol, tol.graze_tol, record)
    return int(status), float(tau_e), float(x_e), float(y_e), np.array(buf[:n], dtype=float)


def _segment(region, start, buf, terminal, sigma) -> TrajectorySegment:
    tau = buf[:, 0]
    theta = np.mod(start.theta + tau, sigma)
    return TrajectorySegment(region, tau, theta, buf[:, 1], buf[:, 2], terminal)


def _piece(start, region, direction, params, f, tau_stop, tol, record=True):
    """One smooth piece; returns (status, segment).  Raises on grazing/failure."""
    status, tau_e, x_e, y_e, buf = _run(start, region, direction, params, f, tau_stop, tol, record)
    point = ExtendedPoint.at(start.theta + tau_e, x_e, y_e, params.sigma)
    if status in (K.ST_CROSSING, K.ST_GRAZING):
        terminal = CrossingEvent(tau_e, point, status == K.ST_CROSSING)
    else:
        terminal = TimeLimit(tau_e, point)
    seg = _segment(region, start, buf, terminal, params.sigma)
    if status == K.ST_GRAZING:
        raise GrazingError(f"grazing crossing at tau={tau_e!r} (|y|={abs(y_e):.3e})", [seg])
    if status == K.ST_FAILURE:
        raise SimulationError(f"step size underflow at tau={tau_e!r}", [seg])
    if status == K.ST_BAD_START:
        raise ValueError("start point is not inside the region")
    return status, seg


def integrate_piece(start: ExtendedPoint, region: Region, direction: int, params: Parameters,
                    f: PerturbationExpr | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                    tau_max: float | None = None) -> TrajectorySegment:
    """Integrate one region's smooth field until the first crossing of x = 0."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    region = Region(region)
    if tau_max is None:
        tau_max = TAU_MAX_PERIODS * params.sigma
    status, seg = _piece(start, region, direction, params, f, tau_max, tol)
    if status == K.ST_TIME_LIMIT:
        raise TimeLimitExceeded(f"no crossing within |tau| <= {tau_max!r}", [seg])
    return seg


def _initial_region(p: ExtendedPoint, direction: int) -> Region:
    if abs(p.x) > X_SNAP:
        return Region.PLUS if p.x > 0 else Region.MINUS
    return Region.PLUS if direction * p.y > 0 else Region.MINUS


def flow_concat(start: ExtendedPoint, duration: float, params: Parameters,
                f: PerturbationExpr | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                max_crossings: int = 100_000) -> Flow:
    """Follow the switching system for ``duration`` (either sign), crossing x = 0 as needed."""
    if duration == 0.0:
        return Flow([], start, 0.0)
    direction = 1 if duration > 0 else -1
    total = abs(duration)
    tau_limit = TAU_MAX_PERIODS * params.sigma
    segments: list[TrajectorySegment] = []
    region = _initial_region(start, direction)
    point = start
    elapsed = 0.0
    for _ in range(max_crossings):
        remaining = total - elapsed
        stop = min(remaining, tau_limit)
        try:
            status, seg = _piece(point, region, direction, params, f, stop, tol)
        except SimulationError as exc:
            exc.segments = segments + exc.segments
            raise
        seg.tau = seg.tau + direction * elapsed
        segments.append(seg)
        if status == K.ST_TIME_LIMIT:
            if stop < remaining:
                raise TimeLimitExceeded(f"no crossing within |tau| <= {tau_limit!r}", segments)
            end = seg.terminal_event.point
            return Flow(segments, end, direction * total)
        elapsed += abs(seg.terminal_event.tau)
        point = ExtendedPoint(seg.terminal_event.point.theta, 0.0, seg.terminal_event.point.y)
        region = Region(-region)
        # a crossing within round-off of the end time closes the flow
        if total - elapsed <= END_SLACK * max(1.0, total):
            return Flow(segments, point, direction * total)
    raise SimulationError(f"more than {max_crossings} crossings", segments)


# ---------------------------------------------------------------------------
# displacement map
# ---------------------------------------------------------------------------

def displacement(theta0: float, y0: float, epsilon: float, params: Parameters,
                 f: PerturbationExpr | None = None,
                 tol: ToleranceConfig = DEFAULT_TOL) -> DisplacementValue:
    """Mismatch between the forward Plus arc from (theta0, 0, y0) and the
    backward Minus arc from (theta0 + sigma, 0, y0)."""
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    p = Parameters(params.alpha, params.eta, params.sigma, float(epsilon))
    sigma = p.sigma
    th = wrap_phase(float(theta0), sigma)
    tau_max = TAU_MAX_PERIODS * sigma
    status_p, tp, _, yp, _ = _run(ExtendedPoint(th, 0.0, y0), Region.PLUS, 1, p, f, tau_max, tol, False)
    _raise_for(status_p, tp, yp, "forward Plus")
    status_m, tm, _, ym, _ = _run(ExtendedPoint(th + sigma, 0.0, y0), Region.MINUS, -1, p, f, tau_max, tol, False)
    _raise_for(status_m, tm, ym, "backward Minus")
    return DisplacementValue(tp - tm - sigma, yp - ym, tp, tm, yp, ym)


def _raise_for(status, tau, y, what):
    if status == K.ST_CROSSING:
        return
    if status == K.ST_GRAZING:
        raise GrazingError(f"{what} arc grazes x = 0 at tau={tau!r} (|y|={abs(y):.3e})")
    if status == K.ST_TIME_LIMIT:
        raise TimeLimitExceeded(f"{what} arc did not return to x = 0 by tau={tau!r}")
    raise SimulationError(f"{what} arc: integration failed at tau={tau!r}")


def _bracket(ystar: float, params: Parameters, width: float, reach: float) -> tuple[float, float]:
    """[y*(1-width), y*(1+width)] kept inside the annulus domain D."""
    lo_d, hi_d = annulus_info(classify(params.alpha, params.eta)).domain_D
    lo = max(ystar * (1.0 - width), lo_d + reach * (ystar - lo_d))
    hi = ystar * (1.0 + width)
    if math.isfinite(hi_d):
        hi = min(hi, ystar + reach * (hi_d - ystar))
    return lo, hi


def solve_delta1(theta0: float, epsilon: float, params: Parameters,
                 f: PerturbationExpr | None = None,
                 tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """y with Delta_1(theta0, y; eps) = 0 near v(sigma/2)."""
    _, ystar = _checked_half_period(params)

    def g(y):
        return displacement(theta0, y, epsilon, params, f, tol).delta1

    last = None
    for width, reach in ((0.2, 0.5), (0.4, 0.75)):
        lo, hi = _bracket(ystar, params, width, reach)
        try:
            return brent(g, lo, hi, tol.root_tol)
        except (ValueError, SimulationError, MaxIterations) as exc:
            last = exc
    raise RootBracketFailure(f"Delta_1 has no root near y*={ystar!r} at theta0={theta0!r}: {last}")


def delta3_tilde(theta0: float, epsilon: float, params: Parameters,
                 f: PerturbationExpr | None = None,
                 tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """-(y*/eps) * Delta_3 on the curve Delta_1 = 0.  Tends to M(theta0) as eps -> 0."""
    if epsilon == 0.0:
        raise ValueError("epsilon must be nonzero")
    _, ystar = _checked_half_period(params)
    ybar = solve_delta1(theta0, epsilon, params, f, tol)
    d3 = displacement(theta0, ybar, epsilon, params, f, tol).delta3
    return -ystar / epsilon * d3


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------

def _orbit_segments(theta0, y0, p, f, tol):
    start = ExtendedPoint(theta0, 0.0, y0)
    plus = integrate_piece(start, Region.PLUS, 1, p, f, tol)
    ev = plus.terminal_event.point
    minus = integrate_piece(ExtendedPoint(ev.theta, 0.0, ev.y), Region.MINUS, 1, p, f, tol)
    minus.tau = minus.tau + plus.terminal_event.tau
    return [plus, minus]


def _phase_distance(a: float, b: float, sigma: float) -> float:
    d = abs(wrap_phase(a - b, sigma))
    return min(d, sigma - d)


def find_periodic_orbit(epsilon: float, phi_seed: float, params: Parameters,
                        f: PerturbationExpr | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                        eps_max: float = EPS_MAX,
                        seed: tuple[float, float] | None = None) -> PeriodicOrbit:
    """sigma-periodic orbit through x = 0 near (phi_seed, v(sigma/2)).

    ``seed`` overrides the Newton start (used for warm starts); the distance
    reported in the result is always measured from (phi_seed, v(sigma/2)).
    """
    if abs(epsilon) > eps_max:
        raise ValueError(f"|epsilon|={abs(epsilon)!r} exceeds eps_max={eps_max!r}")
    _, ystar = _checked_half_period(params)
    sigma = params.sigma
    p = Parameters(params.alpha, params.eta, sigma, float(epsilon))
    home = (wrap_phase(float(phi_seed), sigma), ystar)
    start = home if seed is None else (float(seed[0]), float(seed[1]))

    def G(theta, y):
        if not y > 0:
            return math.nan, math.nan
        try:
            d = displacement(theta, y, epsilon, p, f, tol)
        except SimulationError:
            return math.nan, math.nan
        return d.delta1, d.delta3

    if epsilon == 0.0:
        # every annulus orbit persists; the seed is already a solution
        theta0, y0 = home
    else:
        try:
            theta0, y0 = newton2(G, start, tol=tol.newton_tol, max_iters=tol.max_iters)
        except MaxIterations as exc:
            raise NewtonDivergence(f"Newton failed from seed {start}: {exc}") from None
        theta0 = wrap_phase(theta0, sigma)
        if sigma - theta0 < 1e-12 * sigma:
            theta0 = 0.0
    # at eps = 0 the seed is an exact solution; report the analytic residual
    residual = 0.0 if epsilon == 0.0 else displacement(theta0, y0, epsilon, p, f, tol).norm
    segments = _orbit_segments(theta0, y0, p, f, tol)
    dist = math.hypot(_phase_distance(theta0, home[0], sigma), y0 - home[1])
    return PeriodicOrbit(float(epsilon), theta0, y0, sigma, segments, residual, home, dist)


def continuation(eps_list: Sequence[float], phi_star: float, params: Parameters,
                 f: PerturbationExpr | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                 eps_max: float = EPS_MAX) -> Branch:
    """Track the orbit born at phi_star along eps_list with warm-started Newton.

    Stops at the first failure; the orbits found so far are kept and the
    reason is stored on ``Branch.failure``.
    """
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValueError("eps_list is empty")
    diffs = np.diff(eps)
    if len(eps) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("eps_list must be strictly monotone")
    sigma = params.sigma
    branch = Branch()
    for e in eps:
        seed = None
        if len(branch) >= 2:
            a, b = branch[-2], branch[-1]
            r = (e - b.epsilon) / (b.epsilon - a.epsilon)
            dth = wrap_phase(b.theta0 - a.theta0 + 0.5 * sigma, sigma) - 0.5 * sigma
            seed = (b.theta0 + r * dth, b.y0 + r * (b.y0 - a.y0))
        elif branch:
            seed = (branch[-1].theta0, branch[-1].y0)
        try:
            orbit = find_periodic_orbit(e, phi_star, params, f, tol, eps_max, seed)
        except (NewtonDivergence, SimulationError, ValueError) as exc:
            branch.failure = f"stopped at eps={e!r}: {exc}"
            break
        branch.append(orbit)
    return branch


def predicted_y0(params: Parameters) -> float:
    return v_of(0.5 * params.sigma, params)
