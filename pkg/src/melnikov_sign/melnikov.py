"""The Melnikov-like function M(phi) and its zeros.

    M(phi) = int_0^{sigma/2} U(t, sigma/2) [f(phi + t, G(t)) + f(phi - t, R G(t))] dt

with G(t) = Gamma^+(t, v(sigma/2)) and R(x, y) = (-x, y).  The integrand is
generated per perturbation and handed to the compiled GK15 kernel.  G is
evaluated in a form centred on t = sigma/4 so that large sigma stays finite.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from ._jit import INTEGRAND_SIG, as_kernel_callable
from .closed_form import v_of
from .errors import AdmissibilityError
from .model import Parameters, annulus_info, classify, inside
from .numerics import DEFAULT_TOL, ToleranceConfig, brent, check_quad_status
from .perturbation import PerturbationExpr, diff_t

_INTEGRAND_TEMPLATE = """
def _g(t, p):
    x, y = orbit_xy(t, p[3], p[1], p[2])
    u = kernel_u_value(t, p[3], p[1], p[2])
    return u * (F(p[0] + t, x, y) + F(p[0] - t, -x, y))
"""


@lru_cache(maxsize=128)
def _integrand(body: str, inline_fn):
    ns = {
        "F": inline_fn,
        "orbit_xy": K.orbit_xy,
        "kernel_u_value": K.kernel_u_value,
    }
    exec(compile(_INTEGRAND_TEMPLATE, f"<integrand {body}>", "exec"), ns)
    return as_kernel_callable(ns["_g"], INTEGRAND_SIG)


def _integrand_for(f: PerturbationExpr):
    return _integrand(f.python_body, f.inline_fn)


def _checked_half_period(params: Parameters) -> tuple[float, float]:
    """(s, v(s)) with s = sigma/2, after the admissibility check."""
    info = annulus_info(classify(params.alpha, params.eta))
    s = 0.5 * params.sigma
    if not inside(s, info.image_I):
        lo, hi = info.image_I
        raise AdmissibilityError(
            f"sigma/2 = {s!r} is not in the open interval I = ({lo!r}, {hi!r}); "
            f"admissible sigma lies in ({2 * lo!r}, {2 * hi!r})",
            info.image_I,
        )
    return s, v_of(s, params)


def _integrate(g, phi, params, s, ystar, tol: ToleranceConfig) -> float:
    p = np.array([phi, params.alpha, params.eta, s, ystar])
    value, _, status = K.gk15_adaptive(g, p, 0.0, s, tol.quad_abs_tol, tol.max_quad_depth)
    check_quad_status(status, value)
    return float(value)


def melnikov(phi: float, params: Parameters, f: PerturbationExpr,
             tol: ToleranceConfig = DEFAULT_TOL) -> float:
    s, ystar = _checked_half_period(params)
    return _integrate(_integrand_for(f), float(phi), params, s, ystar, tol)


def melnikov_derivative(phi: float, params: Parameters, f: PerturbationExpr,
                        tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """M'(phi), by differentiating under the integral sign."""
    s, ystar = _checked_half_period(params)
    return _integrate(_integrand_for(diff_t(f)), float(phi), params, s, ystar, tol)


def thread_count() -> int:
    """Worker cap from MELNIKOV_THREADS (default 1, i.e. serial)."""
    raw = os.environ.get("MELNIKOV_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"MELNIKOV_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"MELNIKOV_THREADS must be a positive integer, got {raw!r}")
    return n


def melnikov_values(phis, params: Parameters, f: PerturbationExpr,
                    tol: ToleranceConfig = DEFAULT_TOL, threads: int | None = None) -> np.ndarray:
    """M on an array of phases.  Output order always follows ``phis``."""
    s, ystar = _checked_half_period(params)
    g = _integrand_for(f)
    phis = np.asarray(phis, dtype=float)
    threads = thread_count() if threads is None else threads

    def one(phi):
        return _integrate(g, phi, params, s, ystar, tol)

    if threads <= 1 or len(phis) < 2:
        return np.array([one(phi) for phi in phis])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(one, phis)))


@dataclass
class MelnikovZero:
    phi_star: float
    dM: float


@dataclass
class MelnikovResult:
    phi_grid: np.ndarray
    values: np.ndarray
    zeros: list[MelnikovZero] = field(default_factory=list)
    degenerate_flat: bool = False
    non_simple: list[MelnikovZero] = field(default_factory=list)


def _bracket_roots(phis, values, sigma, M, root_tol):
    # the last interval wraps to sigma, where M(sigma) = M(0) by periodicity
    n = len(phis)
    roots = []
    for i in range(n):
        a, fa = phis[i], values[i]
        b, fb = (phis[i + 1], values[i + 1]) if i + 1 < n else (sigma, values[0])
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brent(M, a, b, root_tol))
    return roots


def _normalize(phi, sigma, spacing):
    phi = math.fmod(phi, sigma)
    if phi < 0.0:
        phi += sigma
    if sigma - phi < 1e-3 * spacing:
        phi = 0.0
    return phi


def melnikov_grid(params: Parameters, f: PerturbationExpr, n: int = 256,
                  tol: ToleranceConfig = DEFAULT_TOL, threads: int | None = None) -> MelnikovResult:
    """M on a uniform n-point grid over [0, sigma) plus its located zeros."""
    if n < 16:
        raise ValueError("need n >= 16 grid points")
    sigma = params.sigma
    spacing = sigma / n
    phis = np.arange(n) * spacing
    values = melnikov_values(phis, params, f, tol, threads)
    result = MelnikovResult(phis, values)
    if np.all(np.abs(values) <= tol.zero_tol):
        result.degenerate_flat = True
        return result

    def M(phi):
        return melnikov(phi, params, f, tol)

    roots = sorted(_normalize(r, sigma, spacing) for r in _bracket_roots(phis, values, sigma, M, tol.root_tol))
    kept: list[float] = []
    for r in roots:
        if kept and r - kept[-1] <= spacing:
            continue
        kept.append(r)
    if len(kept) > 1 and kept[0] + sigma - kept[-1] <= spacing:
        kept.pop()
    for r in kept:
        if abs(M(r)) > tol.zero_tol:
            continue
        z = MelnikovZero(r, melnikov_derivative(r, params, f, tol))
        (result.zeros if abs(z.dM) > tol.simple_tol else result.non_simple).append(z)
    return result


def sin_oracle(i: int, phi: float, alpha: float, eta: float, beta: float) -> float:
    """Closed form of M for f = sin(beta t) and sigma = 2 pi i / beta (case C1)."""
    if i < 1:
        raise ValueError("i must be >= 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return 2.0 * alpha * (1 + (-1) ** (i - 1)) * math.sin(beta * phi) / (beta * beta + eta)


def predicted_initial_condition(phi_star: float, params: Parameters) -> tuple[float, float, float]:
    """Section point (theta, x, y) from which the perturbed orbit emanates."""
    _, ystar = _checked_half_period(params)
    return float(phi_star), 0.0, ystar
