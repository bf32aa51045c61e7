"""Shared numerical building blocks: Brent, damped 2-D Newton, adaptive GK15, slope fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from ._jit import pyfunc
from .errors import (
    DegenerateInput,
    MaxIterations,
    NoSignChange,
    QuadratureFailure,
    SingularJacobian,
)


@dataclass(frozen=True)
class ToleranceConfig:
    quad_abs_tol: float = 1e-10
    root_tol: float = 1e-12
    newton_tol: float = 1e-10
    max_iters: int = 50
    max_quad_depth: int = 30
    zero_tol: float = 1e-9
    simple_tol: float = 1e-6
    ode_rtol: float = 1e-12
    ode_atol: float = 1e-14
    graze_tol: float = 1e-7

    def __post_init__(self):
        for fld in fields(self):
            if not getattr(self, fld.name) > 0:
                raise ValueError(f"{fld.name} must be positive")

    def override(self, **changes) -> "ToleranceConfig":
        names = {fld.name: fld.type for fld in fields(self)}
        cast = {}
        for key, value in changes.items():
            if key not in names:
                raise KeyError(f"unknown tolerance {key!r}; known: {', '.join(sorted(names))}")
            cast[key] = int(value) if names[key] in (int, "int") else float(value)
        return replace(self, **cast)


DEFAULT_TOL = ToleranceConfig()

_NO_ARGS = np.empty(0)


def brent(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12,
          max_evals: int = 200) -> float:
    """Root of g bracketed by [lo, hi]."""
    root, status, _ = pyfunc(K.brent_root)(lambda x, _a: g(x), _NO_ARGS, lo, hi, tol, max_evals)
    if status == 1:
        raise NoSignChange(f"g({lo!r}) and g({hi!r}) have the same sign")
    if status == 2:
        raise MaxIterations(f"Brent did not converge within {max_evals} evaluations")
    return float(root)


def newton2(G: Callable[[float, float], tuple[float, float]], seed: tuple[float, float],
            tol: float = 1e-10, fd_step: float = 1e-7, max_iters: int = 50,
            max_halvings: int = 8, polish: int = 1) -> tuple[float, float]:
    """Damped Newton for a map R^2 -> R^2 with forward-difference Jacobian.

    A step whose residual is not smaller (or not finite) is halved up to
    ``max_halvings`` times.  Once ||G|| <= tol, up to ``polish`` further steps
    are taken while they keep reducing the residual.
    """
    u = np.array(seed, dtype=float)
    r = np.asarray(G(*u), dtype=float)
    if not np.all(np.isfinite(r)):
        raise MaxIterations("residual is not finite at the seed")
    norm = float(np.hypot(*r))
    polished = 0
    for _ in range(max_iters + polish):
        if norm <= tol:
            if polished >= polish or norm == 0.0:
                return float(u[0]), float(u[1])
            polished += 1
        J = np.empty((2, 2))
        for j in range(2):
            h = fd_step * max(1.0, abs(u[j]))
            up = u.copy()
            up[j] += h
            rp = np.asarray(G(*up), dtype=float)
            if not np.all(np.isfinite(rp)):
                raise MaxIterations("residual not finite while forming the Jacobian")
            J[:, j] = (rp - r) / h
        # column scaling before the determinant test
        scale = np.maximum(np.abs(J).max(axis=0), 1e-300)
        Js = J / scale
        if abs(np.linalg.det(Js)) < 1e-14:
            raise SingularJacobian(f"near-singular Jacobian at {u.tolist()}")
        step = np.linalg.solve(Js, -r) / scale
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = u + lam * step
            rt = np.asarray(G(*trial), dtype=float)
            nt = float(np.hypot(*rt)) if np.all(np.isfinite(rt)) else math.inf
            if nt < norm:
                break
            lam *= 0.5
        else:
            if norm <= tol:
                return float(u[0]), float(u[1])
            raise MaxIterations(f"line search failed at {u.tolist()} (residual {norm:.3e})")
        u, r, norm = trial, rt, nt
    if norm <= tol:
        return float(u[0]), float(u[1])
    raise MaxIterations(f"no convergence in {max_iters} iterations (residual {norm:.3e})")


def adaptive_quad(g: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                  max_depth: int = 30) -> float:
    """Integral of g over [a, b] by adaptive Gauss-Kronrod 15."""
    if b < a:
        raise ValueError("need a <= b")
    value, _, status = pyfunc(K.gk15_adaptive)(lambda t, _a: g(t), _NO_ARGS, a, b, tol, max_depth)
    check_quad_status(status, value)
    return float(value)


def check_quad_status(status: int, value: float) -> None:
    if status == 1:
        raise QuadratureFailure("tolerance not reached at maximum bisection depth")
    if status == 2 or not math.isfinite(value):
        raise QuadratureFailure("integrand produced a non-finite value")


def loglog_slope(pairs: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(h).

    Any exact zero error is treated as "converged" and yields +inf.
    """
    if len(pairs) < 3:
        raise DegenerateInput("need at least three (h, err) pairs")
    h = np.array([p[0] for p in pairs], dtype=float)
    err = np.array([p[1] for p in pairs], dtype=float)
    if np.any(err == 0.0):
        return math.inf
    if np.any(h <= 0) or np.any(err < 0):
        raise DegenerateInput("h and err must be positive")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)
