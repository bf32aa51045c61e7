"""Exact unperturbed flow: matrix exponential, Gamma^{+/-}, tau0 and its inverse, the kernel U."""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from . import _kernels as K
from .errors import OutOfAnnulusDomain, OutOfAnnulusImage
from .model import Case, Parameters, PhasePoint, annulus_info, classify, inside


class Involution(str, Enum):
    R = "R"  # (x, y) -> (-x, y)
    S = "S"  # (x, y) -> (x, -y)

    def matrix(self) -> np.ndarray:
        return np.diag([-1.0, 1.0]) if self is Involution.R else np.diag([1.0, -1.0])


def apply_involution(inv: Involution, p: PhasePoint) -> PhasePoint:
    if inv is Involution.R:
        return PhasePoint(-p.x, p.y)
    return PhasePoint(p.x, -p.y)


def exp_At(t: float, eta: float) -> np.ndarray:
    """e^{At} for A = [[0, 1], [eta, 0]].

    Written through sinh(u)/u (or sin(u)/u) so the three sign regimes of eta
    join continuously.
    """
    c, s, _ = K.flow_coeffs(float(t), float(eta))
    return np.array([[c, t * s], [eta * t * s, c]])


def u_vector(t: float, eta: float) -> tuple[float, float]:
    """Second column of e^{-At}."""
    c, s, _ = K.flow_coeffs(float(t), float(eta))
    return -t * s, c


def gamma_plus(t: float, y0: float, params: Parameters) -> PhasePoint:
    x, y = K.gamma_plus_xy(float(t), float(y0), params.alpha, params.eta)
    return PhasePoint(x, y)


def gamma_minus(t: float, y0: float, params: Parameters) -> PhasePoint:
    """Gamma^-(t, y0) = R(Gamma^+(-t, y0))."""
    return apply_involution(Involution.R, gamma_plus(-t, y0, params))


def tau0(y0: float, params: Parameters) -> float:
    """Half-period: time for Gamma^+ to return from (0, y0) to x = 0."""
    alpha, eta = params.alpha, params.eta
    case = classify(alpha, eta)
    info = annulus_info(case)
    if not inside(y0, info.domain_D):
        raise OutOfAnnulusDomain(f"y0={y0!r} outside D={info.domain_D} for {case.tag.value}")
    if case.tag is Case.C1:
        r = math.sqrt(eta)
        # log((a + y r)/(a - y r)) == 2 atanh(y r / a)
        return 2.0 * math.atanh(y0 * r / alpha) / r
    if case.tag is Case.C4:
        return 2.0 * y0 / alpha
    om = case.omega
    if case.tag is Case.C7:
        return 2.0 / om * math.atan(om * y0 / alpha)
    return 2.0 / om * (math.pi + math.atan(om * y0 / alpha))


def v_of(s: float, params: Parameters) -> float:
    """Inverse of tau0: the y0 whose half period equals s."""
    alpha, eta = params.alpha, params.eta
    case = classify(alpha, eta)
    info = annulus_info(case)
    if not inside(s, info.image_I):
        raise OutOfAnnulusImage(f"s={s!r} outside I={info.image_I} for {case.tag.value}")
    if case.tag is Case.C1:
        r = math.sqrt(eta)
        return alpha / r * math.tanh(0.5 * r * s)
    if case.tag is Case.C4:
        return 0.5 * alpha * s
    om = case.omega
    return alpha / om * math.tan(0.5 * om * s)


def kernel_U(t: float, s: float, params: Parameters) -> float:
    """Weight U(t, s) of the Melnikov integral; s must lie in the image of tau0."""
    info = annulus_info(classify(params.alpha, params.eta))
    if not inside(s, info.image_I):
        raise OutOfAnnulusImage(f"s={s!r} outside I={info.image_I}")
    return K.kernel_u_value(float(t), float(s), params.alpha, params.eta)


def kernel_U_inner(t: float, s: float, params: Parameters) -> float:
    """Same weight computed as <(alpha, v(s)), u(t)>."""
    u1, u2 = u_vector(t, params.eta)
    return params.alpha * u1 + v_of(s, params) * u2
