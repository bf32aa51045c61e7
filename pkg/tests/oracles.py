"""Independent reference computations used only by the tests.

None of these touch the package's own kernels: flows come from matrix
exponentials of the augmented affine system (mpmath or scipy), integrals
from scipy's QUADPACK, and trajectories from scipy's DOP853.
"""
import mpmath as mp
import numpy as np
from scipy import integrate, linalg

mp.mp.dps = 40


def mp_gamma_plus(t, y0, alpha, eta):
    """(x, y) of x' = y, y' = eta*x - alpha from (0, y0), via a 3x3 expm at 40 digits."""
    B = mp.matrix([[0, 1, 0], [eta, 0, -alpha], [0, 0, 0]])
    E = mp.expm(B * mp.mpf(t))
    v = E * mp.matrix([0, y0, 1])
    return float(v[0]), float(v[1])


def sp_gamma_plus(t, y0, alpha, eta):
    B = np.array([[0.0, 1.0, 0.0], [eta, 0.0, -alpha], [0.0, 0.0, 0.0]])
    v = linalg.expm(B * t) @ np.array([0.0, y0, 1.0])
    return v[0], v[1]


def mp_exp_At(t, eta):
    E = mp.expm(mp.matrix([[0, 1], [eta, 0]]) * mp.mpf(t))
    return np.array([[float(E[i, j]) for j in range(2)] for i in range(2)])


def sp_exp_At(t, eta):
    return linalg.expm(np.array([[0.0, 1.0], [eta, 0.0]]) * t)


def mp_U(t, s, alpha, eta):
    """Kernel weight in its textbook hyperbolic / trigonometric / polynomial form."""
    t, s = mp.mpf(t), mp.mpf(s)
    if eta > 0:
        r = mp.sqrt(eta)
        return -alpha / r * mp.sech(r * s / 2) * mp.sinh(r * (2 * t - s) / 2)
    if eta < 0:
        w = mp.sqrt(-eta)
        return -alpha / w * mp.sec(w * s / 2) * mp.sin(w * (2 * t - s) / 2)
    return -alpha * (2 * t - s) / 2


def mp_v(s, alpha, eta):
    s = mp.mpf(s)
    if eta > 0:
        r = mp.sqrt(eta)
        return alpha / r * mp.tanh(r * s / 2)
    if eta < 0:
        w = mp.sqrt(-eta)
        return alpha / w * mp.tan(w * s / 2)
    return alpha * s / 2


def quad_melnikov(phi, alpha, eta, sigma, f):
    """M(phi) by QUADPACK with the flow from scipy expm; f is a Python callable."""
    s = sigma / 2
    ystar = float(mp_v(s, alpha, eta))

    def g(t):
        x, y = sp_gamma_plus(t, ystar, alpha, eta)
        return float(mp_U(t, s, alpha, eta)) * (f(phi + t, x, y) + f(phi - t, -x, y))

    val, _ = integrate.quad(g, 0.0, s, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def ivp_piece(theta0, x0, y0, region, direction, alpha, eta, eps, f, t_max):
    """First crossing of x = 0 for one smooth piece, by scipy DOP853 with tight tolerances."""
    shift = -region * alpha

    def rhs(tau, u):
        x, y = u
        return [y, eta * x + shift + eps * f(theta0 + tau, x, y)]

    def event(tau, u):
        return u[0]

    event.terminal = True
    event.direction = -region
    sol = integrate.solve_ivp(rhs, (0.0, direction * t_max), [x0, y0], method="DOP853",
                              rtol=1e-13, atol=1e-15, events=event, dense_output=True)
    te = sol.t_events[0]
    if len(te) == 0:
        return None
    tau = te[0]
    x, y = sol.sol(tau)
    return tau, x, y, sol


def ivp_displacement(theta0, y0, eps, alpha, eta, sigma, f):
    tp, _, yp, _ = ivp_piece(theta0, 0.0, y0, 1, 1, alpha, eta, eps, f, 10 * sigma)
    tm, _, ym, _ = ivp_piece(theta0 + sigma, 0.0, y0, -1, -1, alpha, eta, eps, f, 10 * sigma)
    return tp - tm - sigma, yp - ym


def r_squared(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0

