"""Hot numeric kernels.

Everything here sticks to the numba nopython subset.  With the numba backend
these are compiled (and disk-cached); with ``MELNIKOV_NUMBA=0`` the same
functions run as plain Python.  Callables handed to the kernels are either
numba cfuncs (numba backend) or ordinary Python functions.
"""
import math

import numpy as np

from ._jit import njit

EPS = 2.220446049250313e-16

# ---------------------------------------------------------------------------
# unperturbed flow primitives
# ---------------------------------------------------------------------------


@njit
def sinhc(u):
    """sinh(u)/u, continuous through u = 0."""
    if abs(u) < 1e-4:
        return 1.0 + u * u / 6.0
    return math.sinh(u) / u


@njit
def sinc(u):
    """sin(u)/u (unnormalised), continuous through u = 0."""
    if abs(u) < 1e-4:
        return 1.0 - u * u / 6.0
    return math.sin(u) / u


@njit
def flow_coeffs(t, eta):
    """(c, S, H) with e^{At} = [[c, t*S], [eta*t*S, c]] and H = S evaluated at u/2."""
    if eta > 0.0:
        u = math.sqrt(eta) * t
        return math.cosh(u), sinhc(u), sinhc(0.5 * u)
    if eta < 0.0:
        u = math.sqrt(-eta) * t
        return math.cos(u), sinc(u), sinc(0.5 * u)
    return 1.0, 1.0, 1.0


@njit
def gamma_plus_xy(t, y0, alpha, eta):
    """Closed-form solution of x' = y, y' = eta*x - alpha from (0, y0)."""
    c, s, h = flow_coeffs(t, eta)
    x = y0 * t * s - 0.5 * alpha * t * t * h * h
    y = y0 * c - alpha * t * s
    return x, y


@njit
def kernel_u_value(t, s, alpha, eta):
    """U(t, s) = <(alpha, v(s)), u(t)> in a form that is stable for large s."""
    w = 0.5 * (2.0 * t - s)
    if eta > 0.0:
        r = math.sqrt(eta)
        z = 0.5 * r * s
        if z < 350.0:
            return -alpha * w * sinhc(r * w) / math.cosh(z)
        # sech(z)*sinh(r w) in log space
        aw = abs(r * w)
        ratio = math.exp(aw - z) * (1.0 - math.exp(-2.0 * aw)) / (1.0 + math.exp(-2.0 * z))
        if w < 0.0:
            ratio = -ratio
        return -alpha / r * ratio
    if eta < 0.0:
        om = math.sqrt(-eta)
        return -alpha * w * sinc(om * w) / math.cos(0.5 * om * s)
    return -alpha * w


@njit
def _cosh_sinh_ratio(a, z):
    """(cosh(a)/cosh(z), sinh(a)/cosh(z)) for |a| <= z, without overflow."""
    if z < 350.0:
        cz = math.cosh(z)
        return math.cosh(a) / cz, math.sinh(a) / cz
    aa = abs(a)
    base = math.exp(aa - z) / (1.0 + math.exp(-2.0 * z))
    e2 = math.exp(-2.0 * aa)
    sh = base * (1.0 - e2)
    return base * (1.0 + e2), sh if a >= 0.0 else -sh


@njit
def orbit_xy(t, s, alpha, eta):
    """Gamma^+(t, v(s)): the annulus orbit whose half period is s.

    Centred on t = s/2, which keeps large-s evaluations finite.
    """
    w = t - 0.5 * s
    if eta > 0.0:
        r = math.sqrt(eta)
        ch, sh = _cosh_sinh_ratio(r * w, 0.5 * r * s)
        return alpha / eta * (1.0 - ch), -alpha / r * sh
    if eta < 0.0:
        om = math.sqrt(-eta)
        c = math.cos(0.5 * om * s)
        return alpha / eta * (1.0 - math.cos(om * w) / c), -alpha / om * math.sin(om * w) / c
    return 0.5 * alpha * t * (s - t), -alpha * w


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15
# ---------------------------------------------------------------------------

GK_NODES = np.array([
    0.99145537112081263920685469752633,
    0.94910791234275852452618968404785,
    0.86486442335976907278971278864093,
    0.74153118559939443986386477328079,
    0.58608723546769113029414484569301,
    0.40584515137739716690660641207696,
    0.20778495500789846760068940377324,
    0.0,
])
GK_WEIGHTS = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
GAUSS_WEIGHTS = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


@njit
def gk15_adaptive(g, args, a, b, tol, max_depth):
    """Adaptive GK15 of g(t, args) on [a, b].

    A panel is accepted once |K15 - G7| <= tol * width / (b - a).
    Returns (value, error_estimate, status); status 1 means some panel hit
    max_depth unresolved, 2 means a non-finite integrand value.
    """
    if b == a:
        return 0.0, 0.0, 0
    span = b - a
    cap = max_depth + 3
    st_lo = np.empty(cap)
    st_hi = np.empty(cap)
    st_d = np.empty(cap, dtype=np.int64)
    st_lo[0] = a
    st_hi[0] = b
    st_d[0] = 0
    top = 1
    total = 0.0
    err = 0.0
    status = 0
    while top > 0:
        top -= 1
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_d[top]
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        fc = g(center, args)
        resk = fc * GK_WEIGHTS[7]
        resg = fc * GAUSS_WEIGHTS[3]
        for j in range(7):
            dx = half * GK_NODES[j]
            pair = g(center - dx, args) + g(center + dx, args)
            resk += GK_WEIGHTS[j] * pair
            if j % 2 == 1:
                resg += GAUSS_WEIGHTS[j // 2] * pair
        resk *= half
        resg *= half
        if not math.isfinite(resk):
            return resk, np.inf, 2
        local = abs(resk - resg)
        allowed = tol * (hi - lo) / span
        if local <= allowed or depth >= max_depth:
            if local > allowed:
                status = 1
            total += resk
            err += local
        else:
            st_lo[top] = center
            st_hi[top] = hi
            st_d[top] = depth + 1
            st_lo[top + 1] = lo
            st_hi[top + 1] = center
            st_d[top + 1] = depth + 1
            top += 2
    return total, err, status


# ---------------------------------------------------------------------------
# Brent root bracketing
# ---------------------------------------------------------------------------


# Reverse-communication form: the state array holds (a, b, c, fa, fb, fc, d, e);
# b is always the best estimate.  Drivers own the function evaluations.

BRENT_DONE = 0
BRENT_NO_SIGN_CHANGE = 1
BRENT_CONTINUE = 2


@njit
def brent_start(st, lo, hi, flo, fhi):
    st[0] = lo
    st[1] = hi
    st[2] = lo
    st[3] = flo
    st[4] = fhi
    st[5] = flo
    st[6] = hi - lo
    st[7] = hi - lo
    if flo == 0.0:
        st[1] = lo
        st[4] = 0.0
        return BRENT_DONE
    if fhi == 0.0:
        return BRENT_DONE
    if (flo > 0.0) == (fhi > 0.0):
        return BRENT_NO_SIGN_CHANGE
    return BRENT_CONTINUE


@njit
def brent_propose(st, tol):
    """Advance the bracket using f(b) = st[4].

    Returns (converged, x_next).  When not converged the caller must
    evaluate f at x_next and store it in st[4].
    """
    a = st[0]
    b = st[1]
    c = st[2]
    fa = st[3]
    fb = st[4]
    fc = st[5]
    d = st[6]
    e = st[7]
    if (fb > 0.0) == (fc > 0.0):
        c = a
        fc = fa
        d = b - a
        e = d
    if abs(fc) < abs(fb):
        a = b
        b = c
        c = a
        fa = fb
        fb = fc
        fc = fa
    tol1 = 2.0 * EPS * abs(b) + 0.5 * tol
    xm = 0.5 * (c - b)
    if abs(xm) <= tol1 or fb == 0.0:
        st[0] = a
        st[1] = b
        st[2] = c
        st[3] = fa
        st[4] = fb
        st[5] = fc
        return True, b
    if abs(e) >= tol1 and abs(fa) > abs(fb):
        s = fb / fa
        if a == c:
            p = 2.0 * xm * s
            q = 1.0 - s
        else:
            q = fa / fc
            r = fb / fc
            p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
            q = (q - 1.0) * (r - 1.0) * (s - 1.0)
        if p > 0.0:
            q = -q
        else:
            p = -p
        if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
            e = d
            d = p / q
        else:
            d = xm
            e = d
    else:
        d = xm
        e = d
    a = b
    fa = fb
    if abs(d) > tol1:
        b += d
    elif xm > 0.0:
        b += tol1
    else:
        b -= tol1
    st[0] = a
    st[1] = b
    st[2] = c
    st[3] = fa
    st[5] = fc
    st[6] = d
    st[7] = e
    return False, b


@njit
def brent_root(g, args, lo, hi, tol, maxeval):
    """Brent's method on g(x, args) over [lo, hi].

    Returns (root, status, nevals); status 1 = no sign change, 2 = eval cap.
    """
    st = np.empty(8)
    code = brent_start(st, lo, hi, g(lo, args), g(hi, args))
    n = 2
    if code == BRENT_NO_SIGN_CHANGE:
        return np.nan, 1, n
    if code == BRENT_DONE:
        return st[1], 0, n
    while True:
        converged, xn = brent_propose(st, tol)
        if converged:
            return xn, 0, n
        if n >= maxeval:
            return xn, 2, n
        st[4] = g(xn, args)
        n += 1


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with dense output and x = 0 event location
# ---------------------------------------------------------------------------

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (-71.0 / 57600.0, 71.0 / 16695.0, -71.0 / 1920.0,
                          17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0)

# continuous extension (4th order), rows = stages, cols = theta^1..theta^4
DENSE_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
])

EVENT_X_TOL = 1e-12

ST_CROSSING = 0
ST_TIME_LIMIT = 1
ST_GRAZING = 2
ST_FAILURE = 3
ST_BAD_START = 4


@njit
def _accel(f, theta0, tau, x, y, shift, eta, eps):
    dy = eta * x + shift
    if eps != 0.0:
        dy += eps * f(theta0 + tau, x, y)
    return dy


@njit
def dp_step(f, theta0, tau, x, y, k1x, k1y, h, shift, eta, eps, kx, ky):
    """One DP5 step; fills stage arrays kx, ky (7 entries) and returns
    (x_new, y_new, err_x, err_y)."""
    kx[0] = k1x
    ky[0] = k1y
    xs = x + h * A21 * kx[0]
    ys = y + h * A21 * ky[0]
    kx[1] = ys
    ky[1] = _accel(f, theta0, tau + C2 * h, xs, ys, shift, eta, eps)
    xs = x + h * (A31 * kx[0] + A32 * kx[1])
    ys = y + h * (A31 * ky[0] + A32 * ky[1])
    kx[2] = ys
    ky[2] = _accel(f, theta0, tau + C3 * h, xs, ys, shift, eta, eps)
    xs = x + h * (A41 * kx[0] + A42 * kx[1] + A43 * kx[2])
    ys = y + h * (A41 * ky[0] + A42 * ky[1] + A43 * ky[2])
    kx[3] = ys
    ky[3] = _accel(f, theta0, tau + C4 * h, xs, ys, shift, eta, eps)
    xs = x + h * (A51 * kx[0] + A52 * kx[1] + A53 * kx[2] + A54 * kx[3])
    ys = y + h * (A51 * ky[0] + A52 * ky[1] + A53 * ky[2] + A54 * ky[3])
    kx[4] = ys
    ky[4] = _accel(f, theta0, tau + C5 * h, xs, ys, shift, eta, eps)
    xs = x + h * (A61 * kx[0] + A62 * kx[1] + A63 * kx[2] + A64 * kx[3] + A65 * kx[4])
    ys = y + h * (A61 * ky[0] + A62 * ky[1] + A63 * ky[2] + A64 * ky[3] + A65 * ky[4])
    kx[5] = ys
    ky[5] = _accel(f, theta0, tau + h, xs, ys, shift, eta, eps)
    xn = x + h * (B1 * kx[0] + B3 * kx[2] + B4 * kx[3] + B5 * kx[4] + B6 * kx[5])
    yn = y + h * (B1 * ky[0] + B3 * ky[2] + B4 * ky[3] + B5 * ky[4] + B6 * ky[5])
    kx[6] = yn
    ky[6] = _accel(f, theta0, tau + h, xn, yn, shift, eta, eps)
    ex = h * (E1 * kx[0] + E3 * kx[2] + E4 * kx[3] + E5 * kx[4] + E6 * kx[5] + E7 * kx[6])
    ey = h * (E1 * ky[0] + E3 * ky[2] + E4 * ky[3] + E5 * ky[4] + E6 * ky[5] + E7 * ky[6])
    return xn, yn, ex, ey


@njit
def dense_x(theta, args):
    """x on the continuous extension; args = (x_old, h, q1, q2, q3, q4)."""
    return args[0] + args[1] * theta * (args[2] + theta * (args[3] + theta * (args[4] + theta * args[5])))


@njit
def _err_norm(x, y, xn, yn, ex, ey, rtol, atol):
    sx = atol + rtol * max(abs(x), abs(xn))
    sy = atol + rtol * max(abs(y), abs(yn))
    return math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))


@njit
def _initial_step(f, theta0, x, y, k1x, k1y, direction, shift, eta, eps, rtol, atol, tau_stop):
    sx = atol + abs(x) * rtol
    sy = atol + abs(y) * rtol
    d0 = math.sqrt(0.5 * ((x / sx) ** 2 + (y / sy) ** 2))
    d1 = math.sqrt(0.5 * ((k1x / sx) ** 2 + (k1y / sy) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, tau_stop)
    h = direction * h0
    x1 = x + h * k1x
    y1 = y + h * k1y
    k2x = y1
    k2y = _accel(f, theta0, h, x1, y1, shift, eta, eps)
    d2 = math.sqrt(0.5 * (((k2x - k1x) / sx) ** 2 + ((k2y - k1y) / sy) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, tau_stop)


@njit
def integrate_region(f, theta0, x0, y0, region, direction, alpha, eta, eps,
                     tau_stop, rtol, atol, graze_tol, record):
    """Integrate one smooth piece until x changes sign or |tau| reaches tau_stop.

    region = +1 uses y' = eta*x - alpha + eps*f, region = -1 uses +alpha.
    direction = +1/-1 is the time direction.  Samples (tau, x, y) are stored
    for every accepted step when ``record`` is true.

    Returns (status, tau_end, x_end, y_end, samples, n_samples).
    """
    shift = -region * alpha
    cap = 256 if record else 2
    samples = np.empty((cap, 3))
    samples[0, 0] = 0.0
    samples[0, 1] = x0
    samples[0, 2] = y0
    n = 1
    kx = np.empty(7)
    ky = np.empty(7)
    qargs = np.empty(6)
    bst = np.empty(8)

    tau = 0.0
    x = x0
    y = y0
    k1x = y
    k1y = _accel(f, theta0, 0.0, x, y, shift, eta, eps)
    if not (math.isfinite(k1y) and math.isfinite(x) and math.isfinite(y)):
        return ST_FAILURE, tau, x, y, samples, n
    if x == 0.0 and region * direction * y <= 0.0:
        return ST_BAD_START, tau, x, y, samples, n
    if x != 0.0 and region * x < 0.0:
        return ST_BAD_START, tau, x, y, samples, n
    if tau_stop <= 0.0:
        return ST_TIME_LIMIT, tau, x, y, samples, n

    h_abs = _initial_step(f, theta0, x, y, k1x, k1y, direction, shift, eta, eps, rtol, atol, tau_stop)
    while True:
        remaining = tau_stop - abs(tau)
        last = False
        if h_abs >= remaining:
            h_abs = remaining
            last = True
        h = direction * h_abs
        xn, yn, ex, ey = dp_step(f, theta0, tau, x, y, k1x, k1y, h, shift, eta, eps, kx, ky)
        en = _err_norm(x, y, xn, yn, ex, ey, rtol, atol)
        if not math.isfinite(en):
            # overflow/pole inside the step: retry smaller, give up when tiny
            h_abs *= 0.2
            if h_abs < 1e-14 * max(1.0, abs(tau)):
                return ST_FAILURE, tau, x, y, samples, n
            continue
        if en > 1.0:
            h_abs *= max(0.2, 0.9 * en ** -0.2)
            if h_abs < 1e-14 * max(1.0, abs(tau)):
                return ST_FAILURE, tau, x, y, samples, n
            continue

        if region * xn <= 0.0:
            if x == 0.0:
                # crossed back within the departure step: resolve it
                h_abs *= 0.25
                if h_abs < 1e-14 * max(1.0, abs(tau)):
                    return ST_FAILURE, tau, x, y, samples, n
                continue
            # event inside (tau, tau + h]: Brent on the dense interpolant
            for m in range(4):
                acc = 0.0
                for j in range(7):
                    acc += kx[j] * DENSE_P[j, m]
                qargs[2 + m] = acc
            qargs[0] = x
            qargs[1] = h
            th = 1.0
            code = brent_start(bst, 0.0, 1.0, x, xn)
            if code == BRENT_DONE:
                th = bst[1]
            elif code == BRENT_CONTINUE:
                for it in range(200):
                    converged, th = brent_propose(bst, 1e-15)
                    if converged:
                        break
                    bst[4] = dense_x(th, qargs)
            # polish with direct steps so the state carries full step accuracy
            xe, ye, dxe, dye = dp_step(f, theta0, tau, x, y, k1x, k1y, th * h, shift, eta, eps, kx, ky)
            for it in range(6):
                if abs(xe) <= EVENT_X_TOL * 0.5 or ye == 0.0:
                    break
                th = th - xe / (ye * h)
                xe, ye, dxe, dye = dp_step(f, theta0, tau, x, y, k1x, k1y, th * h, shift, eta, eps, kx, ky)
            tau_e = tau + th * h
            if record:
                if n >= samples.shape[0]:
                    grown = np.empty((2 * samples.shape[0], 3))
                    grown[:n] = samples[:n]
                    samples = grown
                samples[n, 0] = tau_e
                samples[n, 1] = xe
                samples[n, 2] = ye
                n += 1
            if abs(ye) <= graze_tol:
                return ST_GRAZING, tau_e, xe, ye, samples, n
            return ST_CROSSING, tau_e, xe, ye, samples, n

        if last:
            tau = direction * tau_stop
        else:
            tau = tau + h
        x = xn
        y = yn
        k1x = kx[6]
        k1y = ky[6]
        if record:
            if n >= samples.shape[0]:
                grown = np.empty((2 * samples.shape[0], 3))
                grown[:n] = samples[:n]
                samples = grown
            samples[n, 0] = tau
            samples[n, 1] = x
            samples[n, 2] = y
            n += 1
        if last:
            return ST_TIME_LIMIT, tau, x, y, samples, n
        if en == 0.0:
            h_abs *= 10.0
        else:
            h_abs *= min(10.0, 0.9 * en ** -0.2)
