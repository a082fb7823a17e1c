# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: curve integration in (eta, Lam) and batch path simulation.

Mirrors ``_fallback.py``; see that module for the algorithm description.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, fabs, pow

cnp.import_array()

NAME = "compiled"

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784
cdef double B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double P[7][4]
P[0][:] = [1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432]
P[1][:] = [0.0, 0.0, 0.0, 0.0]
P[2][:] = [0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799]
P[3][:] = [0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072]
P[4][:] = [0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632]
P[5][:] = [0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844]
P[6][:] = [0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423]

cdef double ZERO_N = 1e-10


cdef inline int _rhs(double q, double eta, double m1, double m2, double k, double cr,
                     double direction, double* de, double* dl, double* n_out) nogil:
    cdef double n = 1.0 + q * (m1 + m2 * q) + k * eta
    cdef double s, gap
    if n <= 0.0:
        return 0
    s = q * (1.0 - q)
    gap = s - eta
    if s > 0.0 and gap <= 0.0:
        return 0
    if gap == 0.0 or q == 1.0:
        return 0
    de[0] = -cr * n * eta / ((1.0 - q) * gap) - (m1 + 2.0 * m2 * q) / k
    if s != 0.0:
        dl[0] = direction * eta / (s * gap)
    else:
        dl[0] = 0.0
    n_out[0] = n
    return 1


cdef inline double _dense(double y0, double h, double* ks, double theta) nogil:
    cdef double acc = 0.0, tp = theta, c
    cdef int i, j
    for j in range(4):
        c = 0.0
        for i in range(7):
            c += ks[i] * P[i][j]
        acc += c * tp
        tp *= theta
    return y0 + h * acc


def integrate_eta(double q0, double eta0, double lam0, double q_end, double direction,
                  double m1, double m2, double k, double cr,
                  double rtol=1e-10, double atol=1e-12, double event_tol=1e-12,
                  long max_steps=2000000, double h0=0.0, bint stop_on_event=True):
    """Integrate (eta, Lam) from q0 towards q_end; see the fallback for the contract."""
    cdef double span = q_end - q0
    cdef double sgn, q, eta, lam, h, hs, remaining, q_new, eta_new, lam_new
    cdef double err_e, err_l, sc_e, sc_l, err, fac, n_here, lo, hi, mid, theta, q_ev
    cdef double de, dl, nn
    cdef double ke[7]
    cdef double kl[7]
    cdef bint last, ok
    cdef long steps = 0
    cdef long cap = 1024, cnt = 0
    cdef int status = -1
    cdef double h_min_rel = 1e-15
    cdef cnp.ndarray[cnp.float64_t, ndim=2] buf = np.empty((cap, 4), dtype=np.float64)

    if span == 0.0:
        return 1, np.array([q0]), np.array([eta0]), np.array([lam0]), np.array([0.0]), q0
    sgn = 1.0 if span > 0 else -1.0
    if not _rhs(q0, eta0, m1, m2, k, cr, direction, &de, &dl, &nn):
        return 3, np.array([q0]), np.array([eta0]), np.array([lam0]), np.array([0.0]), q0
    buf[0, 0] = q0
    buf[0, 1] = eta0
    buf[0, 2] = lam0
    buf[0, 3] = de
    cnt = 1
    q = q0
    eta = eta0
    lam = lam0
    ke[0] = de
    kl[0] = dl
    if h0 > 0:
        h = h0
    else:
        h = min(fabs(span), 1e-3 * max(1.0, fabs(q0)), max(fabs(q0), 1e-300))
    while True:
        if steps >= max_steps:
            status = 4
            break
        remaining = (q_end - q) * sgn
        if h >= remaining:
            h = remaining
            last = True
        else:
            last = False
        if h <= h_min_rel * max(fabs(q), 1e-300):
            n_here = 1.0 + q * (m1 + m2 * q) + k * eta
            status = 2 if n_here < 1e-6 else 3
            break
        hs = h * sgn
        ok = _rhs(q + C2 * hs, eta + hs * A21 * ke[0], m1, m2, k, cr, direction,
                  &ke[1], &kl[1], &nn)
        if ok:
            ok = _rhs(q + C3 * hs, eta + hs * (A31 * ke[0] + A32 * ke[1]), m1, m2, k, cr,
                      direction, &ke[2], &kl[2], &nn)
        if ok:
            ok = _rhs(q + C4 * hs, eta + hs * (A41 * ke[0] + A42 * ke[1] + A43 * ke[2]),
                      m1, m2, k, cr, direction, &ke[3], &kl[3], &nn)
        if ok:
            ok = _rhs(q + C5 * hs,
                      eta + hs * (A51 * ke[0] + A52 * ke[1] + A53 * ke[2] + A54 * ke[3]),
                      m1, m2, k, cr, direction, &ke[4], &kl[4], &nn)
        if ok:
            ok = _rhs(q + hs,
                      eta + hs * (A61 * ke[0] + A62 * ke[1] + A63 * ke[2] + A64 * ke[3]
                                  + A65 * ke[4]),
                      m1, m2, k, cr, direction, &ke[5], &kl[5], &nn)
        if ok:
            eta_new = eta + hs * (B1 * ke[0] + B3 * ke[2] + B4 * ke[3] + B5 * ke[4] + B6 * ke[5])
            lam_new = lam + hs * (B1 * kl[0] + B3 * kl[2] + B4 * kl[3] + B5 * kl[4] + B6 * kl[5])
            q_new = q_end if last else q + hs
            ok = _rhs(q_new, eta_new, m1, m2, k, cr, direction, &ke[6], &kl[6], &nn)
        if not ok:
            h *= 0.25
            continue
        err_e = hs * (E1 * ke[0] + E3 * ke[2] + E4 * ke[3] + E5 * ke[4] + E6 * ke[5] + E7 * ke[6])
        err_l = hs * (E1 * kl[0] + E3 * kl[2] + E4 * kl[3] + E5 * kl[4] + E6 * kl[5] + E7 * kl[6])
        # the admissible band 0 < eta < q(1-q) narrows near q = 0 and 1
        sc_e = atol * min(1.0, fabs(q * (1.0 - q))) + rtol * max(fabs(eta), fabs(eta_new))
        sc_l = atol + rtol * max(fabs(lam), fabs(lam_new))
        err = sqrt(0.5 * ((err_e / sc_e) ** 2 + (err_l / sc_l) ** 2))
        if err > 1.0:
            h *= max(0.2, 0.9 * pow(err, -0.2))
            continue
        steps += 1
        if cnt >= cap:
            cap *= 2
            buf = np.resize(buf, (cap, 4))
        if stop_on_event and eta_new <= 0.0:
            lo = 0.0
            hi = 1.0
            while (hi - lo) * h > event_tol:
                mid = 0.5 * (lo + hi)
                if _dense(eta, hs, ke, mid) > 0.0:
                    lo = mid
                else:
                    hi = mid
            theta = hi
            q_ev = q + theta * hs
            buf[cnt, 0] = q_ev
            buf[cnt, 1] = 0.0
            buf[cnt, 2] = _dense(lam, hs, kl, theta)
            buf[cnt, 3] = -(m1 + 2.0 * m2 * q_ev) / k
            cnt += 1
            q = q_ev
            status = 0
            break
        q = q_new
        eta = eta_new
        lam = lam_new
        ke[0] = ke[6]
        kl[0] = kl[6]
        buf[cnt, 0] = q
        buf[cnt, 1] = eta
        buf[cnt, 2] = lam
        buf[cnt, 3] = ke[0]
        cnt += 1
        if nn <= ZERO_N:
            status = 2
            break
        if last:
            status = 1
            break
        if err == 0.0:
            fac = 10.0
        else:
            fac = min(10.0, 0.9 * pow(err, -0.2))
        h *= fac
    out = np.array(buf[:cnt])
    return status, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(), out[:, 3].copy(), q


def simulate_batch(double[:, ::1] z, double x0, double s0, double dt, double beta, double R,
                   double mu, double sigma, double lam, double gamma,
                   double p_lo, double p_hi, double[::1] coef_grid,
                   double p_star, double p_upper):
    """Simulate a batch of paths under the wedge policy; see the fallback."""
    cdef Py_ssize_t paths = z.shape[0], steps = z.shape[1]
    cdef Py_ssize_t ng = coef_grid.shape[0]
    cdef Py_ssize_t a, j, i
    cdef double width = (p_hi - p_lo) / (ng - 1)
    cdef double drift = (mu - 0.5 * sigma * sigma) * dt
    cdef double vol = sigma * sqrt(dt)
    cdef double cpow = 1.0 - R, cfac = beta / R
    cdef double step_disc = exp(-beta * dt)
    cdef double x, s, w, p, v, c, u_prev, u_new, disc, d_new, acc, pos, frac, coef, solv
    cdef double tb, ts
    cdef long nbad
    cdef int fa
    util = np.empty(paths)
    xs = np.empty(paths)
    ss = np.empty(paths)
    tbuy = np.empty(paths)
    tsell = np.empty(paths)
    bad = np.empty(paths, dtype=np.int64)
    first = np.empty(paths, dtype=np.int64)
    cdef double[::1] util_v = util, xs_v = xs, ss_v = ss, tb_v = tbuy, ts_v = tsell
    cdef long long[::1] bad_v = bad, first_v = first
    with nogil:
        for a in range(paths):
            x = x0
            s = s0
            fa = 0
            w = x + s
            p = s / w
            if p < p_star:
                v = (p_star * w - s) / (1.0 + lam * p_star)
                x -= (1.0 + lam) * v
                s += v
                fa = 1
            elif p > p_upper:
                v = (s - p_upper * w) / (1.0 - gamma * p_upper)
                s -= v
                x += (1.0 - gamma) * v
                fa = 2
            w = x + s
            p = s / w
            pos = (p - p_lo) / width
            i = <Py_ssize_t> pos
            if i < 0:
                i = 0
            if i > ng - 2:
                i = ng - 2
            frac = min(1.0, max(0.0, pos - i))
            coef = coef_grid[i] + frac * (coef_grid[i + 1] - coef_grid[i])
            c = cfac * w * coef
            u_prev = pow(c, cpow) / cpow
            acc = 0.0
            disc = 1.0
            tb = 0.0
            ts = 0.0
            nbad = 0
            for j in range(steps):
                s = s * exp(drift + vol * z[a, j])
                x = x - c * dt
                w = x + s
                p = s / w
                if p < p_star:
                    v = (p_star * w - s) / (1.0 + lam * p_star)
                    x -= (1.0 + lam) * v
                    s += v
                    tb += dt
                elif p > p_upper:
                    v = (s - p_upper * w) / (1.0 - gamma * p_upper)
                    s -= v
                    x += (1.0 - gamma) * v
                    ts += dt
                solv = x + (1.0 - gamma) * max(s, 0.0) - (1.0 + lam) * max(-s, 0.0)
                if solv <= 0.0:
                    nbad += 1
                w = x + s
                p = s / w
                pos = (p - p_lo) / width
                i = <Py_ssize_t> pos
                if i < 0:
                    i = 0
                if i > ng - 2:
                    i = ng - 2
                frac = min(1.0, max(0.0, pos - i))
                coef = coef_grid[i] + frac * (coef_grid[i + 1] - coef_grid[i])
                c = cfac * w * coef
                u_new = pow(c, cpow) / cpow
                d_new = disc * step_disc
                acc += 0.5 * dt * (disc * u_prev + d_new * u_new)
                disc = d_new
                u_prev = u_new
            util_v[a] = acc
            xs_v[a] = x
            ss_v[a] = s
            tb_v[a] = tb
            ts_v[a] = ts
            bad_v[a] = nbad
            first_v[a] = fa
    return util, xs, ss, tbuy, tsell, bad, first
