"""Pure-Python kernels, used when the compiled extension is unavailable.

Both kernels mirror ``_kernels.pyx`` line for line so the two backends
produce the same numbers up to floating point reassociation.

State for curve integration is (eta, Lam) as a function of q, where
n = m(q) + k*eta and Lam accumulates the boundary-condition integrand.
"""

import math

import numpy as np

NAME = "python"

# Dormand-Prince 5(4) tableau with the free 4th-order dense output.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)
DENSE = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)
_P = DENSE.tolist()

ST_EVENT, ST_END, ST_ZERO, ST_FAIL, ST_MAXSTEPS = 0, 1, 2, 3, 4
ZERO_N = 1e-10


def _rhs(q, eta, m1, m2, k, cr, direction):
    """Return (deta, dLam, n) or None when the point is inadmissible."""
    n = 1.0 + q * (m1 + m2 * q) + k * eta
    if n <= 0.0:
        return None
    s = q * (1.0 - q)
    gap = s - eta
    if s > 0.0 and gap <= 0.0:
        return None
    if gap == 0.0 or q == 1.0:
        return None
    deta = -cr * n * eta / ((1.0 - q) * gap) - (m1 + 2.0 * m2 * q) / k
    dlam = direction * eta / (s * gap) if s != 0.0 else 0.0
    return deta, dlam, n


def _dense_eta(eta0, h, ks, theta):
    """eta at fraction theta of the last step from stage derivatives ks."""
    acc = 0.0
    tp = theta
    for j in range(4):
        c = 0.0
        for i in range(7):
            c += ks[i] * _P[i][j]
        acc += c * tp
        tp *= theta
    return eta0 + h * acc


def integrate_eta(q0, eta0, lam0, q_end, direction, m1, m2, k, cr,
                  rtol=1e-10, atol=1e-12, event_tol=1e-12, max_steps=2_000_000,
                  h0=0.0, stop_on_event=True):
    """Integrate (eta, Lam) from q0 towards q_end.

    Returns (status, q, eta, lam, deta, q_stop) where the arrays hold the
    accepted nodes (including the event point when one is found).
    """
    span = q_end - q0
    if span == 0.0:
        return ST_END, np.array([q0]), np.array([eta0]), np.array([lam0]), np.array([0.0]), q0
    sgn = 1.0 if span > 0 else -1.0
    f0 = _rhs(q0, eta0, m1, m2, k, cr, direction)
    if f0 is None:
        return ST_FAIL, np.array([q0]), np.array([eta0]), np.array([lam0]), np.array([0.0]), q0
    qs, es, ls, ds = [q0], [eta0], [lam0], [f0[0]]
    q, eta, lam = q0, eta0, lam0
    ke1, kl1 = f0[0], f0[1]
    h = abs(h0) if h0 > 0 else min(abs(span), 1e-3 * max(1.0, abs(q0)), max(abs(q0), 1e-300))
    h_min_rel = 1e-15
    steps = 0
    while True:
        if steps >= max_steps:
            return ST_MAXSTEPS, np.array(qs), np.array(es), np.array(ls), np.array(ds), q
        remaining = (q_end - q) * sgn
        if h >= remaining:
            h = remaining
            last = True
        else:
            last = False
        if h <= h_min_rel * max(abs(q), 1e-300):
            n_here = 1.0 + q * (m1 + m2 * q) + k * eta
            st = ST_ZERO if n_here < 1e-6 else ST_FAIL
            return st, np.array(qs), np.array(es), np.array(ls), np.array(ds), q
        hs = h * sgn
        ok = True
        ke = [ke1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        kl = [kl1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        r = _rhs(q + C2 * hs, eta + hs * A21 * ke[0], m1, m2, k, cr, direction)
        if r is None:
            ok = False
        else:
            ke[1], kl[1] = r[0], r[1]
            r = _rhs(q + C3 * hs, eta + hs * (A31 * ke[0] + A32 * ke[1]), m1, m2, k, cr, direction)
        if ok and r is None:
            ok = False
        if ok:
            ke[2], kl[2] = r[0], r[1]
            r = _rhs(q + C4 * hs, eta + hs * (A41 * ke[0] + A42 * ke[1] + A43 * ke[2]),
                     m1, m2, k, cr, direction)
            if r is None:
                ok = False
        if ok:
            ke[3], kl[3] = r[0], r[1]
            r = _rhs(q + C5 * hs,
                     eta + hs * (A51 * ke[0] + A52 * ke[1] + A53 * ke[2] + A54 * ke[3]),
                     m1, m2, k, cr, direction)
            if r is None:
                ok = False
        if ok:
            ke[4], kl[4] = r[0], r[1]
            r = _rhs(q + hs,
                     eta + hs * (A61 * ke[0] + A62 * ke[1] + A63 * ke[2] + A64 * ke[3] + A65 * ke[4]),
                     m1, m2, k, cr, direction)
            if r is None:
                ok = False
        if ok:
            ke[5], kl[5] = r[0], r[1]
            eta_new = eta + hs * (B1 * ke[0] + B3 * ke[2] + B4 * ke[3] + B5 * ke[4] + B6 * ke[5])
            lam_new = lam + hs * (B1 * kl[0] + B3 * kl[2] + B4 * kl[3] + B5 * kl[4] + B6 * kl[5])
            q_new = q_end if last else q + hs
            r = _rhs(q_new, eta_new, m1, m2, k, cr, direction)
            if r is None:
                ok = False
        if not ok:
            h *= 0.25
            continue
        ke[6], kl[6] = r[0], r[1]
        err_e = hs * (E1 * ke[0] + E3 * ke[2] + E4 * ke[3] + E5 * ke[4] + E6 * ke[5] + E7 * ke[6])
        err_l = hs * (E1 * kl[0] + E3 * kl[2] + E4 * kl[3] + E5 * kl[4] + E6 * kl[5] + E7 * kl[6])
        # the admissible band 0 < eta < q(1-q) narrows near q = 0 and 1
        sc_e = atol * min(1.0, abs(q * (1.0 - q))) + rtol * max(abs(eta), abs(eta_new))
        sc_l = atol + rtol * max(abs(lam), abs(lam_new))
        err = math.sqrt(0.5 * ((err_e / sc_e) ** 2 + (err_l / sc_l) ** 2))
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        steps += 1
        if stop_on_event and eta_new <= 0.0:
            # bisection on the dense interpolant for eta = 0
            lo, hi = 0.0, 1.0
            while (hi - lo) * h > event_tol:
                mid = 0.5 * (lo + hi)
                if _dense_eta(eta, hs, ke, mid) > 0.0:
                    lo = mid
                else:
                    hi = mid
            theta = hi
            q_ev = q + theta * hs
            # Lam on the dense interpolant at the same fraction
            lam_ev = _dense_eta(lam, hs, kl, theta)
            qs.append(q_ev)
            es.append(0.0)
            ls.append(lam_ev)
            ds.append(-(m1 + 2.0 * m2 * q_ev) / k)
            return ST_EVENT, np.array(qs), np.array(es), np.array(ls), np.array(ds), q_ev
        q, eta, lam = q_new, eta_new, lam_new
        ke1, kl1 = ke[6], kl[6]
        qs.append(q)
        es.append(eta)
        ls.append(lam)
        ds.append(ke1)
        if r[2] <= ZERO_N:
            return ST_ZERO, np.array(qs), np.array(es), np.array(ls), np.array(ds), q
        if last:
            return ST_END, np.array(qs), np.array(es), np.array(ls), np.array(ds), q
        fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
        h *= fac


def simulate_batch(z, x0, s0, dt, beta, R, mu, sigma, lam, gamma,
                   p_lo, p_hi, coef_grid, p_star, p_upper):
    """Simulate a batch of paths under the wedge policy (vectorised over paths).

    ``z`` has shape (paths, steps) of standard normals.  ``coef_grid`` holds
    the consumption coefficient n/D on a uniform grid over [p_lo, p_hi].
    Returns (utility, x_T, s_T, buy_time, sell_time, insolvent, first_action)
    with ``first_action`` 0 none, 1 buy, 2 sell.
    """
    paths, steps = z.shape
    x = np.full(paths, float(x0))
    s = np.full(paths, float(s0))
    first = np.zeros(paths, dtype=np.int64)
    t_buy = np.zeros(paths)
    t_sell = np.zeros(paths)
    bad = np.zeros(paths, dtype=np.int64)
    ng = coef_grid.shape[0]
    width = (p_hi - p_lo) / (ng - 1)
    drift = (mu - 0.5 * sigma * sigma) * dt
    vol = sigma * math.sqrt(dt)
    cpow = 1.0 - R
    cfac = beta / R

    def project(x, s, record):
        w = x + s
        p = s / w
        buy = p < p_star
        sell = p > p_upper
        v = np.where(buy, (p_star * w - s) / (1.0 + lam * p_star), 0.0)
        x = x - (1.0 + lam) * v
        s = s + v
        u = np.where(sell, (s - p_upper * (x + s)) / (1.0 - gamma * p_upper), 0.0)
        s = s - u
        x = x + (1.0 - gamma) * u
        if record is not None:
            record[buy] = 1
            record[sell] = 2
        return x, s, buy, sell

    def utility_rate(x, s):
        w = x + s
        p = s / w
        pos = (p - p_lo) / width
        i = np.clip(pos.astype(np.int64), 0, ng - 2)
        frac = np.clip(pos - i, 0.0, 1.0)
        coef = coef_grid[i] + frac * (coef_grid[i + 1] - coef_grid[i])
        c = cfac * w * coef
        return c, c ** cpow / cpow

    x, s, _, _ = project(x, s, first)
    c, u_prev = utility_rate(x, s)
    acc = np.zeros(paths)
    disc = 1.0
    step_disc = math.exp(-beta * dt)
    for j in range(steps):
        s = s * np.exp(drift + vol * z[:, j])
        x = x - c * dt
        x, s, b, se = project(x, s, None)
        t_buy += b * dt
        t_sell += se * dt
        solv = x + (1.0 - gamma) * np.maximum(s, 0.0) - (1.0 + lam) * np.maximum(-s, 0.0)
        bad += solv <= 0.0
        c, u_new = utility_rate(x, s)
        d_new = disc * step_disc
        acc += 0.5 * dt * (disc * u_prev + d_new * u_new)
        disc = d_new
        u_prev = u_new
    return acc, x, s, t_buy, t_sell, bad, first
