"""Compiled inner loops: Pruefer-phase root finding, traces, Metropolis sweeps.

The eigenangle solver works with the Blaschke ratio B_k = z Phi_k / Phi_k^* on
|z| = 1.  One Szego step acts on B_k as the Moebius map

    B_{k+1} = z (B_k - conj(a_k)) / (1 - a_k B_k) = z B_k conj(w) / w,
    w = 1 - a_k B_k,  Re w > 0,

so the unwrapped phase gains theta - 2 arg(w) per step.  Eigenangles solve
B_{N-1} = conj(a_{N-1}).  The last few coefficients are close to the unit
circle and turn the forward phase into a staircase, so the condition is split
at a midpoint m: a forward phase (steps 0..m-1) and a backward phase run from
C_{N-1} = conj(a_{N-1}) through the inverse maps (steps N-2..m).  Their
difference F(theta) increases strictly by 2 pi N over [0, 2 pi) and the roots
are the crossings of F with multiples of 2 pi.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

STATUS_OK = 0
STATUS_NONMONOTONE = 1
STATUS_NO_CONVERGENCE = 2


@njit(cache=True, nogil=True)
def _winding_step(pr, pi_, wr, wi):
    """Multiply P by w (Re w > 0) and report how often arg P crossed pi."""
    nr = pr * wr - pi_ * wi
    ni = pr * wi + pi_ * wr
    turn = 0.0
    # |arg w| < pi/2, so a crossing of the negative real axis happens with
    # both endpoints in the left half plane.
    if nr < 0.0 or pr < 0.0:
        if pi_ >= 0.0 and ni < 0.0:
            turn = 1.0
        elif pi_ < 0.0 and ni >= 0.0:
            turn = -1.0
    return nr, ni, turn


@njit(cache=True, nogil=True)
def phase_batch(ar, ai, m, theta, F, D):
    """Evaluate F(theta) = psi_fwd - psi_bwd and dF/dtheta for every theta."""
    n = ar.shape[0]
    G = theta.shape[0]
    c = np.cos(theta)
    s = np.sin(theta)
    br = c.copy()
    bi = s.copy()
    dp = np.ones(G)
    pr = np.ones(G)
    pim = np.zeros(G)
    wind = np.zeros(G)
    for k in range(m):
        a_r = ar[k]
        a_i = ai[k]
        for g in range(G):
            ur = a_r * br[g] - a_i * bi[g]
            ui = a_r * bi[g] + a_i * br[g]
            wr = 1.0 - ur
            wi = -ui
            inv = 1.0 / (wr * wr + wi * wi)
            # d/dtheta of the Moebius step is the Poisson kernel (1-|u|^2)/|1-u|^2
            dp[g] = dp[g] * (1.0 - ur * ur - ui * ui) * inv + 1.0
            nr, ni, turn = _winding_step(pr[g], pim[g], wr, wi)
            pr[g] = nr
            pim[g] = ni
            wind[g] += turn
            cr = (wr * wr - wi * wi) * inv
            ci = -2.0 * wr * wi * inv
            tr = br[g] * cr - bi[g] * ci
            ti = br[g] * ci + bi[g] * cr
            br[g] = c[g] * tr - s[g] * ti
            bi[g] = c[g] * ti + s[g] * tr
        if (k & 31) == 31:
            for g in range(G):
                sc = 1.0 / (abs(pr[g]) + abs(pim[g]))
                pr[g] *= sc
                pim[g] *= sc
    for g in range(G):
        F[g] = (m + 1) * theta[g] - 2.0 * (math.atan2(pim[g], pr[g]) + TWO_PI * wind[g])
        D[g] = dp[g]

    lastr = ar[n - 1]
    lasti = -ai[n - 1]
    vr = np.full(G, lastr)
    vi = np.full(G, lasti)
    dq = np.zeros(G)
    pr[:] = 1.0
    pim[:] = 0.0
    wind[:] = 0.0
    cnt = 0
    for k in range(n - 2, m - 1, -1):
        a_r = ar[k]
        a_i = ai[k]
        for g in range(G):
            # v = conj(z) C_{k+1};  C_k = (v + conj(a)) / (1 + a v)
            tr = c[g] * vr[g] + s[g] * vi[g]
            ti = c[g] * vi[g] - s[g] * vr[g]
            qr = a_r * tr - a_i * ti
            qi = a_r * ti + a_i * tr
            wr = 1.0 + qr
            wi = qi
            inv = 1.0 / (wr * wr + wi * wi)
            dq[g] = (dq[g] - 1.0) * (1.0 - qr * qr - qi * qi) * inv
            nr, ni, turn = _winding_step(pr[g], pim[g], wr, wi)
            pr[g] = nr
            pim[g] = ni
            wind[g] += turn
            cr = (wr * wr - wi * wi) * inv
            ci = -2.0 * wr * wi * inv
            vr[g] = tr * cr - ti * ci
            vi[g] = tr * ci + ti * cr
        cnt += 1
        if (cnt & 31) == 0:
            for g in range(G):
                sc = 1.0 / (abs(pr[g]) + abs(pim[g]))
                pr[g] *= sc
                pim[g] *= sc
    phi0 = math.atan2(lasti, lastr)
    for g in range(G):
        bwd = phi0 - (n - 1 - m) * theta[g] - 2.0 * (math.atan2(pim[g], pr[g]) + TWO_PI * wind[g])
        F[g] -= bwd
        D[g] -= dq[g]


@njit(cache=True, nogil=True)
def eigenangles(ar, ai, tol, max_iter):
    """Locate the N eigenangles in [0, 2 pi); returns (angles, status)."""
    n = ar.shape[0]
    m = n // 2
    G = n
    tg = np.empty(G + 1)
    for g in range(G):
        tg[g] = TWO_PI * g / G
    tg[G] = TWO_PI
    pg = np.empty(G + 1)
    dg = np.empty(G + 1)
    phase_batch(ar, ai, m, tg[:G], pg[:G], dg[:G])
    pg[G] = pg[0] + TWO_PI * n
    out = np.empty(n)
    for g in range(G):
        if pg[g + 1] < pg[g]:
            return out, STATUS_NONMONOTONE

    j0 = math.ceil(pg[0] / TWO_PI)
    lev = np.empty(n)
    lo = np.empty(n)
    hi = np.empty(n)
    idx = 0
    for j in range(n):
        lev[j] = TWO_PI * (j0 + j)
        while idx < G - 1 and pg[idx + 1] < lev[j]:
            idx += 1
        lo[j] = tg[idx]
        hi[j] = tg[idx + 1]
        flo = pg[idx] - lev[j]
        fhi = pg[idx + 1] - lev[j]
        if fhi > flo:
            out[j] = lo[j] - flo * (hi[j] - lo[j]) / (fhi - flo)
        else:
            out[j] = 0.5 * (lo[j] + hi[j])

    active = np.arange(n)
    # bracket widths one and two iterations back
    w1 = hi - lo
    w2 = 2.0 * w1 + 1.0
    F = np.empty(n)
    D = np.empty(n)
    half_pi = 0.5 * math.pi
    for _ in range(max_iter):
        na = active.shape[0]
        if na == 0:
            return out, STATUS_OK
        ta = out[active]
        phase_batch(ar, ai, m, ta, F[:na], D[:na])
        keep = np.zeros(na, np.bool_)
        for i in range(na):
            j = active[i]
            f = F[i] - lev[j]
            if f < 0.0:
                lo[j] = ta[i]
            else:
                hi[j] = ta[i]
            # Newton on tan(f/2) near the root linearises arctan-shaped steps.
            if abs(f) < half_pi:
                step = math.sin(f) / D[i]
            else:
                step = f / D[i]
            tn = ta[i] - step
            if abs(step) < tol:
                out[j] = tn
                continue
            w = hi[j] - lo[j]
            # far from the root Newton can cycle across the bracket; bisect
            # unless the bracket halved over the last two steps
            stalled = abs(f) >= half_pi and w > 0.5 * w2[j]
            w2[j] = w1[j]
            w1[j] = w
            if stalled or tn <= lo[j] or tn >= hi[j]:
                tn = 0.5 * (lo[j] + hi[j])
            out[j] = tn
            if hi[j] - lo[j] < tol:
                continue
            keep[i] = True
        active = active[keep]
    if active.shape[0] == 0:
        return out, STATUS_OK
    return out, STATUS_NO_CONVERGENCE


@njit(cache=True, nogil=True)
def power_sums(angles, d):
    """T^(k) = sum_j exp(i k theta_j) for k = 1..d by iterated multiplication."""
    n = angles.shape[0]
    out = np.zeros(d, np.complex128)
    for j in range(n):
        zr = math.cos(angles[j])
        zi = math.sin(angles[j])
        pr = zr
        pi_ = zi
        for k in range(d):
            out[k] += complex(pr, pi_)
            nr = pr * zr - pi_ * zi
            pi_ = pr * zi + pi_ * zr
            pr = nr
            if (k & 63) == 63:
                sc = 1.0 / math.sqrt(pr * pr + pi_ * pi_)
                pr *= sc
                pi_ *= sc
    return out


@njit(cache=True, nogil=True)
def _log_chord(x):
    return math.log(abs(2.0 * math.sin(0.5 * x)))


@njit(cache=True, nogil=True)
def metropolis(theta, beta, step, u_prop, u_acc):
    """Random-walk Metropolis sweeps; u_prop/u_acc have shape (sweeps, n)."""
    n = theta.shape[0]
    sweeps = u_prop.shape[0]
    accepted = 0
    for sw in range(sweeps):
        for j in range(n):
            old = theta[j]
            new = old + step * (2.0 * u_prop[sw, j] - 1.0)
            new = new - TWO_PI * math.floor(new / TWO_PI)
            if new >= TWO_PI:
                new = 0.0
            delta = 0.0
            ok = True
            for k in range(n):
                if k == j:
                    continue
                sn = math.sin(0.5 * (new - theta[k]))
                if sn == 0.0:
                    ok = False
                    break
                delta += math.log(abs(2.0 * sn)) - _log_chord(old - theta[k])
            if not ok:
                continue
            if math.log(u_acc[sw, j]) < beta * delta:
                theta[j] = new
                accepted += 1
    return accepted
