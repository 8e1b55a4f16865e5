"""Compiled inner loops.

Every model is a bundle of small jitted functions. The factories below close
over those functions and return jitted integrators/adjoint sweeps specialised
to one model (and one cost). Nothing here raises: kernels return a status
code and the Python wrappers translate it into an exception.
"""
import numpy as np

from ._jit import njit

OK = 0
DIVERGED = 1
ZENO = 2
AMBIGUOUS = 3
GRAZING = 4

STATUS_NAMES = {OK: "ok", DIVERGED: "diverged", ZENO: "zeno", AMBIGUOUS: "ambiguous", GRAZING: "grazing"}


@njit
def matvec(M, v):
    n, m = M.shape
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += M[i, j] * v[j]
        out[i] = s
    return out


@njit
def tmatvec(M, v):
    n, m = M.shape
    out = np.zeros(m)
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += M[i, j] * v[i]
        out[j] = s
    return out


@njit
def control_at(t, pa, pb, pu):
    """Piecewise-constant control; later pieces override earlier ones."""
    m = pu.shape[1]
    u = np.zeros(m)
    for k in range(pa.shape[0]):
        if pa[k] <= t and t < pb[k]:
            for i in range(m):
                u[i] = pu[k, i]
    return u


@njit
def breakpoints(t0, t1, pa, pb):
    """Sorted knots in [t0, t1]: the ends plus every piece edge strictly inside."""
    tmp = np.empty(2 * pa.shape[0] + 2)
    c = 0
    tmp[c] = t0
    c += 1
    for k in range(pa.shape[0]):
        if pa[k] > t0 and pa[k] < t1:
            tmp[c] = pa[k]
            c += 1
        if pb[k] > t0 and pb[k] < t1:
            tmp[c] = pb[k]
            c += 1
    tmp[c] = t1
    c += 1
    s = np.sort(tmp[:c])
    out = np.empty(c)
    out[0] = s[0]
    k = 1
    for i in range(1, c):
        if s[i] - out[k - 1] > 1e-14 * max(1.0, abs(s[i])):
            out[k] = s[i]
            k += 1
    out[k - 1] = t1
    return out[:k]


@njit
def has_edge(t0, t1, pa, pb):
    """True when a piece starts or ends strictly inside ``(t0, t1)``."""
    tol = 1e-14 * max(1.0, abs(t1))
    for k in range(pa.shape[0]):
        if pa[k] > t0 + tol and pa[k] < t1 - tol:
            return True
        if pb[k] > t0 + tol and pb[k] < t1 - tol:
            return True
    return False


@njit
def all_finite(x):
    for i in range(x.shape[0]):
        if not np.isfinite(x[i]):
            return False
    return True


@njit
def crossed(direction, g0, g1):
    if direction <= 0 and g0 > 0.0 and g1 <= 0.0:
        return True
    if direction >= 0 and g0 < 0.0 and g1 >= 0.0:
        return True
    return False


def build_model_kernels(drift, input_map, jac, guard, guard_grad, reset, reset_jac):
    """Jit the per-model integrator for ``f = g(q,t,x) + h(q,t,x) u``."""

    @njit
    def f(q, t, x, u, p):
        return drift(q, t, x, p) + matvec(input_map(q, t, x, p), u)

    if jac is None:

        @njit
        def A(q, t, x, u, p):
            n = x.shape[0]
            out = np.empty((n, n))
            for i in range(n):
                step = 1e-6 * max(1.0, abs(x[i]))
                xp = x.copy()
                xm = x.copy()
                xp[i] += step
                xm[i] -= step
                d = (f(q, t, xp, u, p) - f(q, t, xm, u, p)) / (2.0 * step)
                for r in range(n):
                    out[r, i] = d[r]
            return out

    else:
        A = jac

    if guard_grad is None:

        @njit
        def dguard(k, x, p):
            n = x.shape[0]
            out = np.empty(n)
            for i in range(n):
                step = 1e-6 * max(1.0, abs(x[i]))
                xp = x.copy()
                xm = x.copy()
                xp[i] += step
                xm[i] -= step
                out[i] = (guard(k, xp, p) - guard(k, xm, p)) / (2.0 * step)
            return out

    else:
        dguard = guard_grad

    if reset_jac is None:

        @njit
        def dreset(k, x, p):
            n = x.shape[0]
            out = np.empty((n, n))
            for i in range(n):
                step = 1e-6 * max(1.0, abs(x[i]))
                xp = x.copy()
                xm = x.copy()
                xp[i] += step
                xm[i] -= step
                d = (reset(k, xp, p) - reset(k, xm, p)) / (2.0 * step)
                for r in range(n):
                    out[r, i] = d[r]
            return out

    else:
        dreset = reset_jac

    @njit
    def rk4(q, t, x, h, u, p):
        k1 = f(q, t, x, u, p)
        k2 = f(q, t + 0.5 * h, x + 0.5 * h * k1, u, p)
        k3 = f(q, t + 0.5 * h, x + 0.5 * h * k2, u, p)
        k4 = f(q, t + h, x + h * k3, u, p)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    @njit
    def advance(q, t, x, h, pa, pb, pu, p):
        if h <= 0.0:
            return x.copy()
        if not has_edge(t, t + h, pa, pb):
            return rk4(q, t, x, h, control_at(t + 0.5 * h, pa, pb, pu), p)
        bp = breakpoints(t, t + h, pa, pb)
        xc = x.copy()
        for i in range(bp.shape[0] - 1):
            a = bp[i]
            b = bp[i + 1]
            u = control_at(0.5 * (a + b), pa, pb, pu)
            xc = rk4(q, a, xc, b - a, u, p)
        return xc

    @njit
    def variational_reset(k, xm, fm, fp, p):
        n = xm.shape[0]
        dphi = dguard(k, xm, p)
        den = 0.0
        for i in range(n):
            den += dphi[i] * fm[i]
        D = dreset(k, xm, p)
        inner = np.eye(n)
        for i in range(n):
            for j in range(n):
                inner[i, j] -= fm[i] * dphi[j] / den
        Pi = D @ inner
        for i in range(n):
            for j in range(n):
                Pi[i, j] += fp[i] * dphi[j] / den
        return Pi

    @njit
    def simulate(q0, t0, x0, tf, dt, pa, pb, pu, p, tr_from, tr_to, tr_dir, max_trans, time_tol, graze_tol):
        n = x0.shape[0]
        span = tf - t0
        nsteps = int(np.ceil(span / dt - 1e-9))
        if nsteps < 0:
            nsteps = 0
        cap = nsteps + 3 + 2 * max_trans
        T = np.empty(cap)
        X = np.empty((cap, n))
        Q = np.empty(cap, np.int64)
        ev_idx = np.empty(max_trans + 1, np.int64)
        ev_k = np.empty(max_trans + 1, np.int64)
        T[0] = t0
        X[0, :] = x0
        Q[0] = q0
        cnt = 1
        ntr = 0
        x = x0.copy()
        q = q0
        tc = t0
        ntrans = tr_from.shape[0]
        for k in range(nsteps):
            tt = t0 + (k + 1) * dt
            if k == nsteps - 1:
                tt = tf
            while True:
                h = tt - tc
                if h <= 1e-15 * max(1.0, abs(tt)):
                    break
                xn = advance(q, tc, x, h, pa, pb, pu, p)
                if not all_finite(xn):
                    return T[:cnt], X[:cnt], Q[:cnt], ev_idx[:ntr], ev_k[:ntr], DIVERGED, tt
                hit = -1
                nhit = 0
                for j in range(ntrans):
                    if tr_from[j] == q:
                        if crossed(tr_dir[j], guard(j, x, p), guard(j, xn, p)):
                            hit = j
                            nhit += 1
                if nhit == 0:
                    x = xn
                    tc = tt
                    break
                if nhit > 1:
                    return T[:cnt], X[:cnt], Q[:cnt], ev_idx[:ntr], ev_k[:ntr], AMBIGUOUS, tt
                g0 = guard(hit, x, p)
                lo = tc
                hi = tt
                while hi - lo > time_tol:
                    mid = 0.5 * (lo + hi)
                    xm = advance(q, tc, x, mid - tc, pa, pb, pu, p)
                    if crossed(tr_dir[hit], g0, guard(hit, xm, p)):
                        hi = mid
                    else:
                        lo = mid
                xminus = advance(q, tc, x, hi - tc, pa, pb, pu, p)
                um = control_at(hi - 1e-12 * max(1.0, abs(hi)), pa, pb, pu)
                fm = f(q, hi, xminus, um, p)
                dphi = dguard(hit, xminus, p)
                rate = 0.0
                for i in range(n):
                    rate += dphi[i] * fm[i]
                if abs(rate) < graze_tol:
                    return T[:cnt], X[:cnt], Q[:cnt], ev_idx[:ntr], ev_k[:ntr], GRAZING, hi
                if ntr >= max_trans:
                    return T[:cnt], X[:cnt], Q[:cnt], ev_idx[:ntr], ev_k[:ntr], ZENO, hi
                xplus = reset(hit, xminus, p)
                T[cnt] = hi
                X[cnt, :] = xminus
                Q[cnt] = q
                ev_idx[ntr] = cnt
                ev_k[ntr] = hit
                cnt += 1
                q = tr_to[hit]
                T[cnt] = hi
                X[cnt, :] = xplus
                Q[cnt] = q
                cnt += 1
                ntr += 1
                x = xplus
                tc = hi
            if tt - T[cnt - 1] > 1e-15 * max(1.0, abs(tt)):
                T[cnt] = tt
                X[cnt, :] = x
                Q[cnt] = q
                cnt += 1
        return T[:cnt], X[:cnt], Q[:cnt], ev_idx[:ntr], ev_k[:ntr], OK, tf

    @njit
    def interval_points(q, ta, xa, tb, pa, pb, pu, p):
        """Re-integrate one stored interval: knots, states at knots and piece midpoints, controls."""
        bp = breakpoints(ta, tb, pa, pb)
        npc = bp.shape[0] - 1
        n = xa.shape[0]
        xs = np.empty((npc + 1, n))
        xmid = np.empty((npc, n))
        us = np.empty((npc, pu.shape[1]))
        xs[0, :] = xa
        for i in range(npc):
            a = bp[i]
            b = bp[i + 1]
            u = control_at(0.5 * (a + b), pa, pb, pu)
            us[i, :] = u
            xmid[i, :] = rk4(q, a, xs[i], 0.5 * (b - a), u, p)
            xs[i + 1, :] = rk4(q, a, xs[i], b - a, u, p)
        return bp, xs, xmid, us

    @njit
    def f_nodes(T, X, Q, pa, pb, pu, p):
        out = np.empty_like(X)
        for j in range(T.shape[0]):
            out[j, :] = f(Q[j], T[j], X[j], control_at(T[j], pa, pb, pu), p)
        return out

    @njit
    def h_nodes(T, X, Q, p):
        N = T.shape[0]
        H0 = input_map(Q[0], T[0], X[0], p)
        out = np.empty((N, H0.shape[0], H0.shape[1]))
        for j in range(N):
            out[j] = input_map(Q[j], T[j], X[j], p)
        return out

    class _K:
        pass

    K = _K()
    K.f = f
    K.A = A
    K.dguard = dguard
    K.dreset = dreset
    K.guard = guard
    K.reset = reset
    K.drift = drift
    K.input_map = input_map
    K.rk4 = rk4
    K.advance = advance
    K.simulate = simulate
    K.variational_reset = variational_reset
    K.interval_points = interval_points
    K.f_nodes = f_nodes
    K.h_nodes = h_nodes
    return K


def build_cost_kernels(lcost, lgrad, mcost, mgrad):
    @njit
    def running(T, X, cp):
        out = np.empty(T.shape[0])
        for j in range(T.shape[0]):
            out[j] = lcost(T[j], X[j], cp)
        return out

    @njit
    def total(T, X, cp):
        N = T.shape[0]
        J = 0.0
        lp = lcost(T[0], X[0], cp)
        for j in range(1, N):
            lj = lcost(T[j], X[j], cp)
            J += 0.5 * (T[j] - T[j - 1]) * (lp + lj)
            lp = lj
        return J + mcost(X[N - 1], cp)

    class _C:
        pass

    C = _C()
    C.l = lcost
    C.dl = lgrad
    C.m = mcost
    C.dm = mgrad
    C.running = running
    C.total = total
    return C


def build_adjoint_kernels(mk, ck):
    """Backward sweep of rho' = -grad l - A^T rho with transposed jumps at events."""
    A = mk.A
    f = mk.f
    interval_points = mk.interval_points
    variational_reset = mk.variational_reset
    dguard = mk.dguard
    lgrad = ck.dl
    lcost = ck.l
    rk4 = mk.rk4
    mgrad = ck.dm

    @njit
    def rhs(q, t, x, u, rho, p, cp):
        return -lgrad(t, x, cp) - tmatvec(A(q, t, x, u, p), rho)

    @njit
    def back_interval(q, ta, xa, tb, rho_b, pa, pb, pu, p, cp):
        bp, xs, xmid, us = interval_points(q, ta, xa, tb, pa, pb, pu, p)
        rho = rho_b.copy()
        for i in range(bp.shape[0] - 2, -1, -1):
            a = bp[i]
            b = bp[i + 1]
            h = b - a
            u = us[i]
            Ab = A(q, b, xs[i + 1], u, p)
            Am = A(q, a + 0.5 * h, xmid[i], u, p)
            Aa = A(q, a, xs[i], u, p)
            gb = lgrad(b, xs[i + 1], cp)
            gm = lgrad(a + 0.5 * h, xmid[i], cp)
            ga = lgrad(a, xs[i], cp)
            k1 = -gb - tmatvec(Ab, rho)
            k2 = -gm - tmatvec(Am, rho - 0.5 * h * k1)
            k3 = -gm - tmatvec(Am, rho - 0.5 * h * k2)
            k4 = -ga - tmatvec(Aa, rho - h * k3)
            rho = rho - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return rho

    @njit
    def jump(k, t, xm, xp, qm, qp, rho_p, pa, pb, pu, p, cp):
        delta = 1e-12 * max(1.0, abs(t))
        fm = f(qm, t, xm, control_at(t - delta, pa, pb, pu), p)
        fp = f(qp, t, xp, control_at(t + delta, pa, pb, pu), p)
        Pi = variational_reset(k, xm, fm, fp, p)
        dphi = dguard(k, xm, p)
        den = 0.0
        for i in range(xm.shape[0]):
            den += dphi[i] * fm[i]
        dl = lcost(t, xp, cp) - lcost(t, xm, cp)
        return tmatvec(Pi, rho_p) + (dl / den) * dphi

    @njit
    def adjoint(T, X, Q, ev_idx, ev_k, pa, pb, pu, p, cp):
        N = T.shape[0]
        n = X.shape[1]
        rho = np.empty((N, n))
        rho[N - 1, :] = mgrad(X[N - 1], cp)
        evmark = -np.ones(N, np.int64)
        for e in range(ev_idx.shape[0]):
            evmark[ev_idx[e]] = ev_k[e]
        # right-end evaluations reused from the previous (later) interval
        have = False
        A_r = np.zeros((n, n))
        g_r = np.zeros(n)
        u_r = np.zeros(pu.shape[1])
        for j in range(N - 2, -1, -1):
            a = T[j]
            b = T[j + 1]
            if evmark[j] >= 0:
                rho[j, :] = jump(evmark[j], a, X[j], X[j + 1], Q[j], Q[j + 1], rho[j + 1], pa, pb, pu, p, cp)
                have = False
            elif has_edge(a, b, pa, pb):
                rho[j, :] = back_interval(Q[j], a, X[j], b, rho[j + 1], pa, pb, pu, p, cp)
                have = False
            else:
                q = Q[j]
                h = b - a
                u = control_at(0.5 * (a + b), pa, pb, pu)
                same = have
                if same:
                    for i in range(u.shape[0]):
                        if u[i] != u_r[i]:
                            same = False
                if not same:
                    A_r = A(q, b, X[j + 1], u, p)
                    g_r = lgrad(b, X[j + 1], cp)
                xm = rk4(q, a, X[j], 0.5 * h, u, p)
                Am = A(q, a + 0.5 * h, xm, u, p)
                gm = lgrad(a + 0.5 * h, xm, cp)
                Aa = A(q, a, X[j], u, p)
                ga = lgrad(a, X[j], cp)
                r = rho[j + 1]
                k1 = -g_r - tmatvec(A_r, r)
                k2 = -gm - tmatvec(Am, r - 0.5 * h * k1)
                k3 = -gm - tmatvec(Am, r - 0.5 * h * k2)
                k4 = -ga - tmatvec(Aa, r - h * k3)
                rho[j, :] = r - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                A_r = Aa
                g_r = ga
                u_r = u
                have = True
        return rho

    class _AK:
        pass

    K = _AK()
    K.rhs = rhs
    K.back_interval = back_interval
    K.jump = jump
    K.adjoint = adjoint
    return K


@njit
def controls_at(T, pa, pb, pu):
    out = np.empty((T.shape[0], pu.shape[1]))
    for j in range(T.shape[0]):
        out[j, :] = control_at(T[j], pa, pb, pu)
    return out


def build_variation_kernels(mk, ck):
    """Forward flow of the cost-augmented variation ``(nu, Psi)`` along a stored trajectory."""
    A = mk.A
    f = mk.f
    interval_points = mk.interval_points
    variational_reset = mk.variational_reset
    dguard = mk.dguard
    lgrad = ck.dl
    lcost = ck.l

    @njit
    def aug_rhs(A_, g_, s):
        n = g_.shape[0]
        out = np.empty(n + 1)
        acc = 0.0
        for i in range(n):
            acc += g_[i] * s[i + 1]
        out[0] = acc
        out[1:] = matvec(A_, s[1:])
        return out

    @njit
    def fwd_interval(q, ta, xa, tb, psi, pa, pb, pu, p, cp):
        bp, xs, xmid, us = interval_points(q, ta, xa, tb, pa, pb, pu, p)
        s = psi.copy()
        for i in range(bp.shape[0] - 1):
            a = bp[i]
            b = bp[i + 1]
            h = b - a
            u = us[i]
            Aa = A(q, a, xs[i], u, p)
            Am = A(q, a + 0.5 * h, xmid[i], u, p)
            Ab = A(q, b, xs[i + 1], u, p)
            ga = lgrad(a, xs[i], cp)
            gm = lgrad(a + 0.5 * h, xmid[i], cp)
            gb = lgrad(b, xs[i + 1], cp)
            k1 = aug_rhs(Aa, ga, s)
            k2 = aug_rhs(Am, gm, s + 0.5 * h * k1)
            k3 = aug_rhs(Am, gm, s + 0.5 * h * k2)
            k4 = aug_rhs(Ab, gb, s + h * k3)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return s

    @njit
    def jump(k, t, xm, xp, qm, qp, psi, pa, pb, pu, p, cp):
        delta = 1e-12 * max(1.0, abs(t))
        fm = f(qm, t, xm, control_at(t - delta, pa, pb, pu), p)
        fp = f(qp, t, xp, control_at(t + delta, pa, pb, pu), p)
        Pi = variational_reset(k, xm, fm, fp, p)
        dphi = dguard(k, xm, p)
        n = xm.shape[0]
        den = 0.0
        dp = 0.0
        for i in range(n):
            den += dphi[i] * fm[i]
            dp += dphi[i] * psi[i + 1]
        out = np.empty(n + 1)
        out[0] = psi[0] + (lcost(t, xp, cp) - lcost(t, xm, cp)) / den * dp
        out[1:] = matvec(Pi, psi[1:])
        return out

    @njit
    def variation(T, X, Q, ev_idx, ev_k, j0, tau, x_tau, psi0, pa, pb, pu, p, cp):
        N = T.shape[0]
        evmark = -np.ones(N, np.int64)
        for e in range(ev_idx.shape[0]):
            evmark[ev_idx[e]] = ev_k[e]
        out = np.empty((N - j0, psi0.shape[0]))
        out[0, :] = psi0
        out[1, :] = fwd_interval(Q[j0], tau, x_tau, T[j0 + 1], psi0, pa, pb, pu, p, cp)
        for j in range(j0 + 1, N - 1):
            r = j - j0
            if evmark[j] >= 0:
                out[r + 1, :] = jump(evmark[j], T[j], X[j], X[j + 1], Q[j], Q[j + 1], out[r], pa, pb, pu, p, cp)
            else:
                out[r + 1, :] = fwd_interval(Q[j], T[j], X[j], T[j + 1], out[r], pa, pb, pu, p, cp)
        return out

    @njit
    def running_integral(T, X, Q, ev_idx, pa, pb, pu, p, cp):
        """Cost coordinate of the augmented state: RK4 (Simpson) quadrature of ``l`` per interval."""
        N = T.shape[0]
        out = np.zeros(N)
        for j in range(N - 1):
            if T[j + 1] == T[j]:
                out[j + 1] = out[j]
                continue
            bp, xs, xmid, us = interval_points(Q[j], T[j], X[j], T[j + 1], pa, pb, pu, p)
            acc = 0.0
            for i in range(bp.shape[0] - 1):
                a = bp[i]
                b = bp[i + 1]
                acc += (b - a) / 6.0 * (lcost(a, xs[i], cp) + 4.0 * lcost(0.5 * (a + b), xmid[i], cp) + lcost(b, xs[i + 1], cp))
            out[j + 1] = out[j] + acc
        return out

    class _VK:
        pass

    K = _VK()
    K.variation = variation
    K.jump = jump
    K.fwd_interval = fwd_interval
    K.running_integral = running_integral
    return K
