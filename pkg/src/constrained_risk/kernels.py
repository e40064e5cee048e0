"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names at module level dispatch on ``_accel.USE_NUMBA``; both
flavours stay importable (``numpy_impl`` / ``numba_impl``) for tests and
benchmarks. The numpy flavour follows the numba one step for step so that
the two agree to rounding.

Oracle problem, per instance with pmfs a0, a1 on m points and separation D:

    minimise   sum_z a1[z] ell((1 - s[z]) D)
    subject to sum_z a0[z] ell(s[z] D) <= delta,   s in [0, 1]^m

where s[z] is the position of the estimate on the segment from theta0
(s = 0) to theta1 (s = 1). Given a multiplier lam the problem splits into
one-dimensional problems, solved by golden section (convex losses) or a
grid (anything else); lam is found by bisection.
"""

import math
from types import SimpleNamespace

import numpy as np

from . import _accel
from ._accel import njit

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# iterations to shrink [0, 1] below 1e-10
GOLDEN_ITERS = int(math.ceil(math.log(1e-10) / math.log(GOLDEN)))
BISECT_ITERS = 200
BUDGET_TOL = 1e-9
# bisection cannot make progress once the bracket is this narrow
LAM_RESOLUTION = 4e-16
MAX_DOUBLINGS = 1000
GRID_POINTS = 1024

STATUS_OK = 0
STATUS_TRIVIAL = 1
STATUS_INFEASIBLE = -1

CODE_POWER = 0
CODE_THRESHOLD = 1


# ---------------------------------------------------------------- numba ---

@njit
def _ell_nb(u, code, param):
    if code == CODE_POWER:
        if u <= 0.0:
            return 0.0
        if param == 1.0:
            return u
        if param == 2.0:
            return u * u
        return u ** param
    return 1.0 if u >= param else 0.0


@njit
def _coord_obj_nb(s, a1, a0, lam, D, code, param):
    return a1 * _ell_nb((1.0 - s) * D, code, param) + lam * a0 * _ell_nb(s * D, code, param)


@njit
def _coord_min_nb(a1, a0, lam, D, code, param, convex, grid):
    if convex:
        lo, hi = 0.0, 1.0
        c = hi - GOLDEN * (hi - lo)
        d = lo + GOLDEN * (hi - lo)
        fc = _coord_obj_nb(c, a1, a0, lam, D, code, param)
        fd = _coord_obj_nb(d, a1, a0, lam, D, code, param)
        for _ in range(GOLDEN_ITERS):
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLDEN * (hi - lo)
                fc = _coord_obj_nb(c, a1, a0, lam, D, code, param)
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLDEN * (hi - lo)
                fd = _coord_obj_nb(d, a1, a0, lam, D, code, param)
        best = 0.5 * (lo + hi)
        fbest = _coord_obj_nb(best, a1, a0, lam, D, code, param)
        f0 = _coord_obj_nb(0.0, a1, a0, lam, D, code, param)
        if f0 < fbest:
            best = 0.0
            fbest = f0
        f1 = _coord_obj_nb(1.0, a1, a0, lam, D, code, param)
        if f1 < fbest:
            best = 1.0
        return best
    best = 0.0
    fbest = _coord_obj_nb(0.0, a1, a0, lam, D, code, param)
    for i in range(1, grid + 1):
        s = i / grid
        f = _coord_obj_nb(s, a1, a0, lam, D, code, param)
        if f < fbest:
            best = s
            fbest = f
    return best


@njit
def _solve_nb(a0, a1, lam, D, code, param, convex, grid, out):
    for j in range(a0.size):
        out[j] = _coord_min_nb(a1[j], a0[j], lam, D, code, param, convex, grid)


@njit
def _risks_nb(a0, a1, s, D, code, param):
    r0 = 0.0
    r1 = 0.0
    for j in range(a0.size):
        r0 += a0[j] * _ell_nb(s[j] * D, code, param)
        r1 += a1[j] * _ell_nb((1.0 - s[j]) * D, code, param)
    return r0, r1


@njit
def _oracle_one_nb(a0, a1, D, delta, code, param, convex, grid, s_out):
    m = a0.size
    l0 = _ell_nb(0.0, code, param)
    if delta < l0 - 1e-12:
        for j in range(m):
            s_out[j] = 0.0
        return np.nan, np.nan, np.nan, STATUS_INFEASIBLE

    s_hi = np.ones(m)
    r0, r1 = _risks_nb(a0, a1, s_hi, D, code, param)
    if r0 <= delta:
        s_out[:] = s_hi
        return r1, r0, 0.0, STATUS_TRIVIAL

    s_lo = np.ones(m)
    s_try = np.empty(m)
    lam_lo = 0.0
    lam_hi = 1.0
    _solve_nb(a0, a1, lam_hi, D, code, param, convex, grid, s_hi)
    r0_hi, _ = _risks_nb(a0, a1, s_hi, D, code, param)
    if r0_hi <= delta:
        for _ in range(BISECT_ITERS):
            lam = 0.5 * lam_hi
            _solve_nb(a0, a1, lam, D, code, param, convex, grid, s_try)
            r0_try, _ = _risks_nb(a0, a1, s_try, D, code, param)
            if r0_try <= delta:
                lam_hi = lam
                s_hi[:] = s_try
            else:
                lam_lo = lam
                s_lo[:] = s_try
                break
    else:
        found = False
        for _ in range(MAX_DOUBLINGS):
            lam_lo = lam_hi
            s_lo[:] = s_hi
            lam_hi = 2.0 * lam_hi
            _solve_nb(a0, a1, lam_hi, D, code, param, convex, grid, s_hi)
            r0_hi, _ = _risks_nb(a0, a1, s_hi, D, code, param)
            if r0_hi <= delta:
                found = True
                break
        if not found:
            s_hi[:] = 0.0
            r0, r1 = _risks_nb(a0, a1, s_hi, D, code, param)
            s_out[:] = s_hi
            return r1, r0, np.inf, STATUS_OK

    for _ in range(BISECT_ITERS):
        if lam_hi - lam_lo <= LAM_RESOLUTION * lam_hi:
            break
        lam = 0.5 * (lam_lo + lam_hi)
        _solve_nb(a0, a1, lam, D, code, param, convex, grid, s_try)
        r0_try, _ = _risks_nb(a0, a1, s_try, D, code, param)
        if r0_try <= delta:
            lam_hi = lam
            s_hi[:] = s_try
            if delta - r0_try <= BUDGET_TOL:
                break
        else:
            lam_lo = lam
            s_lo[:] = s_try

    r0_hi, r1_hi = _risks_nb(a0, a1, s_hi, D, code, param)
    s_out[:] = s_hi
    if convex:
        r0_lo, _ = _risks_nb(a0, a1, s_lo, D, code, param)
        if r0_hi < delta - BUDGET_TOL and r0_lo > delta:
            w = (r0_lo - delta) / (r0_lo - r0_hi)
            for j in range(m):
                s_try[j] = s_lo[j] + w * (s_hi[j] - s_lo[j])
            r0_mix, r1_mix = _risks_nb(a0, a1, s_try, D, code, param)
            if r0_mix <= delta + 1e-12 and r1_mix < r1_hi:
                s_out[:] = s_try
                return r1_mix, r0_mix, lam_hi, STATUS_OK
    return r1_hi, r0_hi, lam_hi, STATUS_OK


@njit
def _oracle_batch_nb(p0, p1, D, delta, code, param, convex, grid):
    n, m = p0.shape
    s = np.empty((n, m))
    r1 = np.empty(n)
    r0 = np.empty(n)
    lam = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        r1[i], r0[i], lam[i], status[i] = _oracle_one_nb(p0[i], p1[i], D[i], delta[i], code, param,
                                                         convex, grid, s[i])
    return s, r1, r0, lam, status


@njit
def _estimator_losses_nb(x, tau, theta, code, param):
    reps, n = x.shape
    out = np.empty(reps)
    for i in range(reps):
        acc = 0.0
        for j in range(n):
            acc += x[i, j]
        est = acc / n
        if not abs(est) > tau:
            est = 0.0
        out[i] = _ell_nb(abs(est - theta), code, param)
    return out


@njit
def _gauss_loglr_nb(x, mu1, var1, mu0, var0):
    reps, n = x.shape
    out = np.empty(reps)
    c = 0.5 * math.log(var0 / var1)
    for i in range(reps):
        acc = 0.0
        for j in range(n):
            z = x[i, j]
            acc += c - 0.5 * (z - mu1) ** 2 / var1 + 0.5 * (z - mu0) ** 2 / var0
        out[i] = acc
    return out


# ---------------------------------------------------------------- numpy ---

def _ell_np(u, code, param):
    u = np.asarray(u, dtype=float)
    if code == CODE_POWER:
        return np.where(u > 0.0, np.power(np.maximum(u, 0.0), param), 0.0)
    return np.where(u >= param, 1.0, 0.0)


def _solve_np(a0, a1, lam, D, ell, convex, grid):
    """Per-coordinate minimisers for rows of a0/a1 with per-row lam and D."""
    lam = lam[:, None]
    D = D[:, None]

    def f(s):
        return a1 * ell((1.0 - s) * D) + lam * a0 * ell(s * D)

    if convex:
        lo = np.zeros_like(a0)
        hi = np.ones_like(a0)
        c = hi - GOLDEN * (hi - lo)
        d = lo + GOLDEN * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(GOLDEN_ITERS):
            left = fc < fd
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            new_c = np.where(left, hi - GOLDEN * (hi - lo), d)
            new_d = np.where(left, c, lo + GOLDEN * (hi - lo))
            fnew = f(np.where(left, new_c, new_d))
            fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
            c, d = new_c, new_d
        best = 0.5 * (lo + hi)
        fbest = f(best)
        f0 = f(np.zeros_like(best))
        best = np.where(f0 < fbest, 0.0, best)
        fbest = np.minimum(f0, fbest)
        f1 = f(np.ones_like(best))
        return np.where(f1 < fbest, 1.0, best)

    best = np.zeros_like(a0)
    fbest = f(best)
    for i in range(1, grid + 1):
        s = np.full_like(a0, i / grid)
        fs = f(s)
        better = fs < fbest
        best = np.where(better, s, best)
        fbest = np.where(better, fs, fbest)
    return best


def _risks_np(a0, a1, s, D, ell):
    D = D[:, None]
    return np.sum(a0 * ell(s * D), axis=1), np.sum(a1 * ell((1.0 - s) * D), axis=1)


def _oracle_batch_np(p0, p1, D, delta, ell, convex, grid):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    D = np.asarray(D, dtype=float)
    delta = np.asarray(delta, dtype=float)
    n, m = p0.shape

    def solve(idx, lam):
        return _solve_np(p0[idx], p1[idx], lam, D[idx], ell, convex, grid)

    def risks(idx, s):
        return _risks_np(p0[idx], p1[idx], s, D[idx], ell)

    all_idx = np.arange(n)
    status = np.zeros(n, dtype=np.int64)
    s_out = np.zeros((n, m))
    r1_out = np.full(n, np.nan)
    r0_out = np.full(n, np.nan)
    lam_out = np.full(n, np.nan)

    l0 = float(ell(np.zeros(1))[0])
    infeasible = delta < l0 - 1e-12
    status[infeasible] = STATUS_INFEASIBLE

    s_hi = np.ones((n, m))
    r0, r1 = risks(all_idx, s_hi)
    trivial = ~infeasible & (r0 <= delta)
    status[trivial] = STATUS_TRIVIAL
    s_out[trivial] = 1.0
    r1_out[trivial], r0_out[trivial], lam_out[trivial] = r1[trivial], r0[trivial], 0.0

    active = ~infeasible & ~trivial
    s_lo = np.ones((n, m))
    lam_lo = np.zeros(n)
    lam_hi = np.ones(n)
    idx = np.flatnonzero(active)
    s_hi[idx] = solve(idx, lam_hi[idx])
    r0_hi, _ = risks(idx, s_hi[idx])
    feasible_at_one = np.zeros(n, dtype=bool)
    feasible_at_one[idx] = r0_hi <= delta[idx]

    going = active & feasible_at_one
    for _ in range(BISECT_ITERS):
        idx = np.flatnonzero(going)
        if idx.size == 0:
            break
        lam = 0.5 * lam_hi[idx]
        s_try = solve(idx, lam)
        r0_try, _ = risks(idx, s_try)
        ok = r0_try <= delta[idx]
        lam_hi[idx[ok]] = lam[ok]
        s_hi[idx[ok]] = s_try[ok]
        lam_lo[idx[~ok]] = lam[~ok]
        s_lo[idx[~ok]] = s_try[~ok]
        going[idx[~ok]] = False

    going = active & ~feasible_at_one
    for _ in range(MAX_DOUBLINGS):
        idx = np.flatnonzero(going)
        if idx.size == 0:
            break
        lam_lo[idx] = lam_hi[idx]
        s_lo[idx] = s_hi[idx]
        lam_hi[idx] *= 2.0
        s_hi[idx] = solve(idx, lam_hi[idx])
        r0_hi, _ = risks(idx, s_hi[idx])
        going[idx[r0_hi <= delta[idx]]] = False
    stuck = np.flatnonzero(going)
    if stuck.size:
        s_hi[stuck] = 0.0
        r0_s, r1_s = risks(stuck, s_hi[stuck])
        s_out[stuck], r1_out[stuck], r0_out[stuck], lam_out[stuck] = 0.0, r1_s, r0_s, np.inf
        active[stuck] = False

    going = active & ~(lam_hi - lam_lo <= LAM_RESOLUTION * lam_hi)
    for _ in range(BISECT_ITERS):
        idx = np.flatnonzero(going)
        if idx.size == 0:
            break
        lam = 0.5 * (lam_lo[idx] + lam_hi[idx])
        s_try = solve(idx, lam)
        r0_try, _ = risks(idx, s_try)
        ok = r0_try <= delta[idx]
        lam_hi[idx[ok]] = lam[ok]
        s_hi[idx[ok]] = s_try[ok]
        lam_lo[idx[~ok]] = lam[~ok]
        s_lo[idx[~ok]] = s_try[~ok]
        going[idx[ok & (delta[idx] - r0_try <= BUDGET_TOL)]] = False
        going[lam_hi - lam_lo <= LAM_RESOLUTION * lam_hi] = False

    idx = np.flatnonzero(active)
    r0_hi, r1_hi = risks(idx, s_hi[idx])
    s_out[idx], r1_out[idx], r0_out[idx], lam_out[idx] = s_hi[idx], r1_hi, r0_hi, lam_hi[idx]
    if convex and idx.size:
        r0_lo, _ = risks(idx, s_lo[idx])
        d = delta[idx]
        mixable = (r0_hi < d - BUDGET_TOL) & (r0_lo > d)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(mixable, (r0_lo - d) / (r0_lo - r0_hi), 0.0)
        s_mix = s_lo[idx] + w[:, None] * (s_hi[idx] - s_lo[idx])
        r0_mix, r1_mix = risks(idx, s_mix)
        use = mixable & (r0_mix <= d + 1e-12) & (r1_mix < r1_hi)
        j = idx[use]
        s_out[j], r1_out[j], r0_out[j] = s_mix[use], r1_mix[use], r0_mix[use]
    return s_out, r1_out, r0_out, lam_out, status


def _estimator_losses_np(x, tau, theta, code, param):
    est = np.mean(x, axis=1)
    est = np.where(np.abs(est) > tau, est, 0.0)
    return _ell_np(np.abs(est - theta), code, param)


def _gauss_loglr_np(x, mu1, var1, mu0, var0):
    c = 0.5 * math.log(var0 / var1)
    return np.sum(c - 0.5 * (x - mu1) ** 2 / var1 + 0.5 * (x - mu0) ** 2 / var0, axis=1)


# ------------------------------------------------------------- dispatch ---

def _np_oracle(p0, p1, D, delta, code, param, convex, grid=GRID_POINTS):
    return _oracle_batch_np(p0, p1, D, delta, lambda u: _ell_np(u, code, param), convex, grid)


numpy_impl = SimpleNamespace(
    oracle_batch=_np_oracle,
    oracle_batch_callable=_oracle_batch_np,
    estimator_losses=_estimator_losses_np,
    gauss_loglr=_gauss_loglr_np,
)

if _accel.HAVE_NUMBA:
    def _nb_oracle(p0, p1, D, delta, code, param, convex, grid=GRID_POINTS):
        return _oracle_batch_nb(np.ascontiguousarray(p0, dtype=np.float64),
                                np.ascontiguousarray(p1, dtype=np.float64),
                                np.ascontiguousarray(D, dtype=np.float64),
                                np.ascontiguousarray(delta, dtype=np.float64),
                                int(code), float(param), bool(convex), int(grid))

    def _nb_estimator_losses(x, tau, theta, code, param):
        return _estimator_losses_nb(np.ascontiguousarray(x, dtype=np.float64), float(tau),
                                    float(theta), int(code), float(param))

    def _nb_gauss_loglr(x, mu1, var1, mu0, var0):
        return _gauss_loglr_nb(np.ascontiguousarray(x, dtype=np.float64), float(mu1), float(var1),
                               float(mu0), float(var0))

    numba_impl = SimpleNamespace(
        oracle_batch=_nb_oracle,
        oracle_batch_callable=_oracle_batch_np,
        estimator_losses=_nb_estimator_losses,
        gauss_loglr=_nb_gauss_loglr,
    )
else:  # pragma: no cover
    numba_impl = None


def active_impl():
    return numba_impl if _accel.USE_NUMBA else numpy_impl


def oracle_batch(p0, p1, D, delta, code, param, convex, grid=GRID_POINTS):
    return active_impl().oracle_batch(p0, p1, D, delta, code, param, convex, grid)


def estimator_losses(x, tau, theta, code, param):
    return active_impl().estimator_losses(x, tau, theta, code, param)


def gauss_loglr(x, mu1, var1, mu0, var0):
    return active_impl().gauss_loglr(x, mu1, var1, mu0, var0)
