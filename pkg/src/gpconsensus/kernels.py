"""Hot numeric kernels: cyclic Jacobi sweeps and the fixed-step RK4 loop.

Each kernel exists twice, a numba-compiled version (``*_numba``) and a
pure-numpy version (``*_numpy``).  The public names ``jacobi_kernel`` and
``rk4_kernel`` point at whichever is selected by ``_accel.USE_NUMBA``.  Both
variants are always importable so they can be benchmarked side by side.

Augmented state layout used by the RK4 kernels::

    y = [x_1 .. x_M | w_p for every unordered pair p | cost_acc | disagreement_acc]

Pairs are enumerated as (pair_i[p], pair_j[p]) with 0-based i < j, and
``beta[p]`` is 1.0 for graph edges, 0.0 otherwise.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Jacobi eigensolver
# ---------------------------------------------------------------------------


@njit(cache=True)
def _offdiag_norm_numba(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return math.sqrt(s)


@njit(cache=True)
def jacobi_numba(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    scale = math.sqrt(np.sum(a * a))
    if scale == 0.0:
        scale = 1.0
    for sweep in range(max_sweeps + 1):
        if _offdiag_norm_numba(a) <= tol * scale:
            return np.diag(a).copy(), v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return np.diag(a).copy(), v, max_sweeps, False


def jacobi_numpy(a, tol, max_sweeps):
    n = a.shape[0]
    a = np.array(a, dtype=float, copy=True)
    v = np.eye(n)
    scale = float(np.sqrt(np.sum(a * a))) or 1.0
    off_mask = ~np.eye(n, dtype=bool)
    for sweep in range(max_sweeps + 1):
        if np.sqrt(np.sum(a[off_mask] ** 2)) <= tol * scale:
            return np.diag(a).copy(), v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, max_sweeps, False


# ---------------------------------------------------------------------------
# Augmented vector field and RK4 loop
# ---------------------------------------------------------------------------


@njit(cache=True)
def _field_numba(y, out, pair_i, pair_j, beta, m, alpha, zeta, adaptive):
    npair = pair_i.shape[0]
    for k in range(m):
        out[k] = 0.0
    ssq = 0.0
    for p in range(npair):
        i = pair_i[p]
        j = pair_j[p]
        d = y[j] - y[i]
        d2 = d * d
        ssq += d2
        if beta[p] != 0.0:
            f = alpha * beta[p] * y[m + p] * d
            out[i] += f
            out[j] -= f
        if adaptive:
            out[m + p] = alpha * d2
        else:
            out[m + p] = 0.0
    # ordered-pair sum is twice the unordered one
    out[m + npair] = 2.0 * zeta * ssq / m
    out[m + npair + 1] = ssq / m


def field_numpy(y, pair_i, pair_j, beta, m, alpha, zeta, adaptive):
    """Augmented vector field (x_dot, w_dot, cost rate, disagreement rate)."""
    npair = pair_i.shape[0]
    x = y[:m]
    w = y[m : m + npair]
    d = x[pair_j] - x[pair_i]
    d2 = d * d
    flux = alpha * beta * w * d
    out = np.empty_like(y)
    out[:m] = np.bincount(pair_i, flux, minlength=m) - np.bincount(pair_j, flux, minlength=m)
    out[m : m + npair] = alpha * d2 if adaptive else 0.0
    ssq = d2.sum()
    out[m + npair] = 2.0 * zeta * ssq / m
    out[m + npair + 1] = ssq / m
    return out


def _n_samples(n_steps, stride):
    return n_steps // stride + 1 + (1 if n_steps % stride else 0)


@njit(cache=True)
def rk4_numba(y0, h, n_steps, stride, pair_i, pair_j, beta, m, alpha, zeta, adaptive):
    dim = y0.shape[0]
    n_samples = n_steps // stride + 1
    if n_steps % stride != 0:
        n_samples += 1
    samples = np.empty((n_samples, dim))
    steps = np.empty(n_samples, dtype=np.int64)
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    samples[0, :] = y
    steps[0] = 0
    s = 1
    half = 0.5 * h
    sixth = h / 6.0
    for n in range(1, n_steps + 1):
        _field_numba(y, k1, pair_i, pair_j, beta, m, alpha, zeta, adaptive)
        for r in range(dim):
            tmp[r] = y[r] + half * k1[r]
        _field_numba(tmp, k2, pair_i, pair_j, beta, m, alpha, zeta, adaptive)
        for r in range(dim):
            tmp[r] = y[r] + half * k2[r]
        _field_numba(tmp, k3, pair_i, pair_j, beta, m, alpha, zeta, adaptive)
        for r in range(dim):
            tmp[r] = y[r] + h * k3[r]
        _field_numba(tmp, k4, pair_i, pair_j, beta, m, alpha, zeta, adaptive)
        finite = True
        for r in range(dim):
            y[r] = y[r] + sixth * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
            if not math.isfinite(y[r]):
                finite = False
        if not finite:
            return samples[:s], steps[:s], n
        if n % stride == 0 or n == n_steps:
            samples[s, :] = y
            steps[s] = n
            s += 1
    return samples, steps, -1


def rk4_numpy(y0, h, n_steps, stride, pair_i, pair_j, beta, m, alpha, zeta, adaptive):
    npair = pair_i.shape[0]
    # signed incidence: (B x)_p = x_j - x_i
    inc = np.zeros((npair, m))
    inc[np.arange(npair), pair_j] = 1.0
    inc[np.arange(npair), pair_i] = -1.0
    inc_t = np.ascontiguousarray(inc.T)
    gain = alpha * beta
    w_slice = slice(m, m + npair)

    def field(y):
        d = inc @ y[:m]
        d2 = d * d
        out = np.empty_like(y)
        out[:m] = -(inc_t @ (gain * y[w_slice] * d))
        out[w_slice] = alpha * d2 if adaptive else 0.0
        ssq = d2.sum()
        out[m + npair] = 2.0 * zeta * ssq / m
        out[m + npair + 1] = ssq / m
        return out

    n_samples = _n_samples(n_steps, stride)
    samples = np.empty((n_samples, y0.shape[0]))
    steps = np.empty(n_samples, dtype=np.int64)
    y = np.array(y0, dtype=float, copy=True)
    samples[0] = y
    steps[0] = 0
    s = 1
    half = 0.5 * h
    sixth = h / 6.0
    for n in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = field(y)
            k2 = field(y + half * k1)
            k3 = field(y + half * k2)
            k4 = field(y + h * k3)
            y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all():
            return samples[:s], steps[:s], n
        if n % stride == 0 or n == n_steps:
            samples[s] = y
            steps[s] = n
            s += 1
    return samples, steps, -1


if USE_NUMBA:
    jacobi_kernel = jacobi_numba
    rk4_kernel = rk4_numba
else:
    jacobi_kernel = jacobi_numpy
    rk4_kernel = rk4_numpy
