# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent core for weighted-L1 quasi-likelihood fits.

Same algorithm and return convention as ``_cd_py.solve_weighted_l1``.
The whole solve runs without the GIL so fits on different views can share
a thread pool.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, log1p

cnp.import_array()

cdef double ETA_CLAMP = 30.0


cdef inline double _soft(double z, double t) nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


cdef inline double _clamp(double e) nogil:
    if e > ETA_CLAMP:
        return ETA_CLAMP
    if e < -ETA_CLAMP:
        return -ETA_CLAMP
    return e


cdef inline double _log1pexp(double e) nogil:
    if e > 0:
        return e + log1p(exp(-e))
    return log1p(exp(e))


cdef double _objective(const double[::1, :] X, const double[::1] y, int family,
                       const double[::1] pen, const double[::1] beta, double scale,
                       double[::1] eta) nogil:
    cdef Py_ssize_t m = X.shape[0], p = X.shape[1], i, d
    cdef double q = 0.0, e, b, out = 0.0
    for i in range(m):
        eta[i] = 0.0
    for d in range(p):
        b = beta[d]
        if b != 0.0:
            for i in range(m):
                eta[i] += X[i, d] * b
            out += pen[d] * fabs(b)
    for i in range(m):
        if family == 0:
            q -= 0.5 * (y[i] - eta[i]) * (y[i] - eta[i])
        else:
            e = _clamp(eta[i])
            q += y[i] * e - _log1pexp(e)
    return out - scale * q


cdef int _cd_quadratic(const double[::1, :] X, const double[::1] w, double[::1] r,
                       const double[::1] pen, double[::1] beta, double[::1] a,
                       double scale, int max_passes, double tol, int *passes) nogil:
    # minimizes (scale/2) sum_i w_i r_i(beta)^2 + sum_d pen_d |beta_d|, r = z - X beta kept current
    cdef Py_ssize_t m = X.shape[0], p = X.shape[1], i, d
    cdef double g, nb, delta, maxchg, s
    cdef bint full = True, converged = False
    cdef int k = 0
    for d in range(p):
        s = 0.0
        for i in range(m):
            s += w[i] * X[i, d] * X[i, d]
        a[d] = scale * s
    while k < max_passes:
        k += 1
        maxchg = 0.0
        for d in range(p):
            if not full and beta[d] == 0.0:
                continue
            if a[d] <= 0.0:
                nb = 0.0
            else:
                g = 0.0
                for i in range(m):
                    g += w[i] * X[i, d] * r[i]
                g = scale * g + a[d] * beta[d]
                nb = _soft(g, pen[d]) / a[d]
            delta = nb - beta[d]
            if delta != 0.0:
                for i in range(m):
                    r[i] -= delta * X[i, d]
                beta[d] = nb
                if fabs(delta) > maxchg:
                    maxchg = fabs(delta)
        if maxchg < tol:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    passes[0] += k
    return 1 if converged else 0


def solve_weighted_l1(X, y, int family, pen, beta0, double scale,
                      int max_irls=25, int max_cd=200, double tol=1e-6, double w_floor=1e-6):
    """Minimize ``-scale * sum Q(y, X beta) + sum pen_d |beta_d|``.

    Returns ``(beta, irls_steps, cd_passes, converged)``.
    """
    cdef const double[::1, :] Xv = np.asfortranarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] penv = np.ascontiguousarray(pen, dtype=np.float64)
    beta_arr = np.array(beta0, dtype=np.float64, copy=True)
    cdef double[::1] beta = beta_arr
    cdef Py_ssize_t m = Xv.shape[0], p = Xv.shape[1], i, d
    cdef double[::1] w = np.ones(m)
    cdef double[::1] r = np.empty(m)
    cdef double[::1] eta = np.empty(m)
    cdef double[::1] a = np.empty(p)
    cdef double[::1] old = np.empty(p)
    cdef double[::1] trial = np.empty(p)
    cdef int passes = 0, steps = 0, ok = 0, cd_ok
    cdef double mu, e, f_old, f_new, t, chg, bd
    cdef bint accepted

    with nogil:
        if family == 0:
            for i in range(m):
                r[i] = yv[i]
            for d in range(p):
                bd = beta[d]
                if bd != 0.0:
                    for i in range(m):
                        r[i] -= Xv[i, d] * bd
            steps = 1
            ok = _cd_quadratic(Xv, w, r, penv, beta, a, scale, max_cd, tol, &passes)
        else:
            while steps < max_irls:
                steps += 1
                f_old = _objective(Xv, yv, family, penv, beta, scale, eta)
                for i in range(m):
                    e = _clamp(eta[i])
                    mu = 1.0 / (1.0 + exp(-e))
                    w[i] = mu * (1.0 - mu)
                    if w[i] < w_floor:
                        w[i] = w_floor
                    # working residual z - eta
                    r[i] = (yv[i] - mu) / w[i]
                for d in range(p):
                    old[d] = beta[d]
                cd_ok = _cd_quadratic(Xv, w, r, penv, beta, a, scale, max_cd, tol, &passes)
                t = 1.0
                accepted = False
                while t > 1e-10:
                    for d in range(p):
                        trial[d] = old[d] + t * (beta[d] - old[d])
                    f_new = _objective(Xv, yv, family, penv, trial, scale, eta)
                    if f_new <= f_old:
                        accepted = True
                        break
                    t *= 0.5
                chg = 0.0
                if accepted:
                    for d in range(p):
                        if fabs(trial[d] - old[d]) > chg:
                            chg = fabs(trial[d] - old[d])
                        beta[d] = trial[d]
                else:
                    for d in range(p):
                        beta[d] = old[d]
                if chg < tol:
                    ok = cd_ok
                    break
    return beta_arr, steps, passes, bool(ok)
