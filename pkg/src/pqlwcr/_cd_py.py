"""Pure-Python coordinate-descent core (fallback for the compiled ``_cd``).

Mirrors ``_cd.pyx`` step for step; results agree to rounding.
"""
import numpy as np

ETA_CLAMP = 30.0


def _objective(X, y, family, pen, beta, scale):
    eta = X @ beta
    if family == 0:
        q = -0.5 * np.sum((y - eta) ** 2)
    else:
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        q = np.sum(y * eta - np.logaddexp(0.0, eta))
    return float(pen @ np.abs(beta) - scale * q)


def _cd_quadratic(X, w, r, pen, beta, scale, max_passes, tol):
    p = X.shape[1]
    a = scale * np.einsum("i,id,id->d", w, X, X)
    full = True
    passes = 0
    while passes < max_passes:
        passes += 1
        maxchg = 0.0
        for d in range(p):
            bd = beta[d]
            if not full and bd == 0.0:
                continue
            xd = X[:, d]
            if a[d] <= 0.0:
                nb = 0.0
            else:
                g = scale * float(np.dot(w * xd, r)) + a[d] * bd
                nb = np.sign(g) * max(abs(g) - pen[d], 0.0) / a[d]
            delta = nb - bd
            if delta != 0.0:
                r -= delta * xd
                beta[d] = nb
                maxchg = max(maxchg, abs(delta))
        if maxchg < tol:
            if full:
                return passes, True
            full = True
        else:
            full = False
    return passes, False


def solve_weighted_l1(X, y, family, pen, beta0, scale,
                      max_irls=25, max_cd=200, tol=1e-6, w_floor=1e-6):
    """Minimize ``-scale * sum Q(y, X beta) + sum pen_d |beta_d|``.

    Returns ``(beta, irls_steps, cd_passes, converged)``.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pen = np.asarray(pen, dtype=np.float64)
    beta = np.array(beta0, dtype=np.float64, copy=True)
    if family == 0:
        r = y - X @ beta
        passes, ok = _cd_quadratic(X, np.ones_like(y), r, pen, beta, scale, max_cd, tol)
        return beta, 1, passes, ok

    passes = steps = 0
    ok = False
    while steps < max_irls:
        steps += 1
        f_old = _objective(X, y, family, pen, beta, scale)
        eta = np.clip(X @ beta, -ETA_CLAMP, ETA_CLAMP)
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(mu * (1.0 - mu), w_floor)
        r = (y - mu) / w
        old = beta.copy()
        k, cd_ok = _cd_quadratic(X, w, r, pen, beta, scale, max_cd, tol)
        passes += k
        t = 1.0
        trial = old
        accepted = False
        while t > 1e-10:
            trial = old + t * (beta - old)
            if _objective(X, y, family, pen, trial, scale) <= f_old:
                accepted = True
                break
            t *= 0.5
        beta = trial if accepted else old
        if np.max(np.abs(beta - old), initial=0.0) < tol:
            ok = cd_ok
            break
    return beta, steps, passes, ok
