"""Compiled inner loops for the Gibbs chains (regression working model).

These mirror the pure-numpy reference paths in :mod:`bayes` and
:mod:`study` operation for operation, consuming the generator in the same
order, so a chain run here matches the reference up to floating-point
roundoff.  Failures surface as status codes because exceptions cannot
carry runtime data out of nopython mode.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import NotPositiveDefinite

PD_RTOL = 1e-12  # keep in sync with stochastics.PD_RTOL

STATUS_OK = 0
STATUS_THETA_COND = 1
STATUS_SCALE_MATRIX = 2
STATUS_B_INVERSE = 3

_STATUS_MESSAGES = {
    STATUS_THETA_COND: "conditional covariance of theta* not positive definite",
    STATUS_SCALE_MATRIX: "posterior scale matrix S1 not positive definite",
    STATUS_B_INVERSE: "drawn or initial B not positive definite",
}


def status_error(status: int, iteration: int) -> NotPositiveDefinite:
    msg = _STATUS_MESSAGES.get(status, "kernel failure")
    return NotPositiveDefinite(f"gibbs iteration {iteration}: {msg}")


@njit(cache=True)
def _chol(a, out):
    """Lower Cholesky of ``a`` into ``out``; False if a pivot fails."""
    p = a.shape[0]
    tol = 0.0
    for i in range(p):
        for j in range(p):
            v = abs(a[i, j])
            if v > tol:
                tol = v
    tol *= PD_RTOL
    for i in range(p):
        for j in range(p):
            out[i, j] = 0.0
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if s <= tol:
            return False
        d = np.sqrt(s)
        out[j, j] = d
        for i in range(j + 1, p):
            t = a[i, j]
            for k in range(j):
                t -= out[i, k] * out[j, k]
            out[i, j] = t / d
    return True


@njit(cache=True)
def _tri_inv_lower(lower, out):
    """Invert a lower-triangular matrix into ``out``."""
    p = lower.shape[0]
    for i in range(p):
        for j in range(p):
            out[i, j] = 0.0
    for i in range(p):
        out[i, i] = 1.0 / lower[i, i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s += lower[i, k] * out[k, j]
            out[i, j] = -s / lower[i, i]


@njit(cache=True)
def _spd_inv(a, chol_scratch, linv_scratch, out):
    """Inverse of SPD ``a`` via Cholesky; False on pivot failure."""
    if not _chol(a, chol_scratch):
        return False
    _tri_inv_lower(chol_scratch, linv_scratch)
    p = a.shape[0]
    for i in range(p):
        for j in range(i + 1):
            s = 0.0
            for k in range(i, p):  # Linv[k, i] nonzero only for k >= i >= j
                s += linv_scratch[k, i] * linv_scratch[k, j]
            out[i, j] = s
            out[j, i] = s
    return True


@njit(cache=True)
def _score_outer_sum(X, y, theta, out):
    """Sum of x x^T (y - theta.x)^2 over rows, written into ``out``."""
    n, p = X.shape
    for i in range(p):
        for j in range(p):
            out[i, j] = 0.0
    for k in range(n):
        r = y[k]
        for i in range(p):
            r -= X[k, i] * theta[i]
        w = r * r
        for i in range(p):
            xi = X[k, i] * w
            for j in range(i + 1):
                out[i, j] += xi * X[k, j]
    for i in range(p):
        for j in range(i):
            out[j, i] = out[i, j]


@njit(cache=True)
def _theta_conditional(
    A, Binv, n, prec, prec_mean, theta_hat, uniform_theta, V1, m1, s1, s2, s3
):
    """Fill V1 and m1 for the theta* full conditional; False on failure."""
    p = A.shape[0]
    # quad = A Binv A / n, built in s3
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += A[i, k] * Binv[k, j]
            s1[i, j] = acc
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += s1[i, k] * A[k, j]
            s3[i, j] = acc / n
    if uniform_theta:
        if not _spd_inv(s3, s1, s2, V1):
            return False
        for i in range(p):
            m1[i] = theta_hat[i]  # exact under the flat prior
        return True
    for i in range(p):
        qt = 0.0
        for j in range(p):
            qt += s3[i, j] * theta_hat[j]
        m1[i] = prec_mean[i] + qt  # reused below as the precision-weighted mean
    for i in range(p):
        for j in range(p):
            s3[i, j] += prec[i, j]
    if not _spd_inv(s3, s1, s2, V1):
        return False
    for i in range(p):
        acc = 0.0
        for j in range(p):
            acc += V1[i, j] * m1[j]
        s2[0, i] = acc
    for i in range(p):
        m1[i] = s2[0, i]
    return True


@njit(cache=True)
def regression_chain(
    rng,
    X,
    y,
    theta_hat,
    A,
    B0,
    S0,
    nu0,
    prec,
    prec_mean,
    uniform_theta,
    point_mass,
    n_iter,
    n_burn,
    keep_B,
):
    """Two-block Gibbs chain for the regression model.

    Returns (status, failing_iteration, theta_draws, B_draws).  Draw order
    per iteration: p standard normals for theta*, then (unless point-mass)
    p chi-squares with descending df and p(p-1)/2 subdiagonal normals for
    the Bartlett factor of the Wishart draw.
    """
    n, p = X.shape
    n_keep = n_iter - n_burn
    theta_draws = np.empty((n_keep, p))
    B_draws = np.empty((n_keep if keep_B else 0, p, p))

    s1 = np.empty((p, p))
    s2 = np.empty((p, p))
    s3 = np.empty((p, p))
    V1 = np.empty((p, p))
    L1 = np.empty((p, p))
    S1 = np.empty((p, p))
    S1inv = np.empty((p, p))
    bart = np.empty((p, p))
    root = np.empty((p, p))
    Binv = np.empty((p, p))
    B_cur = np.empty((p, p))
    m1 = np.empty(p)
    z = np.empty(p)
    shift = np.empty(p)
    theta = np.empty(p)

    for i in range(p):
        for j in range(p):
            B_cur[i, j] = B0[i, j]
    # failures before the loop belong to the first sweep, matching the
    # reference path which inverts B lazily inside iteration 1
    if not _spd_inv(B_cur, s1, s2, Binv):
        return STATUS_B_INVERSE, 1, theta_draws, B_draws
    nu1 = nu0 + n + 1.0

    if point_mass:
        # B fixed: the theta* conditional never changes, hoist it.
        if not _theta_conditional(
            A, Binv, n, prec, prec_mean, theta_hat, uniform_theta, V1, m1, s1, s2, s3
        ):
            return STATUS_THETA_COND, 1, theta_draws, B_draws
        if not _chol(V1, L1):
            return STATUS_THETA_COND, 1, theta_draws, B_draws

    for s in range(1, n_iter + 1):
        if not point_mass:
            if not _theta_conditional(
                A, Binv, n, prec, prec_mean, theta_hat, uniform_theta, V1, m1, s1, s2, s3
            ):
                return STATUS_THETA_COND, s, theta_draws, B_draws
            if not _chol(V1, L1):
                return STATUS_THETA_COND, s, theta_draws, B_draws

        for i in range(p):
            z[i] = rng.standard_normal()
        for i in range(p):
            acc = m1[i]
            for j in range(i + 1):
                acc += L1[i, j] * z[j]
            theta[i] = acc

        if not point_mass:
            _score_outer_sum(X, y, theta, S1)
            for i in range(p):
                acc = 0.0
                for j in range(p):
                    acc += A[i, j] * (theta[j] - theta_hat[j])
                shift[i] = acc
            for i in range(p):
                for j in range(p):
                    S1[i, j] += S0[i, j] + shift[i] * shift[j] / n
            if not _spd_inv(S1, s1, s2, S1inv):
                return STATUS_SCALE_MATRIX, s, theta_draws, B_draws
            if not _chol(S1inv, s3):
                return STATUS_SCALE_MATRIX, s, theta_draws, B_draws
            for i in range(p):
                for j in range(p):
                    bart[i, j] = 0.0
            for i in range(p):
                bart[i, i] = np.sqrt(rng.chisquare(nu1 - i))
            for i in range(1, p):
                for j in range(i):
                    bart[i, j] = rng.standard_normal()
            # root = chol(S1inv) @ bart; both lower triangular
            for i in range(p):
                for j in range(i + 1):
                    acc = 0.0
                    for k in range(j, i + 1):
                        acc += s3[i, k] * bart[k, j]
                    root[i, j] = acc
                for j in range(i + 1, p):
                    root[i, j] = 0.0
            # Binv = root root^T is the Wishart(nu1, S1^{-1}) draw
            for i in range(p):
                for j in range(i + 1):
                    acc = 0.0
                    for k in range(j + 1):
                        acc += root[i, k] * root[j, k]
                    Binv[i, j] = acc
                    Binv[j, i] = acc

        if s > n_burn:
            for i in range(p):
                theta_draws[s - n_burn - 1, i] = theta[i]
            if keep_B:
                if point_mass:
                    for i in range(p):
                        for j in range(p):
                            B_draws[s - n_burn - 1, i, j] = B_cur[i, j]
                else:
                    if not _spd_inv(Binv, s1, s2, B_cur):
                        return STATUS_B_INVERSE, s, theta_draws, B_draws
                    for i in range(p):
                        for j in range(p):
                            B_draws[s - n_burn - 1, i, j] = B_cur[i, j]

    return STATUS_OK, 0, theta_draws, B_draws


@njit(cache=True)
def naive_regression_chain(rng, X, y, prec, prec_mean, beta_init, sigma2_init, n_iter, n_burn):
    """Conjugate Gibbs chain for the homoscedastic normal regression model.

    Alternates beta | sigma2 (normal) and sigma2 | beta (inverse gamma with
    a flat prior on log sigma2).  Draw order per iteration: p standard
    normals, then one standard gamma.  Returns (status, iteration, draws).
    """
    n, p = X.shape
    n_keep = n_iter - n_burn
    draws = np.empty((n_keep, p))
    XtX = np.empty((p, p))
    Xty = np.empty(p)
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(n):
                acc += X[k, i] * X[k, j]
            XtX[i, j] = acc
        acc = 0.0
        for k in range(n):
            acc += X[k, i] * y[k]
        Xty[i] = acc

    s1 = np.empty((p, p))
    s2 = np.empty((p, p))
    s3 = np.empty((p, p))
    V = np.empty((p, p))
    Lv = np.empty((p, p))
    m = np.empty(p)
    z = np.empty(p)
    beta = beta_init.copy()
    sigma2 = sigma2_init

    for s in range(1, n_iter + 1):
        for i in range(p):
            for j in range(p):
                s3[i, j] = prec[i, j] + XtX[i, j] / sigma2
        if not _spd_inv(s3, s1, s2, V):
            return STATUS_THETA_COND, s, draws
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += V[i, j] * (prec_mean[j] + Xty[j] / sigma2)
            m[i] = acc
        if not _chol(V, Lv):
            return STATUS_THETA_COND, s, draws
        for i in range(p):
            z[i] = rng.standard_normal()
        for i in range(p):
            acc = m[i]
            for j in range(i + 1):
                acc += Lv[i, j] * z[j]
            beta[i] = acc
        ss = 0.0
        for k in range(n):
            r = y[k]
            for i in range(p):
                r -= X[k, i] * beta[i]
            ss += r * r
        gamma_draw = rng.standard_gamma(n / 2.0)
        sigma2 = (ss / 2.0) / gamma_draw
        if s > n_burn:
            for i in range(p):
                draws[s - n_burn - 1, i] = beta[i]

    return STATUS_OK, 0, draws
