"""Working models: per-observation score/Hessian plus maximum likelihood.

A working model is a parametric family used for estimation without assuming
it contains the data-generating distribution.  Downstream inference only
touches ``score``, ``hessian`` and ``fit_mle``, so new models plug in
without changes elsewhere.

Two concrete models live here: a normal linear regression with the error
variance fixed at 1 (the fixed value cancels out of robust covariance
calculations), and a finite-support exponential family whose maximum
likelihood estimate is moment matching.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import (
    DimensionMismatch,
    EmptyInput,
    MomentOnBoundary,
    NoConvergence,
    NotPositiveDefinite,
    SingularDesign,
)
from .stochastics import solve_spd, symmetrize

NEWTON_MAX_ITER = 100
NEWTON_STEP_CAP = 1e3
NEWTON_MOMENT_TOL = 1e-9


@dataclass
class RegressionObs:
    """One regression observation: response ``y`` and covariate vector ``x``.

    ``x`` includes the leading intercept entry, which must equal 1.
    """

    y: float
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = float(self.y)
        if self.x.ndim != 1:
            raise DimensionMismatch("covariate vector must be one-dimensional")
        if self.x[0] != 1.0:
            raise ValueError(f"covariate vector must start with 1, got {self.x[0]}")


class WorkingModel:
    """Interface consumed by the inference modules.

    Subclasses provide the per-observation log-likelihood and its first two
    derivatives in the parameter, and a maximum likelihood fit.
    """

    dim: int

    def log_likelihood(self, theta, obs) -> float:
        raise NotImplementedError

    def score(self, theta, obs) -> np.ndarray:
        """Gradient of the per-observation log-likelihood at ``theta``."""
        raise NotImplementedError

    def hessian(self, theta, obs) -> np.ndarray:
        """Second derivative matrix of the per-observation log-likelihood."""
        raise NotImplementedError

    def fit_mle(self, data) -> np.ndarray:
        raise NotImplementedError

    # Generic whole-sample sums; models may override with vectorized versions.

    def score_sum(self, theta, data) -> np.ndarray:
        return sum(self.score(theta, obs) for obs in data)

    def score_outer_sum(self, theta, data) -> np.ndarray:
        total = np.zeros((self.dim, self.dim))
        for obs in data:
            s = self.score(theta, obs)
            total += np.outer(s, s)
        return total

    def hessian_sum(self, theta, data) -> np.ndarray:
        total = np.zeros((self.dim, self.dim))
        for obs in data:
            total += self.hessian(theta, obs)
        return total


class LinearRegression(WorkingModel):
    """Normal linear regression with error variance fixed at 1.

    Per observation (y, x): log-likelihood ``-(y - beta.x)^2 / 2`` up to a
    constant, score ``x (y - beta.x)``, Hessian ``-x x^T`` (free of beta
    and y).  The MLE solves the normal equations.
    """

    def __init__(self, dim: int = 2):
        self.dim = int(dim)

    def _check(self, theta, x):
        if len(theta) != self.dim or len(x) != self.dim:
            raise DimensionMismatch(
                f"model has dim {self.dim}, got theta of size {len(theta)} "
                f"and covariates of size {len(x)}"
            )

    def log_likelihood(self, theta, obs) -> float:
        theta = np.asarray(theta, dtype=float)
        self._check(theta, obs.x)
        resid = obs.y - theta @ obs.x
        return -0.5 * resid * resid - 0.5 * np.log(2.0 * np.pi)

    def score(self, theta, obs) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        self._check(theta, obs.x)
        return obs.x * (obs.y - theta @ obs.x)

    def hessian(self, theta, obs) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        self._check(theta, obs.x)
        return -np.outer(obs.x, obs.x)

    @staticmethod
    def design_arrays(data) -> tuple[np.ndarray, np.ndarray]:
        """Stack observations into a design matrix X and response vector y."""
        if len(data) == 0:
            raise EmptyInput("no observations")
        X = np.stack([obs.x for obs in data])
        y = np.array([obs.y for obs in data])
        return X, y

    def fit_mle(self, data) -> np.ndarray:
        X, y = self.design_arrays(data)
        if X.shape[0] < self.dim:
            raise SingularDesign(f"need at least {self.dim} observations, got {X.shape[0]}")
        try:
            return solve_spd(X.T @ X, X.T @ y)
        except NotPositiveDefinite as exc:
            raise SingularDesign(f"design matrix is rank deficient: {exc}") from exc

    def score_sum(self, theta, data) -> np.ndarray:
        X, y = self.design_arrays(data)
        return X.T @ (y - X @ theta)

    def score_outer_sum(self, theta, data) -> np.ndarray:
        X, y = self.design_arrays(data)
        resid = y - X @ theta
        return symmetrize((X * (resid * resid)[:, None]).T @ X)

    def hessian_sum(self, theta, data) -> np.ndarray:
        X, _ = self.design_arrays(data)
        return -(X.T @ X)


class FiniteExpFamily(WorkingModel):
    """Exponential family on a finite support.

    ``p(x | theta)`` is proportional to ``w(x) exp(theta . g(x))`` over the
    support points, with sufficient statistics ``g_1..g_p`` and positive base
    weights ``w``.  The finite support makes the log-partition an exact sum,
    so brute-force oracles are available for everything.
    """

    def __init__(self, support, stats, weights=None):
        support = list(support)
        if len(support) < 2:
            raise ValueError("support must contain at least 2 points")
        self.support = support
        self.dim = len(stats)
        # Evaluate each statistic over the support once.
        self.stat_matrix = np.array(
            [[float(g(x)) for g in stats] for x in support]
        )  # (k, p)
        if weights is None:
            weights = np.ones(len(support))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(support),):
            raise DimensionMismatch("weights must align with the support")
        if np.any(weights <= 0):
            raise ValueError("base weights must be strictly positive")
        self.log_weights = np.log(weights)
        self._index = {x: i for i, x in enumerate(support)}

    def log_partition(self, theta) -> float:
        return float(logsumexp(self.log_weights + self.stat_matrix @ theta))

    def log_probs(self, theta) -> np.ndarray:
        """Log probability of every support point under ``theta``."""
        unnorm = self.log_weights + self.stat_matrix @ np.asarray(theta, dtype=float)
        return unnorm - logsumexp(unnorm)

    def probs(self, theta) -> np.ndarray:
        return softmax(self.log_weights + self.stat_matrix @ np.asarray(theta, dtype=float))

    def mean_stats(self, theta) -> np.ndarray:
        """E[g(x) | theta] over the support."""
        return self.stat_matrix.T @ self.probs(theta)

    def cov_stats(self, theta) -> np.ndarray:
        """Cov[g(x) | theta]; the Hessian of the log-partition."""
        pi = self.probs(theta)
        mu = self.stat_matrix.T @ pi
        centered = self.stat_matrix - mu
        return symmetrize((centered * pi[:, None]).T @ centered)

    def _locate(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise ValueError(f"observation {x!r} is not a support point") from None

    def log_likelihood(self, theta, obs) -> float:
        i = self._locate(obs)
        theta = np.asarray(theta, dtype=float)
        return float(self.log_weights[i] + self.stat_matrix[i] @ theta - self.log_partition(theta))

    def score(self, theta, obs) -> np.ndarray:
        return self.stat_matrix[self._locate(obs)] - self.mean_stats(theta)

    def hessian(self, theta, obs) -> np.ndarray:
        return -self.cov_stats(theta)

    def empirical_probs(self, data) -> np.ndarray:
        """Relative frequencies of the support points in ``data``."""
        counts = np.zeros(len(self.support))
        for x in data:
            counts[self._locate(x)] += 1.0
        if counts.sum() == 0:
            raise EmptyInput("no observations")
        return counts / counts.sum()

    def fit_mle(self, data) -> np.ndarray:
        # Exponential-family MLE = matching the sample moments of g.
        return expfam_pseudo_true(self, self.empirical_probs(data))


def expfam_pseudo_true(fam: FiniteExpFamily, p0, tol: float = NEWTON_MOMENT_TOL) -> np.ndarray:
    """Parameter whose model moments match those of the distribution ``p0``.

    For an exponential family with sufficient statistics g, the parameter
    minimizing the KL divergence from ``p0`` to the model is the one with
    ``E[g | theta] = E_{p0}[g]``.  Found by damped Newton on the strictly
    convex objective ``c(theta) - theta . lambda``; start at 0, halve the
    step until the objective stops increasing.

    Raises
    ------
    MomentOnBoundary
        If the target moments sit on the boundary of the achievable set,
        where the matching parameter diverges (detected by a coordinatewise
        range check upfront, and by step blow-up or curvature collapse
        during iteration).
    NoConvergence
        After ``NEWTON_MAX_ITER`` iterations.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (len(fam.support),):
        raise DimensionMismatch("p0 must assign a probability to every support point")
    if np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
        raise ValueError("p0 must be nonnegative and sum to 1")

    target = fam.stat_matrix.T @ p0
    # Necessary condition for an interior moment: strictly between the
    # extremes each statistic attains on the support.
    low = fam.stat_matrix.min(axis=0)
    high = fam.stat_matrix.max(axis=0)
    if np.any(target <= low) or np.any(target >= high):
        raise MomentOnBoundary(
            f"target moments {target} touch the achievable range "
            f"[{low}, {high}] coordinatewise"
        )

    theta = np.zeros(fam.dim)
    objective = fam.log_partition(theta)  # theta = 0 makes theta.lambda vanish
    for _ in range(NEWTON_MAX_ITER):
        gradient = fam.mean_stats(theta) - target
        if np.max(np.abs(gradient)) <= tol:
            return theta
        try:
            step = -solve_spd(fam.cov_stats(theta), gradient)
        except NotPositiveDefinite as exc:
            raise MomentOnBoundary(
                f"statistic covariance degenerate at theta={theta}: {exc}"
            ) from exc
        if np.linalg.norm(step) > NEWTON_STEP_CAP:
            raise MomentOnBoundary(
                f"Newton step norm {np.linalg.norm(step):.3e} exceeds cap; "
                "target moments lie on the boundary"
            )
        scale = 1.0
        while True:
            candidate = theta + scale * step
            value = fam.log_partition(candidate) - candidate @ target
            # near the optimum the decrease underflows; equality still makes
            # progress because the Newton direction contracts the gradient
            if value <= objective:
                break
            scale /= 2.0
            if scale < 1e-15:
                raise NoConvergence("damped Newton step underflowed")
        theta, objective = candidate, value
    raise NoConvergence(f"no convergence after {NEWTON_MAX_ITER} Newton iterations")


def kl_oracle_pseudo_true(fam: FiniteExpFamily, p0, grid):
    """Brute-force argmin of KL(p0 || p_theta) over a grid of candidates.

    Exhaustive evaluation; first candidate wins on ties.  Serves as an
    independent check on :func:`expfam_pseudo_true`.
    """
    p0 = np.asarray(p0, dtype=float)
    candidates = np.asarray(grid, dtype=float)
    if candidates.size == 0:
        raise EmptyInput("empty candidate grid")
    scalar_grid = candidates.ndim == 1
    if scalar_grid:
        if fam.dim != 1:
            raise DimensionMismatch("one-dimensional grid given for a multi-parameter family")
        candidates = candidates.reshape(-1, 1)
    support_mask = p0 > 0
    entropy_part = float(p0[support_mask] @ np.log(p0[support_mask]))
    divergences = np.empty(candidates.shape[0])
    for i, theta in enumerate(candidates):
        divergences[i] = entropy_part - p0[support_mask] @ fam.log_probs(theta)[support_mask]
    best = candidates[int(np.argmin(divergences))]
    return float(best[0]) if scalar_grid else best
