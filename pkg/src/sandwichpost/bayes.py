"""Posterior inference for (theta*, B) from the sandwich likelihood.

The likelihood treats the MLE and the score sum-of-squares as the data:
``theta_hat`` is modelled as N(theta*, n A^{-1} B A^{-1}) and S(theta*) as
Wishart(n, B).  With a normal prior on theta* and an inverse-Wishart prior
on B, both full conditionals are conjugate and the posterior is sampled by
a two-block Gibbs sweep:

1.  theta* | B   ~  N(m1, V1),
    V1^{-1} = V0^{-1} + A B^{-1} A / n,
    m1 = V1 [V0^{-1} m0 + A B^{-1} A theta_hat / n];
2.  B^{-1} | theta*  ~  Wishart(nu1, S1^{-1}),
    nu1 = nu0 + n + 1,
    S1 = S0 + S(theta*) + A (theta* - theta_hat)(theta* - theta_hat)^T A / n.

An improper uniform prior on theta* is the V0^{-1} = 0 case, the Jeffreys
prior |B|^{-(p+1)/2} is the (nu0 = 0, S0 = 0) case, and a point mass on B
skips step 2 entirely, making the theta* draws i.i.d.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DofTooSmall, EmptyInput, SandwichPostError
from .models import LinearRegression
from .sandwich import SandwichFit, compute_A, compute_S, wald_interval
from .stochastics import (
    cholesky,
    empirical_quantile,
    inv_spd,
    sample_mvnorm,
    sample_wishart,
    symmetrize,
)

try:
    from . import _kernels

    HAS_KERNELS = True
except ImportError:  # numba not installed; pure-numpy path still works
    _kernels = None
    HAS_KERNELS = False


# ---------------------------------------------------------------------------
# Priors


@dataclass(frozen=True)
class ImproperUniform:
    """Flat improper prior on theta* (zero prior precision)."""


@dataclass(frozen=True)
class NormalPrior:
    """N(mean, cov) prior on theta*; ``cov`` must be positive definite."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))


@dataclass(frozen=True)
class JeffreysPrior:
    """|B|^{-(p+1)/2}; the (nu0=0, S0=0) limit of the inverse-Wishart."""


@dataclass(frozen=True)
class InverseWishartPrior:
    """Inverse-Wishart prior on B with ``dof`` nu0 >= 0 and PSD ``scale`` S0."""

    dof: float
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        if self.dof < 0:
            raise ValueError(f"prior dof must be >= 0, got {self.dof}")


@dataclass(frozen=True)
class PointMassPrior:
    """Degenerate prior fixing B at a positive-definite value."""

    value: np.ndarray

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float)
        cholesky(value)  # raises NotPositiveDefinite on a degenerate B
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class PriorSpec:
    """Joint prior: one choice for theta* and one for B."""

    theta_prior: ImproperUniform | NormalPrior = field(default_factory=ImproperUniform)
    b_prior: JeffreysPrior | InverseWishartPrior | PointMassPrior = field(
        default_factory=JeffreysPrior
    )

    def theta_precision_terms(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (V0^{-1}, V0^{-1} m0); zeros under the uniform prior."""
        if isinstance(self.theta_prior, ImproperUniform):
            return np.zeros((p, p)), np.zeros(p)
        precision = inv_spd(self.theta_prior.cov)
        return precision, precision @ self.theta_prior.mean

    def b_prior_terms(self, p: int) -> tuple[float, np.ndarray]:
        """Return (nu0, S0) for the inverse-Wishart family (Jeffreys: 0, 0)."""
        if isinstance(self.b_prior, JeffreysPrior):
            return 0.0, np.zeros((p, p))
        if isinstance(self.b_prior, InverseWishartPrior):
            return float(self.b_prior.dof), self.b_prior.scale
        raise TypeError("point-mass priors have no inverse-Wishart parameters")


# ---------------------------------------------------------------------------
# Gibbs sweeps


def gibbs_step_theta(
    rng: np.random.Generator,
    prior: PriorSpec,
    B_current: np.ndarray,
    A: np.ndarray,
    theta_hat: np.ndarray,
    n: int,
) -> np.ndarray:
    """Draw theta* from its full conditional N(m1, V1) given B.

    Under the improper uniform prior the conditional mean is exactly
    ``theta_hat`` and ``V1 = n A^{-1} B A^{-1}``.  Note A enters only
    through A B^{-1} A, so its sign convention is immaterial.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    p = theta_hat.size
    quad = A @ inv_spd(B_current) @ A / n
    if isinstance(prior.theta_prior, ImproperUniform):
        V1 = inv_spd(quad)
        m1 = theta_hat
    else:
        precision, precision_mean = prior.theta_precision_terms(p)
        V1 = inv_spd(precision + quad)
        m1 = V1 @ (precision_mean + quad @ theta_hat)
    return sample_mvnorm(rng, m1, symmetrize(V1))


def gibbs_step_B(
    rng: np.random.Generator,
    prior: PriorSpec,
    theta_current: np.ndarray,
    A: np.ndarray,
    theta_hat: np.ndarray,
    S_fn,
    n: int,
) -> np.ndarray:
    """Draw B from its full conditional given theta*.

    Simulates ``B^{-1} ~ Wishart(nu1, S1^{-1})`` and inverts.  A point-mass
    prior short-circuits to its fixed value without consuming randomness.
    """
    if isinstance(prior.b_prior, PointMassPrior):
        return prior.b_prior.value.copy()
    theta_current = np.asarray(theta_current, dtype=float)
    p = theta_current.size
    nu0, S0 = prior.b_prior_terms(p)
    nu1 = nu0 + n + 1
    if nu1 < p:
        raise DofTooSmall(f"posterior dof {nu1} < dimension {p}")
    shift = A @ (theta_current - theta_hat)
    S1 = symmetrize(S0 + S_fn(theta_current) + np.outer(shift, shift) / n)
    W = sample_wishart(rng, nu1, inv_spd(S1))
    return inv_spd(W)


@dataclass(frozen=True)
class GibbsChain:
    """Retained posterior draws from :func:`run_gibbs`."""

    theta_draws: np.ndarray  # (n_keep, p)
    n_burn: int
    B_draws: np.ndarray | None = None  # (n_keep, p, p) when retained

    @property
    def n_keep(self) -> int:
        return self.theta_draws.shape[0]


def run_gibbs(
    rng: np.random.Generator,
    model,
    data,
    prior: PriorSpec,
    n_iter: int = 5500,
    n_burn: int = 500,
    keep_B: bool = False,
    engine: str = "auto",
) -> GibbsChain:
    """Run the two-block Gibbs sampler and retain post-burn-in draws.

    The chain starts at the plug-in solution (theta_hat, B_hat); A is
    computed once at theta_hat and held fixed (it is parameter-free for the
    regression model).  ``engine`` selects "numba" (compiled fast path,
    regression model only), "numpy" (reference loop), or "auto".

    Raises
    ------
    SandwichPostError subclasses
        Step failures are re-raised with the iteration index attached.
    """
    if n_burn < 0 or n_iter <= n_burn:
        raise ValueError(f"need n_iter > n_burn >= 0, got {n_iter}, {n_burn}")
    n = len(data)
    theta_hat = model.fit_mle(data)
    A = compute_A(model, theta_hat, data)

    def S_fn(theta):
        return compute_S(model, theta, data)

    if isinstance(prior.b_prior, PointMassPrior):
        B = prior.b_prior.value.copy()
    else:
        B = S_fn(theta_hat) / n

    use_kernel = (
        engine in ("auto", "numba")
        and HAS_KERNELS
        and isinstance(model, LinearRegression)
    )
    if engine == "numba" and not use_kernel:
        raise ValueError("numba engine requires numba installed and a LinearRegression model")

    if use_kernel:
        return _run_gibbs_kernel(rng, model, data, prior, theta_hat, A, B, n_iter, n_burn, keep_B)

    n_keep = n_iter - n_burn
    theta_draws = np.empty((n_keep, theta_hat.size))
    B_draws = np.empty((n_keep, theta_hat.size, theta_hat.size)) if keep_B else None
    theta = theta_hat.copy()
    for s in range(1, n_iter + 1):
        try:
            theta = gibbs_step_theta(rng, prior, B, A, theta_hat, n)
            B = gibbs_step_B(rng, prior, theta, A, theta_hat, S_fn, n)
        except SandwichPostError as exc:
            raise type(exc)(f"gibbs iteration {s}: {exc}") from exc
        if s > n_burn:
            theta_draws[s - n_burn - 1] = theta
            if keep_B:
                B_draws[s - n_burn - 1] = B
    return GibbsChain(theta_draws=theta_draws, n_burn=n_burn, B_draws=B_draws)


def _run_gibbs_kernel(rng, model, data, prior, theta_hat, A, B, n_iter, n_burn, keep_B):
    """Dispatch to the compiled regression chain; same draw order as the loop."""
    X, y = model.design_arrays(data)
    p = theta_hat.size
    point_mass = isinstance(prior.b_prior, PointMassPrior)
    uniform_theta = isinstance(prior.theta_prior, ImproperUniform)
    if point_mass:
        nu0, S0 = 0.0, np.zeros((p, p))
    else:
        nu0, S0 = prior.b_prior_terms(p)
        if nu0 + len(data) + 1 < p:
            raise DofTooSmall(f"posterior dof {nu0 + len(data) + 1} < dimension {p}")
    precision, precision_mean = prior.theta_precision_terms(p)
    status, bad_iter, theta_draws, B_draws = _kernels.regression_chain(
        rng,
        np.ascontiguousarray(X),
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(theta_hat),
        np.ascontiguousarray(A),
        np.ascontiguousarray(B),
        np.ascontiguousarray(S0),
        float(nu0),
        np.ascontiguousarray(precision),
        np.ascontiguousarray(precision_mean),
        uniform_theta,
        point_mass,
        int(n_iter),
        int(n_burn),
        bool(keep_B),
    )
    if status != 0:
        raise _kernels.status_error(status, bad_iter)
    return GibbsChain(
        theta_draws=theta_draws, n_burn=n_burn, B_draws=B_draws if keep_B else None
    )


# ---------------------------------------------------------------------------
# Interval summaries


def posterior_interval(chain: GibbsChain, coord: int, level: float) -> tuple[float, float]:
    """Equal-tailed interval from the retained draws of one coordinate."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if chain.n_keep == 0:
        raise EmptyInput("chain has no retained draws")
    draws = chain.theta_draws[:, coord]
    return (
        empirical_quantile(draws, (1.0 - level) / 2.0),
        empirical_quantile(draws, (1.0 + level) / 2.0),
    )


def plugin_posterior_interval(fit: SandwichFit, coord: int, level: float) -> tuple[float, float]:
    """Closed-form interval for the uniform x point-mass prior combination.

    That posterior is exactly N(theta_hat, C_hat), so the interval
    coincides with :func:`wald_interval`.
    """
    return wald_interval(fit, coord, level)
