"""Coverage study for slope intervals under heteroscedastic errors.

Data are generated with exponential(1) covariates and conditional law
y | x ~ N(b1 + b2 x, (b1 + b2 x)^2), so the unit-variance regression
working model is wrong but its pseudo-true parameter is the population
regression coefficient.  The study crosses two priors on the coefficients
(improper uniform, weakly informative) with two priors on the score
covariance (Jeffreys, plug-in point mass), records interval coverage and
width for the slope over many replicates, and adds the plug-in Wald
procedure and an uncorrected homoscedastic-model baseline for comparison.

Replicates use independent sub-streams keyed by (seed, cell, replicate),
so results are byte-identical regardless of execution order or worker
count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bayes import (
    HAS_KERNELS,
    ImproperUniform,
    JeffreysPrior,
    NormalPrior,
    PointMassPrior,
    PriorSpec,
    posterior_interval,
    plugin_posterior_interval,
    run_gibbs,
    _kernels,
)
from .errors import NotPositiveDefinite, ReplicateFailure, SingularDesign
from .models import LinearRegression, RegressionObs
from .sandwich import sandwich_cov, wald_interval
from .stochastics import cholesky, empirical_quantile, inv_spd, rng_stream

SLOPE = 1  # coordinate reported by the study

THETA_CODES = {"informative": 0, "uniform": 1, "custom": 2}
B_CODES = {"jeffreys": 0, "plugin": 1, "custom": 2, "naive": 3}


@dataclass(frozen=True)
class DgpConfig:
    """Heteroscedastic data-generating process.

    ``beta_true`` needs a positive intercept and nonnegative slope so that
    the conditional standard deviation b1 + b2 x stays positive on x >= 0.
    """

    n: int
    beta_true: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        b1, b2 = self.beta_true
        if b1 <= 0 or b2 < 0:
            raise ValueError(
                f"need intercept > 0 and slope >= 0 for a positive scale, got {self.beta_true}"
            )


@dataclass(frozen=True)
class ChainConfig:
    """Gibbs chain length; the default (5500, 500) mixes well for this
    two-block near-conjugate target."""

    n_iter: int = 5500
    n_burn: int = 500


@dataclass(frozen=True)
class StudyCell:
    """Aggregated coverage and width for one prior combination."""

    theta_prior_kind: str
    b_prior_kind: str
    n: int
    coverage: float
    mean_width: float
    n_reps: int
    mc_se_coverage: float


def generate_dataset(rng: np.random.Generator, cfg: DgpConfig) -> list[RegressionObs]:
    """One replicate dataset from the heteroscedastic DGP.

    Covariates come from the inverse CDF of the exponential(1) law for
    cross-platform determinism; the y draw then consumes one standard
    normal per observation.
    """
    b1, b2 = cfg.beta_true
    x = -np.log1p(-rng.random(cfg.n))
    mu = b1 + b2 * x
    y = mu + mu * rng.standard_normal(cfg.n)
    return [RegressionObs(y=yi, x=np.array([1.0, xi])) for yi, xi in zip(y, x)]


def informative_prior(data, mean=(1.0, 1.0)) -> NormalPrior:
    """Weakly informative coefficient prior worth one observation.

    Covariance ``n (sum x x^T)^{-1}``: the prior precision is the average
    per-observation information of the realized design, so the prior is
    recomputed for each dataset.
    """
    X, _ = LinearRegression.design_arrays(data)
    try:
        cov = len(data) * inv_spd(X.T @ X)
    except NotPositiveDefinite as exc:
        raise SingularDesign(f"design matrix is rank deficient: {exc}") from exc
    return NormalPrior(mean=np.asarray(mean, dtype=float), cov=cov)


def _prior_kind(theta_prior, b_prior) -> tuple[str, str]:
    theta_kind = theta_prior if isinstance(theta_prior, str) else "custom"
    b_kind = b_prior if isinstance(b_prior, str) else "custom"
    if theta_kind not in THETA_CODES:
        raise ValueError(f"unknown coefficient prior {theta_prior!r}")
    if b_kind not in B_CODES:
        raise ValueError(f"unknown B prior {b_prior!r}")
    return theta_kind, b_kind


def _replicate_stream(seed, cfg, theta_kind, b_kind, rep):
    key = (cfg.n, THETA_CODES[theta_kind], B_CODES[b_kind], rep)
    return rng_stream(seed, key)


def _one_replicate(seed, cfg, theta_prior, b_prior, rep, level, chain, procedure, engine):
    """Interval for the slope on replicate ``rep``; returns (lower, upper)."""
    theta_kind, b_kind = _prior_kind(theta_prior, b_prior)
    rng = _replicate_stream(seed, cfg, theta_kind, b_kind, rep)
    data = generate_dataset(rng, cfg)
    model = LinearRegression(dim=2)

    if procedure == "wald":
        return wald_interval(sandwich_cov(model, data), SLOPE, level)

    if theta_kind == "uniform" and b_kind == "plugin":
        # Exact posterior N(theta_hat, C_hat); no chain needed.
        return plugin_posterior_interval(sandwich_cov(model, data), SLOPE, level)

    if theta_kind == "informative":
        theta_part = informative_prior(data, mean=cfg.beta_true)
    elif theta_kind == "uniform":
        theta_part = ImproperUniform()
    else:
        theta_part = theta_prior

    if b_kind == "plugin":
        b_part = PointMassPrior(sandwich_cov(model, data).B_hat)
    elif b_kind == "jeffreys":
        b_part = JeffreysPrior()
    else:
        b_part = b_prior

    chain_out = run_gibbs(
        rng,
        model,
        data,
        PriorSpec(theta_prior=theta_part, b_prior=b_part),
        n_iter=chain.n_iter,
        n_burn=chain.n_burn,
        engine=engine,
    )
    return posterior_interval(chain_out, SLOPE, level)


def _replicate_block(args):
    """Worker task: evaluate a contiguous block of replicates."""
    (seed, cfg, theta_prior, b_prior, reps, level, chain, procedure, engine) = args
    rows = []
    for rep in reps:
        try:
            lower, upper = _one_replicate(
                seed, cfg, theta_prior, b_prior, rep, level, chain, procedure, engine
            )
        except Exception as exc:  # re-raised with context by the caller
            return ("error", rep, exc)
        rows.append((rep, lower, upper))
    return ("ok", rows, None)


def _cell_label(n, theta_kind, b_kind, procedure):
    name = "wald" if procedure == "wald" else f"{theta_kind}x{b_kind}"
    return f"n={n}:{name}"


def run_cell(
    seed: int,
    cfg: DgpConfig,
    theta_prior="uniform",
    b_prior="jeffreys",
    *,
    n_reps: int = 2000,
    level: float = 0.95,
    chain: ChainConfig = ChainConfig(),
    procedure: str = "bayes",
    threads: int = 1,
    trace_file=None,
    engine: str = "auto",
    truth: float | None = None,
) -> StudyCell:
    """Coverage and mean width of slope intervals over ``n_reps`` replicates.

    ``theta_prior`` is "uniform", "informative" (recomputed per dataset), or
    a :class:`NormalPrior`; ``b_prior`` is "jeffreys", "plugin" (point mass
    at each dataset's B_hat), or an :class:`InverseWishartPrior`.
    ``procedure="wald"`` ignores the priors and evaluates the plug-in Wald
    interval on the same replicate streams as the uniform/plugin cell.

    Containment uses closed intervals and checks ``truth`` (default: the
    DGP's slope).  Any replicate error aborts the cell with a
    :class:`ReplicateFailure` naming the replicate.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if procedure not in ("bayes", "wald"):
        raise ValueError(f"unknown procedure {procedure!r}")
    if procedure == "wald":
        theta_prior, b_prior = "uniform", "plugin"
    theta_kind, b_kind = _prior_kind(theta_prior, b_prior)

    blocks = _partition(range(n_reps), threads)
    tasks = [
        (seed, cfg, theta_prior, b_prior, block, level, chain, procedure, engine)
        for block in blocks
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_replicate_block, tasks))
    else:
        results = [_replicate_block(task) for task in tasks]

    label = _cell_label(cfg.n, theta_kind, b_kind, procedure)
    lowers = np.empty(n_reps)
    uppers = np.empty(n_reps)
    for status, payload, exc in results:
        if status == "error":
            raise ReplicateFailure(label, payload, exc)
        for rep, lower, upper in payload:
            lowers[rep] = lower
            uppers[rep] = upper

    if truth is None:
        truth = cfg.beta_true[SLOPE]
    covered = (lowers <= truth) & (truth <= uppers)
    widths = uppers - lowers
    coverage = float(covered.mean())
    cell = StudyCell(
        theta_prior_kind="wald" if procedure == "wald" else theta_kind,
        b_prior_kind=b_kind,
        n=cfg.n,
        coverage=coverage,
        mean_width=float(widths.mean()),
        n_reps=n_reps,
        mc_se_coverage=float(np.sqrt(coverage * (1.0 - coverage) / n_reps)),
    )
    if trace_file is not None:
        _append_trace(trace_file, label, lowers, uppers, covered, widths)
    return cell


def _partition(reps, threads):
    reps = list(reps)
    if threads <= 1:
        return [reps]
    # Cap block size so all workers stay busy; block boundaries cannot
    # affect results because replicates are independent.
    block = max(1, min(64, -(-len(reps) // threads)))
    return [reps[i : i + block] for i in range(0, len(reps), block)]


def _append_trace(trace_file, label, lowers, uppers, covered, widths):
    path = os.fspath(trace_file)
    write_header = not (os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a", encoding="utf-8") as handle:
        if write_header:
            handle.write("replicate,cell,lower,upper,covered,width\n")
        for rep in range(len(lowers)):
            handle.write(
                f"{rep},{label},{lowers[rep]!r},{uppers[rep]!r},"
                f"{int(covered[rep])},{widths[rep]!r}\n"
            )


GRID_CELLS = (
    ("informative", "jeffreys"),
    ("uniform", "jeffreys"),
    ("informative", "plugin"),
    ("uniform", "plugin"),
)


def run_study(
    seed: int,
    n_values=(10, 500),
    *,
    n_reps: int = 2000,
    level: float = 0.95,
    chain: ChainConfig = ChainConfig(),
    threads: int = 1,
    include_wald: bool = True,
    trace_file=None,
    engine: str = "auto",
) -> list[StudyCell]:
    """Evaluate the full prior grid (plus the Wald row) at each sample size.

    The Wald row shares the uniform/plugin replicate streams, so those two
    procedures are compared on identical datasets.
    """
    cells = []
    for n in n_values:
        cfg = DgpConfig(n=n)
        for theta_prior, b_prior in GRID_CELLS:
            cells.append(
                run_cell(
                    seed,
                    cfg,
                    theta_prior,
                    b_prior,
                    n_reps=n_reps,
                    level=level,
                    chain=chain,
                    threads=threads,
                    trace_file=trace_file,
                    engine=engine,
                )
            )
        if include_wald:
            cells.append(
                run_cell(
                    seed,
                    cfg,
                    procedure="wald",
                    n_reps=n_reps,
                    level=level,
                    chain=chain,
                    threads=threads,
                    trace_file=trace_file,
                    engine=engine,
                )
            )
    return cells


# ---------------------------------------------------------------------------
# Uncorrected homoscedastic-model baseline


def _naive_chain_numpy(rng, X, y, precision, precision_mean, beta_init, sigma2_init, n_iter, n_burn):
    """Reference loop for the homoscedastic-model Gibbs chain."""
    n, p = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    beta = beta_init.copy()
    sigma2 = sigma2_init
    draws = np.empty((n_iter - n_burn, p))
    for s in range(1, n_iter + 1):
        V = inv_spd(precision + XtX / sigma2)
        m = V @ (precision_mean + Xty / sigma2)
        beta = m + cholesky(V) @ rng.standard_normal(p)
        resid = y - X @ beta
        sigma2 = (resid @ resid / 2.0) / rng.standard_gamma(n / 2.0)
        if s > n_burn:
            draws[s - n_burn - 1] = beta
    return draws


def naive_model_interval(
    data,
    prior_beta,
    level: float,
    *,
    rng: np.random.Generator,
    n_iter: int = 5500,
    n_burn: int = 500,
    coord: int = SLOPE,
    engine: str = "auto",
) -> tuple[float, float]:
    """Posterior interval from the uncorrected homoscedastic normal model.

    The model takes y | x ~ N(beta.x, sigma2) with unknown sigma2 under a
    flat prior on log sigma2, ignoring any heteroscedasticity; sampling
    alternates the conjugate beta and sigma2 conditionals.  ``prior_beta``
    is a :class:`NormalPrior` or :class:`ImproperUniform`.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    model = LinearRegression(dim=2)
    beta_hat = model.fit_mle(data)
    X, y = model.design_arrays(data)
    resid = y - X @ beta_hat
    ss = float(resid @ resid)
    if ss == 0.0:
        center = float(beta_hat[coord])  # zero-noise data: posterior collapses
        return center, center

    p = beta_hat.size
    if isinstance(prior_beta, ImproperUniform):
        precision, precision_mean = np.zeros((p, p)), np.zeros(p)
    else:
        precision = inv_spd(prior_beta.cov)
        precision_mean = precision @ prior_beta.mean

    sigma2_init = ss / len(data)
    if HAS_KERNELS and engine in ("auto", "numba"):
        status, bad_iter, draws = _kernels.naive_regression_chain(
            rng,
            np.ascontiguousarray(X),
            np.ascontiguousarray(y, dtype=float),
            np.ascontiguousarray(precision),
            np.ascontiguousarray(precision_mean),
            np.ascontiguousarray(beta_hat),
            float(sigma2_init),
            int(n_iter),
            int(n_burn),
        )
        if status != 0:
            raise _kernels.status_error(status, bad_iter)
    else:
        draws = _naive_chain_numpy(
            rng, X, y, precision, precision_mean, beta_hat, sigma2_init, n_iter, n_burn
        )
    column = draws[:, coord]
    return (
        empirical_quantile(column, (1.0 - level) / 2.0),
        empirical_quantile(column, (1.0 + level) / 2.0),
    )


def _naive_replicate_block(args):
    (seed, cfg, reps, level, chain, engine) = args
    rows = []
    for rep in reps:
        rng = _replicate_stream(seed, cfg, "informative", "naive", rep)
        try:
            data = generate_dataset(rng, cfg)
            prior = informative_prior(data, mean=cfg.beta_true)
            lower, upper = naive_model_interval(
                data,
                prior,
                level,
                rng=rng,
                n_iter=chain.n_iter,
                n_burn=chain.n_burn,
                engine=engine,
            )
        except Exception as exc:
            return ("error", rep, exc)
        rows.append((rep, lower, upper))
    return ("ok", rows, None)


def run_naive_cell(
    seed: int,
    cfg: DgpConfig,
    *,
    n_reps: int = 2000,
    level: float = 0.95,
    chain: ChainConfig = ChainConfig(),
    threads: int = 1,
    engine: str = "auto",
) -> StudyCell:
    """Coverage of the uncorrected-model posterior under the informative prior."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    blocks = _partition(range(n_reps), threads)
    tasks = [(seed, cfg, block, level, chain, engine) for block in blocks]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_naive_replicate_block, tasks))
    else:
        results = [_naive_replicate_block(task) for task in tasks]

    label = _cell_label(cfg.n, "informative", "naive", "bayes")
    lowers = np.empty(n_reps)
    uppers = np.empty(n_reps)
    for status, payload, exc in results:
        if status == "error":
            raise ReplicateFailure(label, payload, exc)
        for rep, lower, upper in payload:
            lowers[rep] = lower
            uppers[rep] = upper
    truth = cfg.beta_true[SLOPE]
    covered = (lowers <= truth) & (truth <= uppers)
    coverage = float(covered.mean())
    return StudyCell(
        theta_prior_kind="informative",
        b_prior_kind="naive",
        n=cfg.n,
        coverage=coverage,
        mean_width=float((uppers - lowers).mean()),
        n_reps=n_reps,
        mc_se_coverage=float(np.sqrt(coverage * (1.0 - coverage) / n_reps)),
    )
