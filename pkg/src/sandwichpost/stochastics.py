"""Seedable random sampling and small dense linear-algebra primitives.

Everything here is deterministic given a generator produced by
:func:`rng_stream`, and sized for small dense problems (p up to ~20):
Cholesky factorization, SPD solves, multivariate-normal and Wishart
sampling, and quantile helpers.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtri

from .errors import DimensionMismatch, DofTooSmall, EmptyInput, NotPositiveDefinite

# Relative pivot tolerance for positive definiteness.  Problems here have
# p <= ~20 and benign conditioning, so a single fixed tolerance suffices.
PD_RTOL = 1e-12


def rng_stream(seed: int, stream: int | tuple[int, ...] = ()) -> np.random.Generator:
    """Return a generator keyed by ``(seed, stream)``.

    Identical ``(seed, stream)`` pairs yield identical draw sequences across
    runs, processes, and thread counts; distinct ``stream`` keys yield
    statistically independent streams (SeedSequence spawn-key guarantee).

    Parameters
    ----------
    seed : int
        Master seed.
    stream : int or tuple of int
        Sub-stream key, e.g. ``(cell_id, replicate_index)``.
    """
    if isinstance(stream, (int, np.integer)):
        stream = (int(stream),)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average a nearly-symmetric matrix with its transpose."""
    return (m + m.T) / 2.0


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with ``m = L @ L.T``.

    Only the lower triangle of ``m`` is referenced, so symmetry is enforced
    by construction.  A pivot at or below ``PD_RTOL * max|m|`` raises
    :class:`NotPositiveDefinite` (degenerate score covariance or collinear
    design, in this package's use).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    p = m.shape[0]
    if p < 1:
        raise DimensionMismatch("matrix dimension must be >= 1")
    tol = PD_RTOL * np.max(np.abs(m))
    lower = np.zeros_like(m)
    for j in range(p):
        pivot = m[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= tol:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at column {j} is <= tolerance {tol:.3e}"
            )
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < p:
            lower[j + 1 :, j] = (m[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def solve_spd(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``m x = b`` for symmetric positive-definite ``m`` via Cholesky."""
    factor = cholesky(m)
    y = solve_triangular(factor, b, lower=True)
    return solve_triangular(factor.T, y, lower=False)


def inv_spd(m: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix, symmetrized."""
    m = np.asarray(m, dtype=float)
    return symmetrize(solve_spd(m, np.eye(m.shape[0])))


def sample_mvnorm(rng: np.random.Generator, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """One draw from N(mean, cov) as ``mean + L z`` with ``L = cholesky(cov)``.

    Raises
    ------
    NotPositiveDefinite
        If ``cov`` fails the Cholesky pivot test.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise DimensionMismatch(f"mean has size {mean.size} but cov has shape {cov.shape}")
    factor = cholesky(cov)
    return mean + factor @ rng.standard_normal(mean.size)


def sample_wishart(rng: np.random.Generator, dof: float, scale: np.ndarray) -> np.ndarray:
    """One Wishart draw with ``E[W] = dof * scale``, via Bartlett decomposition.

    The returned W has density proportional to
    ``|W|^{(dof-p-1)/2} exp(-tr(scale^{-1} W) / 2)``.  Construction: T is
    lower triangular with ``T[i,i] = sqrt(chi2(dof - i))`` and N(0,1)
    entries below the diagonal; ``W = (L T)(L T)^T`` with
    ``L = cholesky(scale)``.  Valid for non-integer ``dof``.

    Raises
    ------
    DofTooSmall
        If ``dof < p``.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if dof < p:
        raise DofTooSmall(f"dof {dof} < dimension {p}")
    factor = cholesky(scale)
    bartlett = np.zeros((p, p))
    # Draw order is part of the determinism contract: chi-square diagonal
    # first (descending df), then the subdiagonal normals row by row.
    bartlett[np.diag_indices(p)] = np.sqrt(rng.chisquare(dof - np.arange(p)))
    if p > 1:
        bartlett[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    root = factor @ bartlett
    return symmetrize(root @ root.T)


def empirical_quantile(draws, q: float) -> float:
    """Linear-interpolation (type-7) quantile of a sample.

    With sorted values v_1..v_m and h = (m - 1) q + 1, returns
    ``v_floor(h) + (h - floor(h)) * (v_floor(h)+1 - v_floor(h))``.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    values = np.asarray(draws, dtype=float)
    if values.size == 0:
        raise EmptyInput("cannot take a quantile of an empty sample")
    return float(np.quantile(values, q, method="linear"))


def normal_quantile(q: float) -> float:
    """Standard normal quantile (accurate to machine precision)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return float(ndtri(q))
