"""Plug-in sandwich covariance and Wald confidence intervals.

For an MLE ``theta_hat`` under a possibly wrong working model, the robust
covariance of ``theta* - theta_hat`` is ``C_hat = n A^{-1} B_hat A^{-1}``
with bread ``A`` the summed Hessian at the MLE and meat
``B_hat = S(theta_hat) / n`` the average outer product of scores.  For the
unit-variance regression model this reduces to the familiar
heteroscedasticity-consistent (HC0) form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDesign
from .stochastics import normal_quantile, symmetrize


@dataclass(frozen=True)
class SandwichFit:
    """MLE plus the matrices entering the sandwich covariance.

    Attributes
    ----------
    theta_hat : ndarray, shape (p,)
        Maximum likelihood estimate.
    A : ndarray, shape (p, p)
        Sum of per-observation Hessians at the MLE (negative definite for
        the regression model with a full-rank design).
    B_hat : ndarray, shape (p, p)
        Average outer product of per-observation scores at the MLE.
    C_hat : ndarray, shape (p, p)
        ``n A^{-1} B_hat A^{-1}``; equivalently ``A^{-1} S(theta_hat) A^{-1}``.
    n : int
        Sample size.
    """

    theta_hat: np.ndarray
    A: np.ndarray
    B_hat: np.ndarray
    C_hat: np.ndarray
    n: int


def compute_A(model, theta, data) -> np.ndarray:
    """Sum of per-observation Hessians at ``theta``."""
    return symmetrize(np.asarray(model.hessian_sum(np.asarray(theta, dtype=float), data)))


def compute_S(model, theta, data) -> np.ndarray:
    """Sum of outer products of per-observation scores at ``theta``.

    Positive semidefinite by construction for every ``theta``.
    """
    return symmetrize(np.asarray(model.score_outer_sum(np.asarray(theta, dtype=float), data)))


def sandwich_cov(model, data) -> SandwichFit:
    """Fit the MLE and assemble the plug-in sandwich covariance.

    Raises
    ------
    SingularDesign
        If the MLE is not identified (rank-deficient design) or ``A`` is
        singular at the fit.
    """
    theta_hat = model.fit_mle(data)
    n = len(data)
    A = compute_A(model, theta_hat, data)
    S = compute_S(model, theta_hat, data)
    try:
        half = np.linalg.solve(A, S)  # A^{-1} S
        C = np.linalg.solve(A, half.T).T  # A^{-1} S A^{-1}, using A symmetric
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(f"singular bread matrix A: {exc}") from exc
    return SandwichFit(theta_hat=theta_hat, A=A, B_hat=S / n, C_hat=symmetrize(C), n=n)


def wald_interval(fit: SandwichFit, coord: int, level: float) -> tuple[float, float]:
    """Normal-theory interval ``theta_hat_j +/- z_{(1+level)/2} sqrt(C_jj)``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = normal_quantile((1.0 + level) / 2.0)
    center = float(fit.theta_hat[coord])
    variance = max(float(fit.C_hat[coord, coord]), 0.0)  # clip FP dust on degenerate fits
    half_width = z * float(np.sqrt(variance))
    return center - half_width, center + half_width
