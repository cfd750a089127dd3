"""Ordinary Gaussian process regression: prior, fit, and posterior predictive."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import (
    KernelParams,
    SpectralDecomp,
    as_points,
    gram,
    kernel_matrix,
    spectral_decompose,
)

MeanFn = Callable[[np.ndarray], np.ndarray]


def zero_mean(xs: np.ndarray) -> np.ndarray:
    return np.zeros(len(xs))


@dataclass(frozen=True)
class Dataset:
    """Training inputs (N, d) and real-valued targets (N,)."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", as_points(self.xs))
        object.__setattr__(self, "ys", np.asarray(self.ys, dtype=float).ravel())
        if len(self.xs) != len(self.ys):
            raise ValueError(f"{len(self.xs)} inputs but {len(self.ys)} targets")
        if len(self.xs) < 1:
            raise ValueError("dataset must contain at least one observation")

    @property
    def n(self) -> int:
        return len(self.ys)


@dataclass(frozen=True)
class GprModel:
    """Fitted regression posterior.

    alpha_weights solves (K + noise*I) alpha = y - m(x); the decomposition of
    the noiseless K is kept so that predictions and any downstream refits reuse
    the same factorization.
    """

    train_xs: np.ndarray
    alpha_weights: np.ndarray
    params: KernelParams
    noise: float
    prior_mean: MeanFn
    decomp: SpectralDecomp


def fit_gpr(
    data: Dataset,
    params: KernelParams,
    noise: float,
    prior_mean: MeanFn | None = None,
    decomp: SpectralDecomp | None = None,
) -> GprModel:
    """Fit a GP regression model with observation noise `noise`.

    noise = 0 is allowed when the Gram matrix itself is invertible; a singular
    shifted system raises SingularSystemError. A precomputed decomposition of
    the (noiseless) Gram matrix may be passed in to skip refactorization.
    """
    if noise < 0:
        raise ValueError(f"noise must be non-negative, got {noise}")
    mean = prior_mean if prior_mean is not None else zero_mean
    if decomp is None:
        decomp = spectral_decompose(gram(data.xs, params, add_jitter=False))
    resid = data.ys - mean(data.xs)
    alpha = decomp.solve_shifted(resid, noise)
    return GprModel(
        train_xs=data.xs,
        alpha_weights=alpha,
        params=params,
        noise=noise,
        prior_mean=mean,
        decomp=decomp,
    )


def predict_gpr(model: GprModel, test_xs) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive mean and covariance at test points.

    Returns (mean (M,), cov (M, M)); the covariance is symmetrized and its
    diagonal clamped at zero to absorb roundoff.
    """
    pts = as_points(test_xs)
    if pts.shape[1] != model.train_xs.shape[1]:
        raise ValueError(
            f"test dimension {pts.shape[1]} does not match training dimension "
            f"{model.train_xs.shape[1]}"
        )
    k_star = kernel_matrix(pts, model.train_xs, model.params)
    mean = model.prior_mean(pts) + k_star @ model.alpha_weights

    k_ss = kernel_matrix(pts, pts, model.params)
    np.fill_diagonal(k_ss, model.params.signal_variance)
    cov = k_ss - k_star @ model.decomp.solve_shifted(k_star.T, model.noise)
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(diag, 0.0))
    return mean, cov


@dataclass(frozen=True)
class PosteriorGP:
    """A Gaussian process represented by evaluable mean and covariance functions.

    Used wherever a posterior must serve as the prior of a further fit, so both
    functions accept arbitrary points.
    """

    mean_fn: MeanFn
    kernel_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def mean(self, xs) -> np.ndarray:
        return self.mean_fn(as_points(xs))

    def cov(self, xs1, xs2=None) -> np.ndarray:
        a = as_points(xs1)
        b = a if xs2 is None else as_points(xs2)
        values = self.kernel_fn(a, b)
        if xs2 is None:
            values = 0.5 * (values + values.T)
        return values

    def var(self, xs) -> np.ndarray:
        return np.maximum(np.diag(self.cov(xs)), 0.0)


def prior_gp(params: KernelParams) -> PosteriorGP:
    """The zero-mean GP prior with the given RBF kernel."""
    return PosteriorGP(
        mean_fn=zero_mean,
        kernel_fn=lambda a, b: kernel_matrix(a, b, params),
    )


def posterior_gp(model: GprModel) -> PosteriorGP:
    """Wrap a fitted regression model as an evaluable GP for further distillation."""

    def mean_fn(xs):
        return model.prior_mean(xs) + kernel_matrix(xs, model.train_xs, model.params) @ model.alpha_weights

    def kernel_fn(a, b):
        ka = kernel_matrix(a, model.train_xs, model.params)
        kb = kernel_matrix(model.train_xs, b, model.params)
        return kernel_matrix(a, b, model.params) - ka @ model.decomp.solve_shifted(kb, model.noise)

    return PosteriorGP(mean_fn=mean_fn, kernel_fn=kernel_fn)
