"""Self-distillation for GP classification.

Data-centric chains refit at each step to the previous step's predicted
targets; because those targets live in [0, 1] rather than {0, 1}, steps beyond
the first switch to the continuous Bernoulli likelihood to stay well-specified.
Distribution-centric chains instead feed each step's Laplace-approximated
posterior back in as the next prior; iterating that literally costs one full
fit per step, but a single fit with the covariance scaled by the step count is
an exact stand-in for replicated data and a close approximation of the whole
iterated chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve
from scipy.special import expit

from .gpr import PosteriorGP, prior_gp
from .gpr_distill import REPLICATION_ROW_CAP
from .kernels import KernelParams, as_points, gram, kernel_matrix
from .laplace import (
    BERNOULLI,
    CONTINUOUS_BERNOULLI,
    BinaryDataset,
    LaplaceFit,
    NewtonDidNotConverge,
    gpc_predict_latent,
    laplace_marginal_loglik,
    laplace_mode,
    sigmoid_gaussian_mean,
)

TARGET_KINDS = ("soft_mean", "latent_sigmoid", "hard_threshold")


@dataclass(frozen=True)
class GpcDistillConfig:
    """Distillation chain settings.

    target_kind picks how step t's predictions become step t+1's targets:
    the quadrature mean E[sigma(f)] (soft_mean), the squashed mode sigma(f_hat)
    (latent_sigmoid), or 0/1 labels thresholded at 0.5 (hard_threshold).
    reg_gammas, when given, adds a per-step diagonal regularizer to the Gram
    matrix exactly as observation noise does in regression.
    """

    steps: int
    target_kind: str = "soft_mean"
    reg_gammas: tuple[float, ...] | None = None
    scaled_approximation: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.target_kind not in TARGET_KINDS:
            raise ValueError(f"target_kind must be one of {TARGET_KINDS}, got {self.target_kind!r}")
        if self.reg_gammas is not None:
            object.__setattr__(self, "reg_gammas", tuple(float(g) for g in self.reg_gammas))
            if len(self.reg_gammas) != self.steps:
                raise ValueError(
                    f"reg_gammas has {len(self.reg_gammas)} entries for {self.steps} steps"
                )
            if any(g < 0 for g in self.reg_gammas):
                raise ValueError("reg_gammas must be non-negative")


@dataclass(frozen=True)
class DataCentricGpcStep:
    """One step of a data-centric chain: its fit, the Gram it used, and its targets."""

    fit: LaplaceFit
    gram_values: np.ndarray
    train_targets: np.ndarray
    predicted: np.ndarray  # predictions at the training inputs, per target_kind


def _step_predictions(
    fit: LaplaceFit,
    gram_values: np.ndarray,
    xs: np.ndarray,
    params: KernelParams,
    target_kind: str,
) -> np.ndarray:
    if target_kind == "latent_sigmoid":
        return expit(fit.f_hat)
    if target_kind == "hard_threshold":
        # sigma(f_hat) >= 0.5 and the quadrature mean >= 0.5 agree exactly on
        # the sign of f_hat, so thresholding needs no probability evaluation.
        return (fit.f_hat >= 0.0).astype(float)
    mu, cov = gpc_predict_latent(fit, gram_values, xs, xs, params)
    return sigmoid_gaussian_mean(mu, np.diag(cov))


def data_centric_gpc(
    data: BinaryDataset, params: KernelParams, config: GpcDistillConfig, **newton_kwargs
) -> list[DataCentricGpcStep]:
    """Run a data-centric GPC chain; step 1 is ordinary Bernoulli, the rest CB.

    Raises with the failing step identified if Newton does not converge.
    Extra keyword arguments are forwarded to the mode finder.
    """
    if not data.strictly_binary:
        raise ValueError("data-centric GPC distillation starts from strictly binary targets")
    xs = data.xs
    base = gram(xs, params, add_jitter=True).values
    targets = data.ys
    steps: list[DataCentricGpcStep] = []
    for t in range(1, config.steps + 1):
        K_t = base.copy()
        if config.reg_gammas is not None and config.reg_gammas[t - 1] > 0:
            K_t[np.diag_indices_from(K_t)] += config.reg_gammas[t - 1]
        likelihood = BERNOULLI if t == 1 else CONTINUOUS_BERNOULLI
        try:
            fit = laplace_mode(targets, K_t, likelihood=likelihood, **newton_kwargs)
        except NewtonDidNotConverge as exc:
            raise NewtonDidNotConverge(
                f"step {t} of {config.steps} failed: {exc}", grad_norm=exc.grad_norm
            ) from exc
        predicted = _step_predictions(fit, K_t, xs, params, config.target_kind)
        steps.append(
            DataCentricGpcStep(
                fit=fit, gram_values=K_t, train_targets=targets, predicted=predicted
            )
        )
        targets = predicted
    return steps


def cb_marginal_loglik(fit: LaplaceFit, K, targets) -> float:
    """Laplace marginal log-likelihood under the continuous Bernoulli model."""
    if fit.likelihood != CONTINUOUS_BERNOULLI:
        raise ValueError(f"expected a continuous Bernoulli fit, got {fit.likelihood!r}")
    return laplace_marginal_loglik(fit, K, targets)


# ---------------------------------------------------------------------------
# distribution-centric
# ---------------------------------------------------------------------------


def _curvature_solver(K_t: np.ndarray, w: np.ndarray):
    """Factorized application of (K_t + W^-1)^-1, never forming W^-1."""
    n = len(w)
    if np.all(w > 0.0):
        sw = np.sqrt(w)
        factor = cho_factor(np.eye(n) + sw[:, None] * K_t * sw[None, :], lower=True)

        def apply(rhs):
            return sw[:, None] * cho_solve(factor, sw[:, None] * rhs)

    else:
        factor = lu_factor(w[:, None] * K_t + np.eye(n))

        def apply(rhs):
            return lu_solve(factor, w[:, None] * rhs)

    return apply


def _laplace_posterior(gp: PosteriorGP, xs: np.ndarray, fit: LaplaceFit,
                       K_t: np.ndarray) -> PosteriorGP:
    """Posterior GP from a Laplace fit carried out under the prior `gp`.

    K_t is the prior covariance at the training inputs without jitter; the
    jitter belongs to the mode-finding solve only, and (K_t + W^-1) is already
    well-conditioned.
    """
    inner = _curvature_solver(K_t, fit.w_diag)
    prev_mean, prev_kernel = gp.mean_fn, gp.kernel_fn
    alpha = fit.alpha_weights

    def mean_fn(a):
        return prev_mean(a) + prev_kernel(a, xs) @ alpha

    def kernel_fn(a, b):
        big = prev_kernel(np.vstack([a, xs]), np.vstack([b, xs]))
        k_ab = big[: len(a), : len(b)]
        k_ax = big[: len(a), len(b):]
        k_xb = big[len(a):, : len(b)]
        return k_ab - k_ax @ inner(k_xb)

    return PosteriorGP(mean_fn=mean_fn, kernel_fn=kernel_fn)


@dataclass(frozen=True)
class GpcDistillStep:
    """One distribution-centric step: the Laplace fit and the resulting posterior GP."""

    fit: LaplaceFit
    posterior: PosteriorGP


def distribution_centric_gpc_iterated(
    data: BinaryDataset, params: KernelParams, steps: int
) -> list[GpcDistillStep]:
    """Iterate posterior-becomes-prior classification on the original binary targets.

    Each step runs a full Newton fit under the previous step's posterior GP
    (with that step's own curvature matrix) and wraps the result as the next
    prior. Evaluation cost of the returned GPs grows linearly with the step.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    xs = data.xs
    current = prior_gp(params)
    out: list[GpcDistillStep] = []
    for t in range(1, steps + 1):
        K_t = current.cov(xs)
        K_fit = K_t + params.jitter * np.eye(data.n)
        m_t = current.mean(xs)
        try:
            fit = laplace_mode(data.ys, K_fit, prior_mean=m_t, likelihood=BERNOULLI)
        except NewtonDidNotConverge as exc:
            raise NewtonDidNotConverge(
                f"step {t} of {steps} failed: {exc}", grad_norm=exc.grad_norm
            ) from exc
        current = _laplace_posterior(current, xs, fit, K_t)
        out.append(GpcDistillStep(fit=fit, posterior=current))
    return out


@dataclass(frozen=True)
class ScaledGpcFit:
    """Single fit whose prior covariance is the kernel scaled by the step count."""

    fit: LaplaceFit
    posterior: PosteriorGP
    gram_values: np.ndarray
    scale: int


def distribution_centric_gpc_scaled(
    data: BinaryDataset, params: KernelParams, t: int
) -> ScaledGpcFit:
    """One Laplace fit under the prior GP(0, t*k).

    Exactly equivalent to fitting t stacked copies of the data, and an
    approximation of t iterated distribution-centric steps.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    xs = data.xs
    K_raw = t * gram(xs, params, add_jitter=False).values
    K_fit = K_raw + params.jitter * np.eye(data.n)
    fit = laplace_mode(data.ys, K_fit, likelihood=BERNOULLI)
    inner = _curvature_solver(K_raw, fit.w_diag)
    alpha = fit.alpha_weights
    scale = float(t)

    def mean_fn(a):
        return scale * kernel_matrix(a, xs, params) @ alpha

    def kernel_fn(a, b):
        k_ax = scale * kernel_matrix(a, xs, params)
        k_xb = scale * kernel_matrix(xs, b, params)
        return scale * kernel_matrix(a, b, params) - k_ax @ inner(k_xb)

    posterior = PosteriorGP(mean_fn=mean_fn, kernel_fn=kernel_fn)
    return ScaledGpcFit(fit=fit, posterior=posterior, gram_values=K_fit, scale=t)


def fit_replicated_gpc(
    data: BinaryDataset,
    params: KernelParams,
    replications: int,
    row_cap: int = REPLICATION_ROW_CAP,
) -> LaplaceFit:
    """Brute-force Laplace fit to t literal copies of the dataset (test oracle).

    The big Gram is the kernel over the duplicated points plus the usual jitter
    on its full diagonal, matching the construction the scaled fit mirrors.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    n = data.n
    if replications * n > row_cap:
        raise ValueError(
            f"replicated system has {replications * n} rows, exceeding the cap of {row_cap}"
        )
    K_raw = gram(data.xs, params, add_jitter=False).values
    big_K = np.tile(K_raw, (replications, replications))
    big_K[np.diag_indices_from(big_K)] += params.jitter
    big_y = np.tile(data.ys, replications)
    return laplace_mode(big_y, big_K, likelihood=BERNOULLI)


def posterior_proba(gp: PosteriorGP, xs, method: str = "quadrature") -> np.ndarray:
    """Class-1 probabilities implied by a latent posterior GP at the given points."""
    pts = as_points(xs)
    mu = gp.mean(pts)
    if method == "latent_mean":
        return expit(mu)
    if method == "quadrature":
        return sigmoid_gaussian_mean(mu, gp.var(pts))
    raise ValueError(f"unknown probability method {method!r}")


def approximation_error(
    iterated: list[GpcDistillStep] | list[PosteriorGP],
    scaled: list[ScaledGpcFit] | list[PosteriorGP],
    test_xs,
    method: str = "quadrature",
) -> np.ndarray:
    """Per-step MSE between the two chains' predicted probabilities on a test set."""
    if len(iterated) != len(scaled):
        raise ValueError(f"step counts differ: {len(iterated)} vs {len(scaled)}")
    pts = as_points(test_xs)
    errors = []
    for it_step, sc_step in zip(iterated, scaled):
        gp_it = it_step.posterior if isinstance(it_step, GpcDistillStep) else it_step
        gp_sc = sc_step.posterior if isinstance(sc_step, ScaledGpcFit) else sc_step
        p_it = posterior_proba(gp_it, pts, method=method)
        p_sc = posterior_proba(gp_sc, pts, method=method)
        errors.append(float(np.mean((p_it - p_sc) ** 2)))
    return np.asarray(errors)
