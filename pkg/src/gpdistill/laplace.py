"""Binary GP classification through the Laplace approximation.

Newton-Raphson mode finding is organized so that neither K^-1 nor W^-1 is ever
formed: the update solves (I + K W) systems, and the predictive covariance uses
the W^(1/2) sandwich (or a (WK + I) solve when some curvature entries vanish).
The same machinery serves the ordinary Bernoulli likelihood and the continuous
Bernoulli variant used for distillation targets in [0, 1]; the latter only adds
the closed-form normalizer terms to the log-likelihood, its gradient, and its
curvature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .cont_bernoulli import cb_terms
from .gpr import MeanFn
from .kernels import GramMatrix, KernelParams, as_points, kernel_matrix

BERNOULLI = "bernoulli"
CONTINUOUS_BERNOULLI = "continuous_bernoulli"

_GH_NODES, _GH_WEIGHTS = hermgauss(32)

DEFAULT_MAX_ITERS = 100
STEP_TOL = 1e-10
GRAD_TOL = 1e-8
MAX_HALVINGS = 30


class NewtonDidNotConverge(RuntimeError):
    """Mode finding failed to converge; carries the last gradient norm."""

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


class HessianNotPositiveDefinite(RuntimeError):
    """The negative Hessian at the evaluation point is not positive definite."""


@dataclass(frozen=True)
class BinaryDataset:
    """Inputs with targets in [0, 1]; strictly_binary records whether all are 0/1."""

    xs: np.ndarray
    ys: np.ndarray
    strictly_binary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "xs", as_points(self.xs))
        ys = np.asarray(self.ys, dtype=float).ravel()
        object.__setattr__(self, "ys", ys)
        if len(self.xs) != len(ys):
            raise ValueError(f"{len(self.xs)} inputs but {len(ys)} targets")
        if len(ys) < 1:
            raise ValueError("dataset must contain at least one observation")
        if np.any(ys < 0.0) or np.any(ys > 1.0):
            raise ValueError("classification targets must lie in [0, 1]")
        object.__setattr__(self, "strictly_binary", bool(np.all((ys == 0.0) | (ys == 1.0))))

    @property
    def n(self) -> int:
        return len(self.ys)


@dataclass(frozen=True)
class LaplaceFit:
    """Converged posterior mode and the curvature state needed for prediction.

    w_diag is the effective likelihood curvature at the mode: sigma(1-sigma)
    for the Bernoulli likelihood, minus the normalizer's second derivative for
    the continuous Bernoulli. alpha_weights satisfies K alpha = f_hat - m at
    the mode, so predictions never touch K^-1.
    """

    f_hat: np.ndarray
    w_diag: np.ndarray
    iterations: int
    converged: bool
    likelihood: str
    prior_mean_at_train: np.ndarray
    alpha_weights: np.ndarray
    grad_norm: float
    psi_path: tuple[float, ...]
    f_path: tuple[np.ndarray, ...] | None = None


def _log1pexp(f: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, f)


def _loglik_parts(f: np.ndarray, y: np.ndarray, likelihood: str):
    """(log-likelihood, gradient, curvature) of log p(y | f) at f."""
    sig = expit(f)
    value = float(y @ f - np.sum(_log1pexp(f)))
    grad = y - sig
    curv = sig * (1.0 - sig)
    if likelihood == CONTINUOUS_BERNOULLI:
        terms = cb_terms(f)
        value += float(np.sum(terms.log_c))
        grad = grad + terms.dlog_c
        curv = curv - terms.d2log_c
    elif likelihood != BERNOULLI:
        raise ValueError(f"unknown likelihood {likelihood!r}")
    return value, grad, curv


def laplace_mode(
    data,
    K,
    prior_mean: np.ndarray | None = None,
    likelihood: str = BERNOULLI,
    max_iters: int = DEFAULT_MAX_ITERS,
    step_tol: float = STEP_TOL,
    grad_tol: float = GRAD_TOL,
    record_path: bool = False,
) -> LaplaceFit:
    """Find the posterior mode by damped Newton-Raphson.

    `data` may be a BinaryDataset or a bare target vector; `K` a GramMatrix or
    ndarray (expected to carry jitter so it is positive definite).
    Convergence is declared when the accepted Newton step drops below step_tol
    in the infinity norm, or the gradient of the log posterior below grad_tol,
    whichever happens first. Steps that would decrease the log posterior are
    halved (up to MAX_HALVINGS); the likelihoods here are log-concave, so that
    only guards against overshoot and numerical curvature loss.
    """
    y = np.asarray(data.ys if isinstance(data, BinaryDataset) else data, dtype=float).ravel()
    K_values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    n = len(y)
    m = np.zeros(n) if prior_mean is None else np.asarray(prior_mean, dtype=float).ravel()

    try:
        K_factor = cho_factor(K_values, lower=True)
    except np.linalg.LinAlgError as exc:
        raise HessianNotPositiveDefinite("prior covariance is not positive definite") from exc

    def psi(f: np.ndarray) -> float:
        value, _, _ = _loglik_parts(f, y, likelihood)
        diff = f - m
        return value - 0.5 * float(diff @ cho_solve(K_factor, diff))

    def grad_inf_norm(f: np.ndarray, grad_ll: np.ndarray) -> float:
        return float(np.max(np.abs(grad_ll - cho_solve(K_factor, f - m))))

    f = m.copy()
    psi_cur = psi(f)
    psi_path = [psi_cur]
    f_path = [f.copy()] if record_path else None
    converged = False
    iterations = 0
    alpha = None
    grad_norm = np.inf

    for iterations in range(1, max_iters + 1):
        _, grad_ll, curv = _loglik_parts(f, y, likelihood)
        grad_norm = grad_inf_norm(f, grad_ll)
        if grad_norm < grad_tol:
            converged = True
            iterations -= 1
            break
        # f_target solves (I + K W) f = K (W f + grad_ll) + m, the Newton step
        # rearranged to avoid K^-1.
        u = curv * f + grad_ll
        B = np.eye(n) + K_values * curv[None, :]
        try:
            f_target = np.linalg.solve(B, K_values @ u + m)
        except np.linalg.LinAlgError as exc:
            raise HessianNotPositiveDefinite(
                f"Newton system singular at iteration {iterations}"
            ) from exc
        step = f_target - f
        eta = 1.0
        slack = 1e-12 * max(1.0, abs(psi_cur))
        for _ in range(MAX_HALVINGS + 1):
            f_new = f + eta * step
            psi_new = psi(f_new)
            if psi_new >= psi_cur - slack:
                break
            eta *= 0.5
        else:
            raise HessianNotPositiveDefinite(
                f"Newton step rejected after {MAX_HALVINGS} halvings at iteration "
                f"{iterations}; log posterior would decrease from {psi_cur:g} to {psi_new:g}"
            )
        if eta == 1.0:
            # Full step taken: f_new = K(u - W f_new) + m exactly, which gives
            # the K alpha = f - m certificate for free.
            alpha = u - curv * f_new
        else:
            alpha = None
        f = f_new
        psi_cur = psi_new
        psi_path.append(psi_cur)
        if record_path:
            f_path.append(f.copy())
        if float(np.max(np.abs(eta * step))) < step_tol:
            converged = True
            break

    _, grad_ll, curv = _loglik_parts(f, y, likelihood)
    grad_norm = grad_inf_norm(f, grad_ll)
    if grad_norm < grad_tol:
        converged = True
    if not converged:
        raise NewtonDidNotConverge(
            f"no convergence after {max_iters} iterations (gradient norm {grad_norm:g})",
            grad_norm=grad_norm,
        )
    if alpha is None:
        # Converged on the gradient criterion (or after a damped step): at the
        # mode K^-1 (f - m) equals the likelihood gradient.
        alpha = grad_ll
    return LaplaceFit(
        f_hat=f,
        w_diag=curv,
        iterations=iterations,
        converged=converged,
        likelihood=likelihood,
        prior_mean_at_train=m,
        alpha_weights=alpha,
        grad_norm=grad_norm,
        psi_path=tuple(psi_path),
        f_path=tuple(f_path) if record_path else None,
    )


def _sandwich_solve(K_values: np.ndarray, w: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """(K + W^-1)^-1 @ rhs without forming W^-1.

    Uses W^(1/2) (W^(1/2) K W^(1/2) + I)^-1 W^(1/2) when all w > 0, else the
    equivalent (W K + I)^-1 W which tolerates vanishing entries.
    """
    n = len(w)
    if np.all(w > 0.0):
        sw = np.sqrt(w)
        B = np.eye(n) + sw[:, None] * K_values * sw[None, :]
        factor = cho_factor(B, lower=True)
        return sw[:, None] * cho_solve(factor, sw[:, None] * rhs)
    A = w[:, None] * K_values + np.eye(n)
    return np.linalg.solve(A, w[:, None] * rhs)


def gpc_predict_latent(
    fit: LaplaceFit,
    K,
    train_xs,
    test_xs,
    params: KernelParams,
    prior_mean_fn: MeanFn | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Approximate posterior of the latent function at test points.

    mean = m(x*) + k(x*, x) alpha and cov = k(x*, x*) - k(x*, x)(K + W^-1)^-1 k(x, x*).
    """
    if not fit.converged:
        raise ValueError("predictions require a converged fit")
    K_values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    train_pts = as_points(train_xs)
    pts = as_points(test_xs)
    k_star = kernel_matrix(pts, train_pts, params)
    mean_star = k_star @ fit.alpha_weights
    if prior_mean_fn is not None:
        mean_star = prior_mean_fn(pts) + mean_star
    k_ss = kernel_matrix(pts, pts, params)
    np.fill_diagonal(k_ss, params.signal_variance)
    cov = k_ss - k_star @ _sandwich_solve(K_values, fit.w_diag, k_star.T)
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(diag, 0.0))
    return mean_star, cov


def sigmoid_gaussian_mean(mu, var) -> np.ndarray:
    """E[sigmoid(Z)] for Z ~ N(mu, var), by 32-node Gauss-Hermite quadrature."""
    mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
    var_arr = np.maximum(np.atleast_1d(np.asarray(var, dtype=float)), 0.0)
    z = mu_arr[:, None] + np.sqrt(2.0 * var_arr)[:, None] * _GH_NODES[None, :]
    out = expit(z) @ _GH_WEIGHTS / np.sqrt(np.pi)
    return float(out[0]) if np.ndim(mu) == 0 else out


def gpc_predict_proba(
    fit: LaplaceFit,
    K,
    train_xs,
    test_xs,
    params: KernelParams,
    prior_mean_fn: MeanFn | None = None,
    method: str = "quadrature",
) -> np.ndarray:
    """Predicted class-1 probabilities at test points.

    method="latent_mean" squashes the latent mean, sigma(mu*); "quadrature"
    averages sigma over the latent Gaussian. The two differ away from 0.5 but
    share the same decision boundary.
    """
    mean_star, cov = gpc_predict_latent(fit, K, train_xs, test_xs, params, prior_mean_fn)
    if method == "latent_mean":
        return expit(mean_star)
    if method == "quadrature":
        return sigmoid_gaussian_mean(mean_star, np.diag(cov))
    raise ValueError(f"unknown probability method {method!r}")


def _logdet_i_plus_kw(K_values: np.ndarray, w: np.ndarray) -> float:
    """log|I + K W| = log|K| + log|K^-1 + W|, the evidence's determinant piece."""
    n = len(w)
    if np.all(w > 0.0):
        sw = np.sqrt(w)
        B = np.eye(n) + sw[:, None] * K_values * sw[None, :]
        try:
            factor = cho_factor(B, lower=True)
        except np.linalg.LinAlgError as exc:
            raise HessianNotPositiveDefinite(
                "negative Hessian at the mode is not positive definite"
            ) from exc
        return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    sign, logdet = np.linalg.slogdet(np.eye(n) + K_values * w[None, :])
    if sign <= 0:
        raise HessianNotPositiveDefinite(
            "negative Hessian at the mode is not positive definite"
        )
    return float(logdet)


def laplace_marginal_loglik(fit: LaplaceFit, K, data) -> float:
    """Laplace approximation of the marginal log-likelihood log p(y).

    Equals psi(f_hat) + (N/2) log 2pi - (1/2) log|H| with H the negative
    Hessian of the log posterior at the mode; the Gaussian normalizers combine
    into a single log|I + K W| term evaluated by Cholesky.
    """
    if not fit.converged:
        raise ValueError("the marginal log-likelihood requires a converged fit")
    y = np.asarray(data.ys if isinstance(data, BinaryDataset) else data, dtype=float).ravel()
    K_values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    value, _, _ = _loglik_parts(fit.f_hat, y, fit.likelihood)
    diff = fit.f_hat - fit.prior_mean_at_train
    quad = float(fit.alpha_weights @ diff)  # alpha = K^-1 (f_hat - m) at the mode
    return value - 0.5 * quad - 0.5 * _logdet_i_plus_kw(K_values, fit.w_diag)
