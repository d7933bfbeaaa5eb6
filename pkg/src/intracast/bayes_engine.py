"""Bayesian linear model: prior construction, posterior, NUTS sampling, PPD.

The model is y = w.x + eps with Gaussian noise of standard deviation
sigma. Weights get independent normal priors whose location and scale
come from the ordinary least-squares fit (empirical Bayes); sigma gets
a Gamma prior with its mode at 1 to suit standardised data. The
posterior is explored with a No-U-Turn sampler over (w, log sigma), and
the posterior predictive distribution is estimated as an equal-weight
mixture of the per-draw Gaussian likelihoods at the new data point.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ndtr

LOG_2PI = math.log(2.0 * math.pi)
DIVERGENCE_THRESHOLD = 1000.0
SIGMA_SCALE_FLOOR = 1e-6


@dataclass(frozen=True)
class PriorParams:
    """Normal prior per weight plus Gamma(shape, rate) prior on sigma."""

    mu_w: np.ndarray
    sigma_w: np.ndarray  # per-coordinate standard deviations
    alpha: float
    beta: float


@dataclass
class ModelSpec:
    x_train: np.ndarray  # (n, m), standardised
    y_train: np.ndarray  # (n,)
    x_new: np.ndarray  # (m,)
    prior: PriorParams
    fixed_sigma: float | None = None  # test mode: conjugate Gaussian check

    def __post_init__(self) -> None:
        self.x_train = np.atleast_2d(np.asarray(self.x_train, dtype=float))
        if self.x_train.size == 0:
            self.x_train = self.x_train.reshape(0, len(self.prior.mu_w))
        self.y_train = np.asarray(self.y_train, dtype=float)
        self.x_new = np.asarray(self.x_new, dtype=float)

    @property
    def n(self) -> int:
        return self.x_train.shape[0]

    @property
    def m(self) -> int:
        return self.x_train.shape[1]


@dataclass
class PosteriorSamples:
    """Posterior draws, one row per sample: m weights then sigma."""

    draws: np.ndarray  # (N, m+1)
    diagnostics: dict = field(default_factory=dict)

    @property
    def weights(self) -> np.ndarray:
        return self.draws[:, :-1]

    @property
    def sigmas(self) -> np.ndarray:
        return self.draws[:, -1]

    def to_csv(self, path) -> None:
        m = self.draws.shape[1] - 1
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"w{j}" for j in range(m)] + ["sigma"])
            for row in self.draws:
                writer.writerow([repr(float(v)) for v in row])


@dataclass
class PredictiveMixture:
    """Equal-weight Gaussian mixture estimate of the predictive density."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)

    def __len__(self) -> int:
        return len(self.means)

    @property
    def mean(self) -> float:
        return float(self.means.mean())

    @property
    def variance(self) -> float:
        return float(self.means.var() + np.mean(self.stds**2))

    def support(self, width: float = 8.0) -> tuple[float, float]:
        return (
            float(np.min(self.means - width * self.stds)),
            float(np.max(self.means + width * self.stds)),
        )

    def pdf(self, x, chunk: int = 512) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for i in range(0, len(self.means), chunk):
            mu = self.means[i : i + chunk, None]
            sd = self.stds[i : i + chunk, None]
            z = (x[None, :] - mu) / sd
            out += np.sum(np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi)), axis=0)
        return out / len(self.means)

    def cdf(self, x, chunk: int = 512) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for i in range(0, len(self.means), chunk):
            mu = self.means[i : i + chunk, None]
            sd = self.stds[i : i + chunk, None]
            out += np.sum(ndtr((x[None, :] - mu) / sd), axis=0)
        return out / len(self.means)

    def cdf_scalar(self, x: float) -> float:
        return float(np.mean(ndtr((x - self.means) / self.stds)))

    def destandardised(self, y_mean: float, y_std: float) -> "PredictiveMixture":
        return PredictiveMixture(self.means * y_std + y_mean, self.stds * y_std)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mean", "std"])
            for mu, sd in zip(self.means, self.stds):
                writer.writerow([repr(float(mu)), repr(float(sd))])


def empirical_prior(
    X: np.ndarray,
    y: np.ndarray,
    beta: float = 0.5,
    scale_interpretation: str = "variance",
    scale_floor: float = SIGMA_SCALE_FLOOR,
) -> PriorParams:
    """Prior hyperparameters from the OLS fit.

    mu_w is the least-squares estimate; the per-coordinate scale comes
    from (S/n)*diag((X'X)^-1) with S the residual-target inner product,
    read as a variance by default (square root taken) or verbatim as a
    standard deviation via scale_interpretation="stddev". The Gamma
    prior keeps its mode at 1, so alpha = beta + 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    if m == 0 or n == 0:
        return PriorParams(np.zeros(m), np.ones(m), alpha=beta + 1.0, beta=beta)
    gram = X.T @ X
    try:
        C = np.linalg.inv(gram)
        if np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
    except np.linalg.LinAlgError:
        warnings.warn("rank-deficient design; applying ridge jitter 1e-8", stacklevel=2)
        C = np.linalg.inv(gram + 1e-8 * np.eye(m))
    mu_w = C @ (X.T @ y)
    S = float((y - X @ mu_w) @ y)
    raw = (S / n) * np.diag(C)
    raw = np.clip(raw, 0.0, None)
    if scale_interpretation == "variance":
        sigma_w = np.sqrt(raw)
    elif scale_interpretation == "stddev":
        sigma_w = raw
    else:
        raise ValueError(f"unknown scale_interpretation: {scale_interpretation}")
    sigma_w = np.maximum(sigma_w, scale_floor)
    return PriorParams(mu_w=mu_w, sigma_w=sigma_w, alpha=beta + 1.0, beta=beta)


class _Precomputed:
    """Sufficient statistics so each density evaluation is O(m^2)."""

    def __init__(self, spec: ModelSpec) -> None:
        X, y = spec.x_train, spec.y_train
        self.n = spec.n
        self.m = spec.m
        self.G = X.T @ X
        self.b = X.T @ y
        self.yty = float(y @ y)
        self.prior = spec.prior
        self.inv_var_w = 1.0 / spec.prior.sigma_w**2
        self.log_prior_const = float(
            -np.sum(np.log(spec.prior.sigma_w)) - 0.5 * self.m * LOG_2PI
        )
        a, b_rate = spec.prior.alpha, spec.prior.beta
        self.log_gamma_const = a * math.log(b_rate) - float(gammaln(a))

    def rss(self, w: np.ndarray) -> float:
        return max(self.yty - 2.0 * float(w @ self.b) + float(w @ (self.G @ w)), 0.0)


def log_posterior(
    w: np.ndarray, sigma: float, spec: ModelSpec
) -> tuple[float, np.ndarray, float]:
    """Unnormalised log posterior and its exact gradient in (w, sigma).

    The constant prior-predictive normalisation is omitted. Returns
    (value, gradient wrt w, gradient wrt sigma).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pre = _Precomputed(spec)
    w = np.asarray(w, dtype=float)
    rss = pre.rss(w)
    n = pre.n
    prior = spec.prior

    log_lik = -n * math.log(sigma) - 0.5 * n * LOG_2PI - rss / (2.0 * sigma**2)
    dev = w - prior.mu_w
    log_prior_w = pre.log_prior_const - 0.5 * float(dev @ (dev * pre.inv_var_w))
    log_prior_sigma = (
        pre.log_gamma_const + (prior.alpha - 1.0) * math.log(sigma) - prior.beta * sigma
    )
    value = log_lik + log_prior_w + log_prior_sigma

    grad_w = (pre.b - pre.G @ w) / sigma**2 - dev * pre.inv_var_w
    grad_sigma = (
        -n / sigma + rss / sigma**3 + (prior.alpha - 1.0) / sigma - prior.beta
    )
    return value, grad_w, float(grad_sigma)


# --- generic No-U-Turn sampler ----------------------------------------------


@dataclass
class _TreeState:
    z: np.ndarray
    r: np.ndarray
    grad: np.ndarray
    logp: float


def _leapfrog(target, state: _TreeState, eps: float) -> _TreeState:
    r_half = state.r + 0.5 * eps * state.grad
    z_new = state.z + eps * r_half
    logp, grad = target(z_new)
    r_new = r_half + 0.5 * eps * grad
    return _TreeState(z=z_new, r=r_new, grad=grad, logp=logp)


def nuts(
    target,
    z0: np.ndarray,
    n_samples: int,
    burn_in: int = 500,
    init_step: float = 0.001,
    seed=None,
    target_accept: float = 0.8,
    max_depth: int = 10,
) -> tuple[np.ndarray, dict]:
    """No-U-Turn sampling of a differentiable log density.

    target(z) must return (log density, gradient). The step size is
    dual-averaged toward target_accept during burn-in, then frozen;
    burn-in draws are discarded. Tree doubling stops on a U-turn or on
    an energy error beyond the divergence threshold.
    """
    rng = np.random.default_rng(seed)
    z = np.asarray(z0, dtype=float).copy()
    d = len(z)
    logp, grad = target(z)
    if not np.isfinite(logp) or not np.all(np.isfinite(grad)):
        raise ValueError("non-finite log density or gradient at the initial point")

    eps = float(init_step)
    mu_da = math.log(10.0 * init_step)
    log_eps_bar = 0.0
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    draws = np.empty((n_samples, d))
    divergent_iterations = 0
    accept_sum = 0.0
    depth_total = 0
    total = burn_in + n_samples

    def build_tree(state: _TreeState, logu: float, direction: int, depth: int, h0: float):
        nonlocal divergences_this_iter
        if depth == 0:
            new = _leapfrog(target, state, direction * eps)
            joint = new.logp - 0.5 * float(new.r @ new.r)
            if not np.isfinite(joint):
                joint = -np.inf
            n_in = 1 if logu <= joint else 0
            keep_going = joint > logu - DIVERGENCE_THRESHOLD
            if not keep_going:
                divergences_this_iter += 1
            accept = min(1.0, math.exp(min(joint - h0, 0.0)))
            return new, new, new, n_in, keep_going, accept, 1
        left, right, prop, n_in, keep_going, acc, n_acc = build_tree(
            state, logu, direction, depth - 1, h0
        )
        if keep_going:
            if direction == -1:
                left, _, prop2, n2, s2, acc2, na2 = build_tree(
                    left, logu, direction, depth - 1, h0
                )
            else:
                _, right, prop2, n2, s2, acc2, na2 = build_tree(
                    right, logu, direction, depth - 1, h0
                )
            if n2 > 0 and rng.random() < n2 / max(n_in + n2, 1):
                prop = prop2
            span = right.z - left.z
            keep_going = (
                s2
                and float(span @ left.r) >= 0.0
                and float(span @ right.r) >= 0.0
            )
            n_in += n2
            acc += acc2
            n_acc += na2
        return left, right, prop, n_in, keep_going, acc, n_acc

    for it in range(1, total + 1):
        divergences_this_iter = 0
        r0 = rng.normal(size=d)
        h0 = logp - 0.5 * float(r0 @ r0)
        logu = h0 + math.log(rng.random())
        left = _TreeState(z=z, r=r0, grad=grad, logp=logp)
        right = _TreeState(z=z, r=r0, grad=grad, logp=logp)
        n_kept = 1
        keep_going = True
        depth = 0
        alpha_stat, n_alpha = 1.0, 1
        while keep_going and depth < max_depth:
            direction = -1 if rng.random() < 0.5 else 1
            if direction == -1:
                left, _, prop, n_new, s_new, alpha_stat, n_alpha = build_tree(
                    left, logu, direction, depth, h0
                )
            else:
                _, right, prop, n_new, s_new, alpha_stat, n_alpha = build_tree(
                    right, logu, direction, depth, h0
                )
            if s_new and n_new > 0 and rng.random() < min(1.0, n_new / n_kept):
                z, logp, grad = prop.z, prop.logp, prop.grad
            n_kept += n_new
            span = right.z - left.z
            keep_going = (
                s_new
                and float(span @ left.r) >= 0.0
                and float(span @ right.r) >= 0.0
            )
            depth += 1

        if divergences_this_iter:
            divergent_iterations += 1
        accept_frac = alpha_stat / max(n_alpha, 1)
        accept_sum += accept_frac
        depth_total += depth

        if it <= burn_in:
            eta_h = 1.0 / (it + t0)
            h_bar = (1.0 - eta_h) * h_bar + eta_h * (target_accept - accept_frac)
            log_eps = mu_da - math.sqrt(it) / gamma * h_bar
            eta = it**-kappa
            log_eps_bar = (1.0 - eta) * log_eps_bar + eta * log_eps
            eps = math.exp(log_eps)
            if it == burn_in:
                eps = math.exp(log_eps_bar)
        else:
            draws[it - burn_in - 1] = z

    diagnostics = {
        "step_size": eps,
        "divergent_iterations": divergent_iterations,
        "divergence_rate": divergent_iterations / total,
        "mean_accept": accept_sum / total,
        "mean_tree_depth": depth_total / total,
    }
    return draws, diagnostics


def _whitening_matrix(pre: _Precomputed, sigma0: float = 1.0) -> np.ndarray:
    """Cholesky factor of the Gaussian-approximation covariance of w.

    Sampling in z with w = mu_w + L z turns the long ridges of
    collinear designs into round level sets; this is a fixed linear
    change of variables (constant Jacobian), so the sampled law of
    (w, sigma) is untouched.
    """
    m = pre.m
    if m == 0:
        return np.zeros((0, 0))
    precision = pre.G / sigma0**2 + np.diag(pre.inv_var_w)
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigval, eigvec = np.linalg.eigh(cov)
        eigval = np.clip(eigval, 1e-12, None)
        return eigvec @ np.diag(np.sqrt(eigval))


def _unconstrained_target(spec: ModelSpec):
    """Target over whitened z = (z_w, log sigma), or z_w alone for fixed sigma.

    Positions map to weights via w = mu_w + L z_w with L the whitening
    factor (also returned); sigma is sampled as log sigma with its
    Jacobian term.
    """
    pre = _Precomputed(spec)
    prior = spec.prior
    m, n = pre.m, pre.n
    mu_w, inv_var_w = prior.mu_w, pre.inv_var_w
    alpha, beta_rate = prior.alpha, prior.beta
    if spec.fixed_sigma is not None:
        sigma0 = spec.fixed_sigma
    elif n > 0:
        # whiten at the scale the posterior will actually see
        sigma0 = math.sqrt(max(pre.rss(mu_w) / n, 1e-4))
    else:
        sigma0 = 1.0
    L = _whitening_matrix(pre, sigma0)
    Lt = L.T

    if spec.fixed_sigma is not None:
        inv_s2 = 1.0 / spec.fixed_sigma**2

        def target_fixed(z: np.ndarray):
            w = mu_w + L @ z
            dev = w - mu_w
            gw = pre.G @ w
            value = (
                -0.5 * inv_s2 * (pre.yty - 2.0 * float(w @ pre.b) + float(w @ gw))
                - 0.5 * float(dev @ (dev * inv_var_w))
            )
            grad_w = inv_s2 * (pre.b - gw) - dev * inv_var_w
            return value, Lt @ grad_w

        return target_fixed, L, 1.0

    # log sigma curvature is about 2n (Gaussian Fisher information), so the
    # coordinate is rescaled to roughly unit scale like the whitened weights
    s_scale = 1.0 / math.sqrt(max(2.0 * n, 4.0))

    def target(z: np.ndarray):
        s = z[m] * s_scale
        if abs(s) > 40.0:  # exp would overflow/underflow; reject the point
            return -np.inf, np.zeros(m + 1)
        w = mu_w + L @ z[:m]
        inv_s2 = math.exp(-2.0 * s)
        sigma = math.exp(s)
        dev = w - mu_w
        gw = pre.G @ w
        rss = max(pre.yty - 2.0 * float(w @ pre.b) + float(w @ gw), 0.0)
        value = (
            -n * s
            - 0.5 * rss * inv_s2
            - 0.5 * float(dev @ (dev * inv_var_w))
            + alpha * s
            - beta_rate * sigma
        )
        grad = np.empty(m + 1)
        grad[:m] = Lt @ (inv_s2 * (pre.b - gw) - dev * inv_var_w)
        grad[m] = (-n + rss * inv_s2 + alpha - beta_rate * sigma) * s_scale
        return value, grad

    return target, L, s_scale


def nuts_sample(
    spec: ModelSpec,
    n_samples: int,
    burn_in: int = 500,
    init_step: float = 0.001,
    seed=None,
    target_accept: float = 0.8,
    max_depth: int = 10,
    chains: int = 1,
) -> PosteriorSamples:
    """Sample the posterior over (w, sigma); sigma is sampled as log sigma.

    With chains > 1, independent seeded chains are concatenated and the
    split R-hat per coordinate is reported in the diagnostics.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    target, whitening, s_scale = _unconstrained_target(spec)
    m = spec.m
    if spec.fixed_sigma is not None:
        z0 = np.zeros(m)  # whitened origin is the prior mean
    else:
        z0 = np.zeros(m + 1)

    if isinstance(seed, np.random.SeedSequence):
        seeds = seed.spawn(chains)
    else:
        seeds = np.random.SeedSequence(seed).spawn(chains)
    all_draws = []
    diagnostics: dict = {}
    chain_list = []
    for c in range(chains):
        raw, diag = nuts(
            target,
            z0,
            n_samples=n_samples,
            burn_in=burn_in,
            init_step=init_step,
            seed=seeds[c],
            target_accept=target_accept,
            max_depth=max_depth,
        )
        if spec.fixed_sigma is not None:
            weights = raw @ whitening.T + spec.prior.mu_w
            draws = np.column_stack([weights, np.full(len(raw), spec.fixed_sigma)])
        else:
            weights = raw[:, :m] @ whitening.T + spec.prior.mu_w
            draws = np.column_stack([weights, np.exp(raw[:, m] * s_scale)])
        all_draws.append(draws)
        chain_list.append(raw)
        diagnostics[f"chain{c}"] = diag

    merged = np.vstack(all_draws)
    if not np.all(np.isfinite(merged)):
        raise ValueError("sampler produced non-finite draws")
    diagnostics["divergence_rate"] = float(
        np.mean([diagnostics[f"chain{c}"]["divergence_rate"] for c in range(chains)])
    )
    diagnostics["mean_accept"] = float(
        np.mean([diagnostics[f"chain{c}"]["mean_accept"] for c in range(chains)])
    )
    diagnostics["step_size"] = diagnostics["chain0"]["step_size"]
    if chains > 1:
        diagnostics["rhat"] = [float(r) for r in split_rhat(chain_list)]
    if diagnostics["divergence_rate"] > 0.20:
        warnings.warn(
            f"divergence rate {diagnostics['divergence_rate']:.1%} exceeds 20%: "
            f"{diagnostics}",
            stacklevel=2,
        )
    return PosteriorSamples(draws=merged, diagnostics=diagnostics)


def estimate_ppd(samples: PosteriorSamples, x_new: np.ndarray) -> PredictiveMixture:
    """Predictive density estimate: one Gaussian component per draw."""
    if len(samples.draws) == 0:
        raise ValueError("no posterior samples")
    x_new = np.asarray(x_new, dtype=float)
    means = samples.weights @ x_new if x_new.size else np.zeros(len(samples.draws))
    return PredictiveMixture(means=means, stds=samples.sigmas.copy())


# --- diagnostics ------------------------------------------------------------


def effective_sample_size(x: np.ndarray) -> float:
    """ESS via the initial positive sequence of autocovariances."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    centred = x - x.mean()
    var = float(centred @ centred) / n
    if var == 0:
        return float(n)
    acf_sum = 0.0
    k = 1
    while k < n - 2:
        rho_a = float(centred[:-k] @ centred[k:]) / (n * var)
        rho_b = float(centred[: -(k + 1)] @ centred[k + 1 :]) / (n * var)
        if rho_a + rho_b <= 0:
            break
        acf_sum += rho_a + rho_b
        k += 2
    return n / (1.0 + 2.0 * acf_sum)


def split_rhat(chains: list[np.ndarray]) -> np.ndarray:
    """Split R-hat per coordinate from same-length chains."""
    halves = []
    for chain in chains:
        mid = len(chain) // 2
        halves.append(chain[:mid])
        halves.append(chain[mid : 2 * mid])
    arr = np.stack(halves)  # (2c, n, d)
    c, n = arr.shape[0], arr.shape[1]
    means = arr.mean(axis=1)
    variances = arr.var(axis=1, ddof=1)
    w = variances.mean(axis=0)
    b = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return np.sqrt(var_plus / np.where(w > 0, w, 1.0))
