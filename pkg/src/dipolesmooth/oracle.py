"""Exact-inference references: scalar Kalman/RTS and small discrete HMMs.

These are shipped with the library (not test-only) so the command-line
``oracle-check`` mode can exercise the particle filters and both smoothing
variants against closed-form answers end to end.  The bundles at the
bottom adapt the two reference models to the particle-filter interface
with fully vectorized batch operations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import default_rng
from ._numeric import logsumexp


@dataclass
class ScalarLGModel:
    """Scalar linear-Gaussian state-space model."""

    transition_coef: float
    transition_std: float
    observation_coef: float
    observation_std: float
    prior_mean: float
    prior_std: float

    def __post_init__(self):
        if min(self.transition_std, self.observation_std, self.prior_std) <= 0:
            raise ValueError("all standard deviations must be positive")


def _log_normal(x, mean, std):
    return -0.5 * math.log(2.0 * math.pi * std * std) - (x - mean) ** 2 / (2 * std * std)


@dataclass
class KalmanResult:
    means: np.ndarray
    variances: np.ndarray
    predicted_means: np.ndarray
    predicted_variances: np.ndarray
    log_increments: np.ndarray


def kalman_filter(model, data):
    """Exact filtering moments and log marginal-likelihood increments."""
    a, q = model.transition_coef, model.transition_std
    c, r = model.observation_coef, model.observation_std
    T = len(data)
    means = np.zeros(T)
    variances = np.zeros(T)
    pred_m = np.zeros(T)
    pred_v = np.zeros(T)
    incs = np.zeros(T)
    m, v = model.prior_mean, model.prior_std**2
    for t, d in enumerate(data):
        if t > 0:
            m, v = a * m, a * a * v + q * q
        pred_m[t], pred_v[t] = m, v
        s = c * c * v + r * r
        incs[t] = _log_normal(d, c * m, math.sqrt(s))
        gain = v * c / s
        m = m + gain * (d - c * m)
        v = (1.0 - gain * c) * v
        means[t], variances[t] = m, v
    return KalmanResult(means, variances, pred_m, pred_v, incs)


def rts_smoother(model, data):
    """Exact smoothing moments via the backward gain recursion."""
    kal = kalman_filter(model, data)
    a = model.transition_coef
    T = len(data)
    means = kal.means.copy()
    variances = kal.variances.copy()
    for t in range(T - 2, -1, -1):
        gain = kal.variances[t] * a / kal.predicted_variances[t + 1]
        means[t] = kal.means[t] + gain * (means[t + 1] - kal.predicted_means[t + 1])
        variances[t] = kal.variances[t] + gain**2 * (
            variances[t + 1] - kal.predicted_variances[t + 1]
        )
    return means, variances


# ---------------------------------------------------------------------------
# discrete hidden Markov model
# ---------------------------------------------------------------------------


@dataclass
class DiscreteHMM:
    """Finite HMM with categorical emissions (rows are distributions)."""

    initial: np.ndarray      # (K,)
    transition: np.ndarray   # (K, K), transition[i, j] = P(j | i)
    emission: np.ndarray     # (K, n_symbols)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transition = np.asarray(self.transition, dtype=float)
        self.emission = np.asarray(self.emission, dtype=float)
        for name, arr in (("initial", self.initial[None, :]),
                          ("transition", self.transition),
                          ("emission", self.emission)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError(f"{name} rows must be distributions (tol 1e-12)")

    @property
    def num_states(self):
        return len(self.initial)


@dataclass
class HMMExact:
    """All exact per-time quantities of a discrete HMM run.

    ``log_backward[t, x]`` is the log likelihood of the data from t on
    given state x (not a distribution in x); ``tilted`` is that quantity
    multiplied by the auxiliary density and normalized.  ``smoothed``
    combines predictive and backward quantities; ``smoothed_alt`` combines
    filtering with the one-step-ahead tilted distribution.  The two routes
    are algebraically identical for any full-support auxiliary density.
    """

    filtered: np.ndarray
    predicted: np.ndarray
    log_backward: np.ndarray
    tilted: np.ndarray
    smoothed: np.ndarray
    smoothed_alt: np.ndarray
    log_forward_increments: np.ndarray
    log_backward_increments: np.ndarray


def hmm_exact(hmm, observations, gamma=None):
    """Exact forward, backward-information and smoothing quantities."""
    obs = np.asarray(observations, dtype=int)
    T, K = len(obs), hmm.num_states
    if gamma is None:
        gamma = hmm.initial
    gamma = np.asarray(gamma, dtype=float)
    log_gamma = np.log(gamma, where=gamma > 0, out=np.full(K, -np.inf))
    with np.errstate(divide="ignore"):
        log_lik = np.log(hmm.emission[:, obs].T)       # (T, K)
        log_trans = np.log(hmm.transition)
        log_init = np.log(hmm.initial)

    predicted = np.zeros((T, K))
    filtered = np.zeros((T, K))
    log_f_inc = np.zeros(T)
    log_pred = log_init.copy()
    for t in range(T):
        predicted[t] = np.exp(log_pred - logsumexp(log_pred))
        joint = log_pred + log_lik[t]
        log_f_inc[t] = logsumexp(joint) - logsumexp(log_pred)
        log_post = joint - logsumexp(joint)
        filtered[t] = np.exp(log_post)
        log_pred = logsumexp(log_post[:, None] + log_trans, axis=0)

    log_backward = np.zeros((T, K))
    log_backward[T - 1] = log_lik[T - 1]
    for t in range(T - 2, -1, -1):
        log_backward[t] = log_lik[t] + logsumexp(
            log_trans + log_backward[t + 1][None, :], axis=1
        )

    tilted = np.zeros((T, K))
    for t in range(T):
        lt = log_backward[t] + log_gamma
        tilted[t] = np.exp(lt - logsumexp(lt))

    smoothed = np.zeros((T, K))
    for t in range(T):
        with np.errstate(divide="ignore"):
            ls = np.log(predicted[t]) + log_backward[t]
        smoothed[t] = np.exp(ls - logsumexp(ls))

    smoothed_alt = np.zeros((T, K))
    smoothed_alt[T - 1] = filtered[T - 1]
    for t in range(T - 1):
        log_tilt_next = log_backward[t + 1] + log_gamma
        log_tilt_next -= logsumexp(log_tilt_next)
        flow = logsumexp(log_trans + (log_tilt_next - log_gamma)[None, :], axis=1)
        with np.errstate(divide="ignore"):
            ls = np.log(filtered[t]) + flow
        smoothed_alt[t] = np.exp(ls - logsumexp(ls))

    # expected unnormalized-weight means of the backward pass, for the
    # variant-selection diagnostics
    log_b_inc = np.zeros(T)
    log_b_inc[T - 1] = logsumexp(log_gamma + log_lik[T - 1])
    for t in range(T - 1):
        log_tilt_next = log_backward[t + 1] + log_gamma
        log_tilt_next -= logsumexp(log_tilt_next)
        inner = logsumexp(log_lik[t][:, None] + log_trans + log_gamma[:, None], axis=0)
        log_b_inc[t] = logsumexp(log_tilt_next - log_gamma + inner)

    return HMMExact(
        filtered, predicted, log_backward, tilted, smoothed, smoothed_alt,
        log_f_inc, log_b_inc,
    )


def hmm_brute_force_smoothing(hmm, observations):
    """Posterior marginals by explicit summation over every state path."""
    obs = np.asarray(observations, dtype=int)
    T, K = len(obs), hmm.num_states
    marginals = np.zeros((T, K))
    total = 0.0
    for path in itertools.product(range(K), repeat=T):
        p = hmm.initial[path[0]] * hmm.emission[path[0], obs[0]]
        for t in range(1, T):
            p *= hmm.transition[path[t - 1], path[t]] * hmm.emission[path[t], obs[t]]
        total += p
        for t in range(T):
            marginals[t, path[t]] += p
    return marginals / total


def random_hmm(rng, max_states=5, num_symbols=4):
    """A random well-conditioned HMM for oracle cross-checks."""
    k = int(rng.integers(2, max_states + 1))
    init = rng.dirichlet(np.ones(k) * 2.0)
    trans = np.stack([rng.dirichlet(np.ones(k) * 2.0) for _ in range(k)])
    emis = np.stack([rng.dirichlet(np.ones(num_symbols) * 2.0) for _ in range(k)])
    return DiscreteHMM(init, trans, emis)


# ---------------------------------------------------------------------------
# particle-filter bundles for the reference models
# ---------------------------------------------------------------------------


class ScalarLGBundle:
    """Vectorized particle-filter bundle for the scalar Gaussian model.

    Forward proposals use the model transition itself (the density ratio
    in the filter weights is then exactly one).  Backward proposals draw
    from the auxiliary-tilted conditional of the previous state given the
    next one, which is Gaussian here and keeps the backward weights flat.
    """

    def __init__(self, model):
        self.model = model
        a, q = model.transition_coef, model.transition_std
        m0, s0 = model.prior_mean, model.prior_std
        # posterior of x_t given x_{t+1} under the prior-as-auxiliary:
        # precision = a^2/q^2 + 1/s0^2
        prec = a * a / (q * q) + 1.0 / (s0 * s0)
        self._back_var = 1.0 / prec
        self._back_gain = (a / (q * q)) * self._back_var
        self._back_bias = (m0 / (s0 * s0)) * self._back_var

    def sample_initial(self, seedseq, n):
        rng = default_rng(seedseq)
        return self.model.prior_mean + self.model.prior_std * rng.standard_normal(n)

    def initial_logpdf(self, x):
        return _vec_log_normal(x, self.model.prior_mean, self.model.prior_std)

    def auxiliary_logpdf(self, x):
        return self.initial_logpdf(x)

    def likelihood_logpdf(self, datum, x):
        return _vec_log_normal(
            datum, self.model.observation_coef * np.asarray(x), self.model.observation_std
        )

    def propose_forward(self, seedseq, x):
        rng = default_rng(seedseq)
        return self.model.transition_coef * np.asarray(
            x
        ) + self.model.transition_std * rng.standard_normal(len(x))

    def transition_logpdf(self, new, old):
        return _vec_log_normal(
            np.asarray(new),
            self.model.transition_coef * np.asarray(old),
            self.model.transition_std,
        )

    def forward_proposal_logpdf(self, new, old):
        return self.transition_logpdf(new, old)

    def propose_backward(self, seedseq, x_next):
        rng = default_rng(seedseq)
        mean = self._back_gain * np.asarray(x_next) + self._back_bias
        return mean + math.sqrt(self._back_var) * rng.standard_normal(len(x_next))

    def backward_proposal_logpdf(self, x_prev, x_next):
        mean = self._back_gain * np.asarray(x_next) + self._back_bias
        return _vec_log_normal(np.asarray(x_prev), mean, math.sqrt(self._back_var))

    def pairwise_transition_logpdf(self, new, old):
        return _vec_log_normal(
            np.asarray(new)[:, None],
            self.model.transition_coef * np.asarray(old)[None, :],
            self.model.transition_std,
        )


def _vec_log_normal(x, mean, std):
    return -0.5 * np.log(2.0 * math.pi * std * std) - (np.asarray(x) - mean) ** 2 / (
        2.0 * std * std
    )


class DiscreteHMMBundle:
    """Vectorized particle-filter bundle for a discrete HMM.

    States are integer arrays.  Backward proposals draw from the
    row-normalized transpose of the transition matrix.
    """

    def __init__(self, hmm):
        self.hmm = hmm
        with np.errstate(divide="ignore"):
            self.log_trans = np.log(hmm.transition)
            self.log_init = np.log(hmm.initial)
            self.log_emis = np.log(hmm.emission)
        reverse = hmm.transition.T.copy()
        reverse /= reverse.sum(axis=1, keepdims=True)
        self.reverse = reverse
        with np.errstate(divide="ignore"):
            self.log_reverse = np.log(reverse)
        self._cum_trans = np.cumsum(hmm.transition, axis=1)
        self._cum_reverse = np.cumsum(reverse, axis=1)
        self._cum_init = np.cumsum(hmm.initial)

    def _rows_sample(self, rng, cum_rows, idx):
        u = rng.random(len(idx))
        return (u[:, None] > cum_rows[idx]).sum(axis=1)

    def sample_initial(self, seedseq, n):
        rng = default_rng(seedseq)
        return (rng.random(n)[:, None] > self._cum_init[None, :]).sum(axis=1)

    def initial_logpdf(self, x):
        return self.log_init[np.asarray(x, dtype=int)]

    def auxiliary_logpdf(self, x):
        return self.initial_logpdf(x)

    def likelihood_logpdf(self, datum, x):
        return self.log_emis[np.asarray(x, dtype=int), int(datum)]

    def propose_forward(self, seedseq, x):
        rng = default_rng(seedseq)
        return self._rows_sample(rng, self._cum_trans, np.asarray(x, dtype=int))

    def transition_logpdf(self, new, old):
        return self.log_trans[np.asarray(old, dtype=int), np.asarray(new, dtype=int)]

    def forward_proposal_logpdf(self, new, old):
        return self.transition_logpdf(new, old)

    def propose_backward(self, seedseq, x_next):
        rng = default_rng(seedseq)
        return self._rows_sample(rng, self._cum_reverse, np.asarray(x_next, dtype=int))

    def backward_proposal_logpdf(self, x_prev, x_next):
        return self.log_reverse[np.asarray(x_next, dtype=int), np.asarray(x_prev, dtype=int)]

    def pairwise_transition_logpdf(self, new, old):
        return self.log_trans[
            np.asarray(old, dtype=int)[None, :], np.asarray(new, dtype=int)[:, None]
        ]
