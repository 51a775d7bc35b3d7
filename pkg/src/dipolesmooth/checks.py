"""Self-contained oracle checks runnable from the CLI and the test suite.

Two families:

* exact equivalence on small random discrete HMMs: the two-filter product
  of exact quantities must match brute-force path summation, and the two
  smoothing-weight formulas applied to exhaustive particle sets (every
  state, exact weights) must reproduce the exact smoothing marginals;
* Monte Carlo equivalence on a scalar linear-Gaussian model: filter means
  against the Kalman filter and both smoothing variants against the RTS
  smoother, under scaled-by-sample-size error bounds.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .oracle import (
    DiscreteHMMBundle,
    ScalarLGBundle,
    ScalarLGModel,
    hmm_brute_force_smoothing,
    hmm_exact,
    kalman_filter,
    random_hmm,
    rts_smoother,
)
from .smc import ParticleCloud
from .smoother import (
    run_double_smoother,
    smooth_on_backward_support,
    smooth_on_forward_support,
)

EXACT_TOL_BRUTE = 1e-12
EXACT_TOL_SMC = 1e-10


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def _cloud_to_pmf(cloud, k):
    out = np.zeros(k)
    np.add.at(out, np.asarray(cloud.particles, dtype=int), cloud.weights)
    return out


@dataclass
class ExactCheckResult:
    num_models: int
    max_err_brute: float
    max_err_p1: float
    max_err_p2: float

    @property
    def passed(self):
        return (
            self.max_err_brute <= EXACT_TOL_BRUTE
            and self.max_err_p1 <= EXACT_TOL_SMC
            and self.max_err_p2 <= EXACT_TOL_SMC
        )


def check_hmm_exact(num_models=20, seed=123, max_states=5, max_horizon=6):
    """Exact smoothing identities on random HMMs with exhaustive supports."""
    rng = np.random.default_rng(seed)
    err_brute = err_p1 = err_p2 = 0.0
    for _ in range(num_models):
        hmm = random_hmm(rng, max_states=max_states)
        T = int(rng.integers(2, max_horizon + 1))
        obs = rng.integers(0, hmm.emission.shape[1], size=T)
        exact = hmm_exact(hmm, obs)
        brute = hmm_brute_force_smoothing(hmm, obs)
        err_brute = max(err_brute, float(np.max(np.abs(exact.smoothed - brute))))

        bundle = DiscreteHMMBundle(hmm)
        k = hmm.num_states
        states = np.arange(k)
        for t in range(T):
            if t == 0:
                pmf = exact.tilted[0]
            else:
                fwd = ParticleCloud(states, _log(exact.filtered[t - 1]), True)
                bwd = ParticleCloud(states, _log(exact.tilted[t]), True)
                pmf = _cloud_to_pmf(smooth_on_backward_support(fwd, bwd, bundle), k)
            err_p1 = max(err_p1, float(np.max(np.abs(pmf - exact.smoothed[t]))))
            if t == T - 1:
                pmf = exact.filtered[T - 1]
            else:
                fwd = ParticleCloud(states, _log(exact.filtered[t]), True)
                bwd = ParticleCloud(states, _log(exact.tilted[t + 1]), True)
                pmf = _cloud_to_pmf(smooth_on_forward_support(fwd, bwd, bundle), k)
            err_p2 = max(err_p2, float(np.max(np.abs(pmf - exact.smoothed[t]))))
    return ExactCheckResult(num_models, err_brute, err_p1, err_p2)


# ---------------------------------------------------------------------------
# Monte Carlo check
# ---------------------------------------------------------------------------

LG_MODEL = ScalarLGModel(
    transition_coef=0.95,
    transition_std=0.3,
    observation_coef=1.0,
    observation_std=0.5,
    prior_mean=0.0,
    prior_std=1.0,
)


def lg_test_data(horizon=30, seed=2024):
    rng = np.random.default_rng(seed)
    x = np.zeros(horizon)
    x[0] = rng.normal(LG_MODEL.prior_mean, LG_MODEL.prior_std)
    for t in range(1, horizon):
        x[t] = LG_MODEL.transition_coef * x[t - 1] + LG_MODEL.transition_std * rng.normal()
    return LG_MODEL.observation_coef * x + LG_MODEL.observation_std * rng.standard_normal(
        horizon
    )


def _cloud_mean(cloud):
    return float(np.sum(cloud.weights * np.asarray(cloud.particles, dtype=float)))


def _lg_trial(args):
    data, alpha, m, seed = args
    bundle = ScalarLGBundle(LG_MODEL)
    kal = kalman_filter(LG_MODEL, data)
    rts_mean, rts_var = rts_smoother(LG_MODEL, data)
    run = run_double_smoother(
        data, bundle, alpha=alpha, m=m, seed=seed, resampling="systematic"
    )
    filter_bound = 5.0 * np.sqrt(kal.variances) / np.sqrt(alpha)
    smooth_bound = 5.0 * np.sqrt(rts_var) / np.sqrt(m)
    fwd_means = np.array([_cloud_mean(c) for c in run.forward_run.clouds])
    ok = bool(np.all(np.abs(fwd_means - kal.means) < filter_bound))
    for clouds in (run.p1_clouds, run.p2_clouds):
        means = np.array([_cloud_mean(c) for c in clouds])
        ok = ok and bool(np.all(np.abs(means - rts_mean) < smooth_bound))
    return ok


@dataclass
class MonteCarloCheckResult:
    trials: int
    passes: int
    wall_seconds: float

    @property
    def passed(self):
        return self.passes >= self.trials - 1


def check_lg_monte_carlo(trials=20, alpha=5000, m=500, horizon=30,
                         data_seed=2024, trial_seed_base=1000, jobs=1):
    """Filter and smoother means against Kalman/RTS, per-trial pass/fail."""
    data = lg_test_data(horizon, data_seed)
    args = [(data, alpha, m, trial_seed_base + i) for i in range(trials)]
    start = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_lg_trial, args))
    else:
        results = [_lg_trial(a) for a in args]
    wall = time.perf_counter() - start
    return MonteCarloCheckResult(trials, sum(results), wall)
