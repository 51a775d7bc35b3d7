"""Double two-filter particle smoothing.

Two Monte Carlo approximations of the same smoothing distribution are
available at each time t:

* one supported on the backward filter's particles, weighted by how well
  each is explained by the forward predictive mixture (an m x m sum of
  transition densities divided by the auxiliary density);
* one supported on the forward filter's particles, weighted by how much
  backward mass flows out of each of them.

Both filters are run with a large particle count, every per-time cloud is
subsampled down to a small uniform-weight set to keep the quadratic
weight computation cheap, and for every time point the variant whose
underlying filter obtained the higher marginal-likelihood increment is
selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng
from ._numeric import logsumexp

from .smc import (
    ParticleCloud,
    backward_filter,
    forward_filter,
    take,
)

TAG_FORWARD = "forward"
TAG_BACKWARD = "backward"


class IncompatibleSupportError(RuntimeError):
    """Every cross-pair transition density vanished; the two particle sets
    cannot be combined at this time point."""


class SmootherDegenerateError(RuntimeError):
    """Both smoothing variants failed at the same time point."""


def subsample(cloud, m, rng):
    """Draw m particles multinomially by weight; output weights are uniform."""
    if not cloud.normalized:
        raise ValueError("subsample needs a normalized cloud")
    if m < 1:
        raise ValueError("subsample size must be at least 1")
    w = cloud.weights
    idx = rng.choice(len(cloud), size=m, p=w / w.sum())
    return ParticleCloud(take(cloud.particles, idx), np.full(m, -np.log(m)), True)


def _finish(particles, log_weights, t):
    keep = np.flatnonzero(log_weights > -np.inf)
    if len(keep) == 0:
        raise IncompatibleSupportError(
            f"incompatible supports: all smoothing weights vanished"
            + (f" at time index {t}" if t is not None else "")
        )
    if len(keep) < len(log_weights):
        particles = take(particles, keep)
        log_weights = log_weights[keep]
    return ParticleCloud(particles, log_weights - logsumexp(log_weights), True)


def smooth_on_backward_support(fwd_prev, bwd_t, bundle, t=None, cross=None):
    """Smoothing weights on the backward particles at time t.

    ``fwd_prev`` is the (subsampled) forward cloud at t-1 and ``bwd_t`` the
    (subsampled) backward cloud at t.  Each backward particle is reweighted
    by the forward predictive mixture flowing into it, divided by its
    auxiliary density; costs len(bwd) * len(fwd) transition evaluations.
    Particles whose auxiliary density vanishes are dropped before
    normalization.  ``cross`` may hold the precomputed pairwise transition
    matrix (next along rows, previous along columns).
    """
    if not (fwd_prev.normalized and bwd_t.normalized):
        raise ValueError("smoothing needs normalized clouds")
    if cross is None:
        cross = bundle.pairwise_transition_logpdf(bwd_t.particles, fwd_prev.particles)
    mix = logsumexp(cross + fwd_prev.log_weights[None, :], axis=1)
    aux = np.asarray(bundle.auxiliary_logpdf(bwd_t.particles), dtype=float)
    ok = np.isfinite(aux) & (mix > -np.inf)
    logw = np.where(ok, bwd_t.log_weights + mix - np.where(ok, aux, 0.0), -np.inf)
    return _finish(bwd_t.particles, logw, t)


def smooth_on_forward_support(fwd_t, bwd_next, bundle, t=None, cross=None):
    """Smoothing weights on the forward particles at time t.

    ``fwd_t`` is the (subsampled) forward cloud at t and ``bwd_next`` the
    (subsampled) backward cloud at t+1.  Each forward particle is
    reweighted by the total backward mass it can reach one step ahead,
    with each backward particle discounted by its auxiliary density.
    ``cross`` as in :func:`smooth_on_backward_support`.
    """
    if not (fwd_t.normalized and bwd_next.normalized):
        raise ValueError("smoothing needs normalized clouds")
    if cross is None:
        cross = bundle.pairwise_transition_logpdf(bwd_next.particles, fwd_t.particles)
    aux = np.asarray(bundle.auxiliary_logpdf(bwd_next.particles), dtype=float)
    contrib = np.where(np.isfinite(aux), bwd_next.log_weights - aux, -np.inf)
    flow = logsumexp(cross + contrib[:, None], axis=0)
    logw = np.where(flow > -np.inf, fwd_t.log_weights + flow, -np.inf)
    return _finish(fwd_t.particles, logw, t)


def select(p1, p2, log_lf_t, log_lb_t):
    """Pick one of the two smoothing approximations for a time point.

    Returns the forward-supported candidate when the forward filter's
    marginal-likelihood increment is at least the backward one (ties go
    forward, whose filter approximation is empirically the better one);
    a candidate that failed (None) forfeits.
    """
    if p1 is None and p2 is None:
        raise SmootherDegenerateError("both smoothing variants degenerate")
    if p1 is None:
        return p2, TAG_FORWARD
    if p2 is None:
        return p1, TAG_BACKWARD
    if log_lf_t >= log_lb_t:
        return p2, TAG_FORWARD
    return p1, TAG_BACKWARD


@dataclass
class SmoothingRun:
    """Selected smoothing clouds plus everything needed to audit the choice."""

    clouds: list            # chosen cloud per time
    tags: list              # 'forward' or 'backward' per time
    p1_clouds: list         # backward-supported candidates (None if failed)
    p2_clouds: list         # forward-supported candidates (None if failed)
    log_lf: np.ndarray
    log_lb: np.ndarray
    weight_evals_p1: np.ndarray
    weight_evals_p2: np.ndarray
    forward_run: object
    backward_run: object

    @property
    def horizon(self):
        return len(self.clouds)


def run_double_smoother(data, bundle, alpha, m=100, seed=0,
                        resampling="multinomial"):
    """Run both filters, build both smoothing variants, select per time.

    Boundary conventions: at the first time point the backward-supported
    variant reweights by initial prior over auxiliary density (the forward
    predictive at t=1 is the prior itself); at the final time point the
    forward-supported variant is the forward filtering cloud, which
    already is the smoothing distribution there.
    """
    T = len(data)
    if T < 2:
        raise ValueError("smoothing needs at least two time points")
    root = SeedSequence(seed).generate_state(3, dtype=np.uint64)
    fwd_seed, bwd_seed, sub_seed = (int(x) for x in root)
    fwd = forward_filter(data, bundle, alpha, fwd_seed, resampling)
    bwd = backward_filter(data, bundle, alpha, bwd_seed, resampling)

    sub_f = [
        subsample(fwd.clouds[t], m, default_rng(SeedSequence((sub_seed, 0, t))))
        for t in range(T)
    ]
    sub_b = [
        subsample(bwd.clouds[t], m, default_rng(SeedSequence((sub_seed, 1, t))))
        for t in range(T)
    ]

    # the cross matrix between the backward cloud at t+1 and the forward
    # cloud at t serves both the forward-supported variant at t and the
    # backward-supported variant at t+1
    crosses = [
        bundle.pairwise_transition_logpdf(sub_b[t + 1].particles, sub_f[t].particles)
        for t in range(T - 1)
    ]

    chosen, tags, p1_list, p2_list = [], [], [], []
    evals1 = np.zeros(T, dtype=int)
    evals2 = np.zeros(T, dtype=int)
    for t in range(T):
        if t == 0:
            # predictive mixture at the first time point is the prior
            parts = sub_b[0].particles
            init = np.asarray(bundle.initial_logpdf(parts), dtype=float)
            aux = np.asarray(bundle.auxiliary_logpdf(parts), dtype=float)
            ok = np.isfinite(aux) & np.isfinite(init)
            logw = np.where(ok, sub_b[0].log_weights + init - np.where(ok, aux, 0.0), -np.inf)
            try:
                p1 = _finish(parts, logw, t)
            except IncompatibleSupportError:
                p1 = None
            evals1[t] = len(parts)
        else:
            try:
                p1 = smooth_on_backward_support(
                    sub_f[t - 1], sub_b[t], bundle, t, cross=crosses[t - 1]
                )
            except IncompatibleSupportError:
                p1 = None
            evals1[t] = len(sub_b[t]) * len(sub_f[t - 1])
        if t == T - 1:
            p2 = sub_f[t]
            evals2[t] = 0
        else:
            try:
                p2 = smooth_on_forward_support(
                    sub_f[t], sub_b[t + 1], bundle, t, cross=crosses[t]
                )
            except IncompatibleSupportError:
                p2 = None
            evals2[t] = len(sub_b[t + 1]) * len(sub_f[t])
        if p1 is None and p2 is None:
            # both particle sets are useless here (typically disjoint
            # cardinalities after the backward pass degenerates); fall back
            # to the filtering cloud, as at the final-time boundary
            cloud, tag = sub_f[t], TAG_FORWARD
        else:
            cloud, tag = select(
                p1, p2, fwd.log_marginal_increments[t], bwd.log_marginal_increments[t]
            )
        chosen.append(cloud)
        tags.append(tag)
        p1_list.append(p1)
        p2_list.append(p2)
    return SmoothingRun(
        clouds=chosen,
        tags=tags,
        p1_clouds=p1_list,
        p2_clouds=p2_list,
        log_lf=fwd.log_marginal_increments,
        log_lb=bwd.log_marginal_increments,
        weight_evals_p1=evals1,
        weight_evals_p2=evals2,
        forward_run=fwd,
        backward_run=bwd,
    )
