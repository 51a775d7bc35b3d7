"""Weighted-particle machinery and the forward / backward particle filters.

Both filters run against a *model bundle*, an object supplying the model
ingredients on whole particle batches:

``sample_initial(seedseq, n)``
    draw n states from the initial prior (also used as the auxiliary
    density of the backward filter);
``initial_logpdf(batch)`` / ``auxiliary_logpdf(batch)``
    log densities of the initial prior and of the auxiliary density;
``likelihood_logpdf(datum, batch)``
    per-state log likelihood of one observation;
``propose_forward(seedseq, batch)`` / ``propose_backward(seedseq, batch)``
    importance-kernel draws conditioned on each state in the batch;
``transition_logpdf(next_batch, prev_batch)``
    aligned model transition log densities;
``forward_proposal_logpdf(next_batch, prev_batch)`` /
``backward_proposal_logpdf(prev_batch, next_batch)``
    aligned importance-kernel log densities;
``pairwise_transition_logpdf(next_batch, prev_batch)``
    the full cross matrix of model transition log densities (used by the
    smoother).

Batches may be numpy arrays (scalar and categorical test models) or lists
of richer state objects (the dipole model).  Sampling methods receive a
``numpy.random.SeedSequence`` so a bundle can either create one generator
or spawn an independent stream per particle; together with the per-step
seeding scheme here this makes every run bit-reproducible for a given
(data, bundle, particle count, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import SeedSequence, default_rng
from ._numeric import logsumexp

_FORWARD_CODE = 1
_BACKWARD_CODE = 2


class FilterDegenerateError(RuntimeError):
    """All particle weights vanished at some time step."""

    def __init__(self, direction, t):
        super().__init__(
            f"{direction} filter degenerate: all weights vanished at time index {t}"
        )
        self.direction = direction
        self.t = t

    def __reduce__(self):
        return (FilterDegenerateError, (self.direction, self.t))


def take(particles, indices):
    """Index a particle batch, preserving its container type."""
    if isinstance(particles, np.ndarray):
        return particles[indices]
    return [particles[i] for i in indices]


@dataclass
class ParticleCloud:
    """A weighted sample set approximating one distribution at one time."""

    particles: object
    log_weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if len(self.log_weights) != len(self.particles):
            raise ValueError("particles and log_weights must have equal length")
        if np.any(np.isnan(self.log_weights)):
            raise ValueError("NaN particle weight")
        if self.normalized:
            total = np.exp(logsumexp(self.log_weights))
            if not np.isfinite(total) or abs(total - 1.0) > 1e-9:
                raise ValueError(f"cloud marked normalized but weights sum to {total}")

    def __len__(self):
        return len(self.log_weights)

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def normalize(self):
        """Return a normalized copy; raises if all weights vanished."""
        norm = logsumexp(self.log_weights)
        if not np.isfinite(norm):
            raise ValueError("cannot normalize: all weights are zero")
        return ParticleCloud(self.particles, self.log_weights - norm, True)


def effective_sample_size(cloud):
    """Degeneracy diagnostic 1 / sum(w^2), between 1 and the cloud size."""
    if not cloud.normalized:
        raise ValueError("effective sample size needs a normalized cloud")
    return 1.0 / float(np.sum(cloud.weights ** 2))


def resample(cloud, rng, scheme="multinomial"):
    """Replace a weighted cloud by an equally weighted one.

    ``multinomial`` draws independent indices by weight; ``systematic``
    uses a single uniform offset against the cumulative weights, which
    keeps every copy count within one of its expectation.
    """
    if not cloud.normalized:
        raise ValueError("resample needs a normalized cloud")
    n = len(cloud)
    w = cloud.weights
    if scheme == "multinomial":
        idx = rng.choice(n, size=n, p=w / w.sum())
    elif scheme == "systematic":
        positions = (rng.random() + np.arange(n)) / n
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)
    else:
        raise ValueError(f"unknown resampling scheme: {scheme!r}")
    uniform = np.full(n, -np.log(n))
    return ParticleCloud(take(cloud.particles, idx), uniform, True)


@dataclass
class FilterRun:
    """Per-time particle clouds of one filter pass.

    ``clouds`` holds the weighted clouds before resampling, ``resampled``
    the uniform-weight clouds that seeded the next step.
    ``log_marginal_increments[t]`` is the log mean unnormalized weight at
    time t; its running sum estimates the log marginal likelihood.
    """

    direction: str
    clouds: list = field(default_factory=list)
    resampled: list = field(default_factory=list)
    log_marginal_increments: np.ndarray = None
    ess: np.ndarray = None

    @property
    def horizon(self):
        return len(self.clouds)


def _logmeanexp(logw):
    return float(logsumexp(logw) - np.log(len(logw)))


def _check_weights(logw, direction, t):
    # degenerate means no particle carries any mass; weights live in the
    # log domain, so only -inf (or NaN) counts, however negative the scale
    logw = np.asarray(logw, dtype=float)
    if np.any(np.isnan(logw)) or np.max(logw) == -np.inf:
        raise FilterDegenerateError(direction, t)
    return logw


def _step_streams(seed, direction_code, t):
    proposal_ss, resample_ss = SeedSequence((seed, direction_code, t)).spawn(2)
    return proposal_ss, default_rng(resample_ss)


def forward_filter(data, bundle, alpha, seed, resampling="multinomial"):
    """Sequential importance resampling, forward in time.

    At the first step particles come from the initial prior and are
    weighted by likelihood; afterwards each resampled particle moves
    through the bundle's forward importance kernel and is weighted by
    likelihood times the model/proposal density ratio.  Resampling happens
    every step, so the incoming weights are always uniform.
    """
    T = len(data)
    if T < 1:
        raise ValueError("need at least one observation")
    if alpha < 2:
        raise ValueError("need at least two particles")
    clouds, resampled, incs, esses = [], [], [], []
    for t in range(T):
        proposal_ss, resample_rng = _step_streams(seed, _FORWARD_CODE, t)
        if t == 0:
            particles = bundle.sample_initial(proposal_ss, alpha)
            logw = np.asarray(bundle.likelihood_logpdf(data[0], particles), dtype=float)
        else:
            parents = resampled[t - 1].particles
            particles = bundle.propose_forward(proposal_ss, parents)
            logw = (
                np.asarray(bundle.likelihood_logpdf(data[t], particles), dtype=float)
                + bundle.transition_logpdf(particles, parents)
                - bundle.forward_proposal_logpdf(particles, parents)
            )
        logw = _check_weights(logw, "forward", t)
        incs.append(_logmeanexp(logw))
        cloud = ParticleCloud(particles, logw - logsumexp(logw), True)
        clouds.append(cloud)
        esses.append(effective_sample_size(cloud))
        resampled.append(resample(cloud, resample_rng, resampling))
    return FilterRun("forward", clouds, resampled, np.array(incs), np.array(esses))


def backward_filter(data, bundle, alpha, seed, resampling="multinomial"):
    """Particle approximation of the auxiliary-tilted backward recursion.

    The target at time t is proportional to p(d_{t:T} | state) times the
    auxiliary density.  The pass starts at the final time with draws from
    the initial prior weighted by likelihood, then walks backward: each
    resampled particle proposes a predecessor through the backward
    importance kernel and is weighted by likelihood times the model
    transition into its parent, times the auxiliary-density ratio, over
    the proposal density.
    """
    T = len(data)
    if T < 1:
        raise ValueError("need at least one observation")
    if alpha < 2:
        raise ValueError("need at least two particles")
    clouds = [None] * T
    resampled = [None] * T
    incs = np.zeros(T)
    esses = np.zeros(T)
    for t in range(T - 1, -1, -1):
        proposal_ss, resample_rng = _step_streams(seed, _BACKWARD_CODE, t)
        if t == T - 1:
            particles = bundle.sample_initial(proposal_ss, alpha)
            logw = (
                np.asarray(bundle.likelihood_logpdf(data[t], particles), dtype=float)
                + bundle.auxiliary_logpdf(particles)
                - bundle.initial_logpdf(particles)
            )
        else:
            parents = resampled[t + 1].particles
            particles = bundle.propose_backward(proposal_ss, parents)
            logw = (
                np.asarray(bundle.likelihood_logpdf(data[t], particles), dtype=float)
                + bundle.transition_logpdf(parents, particles)
                + bundle.auxiliary_logpdf(particles)
                - bundle.auxiliary_logpdf(parents)
                - bundle.backward_proposal_logpdf(particles, parents)
            )
        logw = _check_weights(logw, "backward", t)
        incs[t] = _logmeanexp(logw)
        cloud = ParticleCloud(particles, logw - logsumexp(logw), True)
        clouds[t] = cloud
        esses[t] = effective_sample_size(cloud)
        resampled[t] = resample(cloud, resample_rng, resampling)
    return FilterRun("backward", clouds, resampled, incs, esses)
