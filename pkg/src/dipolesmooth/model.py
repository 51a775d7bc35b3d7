"""Probabilistic model for a time-varying set of current dipoles.

The state is an unordered multiset of dipoles.  All densities here are
taken with respect to one fixed reference measure on that space: counting
measure on (number of dipoles, grid locations) times Lebesgue measure on
each moment vector, with each distinct multiset counted once.  Because a
multiset of n distinct dipoles corresponds to n! ordered tuples, the
prior carries an n! factor and the transition density sums over the
possible assignments of next-state dipoles to previous-state dipoles.
This is what makes the kernel integrate to one over multisets and keeps
ratios of transition to prior densities meaningful across cardinalities.

The transition kernel is a three-way mixture: with some probability a new
dipole is born (location uniform on the grid, orientation uniform on the
sphere, strength log-uniform), with some probability one existing dipole
dies (chosen uniformly), and otherwise the cardinality is unchanged.  In
every branch the surviving dipoles move: locations by a grid random walk
with a Gaussian distance profile, moments by an isotropic Gaussian step
whose standard deviation is a fixed fraction of the current strength.

The same machinery doubles as the importance (proposal) kernel by
swapping the birth/death probabilities for inflated exploration rates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import default_rng
from ._numeric import logsumexp

from .geometry import Dipole, DipoleState, predict_data_batch

LOG_4PI = math.log(4.0 * math.pi)
# isotropic moment-step std never below this fraction of q_min (a zero-strength
# dipole would otherwise get a Dirac step)
MOMENT_STEP_FLOOR_FRACTION = 1e-3


@dataclass(eq=False)
class ModelParams:
    """Model constants: prior, kernel rates, and sensor-noise covariance.

    ``p_birth`` and ``q_birth`` are total per-step birth probabilities.
    ``p_single_death`` is the per-dipole death rate; the total death
    probability from a state with n dipoles is 1 - (1 - p_single_death)^n.
    ``q_death`` is the total death probability of the importance kernel.
    """

    noise_cov: np.ndarray
    n_max: int = 5
    poisson_rate: float = 0.5
    p_birth: float = 1.0 / 100.0
    p_single_death: float = 1.0 / 30.0
    rho: float = 0.005
    moment_walk_factor: float = 0.2
    strength_bounds: tuple = (1e-9, 1e-7)
    q_birth: float = 1.0 / 3.0
    q_death: float = 1.0 / 3.0

    _chol: np.ndarray = field(init=False, repr=False, default=None)
    _prec: np.ndarray = field(init=False, repr=False, default=None)
    _log_norm_const: float = field(init=False, repr=False, default=0.0)
    _noise_diag: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if not 0 < self.p_birth < 1 or not 0 < self.p_single_death < 1:
            raise ValueError("p_birth and p_single_death must lie in (0, 1)")
        if not 0 < self.q_birth < 1 or not 0 < self.q_death < 1:
            raise ValueError("q_birth and q_death must lie in (0, 1)")
        if self.p_birth + self.death_probability(self.n_max) >= 1:
            raise ValueError("p_birth + total death probability must stay below 1")
        if self.q_birth + self.q_death >= 1:
            raise ValueError("q_birth + q_death must stay below 1")
        q_min, q_max = self.strength_bounds
        if not 0 < q_min < q_max:
            raise ValueError("strength bounds must satisfy 0 < q_min < q_max")
        if self.rho <= 0 or self.moment_walk_factor <= 0 or self.poisson_rate < 0:
            raise ValueError("rho, moment_walk_factor positive; poisson_rate nonnegative")
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, rtol=1e-12, atol=0):
            raise ValueError("noise covariance must be square and symmetric")
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("noise covariance must be positive definite") from exc
        self.noise_cov = cov
        self._prec = np.linalg.inv(cov)
        s = cov.shape[0]
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        self._log_norm_const = -0.5 * (s * math.log(2.0 * math.pi) + logdet)
        off = cov - np.diag(np.diag(cov))
        self._noise_diag = np.diag(cov).copy() if not np.any(off) else None

    @property
    def num_sensors(self):
        return self.noise_cov.shape[0]

    @property
    def moment_step_floor(self):
        return MOMENT_STEP_FLOOR_FRACTION * self.strength_bounds[0]

    def death_probability(self, n):
        """Total death probability of the model kernel from an n-dipole state."""
        return 1.0 - (1.0 - self.p_single_death) ** n

    def model_rates(self, n):
        """(birth, death) mixture weights of the model kernel at cardinality n."""
        return self.p_birth, self.death_probability(n)

    def importance_rates(self, n):
        """(birth, death) mixture weights of the exploration kernel."""
        return self.q_birth, self.q_death

    def log_truncated_poisson(self):
        """Log pmf of the dipole-count prior, Poisson truncated to [0, n_max]."""
        n = np.arange(self.n_max + 1)
        if self.poisson_rate == 0.0:
            logp = np.full(self.n_max + 1, -np.inf)
            logp[0] = 0.0
            return logp
        logp = n * math.log(self.poisson_rate) - self.poisson_rate - np.array(
            [math.lgamma(k + 1) for k in n]
        )
        return logp - logsumexp(logp)


def isotropic_noise_cov(num_sensors, noise_std):
    return (noise_std**2) * np.eye(num_sensors)


class LocationKernel:
    """Grid random-walk transition rows with a Gaussian distance profile.

    Row i is the distribution of the next location given current location i;
    every row is normalized to sum to one.
    """

    __slots__ = ("log_rows", "rows", "_cdf")

    def __init__(self, grid, rho):
        pts = grid.points
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        logw = -d2 / (2.0 * rho**2)
        self.log_rows = logw - logsumexp(logw, axis=1, keepdims=True)
        rows = np.exp(self.log_rows)
        self.rows = rows / rows.sum(axis=1, keepdims=True)
        self._cdf = np.cumsum(self.rows, axis=1)

    def sample(self, rng, index):
        return int(np.searchsorted(self._cdf[index], rng.random(), side="right"))

    def log_prob(self, src, dst):
        return self.log_rows[src, dst]


# ---------------------------------------------------------------------------
# generic multiset birth/death/survive kernel
#
# The functions below implement the kernel combinatorics for any per-item
# "move" and "birth" ingredient densities, so the continuous dipole model
# and small quantized test models share one code path.
# ---------------------------------------------------------------------------


def effective_branch_rates(n, n_max, birth_rate, death_rate):
    """Mixture weights (birth, death, survive) with boundary folding.

    A birth cannot happen at n == n_max and a death cannot happen at n == 0;
    the suppressed mass is folded into the survive branch so the mixture
    stays a probability distribution.
    """
    b = birth_rate if n < n_max else 0.0
    d = death_rate if n > 0 else 0.0
    return b, d, 1.0 - b - d


def _log_multiplicity_correction(items):
    """-log prod over distinct items of (multiplicity!) for a multiset."""
    counts = {}
    for it in items:
        counts[it] = counts.get(it, 0) + 1
    out = 0.0
    for c in counts.values():
        if c > 1:
            out -= math.lgamma(c + 1)
    return out


def _log_perm_sum(logk):
    """log of the permanent of exp(logk) for a small square matrix."""
    n = logk.shape[0]
    if n == 0:
        return 0.0
    perms = np.array(list(itertools.permutations(range(n))))
    vals = logk[np.arange(n)[None, :], perms].sum(axis=1)
    return float(logsumexp(vals))


def multiset_transition_logpdf(next_items, prev_items, birth_rate, death_rate,
                               n_max, move_logpdf, birth_logpdf):
    """Log transition density between two multisets of items.

    ``move_logpdf(y, x)`` is the single-item move density and
    ``birth_logpdf(y)`` the newborn density.  Cardinality can change by at
    most one per step; the appropriate branch weight (after boundary
    folding) multiplies a sum over all assignments of next items to
    previous items, divided by the factorials of repeated next items.
    """
    xs, ys = list(prev_items), list(next_items)
    n, m = len(xs), len(ys)
    if abs(m - n) >= 2 or m > n_max:
        return -np.inf
    b, d, s = effective_branch_rates(n, n_max, birth_rate, death_rate)
    mult = _log_multiplicity_correction(ys)

    if m == n + 1:
        if b <= 0.0:
            return -np.inf
        logk = np.array([[move_logpdf(y, x) for y in ys] for x in xs]).reshape(n, m)
        logb = [birth_logpdf(y) for y in ys]
        cols = list(range(m))
        terms = [
            logb[j] + _log_perm_sum(logk[:, cols[:j] + cols[j + 1:]])
            for j in range(m)
        ]
        return math.log(b) + float(logsumexp(terms)) + mult

    if m == n - 1:
        if d <= 0.0:
            return -np.inf
        logk = np.array([[move_logpdf(y, x) for y in ys] for x in xs]).reshape(n, m)
        rows = list(range(n))
        terms = [
            _log_perm_sum(logk[rows[:j] + rows[j + 1:], :]) for j in range(n)
        ]
        return math.log(d) - math.log(n) + float(logsumexp(terms)) + mult

    if s <= 0.0:
        return -np.inf
    if n == 0:
        return math.log(s)
    logk = np.array([[move_logpdf(y, x) for y in ys] for x in xs]).reshape(n, m)
    return math.log(s) + _log_perm_sum(logk) + mult


def sample_multiset_transition(rng, prev_items, birth_rate, death_rate, n_max,
                               sample_move, sample_birth):
    """Draw one step of the birth/death/survive kernel; returns a list."""
    xs = list(prev_items)
    n = len(xs)
    b, d, _ = effective_branch_rates(n, n_max, birth_rate, death_rate)
    u = rng.random()
    survivors = xs
    newborn = None
    if u < b:
        newborn = sample_birth(rng)
    elif u < b + d:
        kill = int(rng.integers(n))
        survivors = xs[:kill] + xs[kill + 1:]
    out = [sample_move(rng, x) for x in survivors]
    if newborn is not None:
        out.append(newborn)
    return out


# ---------------------------------------------------------------------------
# continuous dipole ingredients
# ---------------------------------------------------------------------------


def _moment_step_std(strength, params):
    return max(params.moment_walk_factor * strength, params.moment_step_floor)


def _dipole_move_logpdf(nxt, prev, params, kernel):
    std = _moment_step_std(prev.strength, params)
    diff = nxt.moment - prev.moment
    return (
        float(kernel.log_prob(prev.grid_index, nxt.grid_index))
        - 1.5 * math.log(2.0 * math.pi * std * std)
        - float(diff @ diff) / (2.0 * std * std)
    )


def moment_logpdf(moment, params):
    """Log density of the birth/prior moment distribution (Lebesgue on R^3).

    Direction uniform on the sphere and strength log-uniform between the
    bounds; per unit volume this is 1 / (4 pi |q|^3 ln(q_max/q_min)).
    """
    q_min, q_max = params.strength_bounds
    s = float(np.linalg.norm(moment))
    if not q_min <= s <= q_max:
        return -np.inf
    return -LOG_4PI - 3.0 * math.log(s) - math.log(math.log(q_max / q_min))


def sample_moment(rng, params):
    q_min, q_max = params.strength_bounds
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    strength = math.exp(rng.uniform(math.log(q_min), math.log(q_max)))
    return strength * direction


def sample_dipole(rng, params, grid):
    return Dipole(int(rng.integers(len(grid))), sample_moment(rng, params))


def _sample_dipole_move(rng, dip, params, kernel):
    new_index = kernel.sample(rng, dip.grid_index)
    std = _moment_step_std(dip.strength, params)
    new_moment = dip.moment + std * rng.standard_normal(3)
    return Dipole(new_index, new_moment)


# ---------------------------------------------------------------------------
# public model operations
# ---------------------------------------------------------------------------


def sample_prior(rng, params, grid):
    """Draw an initial state: truncated-Poisson count, independent dipoles."""
    if params.n_max == 0:
        return DipoleState()
    cdf = np.cumsum(np.exp(params.log_truncated_poisson()))
    n = int(np.searchsorted(cdf, rng.random(), side="right"))
    n = min(n, params.n_max)
    return DipoleState(sample_dipole(rng, params, grid) for _ in range(n))


def prior_logpdf(state, params, grid):
    """Log initial-prior density of a state (multiset convention).

    Returns -inf when the cardinality exceeds n_max or any strength falls
    outside the bounds.  The n!/prod(multiplicities!) factor converts the
    ordered-tuple product form into a density over distinct multisets.
    """
    n = state.n
    if n > params.n_max:
        return -np.inf
    logp = float(params.log_truncated_poisson()[n])
    if n == 0:
        return logp
    logp += math.lgamma(n + 1) + _log_multiplicity_correction(state.dipoles)
    for d in state.dipoles:
        logp += -math.log(len(grid)) + moment_logpdf(d.moment, params)
    return logp


def sample_transition(rng, state, params, kernel, birth_rate, death_rate):
    """One draw of the birth/death/survive kernel from ``state``.

    ``birth_rate``/``death_rate`` are the total branch probabilities, e.g.
    ``params.model_rates(state.n)`` for the model kernel or
    ``params.importance_rates(state.n)`` for the exploration kernel.
    """
    grid_size = len(kernel.rows)
    items = sample_multiset_transition(
        rng,
        state.dipoles,
        birth_rate,
        death_rate,
        params.n_max,
        lambda r, d: _sample_dipole_move(r, d, params, kernel),
        lambda r: Dipole(int(r.integers(grid_size)), sample_moment(r, params)),
    )
    return DipoleState(items)


def transition_logpdf(next_state, prev_state, params, kernel, birth_rate, death_rate):
    """Log density of the birth/death/survive kernel between two states."""
    n_grid = len(kernel.rows)
    return multiset_transition_logpdf(
        next_state.dipoles,
        prev_state.dipoles,
        birth_rate,
        death_rate,
        params.n_max,
        lambda y, x: _dipole_move_logpdf(y, x, params, kernel),
        lambda y: -math.log(n_grid) + moment_logpdf(y.moment, params),
    )


def likelihood_logpdf(datum, state, leadfield, params):
    """Log Gaussian likelihood of one sensor vector given a state."""
    return float(likelihood_logpdf_batch(datum, [state], leadfield, params)[0])


def likelihood_logpdf_batch(datum, states, leadfield, params):
    datum = np.asarray(datum, dtype=float)
    if datum.shape != (params.num_sensors,):
        raise ValueError(
            f"datum has shape {datum.shape}, expected ({params.num_sensors},)"
        )
    residual = predict_data_batch(states, leadfield) - datum[None, :]
    if params._noise_diag is not None:
        quad = np.sum(residual**2 / params._noise_diag[None, :], axis=1)
    else:
        quad = np.einsum("bs,st,bt->b", residual, params._prec, residual)
    return params._log_norm_const - 0.5 * quad


# ---------------------------------------------------------------------------
# vectorized transition densities
#
# The smoothing weights need the model transition density between every
# (previous, next) particle pair, and the filters need it along aligned
# pairs for whole particle sets.  Evaluating multiset_transition_logpdf in
# Python loops is exact but slow, so the evaluators below group states by
# cardinality and run the assignment sums as array gathers.  They agree
# with the generic path to floating-point accuracy (tested both ways).
# ---------------------------------------------------------------------------


def _perm_logsum(logk):
    """logsumexp over assignment permutations; logk (..., n, n) -> (...)."""
    n = logk.shape[-1]
    if n == 0:
        return np.zeros(logk.shape[:-2])
    vals = [
        logk[..., np.arange(n), list(p)].sum(axis=-1)
        for p in itertools.permutations(range(n))
    ]
    return logsumexp(np.stack(vals, axis=-1), axis=-1)


def _move_tensor(lp, mp, ln, mn, params, kernel):
    """Per-dipole move log densities; shapes (..., n_p)/(..., n_p, 3) etc.

    Returns (..., n_p, n_n); leading dimensions broadcast.
    """
    n_p, n_n = lp.shape[-1], ln.shape[-1]
    if n_p == 0 or n_n == 0:
        lead = np.broadcast_shapes(lp.shape[:-1], ln.shape[:-1])
        return np.zeros(lead + (n_p, n_n))
    loc_term = kernel.log_rows[lp[..., :, None], ln[..., None, :]]
    strength = np.linalg.norm(mp, axis=-1)
    std = np.maximum(params.moment_walk_factor * strength, params.moment_step_floor)
    diff2 = np.sum((mn[..., None, :, :] - mp[..., :, None, :]) ** 2, axis=-1)
    log_const = -1.5 * np.log(2.0 * math.pi * std**2)
    return loc_term + log_const[..., :, None] - diff2 / (2.0 * std**2)[..., :, None]


def _birth_logvec(mn, params, n_grid):
    """Newborn log density for each next dipole; (..., n_n, 3) -> (..., n_n)."""
    q_min, q_max = params.strength_bounds
    s = np.linalg.norm(mn, axis=-1)
    ok = (s >= q_min) & (s <= q_max)
    safe = np.where(ok, s, 1.0)
    val = -LOG_4PI - 3.0 * np.log(safe) - math.log(math.log(q_max / q_min)) - math.log(n_grid)
    return np.where(ok, val, -np.inf)


def _branch_logpdf(logk, logb, n_p, n_n, b, d, s):
    """Combine the move tensor and birth vector into a branch log density.

    logk: (..., n_p, n_n); logb: (..., n_n) or None.  Returns (...).
    """
    lead = logk.shape[:-2]
    if n_n == n_p:
        if s <= 0.0:
            return np.full(lead, -np.inf)
        if n_p == 0:
            return np.full(lead, math.log(s))
        return math.log(s) + _perm_logsum(logk)
    if n_n == n_p + 1:
        if b <= 0.0:
            return np.full(lead, -np.inf)
        cols = list(range(n_n))
        terms = [
            logb[..., j] + _perm_logsum(logk[..., :, cols[:j] + cols[j + 1:]])
            for j in range(n_n)
        ]
        return math.log(b) + logsumexp(np.stack(terms, axis=-1), axis=-1)
    # one death
    if d <= 0.0:
        return np.full(lead, -np.inf)
    rows = list(range(n_p))
    terms = [
        _perm_logsum(logk[..., rows[:j] + rows[j + 1:], :]) for j in range(n_p)
    ]
    return math.log(d) - math.log(n_p) + logsumexp(np.stack(terms, axis=-1), axis=-1)


def _stack_states(states, card):
    locs = np.array([st.locations() for st in states], dtype=np.intp).reshape(
        len(states), card
    )
    moms = np.array([st.moments() for st in states]).reshape(len(states), card, 3)
    return locs, moms


def _multiplicity_vector(states):
    return np.array([_log_multiplicity_correction(st.dipoles) for st in states])


def pairwise_transition_logpdf(next_states, prev_states, params, kernel,
                               birth_rate_fn, death_rate_fn):
    """Log transition density matrix, shape (len(next), len(prev)).

    ``birth_rate_fn(n)`` / ``death_rate_fn(n)`` give the branch rates as a
    function of the previous cardinality.
    """
    out = np.full((len(next_states), len(prev_states)), -np.inf)
    prev_ns = np.array([st.n for st in prev_states])
    next_ns = np.array([st.n for st in next_states])
    n_grid = len(kernel.rows)
    for card_p in np.unique(prev_ns):
        pi = np.flatnonzero(prev_ns == card_p)
        b, d, s = effective_branch_rates(
            int(card_p), params.n_max,
            birth_rate_fn(int(card_p)), death_rate_fn(int(card_p)),
        )
        lp, mp = _stack_states([prev_states[i] for i in pi], int(card_p))
        for card_n in np.unique(next_ns):
            if abs(int(card_n) - int(card_p)) >= 2 or card_n > params.n_max:
                continue
            ni = np.flatnonzero(next_ns == card_n)
            ln, mn = _stack_states([next_states[i] for i in ni], int(card_n))
            logk = _move_tensor(
                lp[:, None, :], mp[:, None, :, :], ln[None, :, :], mn[None, :, :, :],
                params, kernel,
            )
            logb = None
            if card_n == card_p + 1:
                logb = np.broadcast_to(
                    _birth_logvec(mn, params, n_grid)[None, :, :],
                    (len(pi), len(ni), int(card_n)),
                )
            block = _branch_logpdf(logk, logb, int(card_p), int(card_n), b, d, s)
            out[np.ix_(ni, pi)] = block.T
    out += _multiplicity_vector(next_states)[:, None]
    return out


def aligned_transition_logpdf(next_states, prev_states, params, kernel,
                              birth_rate_fn, death_rate_fn):
    """Elementwise log transition densities for aligned state sequences."""
    if len(next_states) != len(prev_states):
        raise ValueError("aligned evaluation needs equal-length sequences")
    out = np.full(len(next_states), -np.inf)
    prev_ns = np.array([st.n for st in prev_states])
    next_ns = np.array([st.n for st in next_states])
    n_grid = len(kernel.rows)
    pairs = np.stack([prev_ns, next_ns], axis=1)
    for card_p, card_n in np.unique(pairs, axis=0):
        idx = np.flatnonzero((prev_ns == card_p) & (next_ns == card_n))
        if abs(int(card_n) - int(card_p)) >= 2 or card_n > params.n_max:
            continue
        b, d, s = effective_branch_rates(
            int(card_p), params.n_max,
            birth_rate_fn(int(card_p)), death_rate_fn(int(card_p)),
        )
        lp, mp = _stack_states([prev_states[i] for i in idx], int(card_p))
        ln, mn = _stack_states([next_states[i] for i in idx], int(card_n))
        logk = _move_tensor(lp, mp, ln, mn, params, kernel)
        logb = _birth_logvec(mn, params, n_grid) if card_n == card_p + 1 else None
        out[idx] = _branch_logpdf(logk, logb, int(card_p), int(card_n), b, d, s)
    out += _multiplicity_vector(next_states)
    return out


# ---------------------------------------------------------------------------
# particle-filter bundle
# ---------------------------------------------------------------------------


class DipoleModel:
    """Bundle wiring the dipole model to the particle filters.

    Sampling methods spawn one independent random stream per particle from
    the sequence they are handed, so proposals could be evaluated in
    parallel without changing the output.  The auxiliary density of the
    backward filter is the initial prior.
    """

    def __init__(self, params, grid, leadfield, kernel=None):
        if leadfield.num_points != len(grid):
            raise ValueError("leadfield and grid disagree on the number of points")
        if leadfield.num_sensors != params.num_sensors:
            raise ValueError("leadfield and noise covariance disagree on sensors")
        self.params = params
        self.grid = grid
        self.leadfield = leadfield
        self.kernel = kernel if kernel is not None else LocationKernel(grid, params.rho)

    # -- densities ---------------------------------------------------------

    def initial_logpdf(self, states):
        return np.array([prior_logpdf(st, self.params, self.grid) for st in states])

    def auxiliary_logpdf(self, states):
        return self.initial_logpdf(states)

    def likelihood_logpdf(self, datum, states):
        return likelihood_logpdf_batch(datum, states, self.leadfield, self.params)

    def proposal_rates(self, n):
        """Branch rates of the exploration kernel; overridable for tests."""
        return self.params.importance_rates(n)

    def transition_logpdf(self, next_states, prev_states):
        return aligned_transition_logpdf(
            next_states, prev_states, self.params, self.kernel,
            lambda n: self.params.p_birth, self.params.death_probability,
        )

    def forward_proposal_logpdf(self, next_states, prev_states):
        return aligned_transition_logpdf(
            next_states, prev_states, self.params, self.kernel,
            lambda n: self.proposal_rates(n)[0], lambda n: self.proposal_rates(n)[1],
        )

    def backward_proposal_logpdf(self, prev_states, next_states):
        # the exploration kernel run backward: density of the proposed
        # earlier state given the later one
        return aligned_transition_logpdf(
            prev_states, next_states, self.params, self.kernel,
            lambda n: self.proposal_rates(n)[0], lambda n: self.proposal_rates(n)[1],
        )

    def pairwise_transition_logpdf(self, next_states, prev_states):
        return pairwise_transition_logpdf(
            next_states, prev_states, self.params, self.kernel,
            lambda n: self.params.p_birth, self.params.death_probability,
        )

    # -- samplers ----------------------------------------------------------

    def sample_initial(self, seedseq, n):
        return [
            sample_prior(default_rng(child), self.params, self.grid)
            for child in seedseq.spawn(n)
        ]

    def _propose(self, seedseq, states):
        out = []
        for child, st in zip(seedseq.spawn(len(states)), states):
            b, d = self.proposal_rates(st.n)
            out.append(
                sample_transition(default_rng(child), st, self.params, self.kernel, b, d)
            )
        return out

    def propose_forward(self, seedseq, states):
        return self._propose(seedseq, states)

    def propose_backward(self, seedseq, states):
        return self._propose(seedseq, states)
