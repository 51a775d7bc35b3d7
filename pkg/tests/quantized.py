"""A fully enumerable miniature of the dipole transition kernel.

Locations live on a tiny grid and moments are quantized to a small table
of vectors, so every multiset state can be listed and the transition
kernel summed exactly.  The kernel reuses the production combinatorics
(branch mixture, assignment sums, multiplicity corrections) with discrete
per-item ingredients: the location walk is the production location
kernel, the moment walk is the continuous Gaussian step renormalized over
the moment table, and the birth moment pmf is the continuous birth
density renormalized over the table.
"""

import itertools
import math

import numpy as np

from dipolesmooth.model import (
    multiset_transition_logpdf,
    sample_multiset_transition,
)


class QuantizedDipoleModel:
    def __init__(self, kernel, moment_table, params, n_max=3):
        self.kernel = kernel
        self.n_grid = len(kernel.rows)
        self.moments = np.asarray(moment_table, dtype=float)
        self.n_moments = len(self.moments)
        self.params = params
        self.n_max = n_max
        self.atoms = [
            (g, a) for g in range(self.n_grid) for a in range(self.n_moments)
        ]

        strengths = np.linalg.norm(self.moments, axis=1)
        stds = np.maximum(params.moment_walk_factor * strengths, params.moment_step_floor)
        diff2 = np.sum(
            (self.moments[None, :, :] - self.moments[:, None, :]) ** 2, axis=2
        )
        logw = -1.5 * np.log(2 * math.pi * stds**2)[:, None] - diff2 / (
            2 * stds**2
        )[:, None]
        self.log_moment_move = logw - _logsumexp_rows(logw)

        q_min, q_max = params.strength_bounds
        birth = -3.0 * np.log(strengths)
        birth[(strengths < q_min) | (strengths > q_max)] = -np.inf
        self.log_moment_birth = birth - _logsumexp_rows(birth[None, :])[0]
        self._birth_cdf = np.cumsum(np.exp(self.log_moment_birth))
        self._move_cdf = np.cumsum(np.exp(self.log_moment_move), axis=1)

    # per-item ingredients -------------------------------------------------

    def move_logpdf(self, nxt, prev):
        return float(
            self.kernel.log_prob(prev[0], nxt[0])
            + self.log_moment_move[prev[1], nxt[1]]
        )

    def birth_logpdf(self, item):
        return float(-math.log(self.n_grid) + self.log_moment_birth[item[1]])

    def sample_move(self, rng, item):
        g = self.kernel.sample(rng, item[0])
        a = int(np.searchsorted(self._move_cdf[item[1]], rng.random(), side="right"))
        return (g, a)

    def sample_birth(self, rng):
        g = int(rng.integers(self.n_grid))
        a = int(np.searchsorted(self._birth_cdf, rng.random(), side="right"))
        return (g, a)

    # kernel ---------------------------------------------------------------

    def transition_logpdf(self, next_items, prev_items, birth_rate, death_rate):
        return multiset_transition_logpdf(
            next_items, prev_items, birth_rate, death_rate, self.n_max,
            self.move_logpdf, self.birth_logpdf,
        )

    def sample_transition(self, rng, prev_items, birth_rate, death_rate):
        return tuple(
            sorted(
                sample_multiset_transition(
                    rng, prev_items, birth_rate, death_rate, self.n_max,
                    self.sample_move, self.sample_birth,
                )
            )
        )

    def enumerate_states(self):
        """Every multiset of atoms with cardinality up to n_max."""
        out = []
        for n in range(self.n_max + 1):
            out.extend(itertools.combinations_with_replacement(self.atoms, n))
        return out


def _logsumexp_rows(a):
    m = np.max(a, axis=1, keepdims=True)
    return m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True))
