"""Point estimates from particle clouds and the localization-error metric.

The dipole count is estimated as the mode of the weighted cardinality
histogram, locations as separated peaks of the intensity measure (the
expected number of dipoles per grid point), and moments as conditional
means at the estimated locations.

The localization error compares the estimated and true location sets with
an optimal-assignment distance that carries no cardinality penalty: the
smaller set is matched injectively into the larger one and the summed
distances are divided by the *estimated* count.  Time points where no
dipole is estimated yield no value and are excluded from curve averages.
The per-time error bar of a curve is the standard deviation of the
reconstructions divided by the number of runs that produced one; that
ratio is not a conventional standard error, but it is the convention the
curves in this package follow throughout.
"""

from __future__ import annotations

import csv
import itertools
from collections import Counter
from dataclasses import dataclass

import numpy as np


@dataclass
class PointEstimate:
    """Estimated dipole count, locations (grid indices) and moments."""

    n_hat: int
    locations: tuple
    moments: np.ndarray  # (len(locations), 3)


def estimate_cardinality(cloud):
    """Mode of the posterior dipole-count distribution; ties go to fewer."""
    if not cloud.normalized:
        raise ValueError("estimate_cardinality needs a normalized cloud")
    counts = np.array([st.n for st in cloud.particles])
    hist = np.zeros(int(counts.max()) + 1 if len(counts) else 1)
    np.add.at(hist, counts, cloud.weights)
    return int(np.argmax(hist))


def intensity_map(cloud, grid):
    """Expected number of dipoles at each grid point under the cloud.

    The map sums to the posterior mean cardinality.
    """
    if not cloud.normalized:
        raise ValueError("intensity_map needs a normalized cloud")
    out = np.zeros(len(grid))
    for st, w in zip(cloud.particles, cloud.weights):
        if st.n:
            np.add.at(out, st.locations(), w)
    return out


def estimate_locations(intensity, n_hat, grid, min_separation=None):
    """Greedy separated peaks of an intensity map.

    Scans grid points by decreasing intensity (ties to the lower index) and
    keeps a point when it lies at least ``min_separation`` from every point
    already kept, until ``n_hat`` peaks are found or the positive support
    is exhausted.  Default separation is twice the grid spacing.
    """
    if n_hat <= 0:
        return []
    if min_separation is None:
        min_separation = 2.0 * grid.spacing
    order = np.argsort(-np.asarray(intensity), kind="stable")
    chosen = []
    for idx in order:
        if intensity[idx] <= 0.0:
            break
        p = grid.points[idx]
        if all(
            np.linalg.norm(p - grid.points[j]) >= min_separation for j in chosen
        ):
            chosen.append(int(idx))
            if len(chosen) == n_hat:
                break
    return chosen


def estimate_moment(cloud, location):
    """Conditional mean moment at a grid point (zero if nothing is there)."""
    if not cloud.normalized:
        raise ValueError("estimate_moment needs a normalized cloud")
    total = np.zeros(3)
    mass = 0.0
    for st, w in zip(cloud.particles, cloud.weights):
        for d in st.dipoles:
            if d.grid_index == location:
                total += w * d.moment
                mass += w
    if mass == 0.0:
        return np.zeros(3)
    return total / mass


def point_estimate(cloud, grid, min_separation=None):
    """Full point estimate: count, separated peak locations, moments."""
    n_hat = estimate_cardinality(cloud)
    locs = estimate_locations(intensity_map(cloud, grid), n_hat, grid, min_separation)
    moments = np.array([estimate_moment(cloud, g) for g in locs]).reshape(len(locs), 3)
    return PointEstimate(n_hat, tuple(locs), moments)


def localization_error(truth, estimate, grid):
    """Assignment distance between true and estimated locations, in meters.

    Exhaustive over injections of the smaller set into the larger; the sum
    of matched distances is divided by the estimated count.  Returns None
    when either side is empty (no reconstruction to score).
    """
    n_true = truth.n
    est_locs = list(estimate.locations)
    n_est = len(est_locs)
    if n_est == 0 or n_true == 0:
        return None
    true_pts = grid.points[truth.locations()]
    est_pts = grid.points[np.asarray(est_locs, dtype=np.intp)]
    dist = np.linalg.norm(est_pts[:, None, :] - true_pts[None, :, :], axis=2)
    if n_est <= n_true:
        best = min(
            dist[np.arange(n_est), list(pi)].sum()
            for pi in itertools.permutations(range(n_true), n_est)
        )
    else:
        best = min(
            dist[list(pi), np.arange(n_true)].sum()
            for pi in itertools.permutations(range(n_est), n_true)
        )
    return float(best) / n_est


def run_point_estimates(run, grid, min_separation=None):
    """Per-time point estimates from a filter or smoothing run."""
    return [point_estimate(c, grid, min_separation) for c in run.clouds]


def error_curve_from_estimates(estimates_per_run, truth_states_per_run, grid):
    """Aggregate per-run localization errors into a per-time curve.

    Returns (mean, bar, count) arrays; mean is NaN where no run produced a
    reconstruction, and bar is the standard deviation divided by the
    reconstruction count.
    """
    horizons = {len(e) for e in estimates_per_run}
    if len(horizons) != 1:
        raise ValueError("runs have differing horizons")
    T = horizons.pop()
    mean = np.full(T, np.nan)
    bar = np.full(T, np.nan)
    count = np.zeros(T, dtype=int)
    for t in range(T):
        errs = []
        for ests, states in zip(estimates_per_run, truth_states_per_run):
            e = localization_error(states[t], ests[t], grid)
            if e is not None:
                errs.append(e)
        count[t] = len(errs)
        if errs:
            mean[t] = float(np.mean(errs))
            bar[t] = float(np.std(errs)) / len(errs)
    return mean, bar, count


def error_curve(runs, truths, grid, min_separation=None):
    """Per-time (mean, bar, count) of the localization error over runs."""
    estimates = [run_point_estimates(r, grid, min_separation) for r in runs]
    states = [tr.states for tr in truths]
    return error_curve_from_estimates(estimates, states, grid)


def write_curves_csv(path, filter_curve, smoother_curve, tag_mode):
    """Write the per-time error curves of one simulation group.

    ``filter_curve`` and ``smoother_curve`` are (mean, bar, count) triples;
    ``tag_mode`` is the per-time modal smoothing-variant tag.  Rows with a
    zero count leave the mean and bar fields empty.
    """
    f_mean, f_bar, f_count = filter_curve
    s_mean, s_bar, s_count = smoother_curve
    T = len(f_mean)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "t",
                "mean_filter", "bar_filter", "count_filter",
                "mean_smoother", "bar_smoother", "count_smoother",
                "variant_tag_mode",
            ]
        )
        for t in range(T):
            row = [t + 1]
            for mean, bar_, cnt in ((f_mean, f_bar, f_count), (s_mean, s_bar, s_count)):
                if cnt[t] > 0:
                    row += [repr(float(mean[t])), repr(float(bar_[t])), int(cnt[t])]
                else:
                    row += ["", "", 0]
            row.append(tag_mode[t])
            writer.writerow(row)


def modal_tag(tags_per_run, t):
    """Most common variant tag at time t across runs (ties alphabetical)."""
    counter = Counter(tags[t] for tags in tags_per_run)
    best = max(sorted(counter), key=lambda k: counter[k])
    return best
