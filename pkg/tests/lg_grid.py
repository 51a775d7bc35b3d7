"""Grid-integration Bayes oracle for the scalar linear-Gaussian model.

Discretizes the state on a fine regular grid and performs the filtering
and smoothing recursions by explicit summation.  Truncation and
quadrature errors are far below 1e-6 for the ranges used here, so this is
a hard check on the closed-form recursions.
"""

import numpy as np


def grid_filter_smoother(model, data, half_width=12.0, n=2001):
    a, q = model.transition_coef, model.transition_std
    c, r = model.observation_coef, model.observation_std
    xs = np.linspace(model.prior_mean - half_width, model.prior_mean + half_width, n)

    def normal(x, mean, std):
        return np.exp(-0.5 * ((x - mean) / std) ** 2) / (std * np.sqrt(2 * np.pi))

    prior = normal(xs, model.prior_mean, model.prior_std)
    prior /= prior.sum()
    trans = normal(xs[None, :], a * xs[:, None], q)
    trans /= trans.sum(axis=1, keepdims=True)

    T = len(data)
    pred = np.zeros((T, n))
    filt = np.zeros((T, n))
    p = prior
    for t in range(T):
        pred[t] = p
        lik = normal(data[t], c * xs, r)
        w = p * lik
        filt[t] = w / w.sum()
        p = filt[t] @ trans

    beta = np.zeros((T, n))
    beta[T - 1] = normal(data[T - 1], c * xs, r)
    for t in range(T - 2, -1, -1):
        beta[t] = normal(data[t], c * xs, r) * (trans @ beta[t + 1])
        beta[t] /= beta[t].max()  # rescale to avoid underflow

    smooth = pred * beta
    smooth /= smooth.sum(axis=1, keepdims=True)

    def moments(pmf):
        mean = pmf @ xs
        var = pmf @ xs**2 - mean**2
        return mean, var

    filt_mean, filt_var = zip(*[moments(filt[t]) for t in range(T)])
    smooth_mean, smooth_var = zip(*[moments(smooth[t]) for t in range(T)])
    return (
        np.array(filt_mean), np.array(filt_var),
        np.array(smooth_mean), np.array(smooth_var),
    )
