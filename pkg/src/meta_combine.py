"""
Meta reducer: combine per-partition LP confidence distributions.

Each partition contributes an asymptotic CD N(lp_l, 1/n_l). Fixed effects
weight by n_l; random effects weight by (tau^2 + 1/n_l)^-1 with tau^2 from
DerSimonian-Laird or an iterative REML update.
"""

import logging
import math

import numpy as np
from scipy.stats import norm

from errors import ConvergenceError, DataValidationError
from models.metalp import CombineMethod, CombinedCD, HeterogeneityReport, SubpopSummary

logger = logging.getLogger('metalp.meta_combine')

SEVERE_I2 = 0.40
REML_TOL = 1e-10
REML_MAX_ITER = 100000


def gather_effects(summaries, order=1):
    """
    Usable (estimate, size) arrays in a canonical order.

    Accepts SubpopSummary records (sorted by partition_id) or plain
    (estimate, n) pairs (sorted by value). Partitions with n = 0 are dropped.
    """
    summaries = list(summaries)
    if summaries and all(isinstance(s, SubpopSummary) for s in summaries):
        ordered = sorted(summaries, key=lambda s: s.partition_id)
        pairs = [(s.estimate_for(order), s.size_for(order)) for s in ordered]
    else:
        pairs = sorted((float(est), int(n)) for est, n in summaries)
    pairs = [(est, n) for est, n in pairs if n > 0]
    estimates = np.array([est for est, _ in pairs], dtype=float)
    sizes = np.array([n for _, n in pairs], dtype=float)
    return estimates, sizes


def _require_usable(estimates):
    if estimates.size == 0:
        raise DataValidationError('no usable partitions')


def _q_statistic(estimates, weights, mean):
    return float(np.sum(weights * (estimates - mean) ** 2))


def cochran_q(summaries, combined_mean, weights, order=1):
    """Q = sum w_l (lp_l - combined_mean)^2 over partitions with n_l > 0"""
    summaries = list(summaries)
    weights = np.asarray(weights, dtype=float)
    if len(summaries) != weights.size:
        raise DataValidationError('weights must align with summaries')
    if summaries and all(isinstance(s, SubpopSummary) for s in summaries):
        pairs = [(s.estimate_for(order), s.size_for(order)) for s in summaries]
    else:
        pairs = [(float(est), int(n)) for est, n in summaries]
    estimates = np.array([est for est, _ in pairs], dtype=float)
    usable = np.array([n > 0 for _, n in pairs], dtype=bool)
    if not usable.any():
        return 0.0
    return _q_statistic(estimates[usable], weights[usable], combined_mean)


def i_squared(q, k_eff):
    """I^2 = max(0, (Q - (k - 1)) / Q), 0 when Q = 0"""
    if k_eff < 1:
        raise DataValidationError(f"k_eff must be at least 1, got {k_eff}")
    if q <= 0:
        return 0.0
    return max(0.0, (q - (k_eff - 1)) / q)


def heterogeneity(q, k_eff):
    i2 = i_squared(q, k_eff)
    return HeterogeneityReport(q=q, i2=i2, severe=i2 > SEVERE_I2)


def _fixed_mean(estimates, sizes):
    return float(np.sum(sizes * estimates) / np.sum(sizes))


def _dl_from_arrays(estimates, sizes):
    k = estimates.size
    if k < 2:
        return 0.0
    q = _q_statistic(estimates, sizes, _fixed_mean(estimates, sizes))
    total = np.sum(sizes)
    denom = total - np.sum(sizes ** 2) / total
    if denom <= 0:
        return 0.0
    return max(0.0, (q - (k - 1)) / denom)


def combine_fixed(summaries, order=1):
    """Fixed-effects CD: mean = sum n_l lp_l / sum n_l, variance = 1 / sum n_l"""
    estimates, sizes = gather_effects(summaries, order)
    _require_usable(estimates)
    k = estimates.size

    if k == 1:
        logger.warning('Only one usable partition; returning its confidence distribution unchanged')
        return CombinedCD(mean=float(estimates[0]), variance=1.0 / sizes[0],
                          method=CombineMethod.FIXED, k_eff=1,
                          warning='single usable partition')

    mean = _fixed_mean(estimates, sizes)
    q = _q_statistic(estimates, sizes, mean)
    return CombinedCD(mean=mean, variance=float(1.0 / np.sum(sizes)),
                      method=CombineMethod.FIXED, tau2=0.0, q=q, k_eff=k,
                      i2_pre=i_squared(q, k))


def tau2_dl(summaries, order=1):
    """DerSimonian-Laird tau^2 with s_l^2 = 1/n_l, truncated at 0"""
    estimates, sizes = gather_effects(summaries, order)
    if estimates.size < 2:
        logger.warning('Fewer than two usable partitions; heterogeneity is not identifiable, tau2 = 0')
        return 0.0
    return _dl_from_arrays(estimates, sizes)


def _reml_update(estimates, sizes, tau2):
    k = estimates.size
    weights = 1.0 / (1.0 / sizes + tau2)
    theta = np.sum(weights * estimates) / np.sum(weights)
    w2 = weights ** 2
    excess = (k / (k - 1.0)) * (estimates - theta) ** 2 - 1.0 / sizes
    return max(0.0, float(np.sum(w2 * excess) / np.sum(w2)))


def tau2_reml(summaries, tol=REML_TOL, max_iter=REML_MAX_ITER, order=1):
    """
    Iterative REML tau^2 started at the DL estimate.

    Each iterate is truncated at zero before the next weight update, so the
    weights stay positive for any partition sizes.
    """
    estimates, sizes = gather_effects(summaries, order)
    if estimates.size < 2:
        logger.warning('Fewer than two usable partitions; heterogeneity is not identifiable, tau2 = 0')
        return 0.0

    tau2 = _dl_from_arrays(estimates, sizes)
    for _ in range(max_iter):
        updated = _reml_update(estimates, sizes, tau2)
        if abs(updated - tau2) <= tol:
            return updated
        tau2 = updated
    raise ConvergenceError('REML did not converge')


def combine_random(summaries, tau2, order=1, method=CombineMethod.DL):
    """
    Random-effects CD with weights (tau^2 + 1/n_l)^-1.

    i2_post uses the shrunken estimates lambda_l * mean + (1 - lambda_l) * lp_l,
    lambda_l = (1/n_l) / (tau^2 + 1/n_l), in the Q statistic.
    """
    if tau2 < 0:
        raise DataValidationError(f"tau2 must be non-negative, got {tau2}")
    method = CombineMethod.parse(method)
    estimates, sizes = gather_effects(summaries, order)
    _require_usable(estimates)
    k = estimates.size

    if k == 1:
        logger.warning('Only one usable partition; returning its confidence distribution unchanged')
        return CombinedCD(mean=float(estimates[0]), variance=1.0 / sizes[0], method=method,
                          tau2=0.0, k_eff=1, i2_post=0.0, warning='single usable partition')

    q_pre = _q_statistic(estimates, sizes, _fixed_mean(estimates, sizes))

    variances = 1.0 / sizes
    # tau2 = 0 reproduces the fixed-effects weights exactly
    weights = sizes if tau2 == 0 else 1.0 / (tau2 + variances)
    mean = float(np.sum(weights * estimates) / np.sum(weights))
    shrink = variances / (tau2 + variances)
    shrunken = shrink * mean + (1.0 - shrink) * estimates
    q_post = _q_statistic(shrunken, weights, mean)

    return CombinedCD(mean=mean, variance=float(1.0 / np.sum(weights)), method=method,
                      tau2=float(tau2), q=q_pre, k_eff=k,
                      i2_pre=i_squared(q_pre, k), i2_post=i_squared(q_post, k))


def combine(summaries, method=CombineMethod.REML, order=1, tol=REML_TOL, max_iter=REML_MAX_ITER):
    """Run the reducer for one (variable, order) with the chosen method"""
    method = CombineMethod.parse(method)
    if method == CombineMethod.FIXED:
        return combine_fixed(summaries, order)
    summaries = list(summaries)
    if method == CombineMethod.DL:
        tau2 = tau2_dl(summaries, order)
    else:
        tau2 = tau2_reml(summaries, tol=tol, max_iter=max_iter, order=order)
    return combine_random(summaries, tau2, order, method=method)


def cd_interval(cd, level=0.95):
    """Central interval mean -/+ z_{(1+level)/2} * sqrt(variance)"""
    if not 0.0 < level < 1.0:
        raise DataValidationError(f"level must lie in (0, 1), got {level}")
    half = norm.ppf((1.0 + level) / 2.0) * math.sqrt(cd.variance)
    return cd.mean - half, cd.mean + half


def cd_pvalue(cd, c=0.0):
    """CD mass on H0 support (-inf, c]: H(c) = Phi((c - mean) / sqrt(variance))"""
    return float(norm.cdf((c - cd.mean) / math.sqrt(cd.variance)))


def cd_pvalue_two_sided(cd, c=0.0):
    lower = cd_pvalue(cd, c)
    return min(1.0, 2.0 * min(lower, 1.0 - lower))
