"""
LP orthonormal score functions and the per-partition LP statistic.

Score functions are polynomials in the mid-distribution rank of a variable,
orthonormalised against the empirical measure, so the same construction
serves continuous, discrete, binary and ordinal data.
"""

import logging

import numpy as np
from scipy.stats import rankdata

from errors import DataValidationError
from models.metalp import DataType, MixedColumn, ScoreBasis, SubpopSummary

logger = logging.getLogger('metalp.lp_core')

DEFAULT_M = 4
M_CAPPED_WARNING = 'm is not less than the number of distinct value of x'


def mid_distribution_ranks(x):
    """Empirical mid-distribution transform u = (average rank - 0.5) / n"""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DataValidationError('empty column')
    return (rankdata(x, method='average') - 0.5) / x.size


def build_score_basis(x, m_requested=DEFAULT_M):
    """
    Orthonormal LP score columns T_1..T_m of x.

    Columns come from a QR factorisation of the centred power basis in u,
    signed so that T_j has a positive leading coefficient (T_1 increases with
    x), then standardised to mean 0 and unit sample standard deviation.
    """
    if m_requested < 1:
        raise DataValidationError(f"m must be at least 1, got {m_requested}")
    x = np.asarray(x, dtype=float)
    u = mid_distribution_ranks(x)
    distinct_count = int(np.unique(x).size)
    m_effective = min(m_requested, distinct_count - 1)

    if m_effective <= 0:
        return ScoreBasis(m_effective=0, columns=np.empty((x.size, 0)),
                          distinct_count=distinct_count, m_requested=m_requested)

    if m_effective < m_requested:
        logger.debug(f"{M_CAPPED_WARNING}: using m={m_effective} instead of {m_requested}")

    powers = np.vander(u - u.mean(), m_effective + 1, increasing=True)
    q, r = np.linalg.qr(powers)
    scores = q[:, 1:] * np.sign(np.diag(r)[1:])

    scores = scores - scores.mean(axis=0)
    scores = scores / scores.std(axis=0, ddof=1)
    return ScoreBasis(m_effective=m_effective, columns=scores,
                      distinct_count=distinct_count, m_requested=m_requested)


def binary_t1(y):
    """First LP score of a binary variable: -sqrt(p/(1-p)) for 0, sqrt((1-p)/p) for 1"""
    y = np.asarray(y, dtype=float)
    levels = np.unique(y)
    if levels.size != 2:
        raise DataValidationError('degenerate response')
    ones = y == levels[1]
    p = ones.mean()
    return np.where(ones, np.sqrt((1.0 - p) / p), -np.sqrt(p / (1.0 - p)))


def lp_statistics(x, y, m_requested=DEFAULT_M, partition_id=0):
    """
    LP[j; X, Y] for j = 1..m on one partition.

    Rows with x missing are dropped for this variable only. A constant x or a
    constant y after dropping gives a degenerate summary (lp = 0, n_eff = 0).
    """
    if not isinstance(x, MixedColumn):
        x = MixedColumn('x', x)
    if not isinstance(y, MixedColumn):
        y = MixedColumn('y', y, DataType.BINARY)
    if len(x) != len(y):
        raise DataValidationError(
            f"Column '{x.name}' has {len(x)} rows but response has {len(y)}", column=x.name)
    if y.declared_type != DataType.BINARY:
        raise DataValidationError(f"Response '{y.name}' must be declared binary", column=y.name)

    keep = ~(x.missing_mask | y.missing_mask)
    xv = x.values[keep]
    yv = y.values[keep]

    degenerate = SubpopSummary(partition_id=partition_id, variable=x.name,
                               lp=(0.0,) * m_requested, n_eff=0, degenerate=True,
                               m_requested=m_requested)
    if xv.size == 0 or np.unique(xv).size <= 1 or np.unique(yv).size <= 1:
        return degenerate

    basis = build_score_basis(xv, m_requested)
    n = xv.size
    centred = yv - yv.mean()
    lp = basis.columns.T @ centred / ((n - 1) * yv.std(ddof=1))
    lp = np.clip(lp, -1.0, 1.0)

    return SubpopSummary(partition_id=partition_id, variable=x.name,
                         lp=tuple(float(v) for v in lp), n_eff=int(n),
                         m_requested=m_requested,
                         warning=M_CAPPED_WARNING if basis.truncated else None)


def phi_coefficient(n11, n10, n01, n00):
    """Phi coefficient of a 2x2 table; n_xy counts rows with X=x, Y=y"""
    n1_ = n11 + n10
    n0_ = n01 + n00
    n_1 = n11 + n01
    n_0 = n10 + n00
    return (n11 * n00 - n10 * n01) / np.sqrt(float(n1_) * n0_ * n_1 * n_0)
