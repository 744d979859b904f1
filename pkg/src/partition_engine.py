"""
Reproducible partition plans: seeded random assignment of group keys, or one
partition per value of a grouping column.
"""

import logging
import math

import numpy as np
import pandas as pd

from errors import DataValidationError
from models.metalp import MixedColumn, PartitionPlan, PartitionScheme

logger = logging.getLogger('metalp.partition_engine')

GENERATOR_NAME = 'numpy.random.Philox'


def make_generator(seed):
    """Counter-based Philox stream; identical seeds reproduce across platforms"""
    return np.random.Generator(np.random.Philox(int(seed)))


def subpop_count(n, gamma):
    """k = floor(n^gamma + 0.5), at least 1"""
    if n < 1:
        raise DataValidationError(f"n must be at least 1, got {n}")
    return max(1, int(math.floor(n ** gamma + 0.5)))


def plan_random(group_keys, k, seed=0):
    """Assign each distinct key (in order of first appearance) uniformly to one of k partitions"""
    if k < 1:
        raise DataValidationError(f"k must be at least 1, got {k}")
    keys = pd.unique(pd.Series(list(group_keys), dtype=object))
    if len(keys) == 0:
        raise DataValidationError('no group keys to partition')

    if k == 1:
        labels = np.zeros(len(keys), dtype=np.int64)
    else:
        labels = make_generator(seed).integers(0, k, size=len(keys))

    assignment = {_plain(key): int(label) for key, label in zip(keys, labels)}
    plan = PartitionPlan(k=k, assignment=assignment, scheme=PartitionScheme.RANDOM,
                         seed=int(seed), generator=GENERATOR_NAME)
    logger.info(f"Random plan: {len(assignment)} keys into {k} partitions (seed={seed})")
    return plan


def plan_by_column(column, name=None):
    """One partition per distinct value (sorted); missing values get their own last partition"""
    if isinstance(column, MixedColumn):
        name, values = column.name, column.values
    else:
        values = np.asarray(column, dtype=object)

    series = pd.Series(values, dtype=object)
    missing = series.isna()
    present = series[~missing]
    if present.empty:
        raise DataValidationError(f"Grouping column '{name}' has no non-missing values", column=name)

    distinct = sorted(pd.unique(present), key=_sort_key)
    assignment = {_plain(value): pid for pid, value in enumerate(distinct)}
    k = len(distinct)
    if missing.any():
        assignment[float('nan')] = k
        k += 1

    logger.info(f"Column plan on '{name}': {k} partitions")
    return PartitionPlan(k=k, assignment=assignment, scheme=PartitionScheme.BY_COLUMN, column=name)


def row_partitions(plan, keys):
    """Partition id per row; missing keys map to the plan's missing partition"""
    keys = [_normalise_missing(_plain(key)) for key in keys]
    # NaN never equals itself, so reuse the plan's own NaN key object
    nan_key = next((key for key in plan.assignment if _is_missing(key)), None)
    if nan_key is not None:
        keys = [nan_key if _is_missing(key) else key for key in keys]
    return plan.partition_of(keys)


def partition_rows(plan, keys):
    """Row index arrays per partition id, in partition order"""
    labels = row_partitions(plan, keys)
    order = np.argsort(labels, kind='stable')
    bounds = np.searchsorted(labels[order], np.arange(plan.k + 1))
    return [order[bounds[pid]:bounds[pid + 1]] for pid in range(plan.k)]


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def _is_missing(value):
    return isinstance(value, float) and math.isnan(value) or value is None


def _normalise_missing(value):
    return float('nan') if value is None else value


def _sort_key(value):
    # numbers before text so mixed columns still sort deterministically
    if isinstance(value, (int, float, np.number)):
        return (0, float(value), '')
    return (1, 0.0, str(value))
