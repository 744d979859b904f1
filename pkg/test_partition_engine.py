import os
import sys
import json

import numpy as np
import pytest

# Add the src directory to the Python path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from errors import DataValidationError
from models.metalp import MixedColumn, PartitionScheme
from partition_engine import (GENERATOR_NAME, partition_rows, plan_by_column, plan_random,
                              row_partitions, subpop_count)


@pytest.mark.parametrize('n,gamma,expected', [(50000, 0.4, 76), (1, 0.3, 1), (1000000, 0.5, 1000)])
def test_subpop_count(n, gamma, expected):
    assert subpop_count(n, gamma) == expected


def test_subpop_count_rejects_empty():
    with pytest.raises(DataValidationError):
        subpop_count(0, 0.4)


class TestRandomPlan:
    def test_single_partition(self):
        plan = plan_random(['a', 'b', 'c'], 1, seed=5)
        assert set(plan.assignment.values()) == {0}

    def test_balanced_within_binomial_bounds(self):
        plan = plan_random(range(10000), 10, seed=42)
        counts = np.bincount(list(plan.assignment.values()), minlength=10)
        assert np.all(np.abs(counts - 1000) <= 150)

    def test_same_inputs_same_plan(self):
        keys = [f'session-{i}' for i in range(500)]
        assert plan_random(keys, 7, seed=3).assignment == plan_random(keys, 7, seed=3).assignment

    def test_seed_changes_plan(self):
        keys = list(range(500))
        assert plan_random(keys, 7, seed=3).assignment != plan_random(keys, 7, seed=4).assignment

    def test_records_generator(self):
        plan = plan_random(range(10), 3, seed=9)
        assert plan.scheme == PartitionScheme.RANDOM
        assert plan.seed == 9
        assert plan.generator == GENERATOR_NAME

    def test_groups_stay_together(self):
        rng = np.random.default_rng(0)
        keys = rng.integers(0, 300, size=3000)
        plan = plan_random(keys, 12, seed=1)
        labels = row_partitions(plan, keys)
        for key in np.unique(keys):
            assert np.unique(labels[keys == key]).size == 1

    def test_rows_form_a_partition(self):
        keys = np.arange(1000)
        plan = plan_random(keys, 9, seed=2)
        rows = partition_rows(plan, keys)
        combined = np.sort(np.concatenate(rows))
        np.testing.assert_array_equal(combined, keys)
        assert sum(len(r) for r in rows) == 1000

    def test_k_must_be_positive(self):
        with pytest.raises(DataValidationError):
            plan_random([1, 2], 0)

    def test_unknown_key(self):
        plan = plan_random(['a', 'b'], 2)
        with pytest.raises(DataValidationError):
            row_partitions(plan, ['a', 'z'])


class TestColumnPlan:
    def test_constant_column(self):
        plan = plan_by_column(np.array(['x'] * 20, dtype=object))
        assert plan.k == 1

    def test_one_partition_per_value(self):
        values = np.array(['B', 'A', 'C', 'A', 'B'], dtype=object)
        plan = plan_by_column(values, name='site')
        assert plan.k == 3
        assert plan.assignment == {'A': 0, 'B': 1, 'C': 2}
        assert plan.column == 'site'
        assert list(row_partitions(plan, values)) == [1, 0, 2, 0, 1]

    def test_numeric_values_sort_numerically(self):
        plan = plan_by_column(MixedColumn('country', [10.0, 2.0, 2.0, 33.0]))
        assert plan.column == 'country'
        assert plan.assignment == {2: 0, 10: 1, 33: 2}

    def test_missing_values_get_last_partition(self):
        values = np.array([1.0, np.nan, 2.0, np.nan], dtype=float)
        plan = plan_by_column(values)
        assert plan.k == 3
        rows = partition_rows(plan, values)
        np.testing.assert_array_equal(rows[2], [1, 3])

    def test_skewed_column(self):
        values = np.array([207] * 500 + list(range(500)), dtype=object)
        plan = plan_by_column(values)
        sizes = plan.sizes(values)
        assert sizes.max() == 501
        assert sizes.sum() == 1000

    def test_all_missing(self):
        with pytest.raises(DataValidationError):
            plan_by_column(np.array([np.nan, np.nan]))


def test_plan_serialises_to_json():
    plan = plan_random(['s1', 's2', 's3'], 2, seed=11)
    document = json.loads(plan.to_json())
    assert document['scheme'] == 'random'
    assert document['k'] == 2
    assert document['seed'] == 11
    assert document['generator'] == GENERATOR_NAME
    assert set(document['assignment']) == {'s1', 's2', 's3'}


def test_missing_key_serialises_as_na():
    plan = plan_by_column(np.array([1.0, np.nan]))
    assert json.loads(plan.to_json())['assignment'] == {'1': 0, 'NA': 1}
