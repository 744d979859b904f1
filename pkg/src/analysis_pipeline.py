"""
End-to-end MetaLP analysis: plan -> map (LP statistics per partition) ->
reduce (meta-combine per variable and order) -> rank.
"""

import logging
import time
from typing import List

import numpy as np

import meta_combine
from errors import DataValidationError
from lp_core import lp_statistics
from models.metalp import AnalysisConfig, AnalysisReport, DataType, OrderResult, VariableResult
from partition_engine import partition_rows, plan_by_column, plan_random, subpop_count
from worker_pool import SerialController, make_controller

logger = logging.getLogger('metalp.analysis_pipeline')


def validate_target(dataset):
    target = dataset.target
    if target.declared_type != DataType.BINARY:
        raise DataValidationError(f"Target '{target.name}' must be declared binary", column=target.name)
    levels = np.unique(target.values[~target.missing_mask])
    if levels.size != 2:
        raise DataValidationError(
            f"Target '{target.name}' must take exactly two values, found {levels.size}",
            column=target.name)


def build_plan(dataset, config):
    """Partition plan plus the per-row keys it is defined over"""
    if config.partition_by is not None:
        keys = dataset.grouping_values(config.partition_by)
        return plan_by_column(keys, name=config.partition_by), keys

    if config.group_by is not None:
        keys = dataset.grouping_values(config.group_by)
    else:
        keys = np.arange(dataset.n_rows)

    if config.partitions is not None:
        k = config.partitions
    elif config.gamma is not None:
        k = subpop_count(dataset.n_rows, config.gamma)
    else:
        k = 1
    return plan_random(keys, k, config.seed), keys


def map_partition(task):
    """Mapper: LP statistics of every predictor on one partition's rows"""
    partition_id, columns, target, m_values = task
    return [lp_statistics(column, target, m, partition_id=partition_id)
            for column, m in zip(columns, m_values)]


def run_map_stage(dataset, plan, config, keys=None, controller=None):
    """
    k x p matrix of SubpopSummary, rows ordered by partition_id.

    The result does not depend on the controller or its worker count.
    """
    validate_target(dataset)
    if keys is None:
        keys = np.arange(dataset.n_rows)
    m_values = [config.m_for(name) for name in dataset.predictor_names]

    tasks = []
    for partition_id, rows in enumerate(partition_rows(plan, keys)):
        tasks.append((partition_id,
                      [column.subset(rows) for column in dataset.columns],
                      dataset.target.subset(rows),
                      m_values))

    controller = controller or make_controller(config.worker_count)
    with controller:
        summaries = controller.map(map_partition, tasks)
    logger.info(f"Map stage: {len(tasks)} partitions x {len(m_values)} predictors")
    return summaries


def summaries_for(summaries, variable_index):
    return [row[variable_index] for row in summaries]


def reduce_variable(column_summaries, config):
    """Combine one variable over partitions, order by order"""
    variable = column_summaries[0].variable
    capped = sum(1 for s in column_summaries if s.warning)
    if capped:
        logger.warning(f"{variable}: m capped by the number of distinct values in {capped} partition(s)")

    max_order = max(len(s.lp) for s in column_summaries)
    result = VariableResult(variable=variable)
    for order in range(1, max_order + 1):
        if not any(s.size_for(order) > 0 for s in column_summaries):
            continue
        cd = meta_combine.combine(column_summaries, config.method, order=order)
        low, high = meta_combine.cd_interval(cd, config.ci_level)
        result.orders.append(OrderResult(
            order=order, lp=cd.mean, se=cd.se, ci_low=low, ci_high=high,
            p_value=meta_combine.cd_pvalue_two_sided(cd, 0.0),
            q=cd.q, i2_pre=cd.i2_pre, i2_post=cd.i2_post, tau2=cd.tau2, k_eff=cd.k_eff))

    if not result.orders:
        logger.warning(f"{variable}: degenerate in every partition, marked untestable")
        result.untestable = True
    return result


def run_reduce_stage(summaries, config) -> List[VariableResult]:
    """One VariableResult per predictor, in predictor order"""
    if not summaries:
        raise DataValidationError('no partitions to reduce')
    p = len(summaries[0])
    return [reduce_variable(summaries_for(summaries, i), config) for i in range(p)]


def rank_variables(results):
    """Testable results by descending max_j |lp|, ties broken by name; ranks start at 1"""
    testable = [r for r in results if not r.untestable]
    if not testable:
        raise DataValidationError('no testable variables to rank')
    ranked = sorted(testable, key=lambda r: (-r.max_abs_lp, r.variable))
    for rank, result in enumerate(ranked, start=1):
        result.rank = rank
    return ranked


def run_analysis(dataset, config, controller=None):
    config.validate()
    validate_target(dataset)
    plan, keys = build_plan(dataset, config)
    summaries = run_map_stage(dataset, plan, config, keys=keys, controller=controller)
    results = run_reduce_stage(summaries, config)
    ranked = rank_variables(results)
    return AnalysisReport(
        config=config,
        n_rows=dataset.n_rows,
        plan_scheme=plan.scheme,
        k=plan.k,
        partition_sizes=[int(rows.size) for rows in partition_rows(plan, keys)],
        ranked=ranked,
        untestable=[r.variable for r in results if r.untestable])


def full_data_statistics(dataset, config):
    """Oracle: LP statistics on the whole dataset as a single sample"""
    return [lp_statistics(column, dataset.target, config.m_for(column.name))
            for column in dataset.columns]


def robustness_sweep(dataset, config, partition_counts, controller=None):
    """Re-run the analysis on random plans with different k over the same data"""
    reports = {}
    for k in partition_counts:
        sweep_config = AnalysisConfig(**{**config.__dict__, 'partitions': k, 'gamma': None,
                                         'partition_by': None})
        reports[k] = run_analysis(dataset, sweep_config, controller=controller)
    return reports


def measure_map_speedup(dataset, config, controller=None):
    """
    Wall time of the map stage over the configured plan versus the map stage
    on a single partition. Timings are returned, never written to reports.
    """
    plan, keys = build_plan(dataset, config)
    single_config = AnalysisConfig(**{**config.__dict__, 'partitions': 1, 'gamma': None,
                                      'partition_by': None})
    single_plan, single_keys = build_plan(dataset, single_config)

    start = time.perf_counter()
    run_map_stage(dataset, single_plan, single_config, keys=single_keys,
                  controller=SerialController())
    single_seconds = time.perf_counter() - start

    start = time.perf_counter()
    run_map_stage(dataset, plan, config, keys=keys, controller=controller)
    distributed_seconds = time.perf_counter() - start

    speedup = single_seconds / distributed_seconds if distributed_seconds > 0 else float('inf')
    logger.info(f"Map stage: single={single_seconds:.3f}s k={plan.k}: {distributed_seconds:.3f}s "
                f"speedup={speedup:.2f}")
    return {'k': plan.k, 'single_seconds': single_seconds,
            'distributed_seconds': distributed_seconds, 'speedup': speedup}
