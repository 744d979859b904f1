"""
Small-data case studies and the synthetic logistic model.

- Admissions by gender across six departments: department-level LP
  statistics, meta-combined, against the pooled statistic (Simpson's paradox).
- Early-season batting averages: random-effects shrinkage on the arcsine scale
  compared with the James-Stein estimator.
- Simulated mixed-type predictors with a binary logistic response.
"""

import logging
import os
import time

import numpy as np
import pandas as pd
from scipy.special import expit

import meta_combine
from analysis_pipeline import (build_plan, full_data_statistics, run_analysis, run_map_stage,
                               summaries_for)
from errors import DataValidationError
from lp_core import lp_statistics
from models.metalp import (AnalysisConfig, BattingRecord, BerkeleyReport, CombineMethod,
                           CombinedCD, DataType, Dataset, DepartmentCounts, MixedColumn,
                           SimulationSpec, SteinReport)
from partition_engine import make_generator
from worker_pool import SerialController

logger = logging.getLogger('metalp.demo_studies')

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')
BERKELEY_CSV = os.path.join(DATA_DIR, 'berkeley_admissions.csv')
BATTING_CSV = os.path.join(DATA_DIR, 'batting_1970.csv')

TRUE_MODEL = ('X1', 'X2', 'X3')


def load_berkeley(path=BERKELEY_CSV):
    frame = pd.read_csv(path)
    return [DepartmentCounts(department=str(row.department), male_admit=int(row.male_admit),
                             male_total=int(row.male_total), female_admit=int(row.female_admit),
                             female_total=int(row.female_total))
            for row in frame.itertuples(index=False)]


def load_batting(path=BATTING_CSV):
    frame = pd.read_csv(path)
    return [BattingRecord(player=str(row.player), hits=int(row.hits), at_bats=int(row.at_bats),
                          remainder_avg=float(row.remainder_avg))
            for row in frame.itertuples(index=False)]


def expand_admissions(table):
    """Individual rows (male, admitted, department) from the count table; male = 1, admit = 1"""
    male, admitted, department = [], [], []
    for counts in table:
        blocks = [
            (1, 1, counts.male_admit),
            (1, 0, counts.male_total - counts.male_admit),
            (0, 1, counts.female_admit),
            (0, 0, counts.female_total - counts.female_admit),
        ]
        for is_male, is_admitted, count in blocks:
            male.extend([is_male] * count)
            admitted.extend([is_admitted] * count)
            department.extend([counts.department] * count)
    return Dataset(columns=[MixedColumn('male', male, DataType.BINARY)],
                   target=MixedColumn('admitted', admitted, DataType.BINARY),
                   extras={'department': np.array(department, dtype=object)})


def _single_cd(summary):
    return CombinedCD(mean=summary.lp[0], variance=1.0 / summary.n_eff,
                      method=CombineMethod.FIXED, k_eff=1)


def berkeley_analysis(method=CombineMethod.REML, table=None, ci_level=0.95):
    """
    Department CDs, their combination and the pooled-data CD.

    The p-value is the combined CD's mass on H0: LP <= 0 (no male preference).
    """
    method = CombineMethod.parse(method)
    table = table or load_berkeley()
    dataset = expand_admissions(table)
    config = AnalysisConfig(target='admitted', m=1, method=method, partition_by='department',
                            ci_level=ci_level)

    plan, keys = build_plan(dataset, config)
    summaries = summaries_for(run_map_stage(dataset, plan, config, keys=keys,
                                            controller=SerialController()), 0)
    names = {pid: department for department, pid in plan.assignment.items()}

    departments = []
    for summary in summaries:
        low, high = meta_combine.cd_interval(_single_cd(summary), ci_level)
        departments.append({'department': names[summary.partition_id], 'lp': summary.lp[0],
                            'n': summary.n_eff, 'ci_low': low, 'ci_high': high})

    aggregate = _single_cd(lp_statistics(dataset.columns[0], dataset.target, 1))
    combined = meta_combine.combine(summaries, method)
    report = BerkeleyReport(method=method, departments=departments,
                            aggregate=aggregate,
                            aggregate_ci=meta_combine.cd_interval(aggregate, ci_level),
                            combined=combined,
                            combined_ci=meta_combine.cd_interval(combined, ci_level),
                            p_value=meta_combine.cd_pvalue(combined, 0.0))
    logger.info(f"Admissions ({method.value}): combined lp={combined.mean:.4f}, "
                f"p={report.p_value:.3f}, pooled lp={aggregate.mean:.4f}")
    return report


def variance_stabilize(avg):
    """theta = arcsin(2 * avg - 1)"""
    avg = np.asarray(avg, dtype=float)
    if np.any((avg < 0.0) | (avg > 1.0)) or np.any(np.isnan(avg)):
        raise DataValidationError(f"average must lie in [0, 1], got {avg}")
    theta = np.arcsin(2.0 * avg - 1.0)
    return float(theta) if theta.ndim == 0 else theta


def inverse_stabilize(theta):
    mu = (np.sin(np.asarray(theta, dtype=float)) + 1.0) / 2.0
    return float(mu) if mu.ndim == 0 else mu


def james_stein(values, sigma2):
    """Positive-part James-Stein toward the grand mean, (k - 3) constant"""
    values = np.asarray(values, dtype=float)
    k = values.size
    if k < 4:
        raise DataValidationError('James-Stein toward the mean needs at least four groups')
    grand = values.mean()
    spread = np.sum((values - grand) ** 2)
    factor = 0.0 if spread == 0 else max(0.0, 1.0 - (k - 3) * sigma2 / spread)
    return grand + factor * (values - grand)


def _mse(estimates, truth):
    return float(np.sum((np.asarray(estimates) - np.asarray(truth)) ** 2))


def stein_shrinkage(records=None, js_scale='raw'):
    """
    Shrink arcsine-stabilised averages toward their random-effects mean.

    Each player is a partition with s^2 = 1 / at_bats; tau^2 is the DL
    estimate and lambda = (1/n) / (tau^2 + 1/n). The James-Stein comparator
    runs on raw averages (sigma^2 = pbar(1 - pbar)/n) or, with
    js_scale='arcsine', on the stabilised values (sigma^2 = 1/n).
    """
    if js_scale not in ('raw', 'arcsine'):
        raise DataValidationError(f"js_scale must be 'raw' or 'arcsine', got {js_scale!r}")
    records = records or load_batting()
    averages = np.array([r.average for r in records])
    sizes = np.array([r.at_bats for r in records], dtype=float)
    truth = np.array([r.remainder_avg for r in records])

    theta = variance_stabilize(averages)
    effects = list(zip(theta, sizes))
    tau2 = meta_combine.tau2_dl(effects)
    centre = meta_combine.combine_random(effects, tau2, method=CombineMethod.DL).mean
    shrink = (1.0 / sizes) / (tau2 + 1.0 / sizes)
    lp_estimates = inverse_stabilize(shrink * centre + (1.0 - shrink) * theta)

    if js_scale == 'raw':
        pbar = averages.mean()
        js_estimates = james_stein(averages, pbar * (1.0 - pbar) / sizes.mean())
    else:
        js_estimates = inverse_stabilize(james_stein(theta, 1.0 / sizes.mean()))

    mle_error = _mse(averages, truth)
    report = SteinReport(players=[r.player for r in records], mle=averages.tolist(),
                         remainder=truth.tolist(), lp_estimates=lp_estimates.tolist(),
                         js_estimates=js_estimates.tolist(), tau2=tau2,
                         shrinkage=float(shrink.mean()),
                         mse_ratio_lp=_mse(lp_estimates, truth) / mle_error,
                         mse_ratio_js=_mse(js_estimates, truth) / mle_error,
                         js_scale=js_scale)
    logger.info(f"Batting: tau2={tau2:.6f}, MSE ratio LP={report.mse_ratio_lp:.3f}, "
                f"JS={report.mse_ratio_js:.3f}")
    return report


def simulate_dataset(spec):
    """
    X1 ~ t(30), X2 ~ Poisson(2), X3 ~ Bernoulli(0.4), X4..Xp ~ N(0, 1);
    Y ~ Bernoulli(logistic(b1 X1^2 + b2 X2 + b3 X3)), drawn in that order
    from one Philox stream.
    """
    spec.validate()
    rng = make_generator(spec.seed)
    n = spec.n
    x1 = rng.standard_t(30, size=n)
    x2 = rng.poisson(2.0, size=n).astype(float)
    x3 = rng.binomial(1, 0.4, size=n).astype(float)
    noise = rng.standard_normal((n, spec.p - 3))
    b1, b2, b3 = spec.beta
    y = (rng.random(n) < expit(b1 * x1 ** 2 + b2 * x2 + b3 * x3)).astype(float)

    columns = [MixedColumn('X1', x1, DataType.CONTINUOUS),
               MixedColumn('X2', x2, DataType.DISCRETE),
               MixedColumn('X3', x3, DataType.BINARY)]
    columns += [MixedColumn(f'X{i + 4}', noise[:, i], DataType.CONTINUOUS)
                for i in range(spec.p - 3)]
    return Dataset(columns=columns, target=MixedColumn('Y', y, DataType.BINARY))


def dataset_frame(dataset):
    """Dataset as a DataFrame, target last"""
    data = {column.name: column.values for column in dataset.columns}
    data[dataset.target.name] = dataset.target.values
    return pd.DataFrame(data)


def true_model_selected(report):
    """Top three are X1, X2, X3 with X1 significant at j=2 and X2, X3 at j=1"""
    top = {result.variable for result in report.top(3)}
    if top != set(TRUE_MODEL):
        return False
    checks = [('X1', 2), ('X2', 1), ('X3', 1)]
    for variable, order in checks:
        result = report.result(variable).order(order)
        if result is None or not result.significant:
            return False
    return True


def mean_abs_lp_error(report, dataset, config):
    """Mean |combined lp[1] - full-data lp[1]| over testable variables"""
    full = {s.variable: s.lp[0] for s in full_data_statistics(dataset, config) if not s.degenerate}
    errors = [abs(result.order(1).lp - full[result.variable])
              for result in report.ranked
              if result.order(1) is not None and result.variable in full]
    return float(np.mean(errors))


def run_replicate(spec, method=CombineMethod.REML, worker_count=1, controller=None):
    dataset = simulate_dataset(spec)
    config = AnalysisConfig(target='Y', method=method, gamma=spec.gamma, seed=spec.seed,
                            worker_count=worker_count)
    start = time.perf_counter()
    report = run_analysis(dataset, config, controller=controller)
    seconds = time.perf_counter() - start
    return {
        'seed': spec.seed,
        'gamma': spec.gamma,
        'k': report.k,
        'selected': true_model_selected(report),
        'mean_abs_error': mean_abs_lp_error(report, dataset, config),
        'seconds': seconds
    }


def run_simulation_study(n=50000, gammas=(0.3, 0.4, 0.5), reps=50, seed=0, p=50,
                         method=CombineMethod.REML, worker_count=1):
    """Selection accuracy and mean absolute LP error per gamma over seeded replicates"""
    summary = {}
    for gamma in gammas:
        replicates = [run_replicate(SimulationSpec(n=n, p=p, gamma=gamma, seed=seed + r),
                                    method=method, worker_count=worker_count)
                      for r in range(reps)]
        summary[gamma] = {
            'k': replicates[0]['k'],
            'accuracy': float(np.mean([r['selected'] for r in replicates])),
            'mean_abs_error': float(np.mean([r['mean_abs_error'] for r in replicates])),
            'replicates': replicates
        }
        logger.info(f"gamma={gamma}: k={summary[gamma]['k']} "
                    f"accuracy={summary[gamma]['accuracy']:.2f} "
                    f"error={summary[gamma]['mean_abs_error']:.4f}")
    return summary
