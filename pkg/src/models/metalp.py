import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import DataValidationError


class DataType(str, Enum):
    CONTINUOUS = 'continuous'
    DISCRETE = 'discrete'
    BINARY = 'binary'
    CATEGORICAL_ORDINAL = 'categorical_ordinal'

    @classmethod
    def parse(cls, value):
        """Accept schema spellings; 'categorical' is read as ordinal integer codes"""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text == 'categorical':
            return cls.CATEGORICAL_ORDINAL
        try:
            return cls(text)
        except ValueError:
            raise DataValidationError(f"Unknown data type '{value}'")


class CombineMethod(str, Enum):
    FIXED = 'fixed'
    DL = 'dl'
    REML = 'reml'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DataValidationError(f"Unknown combining method '{value}' (expected fixed, dl or reml)")


class PartitionScheme(str, Enum):
    RANDOM = 'random'
    BY_COLUMN = 'by_column'


def round_sig(value, digits=12):
    """Fixed-precision float for reports; NaN and inf become None"""
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.{digits}g}")


@dataclass
class MixedColumn:
    """One column of values with its declared data type; NaN marks missing"""
    name: str
    values: np.ndarray
    declared_type: DataType = DataType.CONTINUOUS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise DataValidationError(f"Column '{self.name}' must be one-dimensional", column=self.name)
        self.declared_type = DataType.parse(self.declared_type)
        if self.declared_type == DataType.BINARY:
            distinct = np.unique(self.values[~np.isnan(self.values)])
            if distinct.size > 2:
                raise DataValidationError(
                    f"Column '{self.name}' is declared binary but has {distinct.size} distinct values",
                    column=self.name)

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f'<MixedColumn {self.name} ({self.declared_type.value}, n={len(self)})>'

    @property
    def missing_mask(self):
        return np.isnan(self.values)

    def subset(self, rows):
        # values are already validated, skip the type check on slices
        column = object.__new__(MixedColumn)
        column.name = self.name
        column.values = self.values[rows]
        column.declared_type = self.declared_type
        return column


@dataclass
class ScoreBasis:
    m_effective: int
    columns: np.ndarray
    distinct_count: int
    m_requested: int = 0

    @property
    def truncated(self):
        return self.m_effective < self.m_requested

    def __repr__(self):
        return f'<ScoreBasis m={self.m_effective}/{self.m_requested} n={self.columns.shape[0]}>'


@dataclass
class SubpopSummary:
    """Mapper output for one (partition, variable): LP[1..m] and the effective size"""
    partition_id: int
    variable: str
    lp: Tuple[float, ...]
    n_eff: int
    degenerate: bool = False
    m_requested: int = 0
    warning: Optional[str] = None

    def size_for(self, order):
        if self.degenerate or len(self.lp) < order:
            return 0
        return self.n_eff

    def estimate_for(self, order):
        if self.degenerate or len(self.lp) < order:
            return 0.0
        return self.lp[order - 1]

    def __repr__(self):
        return f'<SubpopSummary {self.variable}@{self.partition_id} n={self.n_eff}>'


@dataclass
class CombinedCD:
    """Normal asymptotic confidence distribution N(mean, variance) with diagnostics"""
    mean: float
    variance: float
    method: CombineMethod = CombineMethod.FIXED
    tau2: float = 0.0
    q: float = 0.0
    k_eff: int = 1
    i2_pre: float = 0.0
    i2_post: Optional[float] = None
    warning: Optional[str] = None

    @property
    def se(self):
        return math.sqrt(self.variance)

    def __repr__(self):
        return f'<CombinedCD {self.method.value} mean={self.mean:.4f} se={self.se:.4f} k={self.k_eff}>'

    def to_dict(self):
        return {
            'mean': round_sig(self.mean),
            'variance': round_sig(self.variance),
            'se': round_sig(self.se),
            'method': self.method.value,
            'tau2': round_sig(self.tau2),
            'q': round_sig(self.q),
            'k_eff': self.k_eff,
            'i2_pre': round_sig(self.i2_pre),
            'i2_post': round_sig(self.i2_post)
        }


@dataclass
class HeterogeneityReport:
    q: float
    i2: float
    severe: bool


@dataclass
class PartitionPlan:
    """Assignment of group keys to partition ids in [0, k)"""
    k: int
    assignment: Dict[object, int]
    scheme: PartitionScheme
    seed: Optional[int] = None
    generator: Optional[str] = None
    column: Optional[str] = None

    def __repr__(self):
        return f'<PartitionPlan {self.scheme.value} k={self.k} keys={len(self.assignment)}>'

    def partition_of(self, keys):
        """Partition id for every row given the row's group key"""
        assignment = self.assignment
        try:
            return np.fromiter((assignment[key] for key in keys), dtype=np.int64, count=len(keys))
        except KeyError as e:
            raise DataValidationError(f"Group key {e.args[0]!r} is not covered by the partition plan")

    def sizes(self, keys):
        return np.bincount(self.partition_of(keys), minlength=self.k)

    def to_dict(self):
        return {
            'scheme': self.scheme.value,
            'k': self.k,
            'seed': self.seed,
            'generator': self.generator,
            'column': self.column,
            'assignment': {_key_text(key): pid for key, pid in self.assignment.items()}
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _key_text(key):
    if isinstance(key, float):
        if math.isnan(key):
            return 'NA'
        if key.is_integer():
            return str(int(key))
    if isinstance(key, np.generic):
        return _key_text(key.item())
    return str(key)


@dataclass
class Dataset:
    """Predictor columns, a binary target and any extra columns used for grouping"""
    columns: List[MixedColumn]
    target: MixedColumn
    m_overrides: Dict[str, int] = field(default_factory=dict)
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for column in self.columns:
            if len(column) != len(self.target):
                raise DataValidationError(
                    f"Column '{column.name}' has {len(column)} rows, target has {len(self.target)}",
                    column=column.name)

    @property
    def n_rows(self):
        return len(self.target)

    @property
    def predictor_names(self):
        return [column.name for column in self.columns]

    def column(self, name):
        for column in self.columns:
            if column.name == name:
                return column
        if name == self.target.name:
            return self.target
        raise DataValidationError(f"Unknown column '{name}'", column=name)

    def grouping_values(self, name):
        """Raw values of a column usable for partitioning (extras first, then typed columns)"""
        if name in self.extras:
            return self.extras[name]
        return self.column(name).values

    def __repr__(self):
        return f'<Dataset rows={self.n_rows} predictors={len(self.columns)} target={self.target.name}>'


@dataclass
class AnalysisConfig:
    target: str
    m: int = 4
    m_overrides: Dict[str, int] = field(default_factory=dict)
    method: CombineMethod = CombineMethod.REML
    partitions: Optional[int] = None
    gamma: Optional[float] = None
    partition_by: Optional[str] = None
    group_by: Optional[str] = None
    seed: int = 0
    ci_level: float = 0.95
    worker_count: int = 1

    def __post_init__(self):
        self.method = CombineMethod.parse(self.method)

    def validate(self):
        if self.m < 1:
            raise DataValidationError(f"m must be at least 1, got {self.m}")
        for name, m in self.m_overrides.items():
            if m < 1:
                raise DataValidationError(f"m override for '{name}' must be at least 1", column=name)
        if not 0.0 < self.ci_level < 1.0:
            raise DataValidationError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        chosen = [v is not None for v in (self.partitions, self.gamma, self.partition_by)]
        if sum(chosen) > 1:
            raise DataValidationError("Choose only one of partitions, gamma or partition_by")
        if self.partition_by is not None and self.group_by is not None:
            raise DataValidationError("group_by only applies to random partitions, not partition_by",
                                      column=self.group_by)
        if self.partitions is not None and self.partitions < 1:
            raise DataValidationError(f"partitions must be at least 1, got {self.partitions}")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise DataValidationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.worker_count < 1:
            raise DataValidationError(f"worker_count must be at least 1, got {self.worker_count}")
        return self

    def m_for(self, variable):
        return self.m_overrides.get(variable, self.m)

    def to_dict(self):
        # worker_count is left out: reports must not depend on parallelism
        return {
            'target': self.target,
            'm': self.m,
            'm_overrides': dict(sorted(self.m_overrides.items())),
            'method': self.method.value,
            'partitions': self.partitions,
            'gamma': self.gamma,
            'partition_by': self.partition_by,
            'group_by': self.group_by,
            'seed': self.seed,
            'ci_level': self.ci_level
        }


@dataclass
class OrderResult:
    order: int
    lp: float
    se: float
    ci_low: float
    ci_high: float
    p_value: float
    q: float
    i2_pre: float
    i2_post: Optional[float]
    tau2: float
    k_eff: int

    @property
    def significant(self):
        return not (self.ci_low <= 0.0 <= self.ci_high)

    def to_dict(self):
        return {
            'j': self.order,
            'lp': round_sig(self.lp),
            'se': round_sig(self.se),
            'ci_low': round_sig(self.ci_low),
            'ci_high': round_sig(self.ci_high),
            'p_value': round_sig(self.p_value),
            'q': round_sig(self.q),
            'i2_pre': round_sig(self.i2_pre),
            'i2_post': round_sig(self.i2_post),
            'tau2': round_sig(self.tau2),
            'k_eff': self.k_eff,
            'significant': self.significant
        }


@dataclass
class VariableResult:
    variable: str
    orders: List[OrderResult] = field(default_factory=list)
    untestable: bool = False
    rank: Optional[int] = None

    @property
    def significant(self):
        return any(order.significant for order in self.orders)

    @property
    def max_abs_lp(self):
        if not self.orders:
            return 0.0
        return max(abs(order.lp) for order in self.orders)

    def order(self, j):
        for result in self.orders:
            if result.order == j:
                return result
        return None

    def __repr__(self):
        return f'<VariableResult {self.variable} rank={self.rank} max|lp|={self.max_abs_lp:.4f}>'

    def to_dict(self):
        return {
            'variable': self.variable,
            'rank': self.rank,
            'significant': self.significant,
            'untestable': self.untestable,
            'orders': [order.to_dict() for order in self.orders]
        }


REPORT_COLUMNS = ['variable', 'rank', 'j', 'lp', 'se', 'ci_lo', 'ci_hi', 'p_value',
                  'q', 'i2_pre', 'i2_post', 'tau2', 'k_eff']


@dataclass
class AnalysisReport:
    config: AnalysisConfig
    n_rows: int
    plan_scheme: PartitionScheme
    k: int
    partition_sizes: List[int]
    ranked: List[VariableResult]
    untestable: List[str] = field(default_factory=list)

    def top(self, count):
        return self.ranked[:count]

    def result(self, variable):
        for result in self.ranked:
            if result.variable == variable:
                return result
        return None

    def to_dict(self):
        return {
            'config': self.config.to_dict(),
            'n_rows': self.n_rows,
            'partitioning': {
                'scheme': self.plan_scheme.value,
                'k': self.k,
                'sizes': list(self.partition_sizes)
            },
            'variables': [result.to_dict() for result in self.ranked],
            'untestable': list(self.untestable)
        }

    def to_records(self):
        """One flat row per variable x order j, for plotting"""
        rows = []
        for result in self.ranked:
            for order in result.orders:
                rows.append({
                    'variable': result.variable,
                    'rank': result.rank,
                    'j': order.order,
                    'lp': round_sig(order.lp),
                    'se': round_sig(order.se),
                    'ci_lo': round_sig(order.ci_low),
                    'ci_hi': round_sig(order.ci_high),
                    'p_value': round_sig(order.p_value),
                    'q': round_sig(order.q),
                    'i2_pre': round_sig(order.i2_pre),
                    'i2_post': round_sig(order.i2_post),
                    'tau2': round_sig(order.tau2),
                    'k_eff': order.k_eff
                })
        return rows


@dataclass
class DepartmentCounts:
    """Admissions by gender for one department"""
    department: str
    male_admit: int
    male_total: int
    female_admit: int
    female_total: int

    def __post_init__(self):
        if not (0 <= self.male_admit <= self.male_total and 0 <= self.female_admit <= self.female_total):
            raise DataValidationError(f"Department {self.department}: admits must not exceed totals")

    @property
    def total(self):
        return self.male_total + self.female_total

    def to_dict(self):
        return {
            'department': self.department,
            'male_admit': self.male_admit,
            'male_total': self.male_total,
            'female_admit': self.female_admit,
            'female_total': self.female_total
        }


@dataclass
class BattingRecord:
    player: str
    hits: int
    at_bats: int
    remainder_avg: float

    def __post_init__(self):
        if not 0 <= self.hits <= self.at_bats:
            raise DataValidationError(f"{self.player}: hits must lie in [0, at_bats]")

    @property
    def average(self):
        return self.hits / self.at_bats


@dataclass
class SimulationSpec:
    """Logistic model Y ~ Bernoulli(P(b1 X1^2 + b2 X2 + b3 X3)) with p - 3 null predictors"""
    n: int
    p: int = 50
    beta: Tuple[float, ...] = (3.0, -2.0, 1.5)
    gamma: float = 0.4
    seed: int = 0

    def validate(self):
        if self.n < 1:
            raise DataValidationError(f"n must be at least 1, got {self.n}")
        if self.p < 3:
            raise DataValidationError(f"p must be at least 3, got {self.p}")
        if len(self.beta) != 3:
            raise DataValidationError('beta must hold the three active coefficients')
        return self


@dataclass
class BerkeleyReport:
    method: CombineMethod
    departments: List[dict]
    aggregate: CombinedCD
    aggregate_ci: Tuple[float, float]
    combined: CombinedCD
    combined_ci: Tuple[float, float]
    p_value: float

    @property
    def departments_covering_zero(self):
        return sum(1 for d in self.departments if d['ci_low'] <= 0.0 <= d['ci_high'])

    def to_dict(self):
        return {
            'method': self.method.value,
            'departments': [{key: round_sig(value) if isinstance(value, float) else value
                             for key, value in d.items()} for d in self.departments],
            'aggregate': self.aggregate.to_dict(),
            'aggregate_ci': [round_sig(v) for v in self.aggregate_ci],
            'combined': self.combined.to_dict(),
            'combined_ci': [round_sig(v) for v in self.combined_ci],
            'p_value': round_sig(self.p_value)
        }


@dataclass
class SteinReport:
    players: List[str]
    mle: List[float]
    remainder: List[float]
    lp_estimates: List[float]
    js_estimates: List[float]
    tau2: float
    shrinkage: float
    mse_ratio_lp: float
    mse_ratio_js: float
    js_scale: str = 'raw'

    def to_dict(self):
        rows = []
        for i, player in enumerate(self.players):
            rows.append({
                'player': player,
                'mle': round_sig(self.mle[i]),
                'remainder': round_sig(self.remainder[i]),
                'lp': round_sig(self.lp_estimates[i]),
                'js': round_sig(self.js_estimates[i])
            })
        return {
            'players': rows,
            'tau2': round_sig(self.tau2),
            'shrinkage': round_sig(self.shrinkage),
            'mse_ratio_lp': round_sig(self.mse_ratio_lp),
            'mse_ratio_js': round_sig(self.mse_ratio_js),
            'js_scale': self.js_scale
        }
