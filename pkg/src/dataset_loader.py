"""
CSV + JSON schema ingestion.

Schema format::

    {
      "target": "Y",
      "columns": [
        {"name": "X1", "type": "continuous", "m": 6},
        {"name": "Y", "type": "binary"},
        {"name": "session_id", "type": "ignore"}
      ]
    }

The target may instead be marked with ``"target": true`` on its column entry.
Columns of type ``ignore`` are not predictors but stay available for
``--partition-by`` and ``--group-by``. Every CSV header column must appear in
the schema.
"""

import json
import logging
import os

import numpy as np
import pandas as pd

from errors import DataValidationError
from models.metalp import DataType, Dataset, MixedColumn

IGNORE = 'ignore'


class DatasetLoader:
    """Reads a comma-separated file with a header row; empty fields are missing"""

    def __init__(self, csv_path, schema_path):
        self.csv_path = csv_path
        self.schema_path = schema_path
        self.logger = logging.getLogger('metalp.dataset_loader')

    def read_schema(self):
        try:
            with open(self.schema_path, 'r', encoding='utf-8') as f:
                schema = json.load(f)
        except json.JSONDecodeError as e:
            raise DataValidationError(f"Schema {self.schema_path} is not valid JSON: {e}")

        entries = schema.get('columns') if isinstance(schema, dict) else None
        if not entries:
            raise DataValidationError(f"Schema {self.schema_path} has no 'columns' list")

        names = [entry.get('name') for entry in entries]
        if any(not name for name in names):
            raise DataValidationError('Every schema column needs a name')
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise DataValidationError(f"Column '{duplicates[0]}' appears twice in the schema",
                                      column=duplicates[0])

        targets = [entry['name'] for entry in entries if entry.get('target')]
        if schema.get('target'):
            targets = sorted(set(targets) | {schema['target']})
        if len(targets) != 1:
            raise DataValidationError(f"Schema must mark exactly one target, found {len(targets)}")
        target = targets[0]
        if target not in names:
            raise DataValidationError(f"Target '{target}' is not a schema column", column=target)
        return target, entries

    def read_frame(self):
        if not os.path.exists(self.csv_path):
            raise FileNotFoundError(f"Input file not found: {self.csv_path}")
        try:
            return pd.read_csv(self.csv_path, dtype=str, keep_default_na=False,
                               na_values=[''], encoding='utf-8')
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataValidationError(f"Cannot parse {self.csv_path}: {e}")

    def load(self):
        target, entries = self.read_schema()
        frame = self.read_frame()

        declared = {entry['name'] for entry in entries}
        for name in frame.columns:
            if name not in declared:
                raise DataValidationError(f"CSV column '{name}' is not covered by the schema",
                                          column=name)
        for name in (entry['name'] for entry in entries):
            if name not in frame.columns:
                raise DataValidationError(f"Schema column '{name}' is missing from the CSV",
                                          column=name)

        columns, extras, m_overrides = [], {}, {}
        target_column = None
        for entry in entries:
            name = entry['name']
            raw = frame[name]
            type_name = str(entry.get('type', 'continuous')).strip().lower()
            if type_name == IGNORE:
                if name == target:
                    raise DataValidationError(f"Target '{name}' cannot be ignored", column=name)
                extras[name] = grouping_values(raw)
                continue

            declared_type = DataType.parse(type_name)
            column = MixedColumn(name, coded_values(raw, declared_type, name), declared_type)
            if name == target:
                target_column = column
                continue
            columns.append(column)
            if 'm' in entry:
                m_overrides[name] = _read_m(entry['m'], name)

        if target_column.declared_type != DataType.BINARY:
            raise DataValidationError(f"Target '{target}' must be declared binary", column=target)

        self.logger.info(f"Loaded {len(frame)} rows, {len(columns)} predictors, target '{target}'")
        return Dataset(columns=columns, target=target_column, m_overrides=m_overrides,
                       extras=extras)


def _read_m(value, name):
    try:
        m = int(value)
    except (TypeError, ValueError):
        raise DataValidationError(f"m override for '{name}' must be an integer", column=name)
    if m < 1:
        raise DataValidationError(f"m override for '{name}' must be at least 1", column=name)
    return m


def coded_values(raw, declared_type, name):
    """
    Float values with NaN for missing.

    Binary and categorical text is coded by sorted distinct value; a numeric
    binary column codes its larger value as 1.
    """
    present = raw.dropna()
    numeric = pd.to_numeric(raw, errors='coerce')
    is_numeric = bool(numeric[present.index].notna().all())

    if declared_type in (DataType.CONTINUOUS, DataType.DISCRETE):
        if not is_numeric:
            bad = present[numeric[present.index].isna()].iloc[0]
            raise DataValidationError(
                f"Column '{name}' is declared {declared_type.value} but holds '{bad}'", column=name)
        return numeric.to_numpy(dtype=float)

    if is_numeric:
        values = numeric.to_numpy(dtype=float)
        if declared_type == DataType.BINARY:
            levels = np.unique(values[~np.isnan(values)])
            if levels.size > 2:
                raise DataValidationError(
                    f"Column '{name}' is declared binary but has {levels.size} distinct values",
                    column=name)
            if levels.size == 2:
                values = np.where(np.isnan(values), np.nan, (values == levels[1]).astype(float))
        return values

    levels = sorted(present.unique())
    if declared_type == DataType.BINARY and len(levels) > 2:
        raise DataValidationError(
            f"Column '{name}' is declared binary but has {len(levels)} distinct values", column=name)
    codes = {level: float(code) for code, level in enumerate(levels)}
    return raw.map(codes).to_numpy(dtype=float)


def grouping_values(raw):
    """Keys for an ignored column: numbers when every present value parses, text otherwise"""
    numeric = pd.to_numeric(raw, errors='coerce')
    if numeric[raw.notna()].notna().all():
        return numeric.to_numpy(dtype=float)
    return raw.to_numpy(dtype=object)
