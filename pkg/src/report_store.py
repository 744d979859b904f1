import os
import json
import logging

import pandas as pd

from models.metalp import REPORT_COLUMNS


class ReportStore:
    """Writes analysis reports, partition plans and generated datasets under one directory"""

    REPORT_JSON = 'report.json'
    REPORT_CSV = 'report.csv'
    SCHEMA_JSON = 'schema.json'

    def __init__(self, output_dir):
        self.output_dir = output_dir
        self.logger = logging.getLogger('metalp.report_store')

        # Ensure output directory exists
        os.makedirs(self.output_dir, exist_ok=True)

    def path_for(self, filename):
        return os.path.join(self.output_dir, filename)

    def write_json(self, filename, payload):
        """Pretty-printed JSON; payloads carry pre-rounded floats so reruns give identical bytes"""
        path = self.path_for(filename)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(payload, f, indent=2)
                f.write('\n')
        except OSError as e:
            self.logger.error(f"Failed to write {path}: {e}")
            raise
        self.logger.info(f"Wrote {path}")
        return path

    def write_report(self, report):
        """report.json (per-variable records) and report.csv (one row per variable and order)"""
        json_path = self.write_json(self.REPORT_JSON, report.to_dict())

        csv_path = self.path_for(self.REPORT_CSV)
        frame = pd.DataFrame(report.to_records(), columns=REPORT_COLUMNS)
        frame['rank'] = frame['rank'].astype('Int64')
        try:
            frame.to_csv(csv_path, index=False, float_format='%.12g', lineterminator='\n')
        except OSError as e:
            self.logger.error(f"Failed to write {csv_path}: {e}")
            raise
        self.logger.info(f"Wrote {csv_path}")
        return {'json': json_path, 'csv': csv_path}

    def write_plan(self, plan, path=None):
        path = path or self.path_for('plan.json')
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                f.write(plan.to_json())
                f.write('\n')
        except OSError as e:
            self.logger.error(f"Failed to write plan {path}: {e}")
            raise
        self.logger.info(f"Wrote partition plan {path}")
        return path

    def write_dataset(self, frame, schema, seed):
        """data_<seed>.csv plus the shared schema.json"""
        data_path = self.path_for(f'data_{seed}.csv')
        try:
            frame.to_csv(data_path, index=False, float_format='%.17g', lineterminator='\n')
        except OSError as e:
            self.logger.error(f"Failed to write {data_path}: {e}")
            raise
        schema_path = self.write_json(self.SCHEMA_JSON, schema)
        return {'data': data_path, 'schema': schema_path}
