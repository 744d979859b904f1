import os
import logging

from dotenv import load_dotenv

from models.metalp import CombineMethod
from worker_pool import default_worker_count

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class RuntimeConfig:
    """Environment settings for command-line runs, optionally read from a .env file"""

    def __init__(self, env_file=None):
        load_dotenv(env_file)
        self.logger = logging.getLogger('metalp.runtime_config')
        self.log_level = os.getenv('METALP_LOG_LEVEL', 'INFO').upper()
        self.output_dir = os.getenv('METALP_OUTPUT_DIR', 'metalp_output')
        self.workers = self._read_int('METALP_WORKERS', None)
        self.default_m = self._read_int('METALP_DEFAULT_M', 4)
        self.default_method = self._read_method()

    def _read_int(self, name, default):
        raw = os.getenv(name)
        if raw is None or raw.strip() == '':
            return default
        try:
            value = int(raw)
        except ValueError:
            self.logger.warning(f"Ignoring {name}={raw!r}: not an integer")
            return default
        if value < 1:
            self.logger.warning(f"Ignoring {name}={raw!r}: must be at least 1")
            return default
        return value

    def _read_method(self):
        raw = os.getenv('METALP_DEFAULT_METHOD', CombineMethod.REML.value)
        try:
            return CombineMethod(raw.strip().lower())
        except ValueError:
            self.logger.warning(f"Ignoring METALP_DEFAULT_METHOD={raw!r}; using reml")
            return CombineMethod.REML

    def resolve_workers(self, requested=None):
        """--workers, then METALP_WORKERS, then the machine's CPU count"""
        if requested is not None:
            return requested
        if self.workers is not None:
            return self.workers
        return default_worker_count()

    def resolve_output_dir(self, requested=None):
        return requested or self.output_dir

    def setup_logging(self, level=None):
        """Single stream handler on the 'metalp' logger; safe to call repeatedly"""
        root = logging.getLogger('metalp')
        level_name = (level or self.log_level).upper()
        root.setLevel(getattr(logging, level_name, logging.INFO))
        if not any(getattr(h, '_metalp_handler', False) for h in root.handlers):
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            handler._metalp_handler = True
            root.addHandler(handler)
        return root
