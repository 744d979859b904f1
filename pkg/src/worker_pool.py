"""
Controllers for the map stage.

Results come back in task order whatever the controller, so the reduce stage
never depends on scheduling.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor


class ParallelController:
    """A controller that maps independent tasks onto workers"""

    def __init__(self):
        self.logger = logging.getLogger('metalp.worker_pool')

    def setup(self):
        pass

    def map(self, task, args):
        raise NotImplementedError()

    def teardown(self):
        pass

    def __enter__(self):
        self.setup()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.teardown()
        return False


class SerialController(ParallelController):
    def map(self, task, args):
        return [task(a) for a in args]


class ProcessController(ParallelController):
    """Process pool; results are gathered in submission order"""

    def __init__(self, worker_count):
        super().__init__()
        self.worker_count = worker_count
        self.executor = None

    def setup(self):
        if self.executor is None:
            self.executor = ProcessPoolExecutor(max_workers=self.worker_count)
            self.logger.debug(f"Started process pool with {self.worker_count} workers")

    def map(self, task, args):
        self.setup()
        args = list(args)
        chunksize = max(1, len(args) // (self.worker_count * 4))
        return list(self.executor.map(task, args, chunksize=chunksize))

    def teardown(self):
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None


def default_worker_count():
    return os.cpu_count() or 1


def make_controller(worker_count):
    if worker_count is None or worker_count <= 1:
        return SerialController()
    return ProcessController(worker_count)
