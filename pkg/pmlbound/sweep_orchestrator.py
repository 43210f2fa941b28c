"""
Sweep Orchestrator for pmlbound

Dispatches independent grid points (one bound evaluation or calibration per
point) to a bounded pool of worker threads and hands the rows back in grid
order, whatever order they finish in.
"""

import asyncio
import logging
from functools import partial
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

from .config import Config

logger = logging.getLogger(__name__)

Row = Dict[str, Any]


class SweepOrchestrator:
    """
    Runs grid sweeps on a bounded worker pool.

    Capabilities:
    - Limits concurrency to ``max_workers`` (PMLBOUND_WORKERS by default)
    - Keeps output rows in submission order
    - Either records a failing point as an ``{'error': ...}`` row or
      re-raises it, depending on the sweep
    """

    def __init__(self, max_workers: Optional[int] = None):
        """Initialize orchestrator with a worker limit."""
        self.max_workers = max(1, max_workers or Config.WORKERS)
        self.sweep_history: List[Dict[str, int]] = []

    async def execute_parallel(self, tasks: Sequence[Callable[[], Row]], capture_errors: bool = True) -> List[Row]:
        """
        Execute row-producing tasks in parallel.

        Args:
            tasks: Zero-argument callables, each returning one row
            capture_errors: Turn exceptions into error rows instead of raising

        Returns:
            List of rows, in the order of ``tasks``
        """
        semaphore = asyncio.Semaphore(self.max_workers)

        async def run(task: Callable[[], Row]) -> Row:
            async with semaphore:
                return await asyncio.to_thread(task)

        logger.debug(f"Executing {len(tasks)} sweep points on {self.max_workers} workers")
        results = await asyncio.gather(*(run(task) for task in tasks), return_exceptions=True)

        failures = [result for result in results if isinstance(result, Exception)]
        self.sweep_history.append({'points': len(tasks), 'failed': len(failures)})
        if failures and not capture_errors:
            raise failures[0]
        for failure in failures:
            logger.warning(f"Sweep point failed: {type(failure).__name__}: {failure}")

        return [
            result if not isinstance(result, Exception) else {'error': f"{type(result).__name__}: {result}"}
            for result in results
        ]

    def run_grid(
        self,
        row_builder: Callable[[float], Row],
        grid: Iterable[float],
        capture_errors: bool = True
    ) -> List[Row]:
        """Build one row per grid value; blocking wrapper around ``execute_parallel``."""
        tasks = [partial(row_builder, float(value)) for value in grid]
        return asyncio.run(self.execute_parallel(tasks, capture_errors=capture_errors))
