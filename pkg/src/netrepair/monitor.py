"""Wall-clock and resident-memory sampling for a running job."""

from __future__ import annotations

import logging
import threading
import time

logger = logging.getLogger(__name__)


class ResourceMonitor:
    """Context manager sampling process RSS on a background thread.

    ``interval`` is in seconds (default 0.5, i.e. 2 Hz). If memory sampling is
    unavailable the monitor keeps timing only and logs a warning.
    """

    def __init__(self, interval: float = 0.5):
        self.interval = interval
        self.start = self.end = None
        self.peak_memory_bytes = 0
        self.samples = 0
        self.memory_available = True
        self._stop = threading.Event()
        self._thread = None
        self._proc = None

    def _sample(self):
        if not self.memory_available:
            return
        try:
            rss = self._proc.memory_info().rss
        except Exception as exc:  # degrade, never abort the job
            logger.warning("memory sampling failed (%s); continuing with timing only", exc)
            self.memory_available = False
            return
        self.samples += 1
        self.peak_memory_bytes = max(self.peak_memory_bytes, int(rss))

    def _run(self):
        while not self._stop.wait(self.interval):
            self._sample()

    def __enter__(self):
        try:
            import psutil

            self._proc = psutil.Process()
        except Exception as exc:
            logger.warning("psutil unavailable (%s); timing only", exc)
            self.memory_available = False
        self.start = time.perf_counter()
        self._sample()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._sample()
        self._stop.set()
        self._thread.join()
        self.end = time.perf_counter()
        return False

    @property
    def elapsed(self) -> float:
        end = self.end if self.end is not None else time.perf_counter()
        return end - self.start

    def summary(self) -> dict:
        return {"elapsed_s": self.elapsed, "peak_memory_bytes": self.peak_memory_bytes,
                "samples": self.samples, "memory_available": self.memory_available}
