from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

# Returned by ``retry_schedule`` once the attempt budget is spent.
NO_MORE_RETRIES = None


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 1.0          # seconds
    backoff_factor: float = 2.0
    # Token bucket: at most ``rate_limit_requests`` per ``rate_limit_window`` seconds.
    rate_limit_requests: int = 60
    rate_limit_window: float = 60.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_delay < 0.0:
            raise ValueError("base_delay must be non-negative")
        if self.backoff_factor < 1.0:
            raise ValueError("backoff_factor must be >= 1")
        if self.rate_limit_requests < 1 or self.rate_limit_window <= 0.0:
            raise ValueError("rate limit needs a positive request count and window")


def retry_schedule(policy: RetryPolicy, attempt: int) -> Optional[float]:
    """Delay in seconds to wait after failed attempt ``attempt`` (1-based).

    ``base_delay * backoff_factor ** (attempt - 1)`` while attempt <= max_attempts,
    ``NO_MORE_RETRIES`` afterwards.
    """
    if attempt < 1:
        raise ValueError(f"attempt must be >= 1, got {attempt}")
    if attempt > policy.max_attempts:
        return NO_MORE_RETRIES
    return policy.base_delay * policy.backoff_factor ** (attempt - 1)


class RateLimiter:
    """Thread-safe token bucket shared by every caller of one backend instance."""

    def __init__(
        self,
        capacity: int,
        window: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.capacity = float(capacity)
        self.refill_per_second = capacity / window
        self._tokens = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    @classmethod
    def from_policy(cls, policy: RetryPolicy, **kwargs) -> "RateLimiter":
        return cls(policy.rate_limit_requests, policy.rate_limit_window, **kwargs)

    def acquire(self) -> float:
        """Take one token, blocking until one is available. Returns seconds waited."""
        waited = 0.0
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.refill_per_second)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return waited
                shortfall = (1.0 - self._tokens) / self.refill_per_second
            self._sleep(shortfall)
            waited += shortfall
