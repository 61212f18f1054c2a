"""Energy-constrained multi-agent coverage: formations, alternating tours, duty-cycle schedules, simulation."""

__version__ = "0.1.0"
