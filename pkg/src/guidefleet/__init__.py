"""Guide-robot fleet management: shadows, allocation, job monitoring, benchmarking."""

__version__ = "0.1.0"
