"""Base exception for every domain error raised by this package."""


class FleetError(Exception):
    """Root of the guidefleet exception hierarchy."""
