from __future__ import annotations


def require_in_open_interval(value: float, low: float, high: float, name: str) -> float:
    """Raise ValueError unless low < value < high."""
    if not (low < value < high):
        raise ValueError(f"{name} must lie in ({low}, {high}); got {value}")
    return value
