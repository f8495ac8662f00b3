"""
Utility functions and helpers for the equilibrium toolkit
Timing, float formatting and JSON conversion shared across modules
"""

import logging
import math
import time
from enum import Enum
from functools import wraps
from typing import Any, Dict

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 17


def measure_execution_time(func):
    """
    Decorator to measure function execution time

    Args:
        func: Function to measure

    Returns:
        Wrapped function with timing
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logger.info(f"{func.__name__} executed in {execution_time:.3f} seconds")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logger.error(f"{func.__name__} failed after {execution_time:.3f} seconds: {e}")
            raise

    return wrapper


def format_float(value: float, digits: int = FLOAT_DIGITS) -> str:
    """
    Format a float with enough significant digits to round-trip

    Args:
        value: number to format
        digits: significant digits

    Returns:
        Formatted string ("inf", "-inf" and "nan" for non-finite values)
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def to_jsonable(value: Any) -> Any:
    """Convert numpy arrays, scalars and enums recursively into JSON-friendly values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isfinite(value):
            return value
        return format_float(value)
    return value


class PerformanceTracker:
    """Simple performance tracking utility"""

    def __init__(self):
        self.metrics: Dict[str, Dict[str, float]] = {}

    def start_timer(self, operation: str):
        """Start timing an operation"""
        self.metrics[operation] = {"start_time": time.perf_counter()}

    def end_timer(self, operation: str) -> float:
        """End timing and return duration"""
        if operation in self.metrics:
            duration = time.perf_counter() - self.metrics[operation]["start_time"]
            self.metrics[operation]["duration"] = duration
            return duration
        return 0.0

    def durations(self) -> Dict[str, float]:
        """Durations of the finished operations"""
        return {name: m["duration"] for name, m in self.metrics.items() if "duration" in m}
