import json
import time
from functools import wraps
from typing import Any, Dict, Optional

from src.utils.data_utils import convert_numpy_types
from src.utils.errors import LdlrSdaError
from src.utils.logger import Logger


class CheckReport:
    """
    Standardized result of a verifier: pass/fail plus every intermediate value
    """
    def __init__(self, name: str, passed: bool = True, values: Optional[Dict[str, Any]] = None,
                 error: Optional[str] = None, margin: Optional[float] = None):
        self.name = name
        self.passed = passed
        self.values = values or {}
        self.error = error
        self.margin = margin
        self.elapsed = None

    def __bool__(self):
        return bool(self.passed)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self):
        return convert_numpy_types({
            "name": self.name,
            "passed": self.passed,
            "margin": self.margin,
            "values": self.values,
            "error": self.error,
            "elapsed": self.elapsed
        })

    def __str__(self):
        return json.dumps(self.to_dict())


def margin_report(name: str, lhs: float, rhs: float, tol: float = 1e-10,
                  values: Optional[Dict[str, Any]] = None) -> CheckReport:
    """
    Report for an inequality lhs <= rhs, passing when rhs - lhs >= -tol
    """
    margin = rhs - lhs
    merged = {"lhs": lhs, "rhs": rhs}
    merged.update(values or {})
    return CheckReport(name, passed=bool(margin >= -tol), values=merged, margin=margin)


def report_errors(name: str):
    """
    Decorator turning library errors raised by a verifier into a failed CheckReport
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger = Logger().get_logger()
            start = time.time()
            try:
                report = func(*args, **kwargs)
            except LdlrSdaError as e:
                logger.error(f"{name} failed: {type(e).__name__}: {e}")
                report = CheckReport(name, passed=False, error=f"{type(e).__name__}: {e}")
            report.elapsed = time.time() - start
            return report
        return wrapper
    return decorator
