"""Services for fitting, sampling, budgeting and tuning."""

from .copula import GaussianCopula
from .evaluators import Evaluator, ShellEvaluator, SyntheticEvaluator
from .landscapes import Landscape, get_landscape
from .reporting import ReportWriter
from .simulation import Simulator
from .tuner import Tuner

__all__ = [
    "GaussianCopula",
    "Evaluator",
    "ShellEvaluator",
    "SyntheticEvaluator",
    "Landscape",
    "get_landscape",
    "ReportWriter",
    "Simulator",
    "Tuner",
]
