"""Loewner evolutions, their Gaussian-free-field martingales and numerical checks."""
from .domains import LAMBDA, alpha_kappa, lambda_kappa
from .errors import SleGffError
from .fields import FieldModel
from .sle import DrivingModel, simulate

__version__ = "0.1.0"

__all__ = ["LAMBDA", "DrivingModel", "FieldModel", "SleGffError", "alpha_kappa", "lambda_kappa",
           "simulate", "__version__"]
