"""Numerical toolkit for the degenerate Kolmogorov-Fokker-Planck operator.

Modules: :mod:`geometry` (group law, dilations, cylinders), :mod:`symbols`
(characteristics, dissipation, multipliers), :mod:`trial` (source packets),
:mod:`solver` (Fourier-side Duhamel solution), :mod:`norms` (seminorms and the
constant search), :mod:`poly` (exact polynomial solutions), :mod:`discrete`
(maximal and sharp functions on grids) and :mod:`cli`.
"""
from .errors import InvariantViolation, ToleranceError, UndefinedRatioError, UsageError
from .report import report_schema_version

__version__ = "0.1.0"

__all__ = ["InvariantViolation", "ToleranceError", "UndefinedRatioError", "UsageError",
           "report_schema_version", "__version__"]
