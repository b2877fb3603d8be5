"""Numerical laboratory for type-II blow up of the radial supercritical NLS."""

from .numerology import (SupercriticalParams, AdmissibilityReport,
                         joseph_lundgren, derive_params, admissibility,
                         bk_coefficients)

__version__ = "0.1.0"

__all__ = [
    "SupercriticalParams", "AdmissibilityReport", "joseph_lundgren",
    "derive_params", "admissibility", "bk_coefficients", "__version__",
]
