"""Free boundary extraction and quantitative metrics."""
from .boundary import FreeBoundary, extract_free_boundary
from .decay import (FlatnessPreconditionError, HarnackReport, ImprovementReport,
                    TrappingError, harnack_decay, improvement_of_flatness,
                    trapping_offsets)
from .flatness import FlatnessReport, FlatnessResult, cone_gap, flatness, flatness_profile
from .metrics import (EtaIntegralReport, GradientConstraintReport, HausdorffReport,
                      eta_integral, gradient_constraint_check, greedy_cover,
                      hausdorff_estimate, linear_growth_check, nondegeneracy_constant,
                      strip_integral)
from .reports import write_report

__all__ = [
    "FreeBoundary", "extract_free_boundary", "FlatnessPreconditionError", "HarnackReport",
    "ImprovementReport", "TrappingError", "harnack_decay", "improvement_of_flatness",
    "trapping_offsets", "FlatnessReport", "FlatnessResult", "cone_gap", "flatness",
    "flatness_profile", "EtaIntegralReport", "GradientConstraintReport", "HausdorffReport",
    "eta_integral", "gradient_constraint_check", "greedy_cover", "hausdorff_estimate",
    "linear_growth_check", "nondegeneracy_constant", "strip_integral", "write_report",
]
