"""Numerator sums of squares for estimable linear hypotheses.

Yates's weighted squares of means, its generalization to arbitrary
estimable ``G' beta = 0`` in the Gauss-Markov model, and the
restricted-minus-full difference in error SS that both reduce to.
"""

from .anova import TwoFactorLayout, anova_table, build_layout, cell_stats, compute_q
from .glm import FitSummary, LinearModel, fit, noncentrality
from .hypothesis import Hypothesis, TestResult, build_hypothesis, rmfm_ss, verify_prop2, wald_ss
from .mwsm import MwsmConstruction, default_construction, ss_eq3, ss_eq3_via_z, yates_construction

__all__ = [
    "FitSummary",
    "Hypothesis",
    "LinearModel",
    "MwsmConstruction",
    "TestResult",
    "TwoFactorLayout",
    "anova_table",
    "build_hypothesis",
    "build_layout",
    "cell_stats",
    "compute_q",
    "default_construction",
    "fit",
    "noncentrality",
    "rmfm_ss",
    "ss_eq3",
    "ss_eq3_via_z",
    "verify_prop2",
    "wald_ss",
    "yates_construction",
]

__version__ = "0.1.0"
