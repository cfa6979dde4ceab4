"""Run-level functionals, property suites and inequality checkers."""
from .energy import (
    DecayChannels,
    EnergyReport,
    decay_report,
    energy_report,
    perturbation_fields,
    poincare_check,
)
from .inequalities import (
    CheckVerdict,
    calibrate_then_assert,
    check_bernstein_sup,
    check_commutator_estimate,
    check_composition_estimate,
    check_embedding,
    check_product_estimate,
    check_split_norm,
)

__all__ = [
    "CheckVerdict",
    "DecayChannels",
    "EnergyReport",
    "calibrate_then_assert",
    "check_bernstein_sup",
    "check_commutator_estimate",
    "check_composition_estimate",
    "check_embedding",
    "check_product_estimate",
    "check_split_norm",
    "decay_report",
    "energy_report",
    "perturbation_fields",
    "poincare_check",
]
