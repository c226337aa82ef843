"""Sensitivity estimators, property checks and structural decompositions."""
from .anticoncentration import (
    FrequencyRow,
    HypercontractivityRow,
    TailReport,
    anticoncentration_check,
    hypercontractivity_check,
    strong_anticoncentration_check,
    tail_and_weak_anticoncentration,
)
from .diffuse import DiffuseCertificate, derivative_chain_check, diffuse_certify
from .invariance import InvarianceReport, invariance_distance
from .multilinear import a_operator, composition_derivative_expansion, composition_subset_expansion
from .regularity import DecisionTree, Leaf, Node, leaf_restriction_error, regularity_tree, restriction_norm_tail
from .reports import Report, SensitivityReport, reports_to_csv, reports_to_json, rows_to_csv
from .sensitivity import (
    average_sensitivity,
    average_sensitivity_exact,
    edge_level_bound,
    gaussian_average_sensitivity,
    gaussian_noise_sensitivity,
    gl_extremal,
    gl_formula,
    noise_sensitivity,
    noise_sensitivity_fourier,
)
