"""Periodic spectral engine: fields, multipliers, Besov norms and Green kernels."""
from .grid import (
    MAX_POINTS,
    GridSpec,
    SpectralField,
    read_field,
    read_profile_csv,
    write_field,
    write_profile_csv,
)
from .kernel import (
    KernelReport,
    green_kernel,
    heat_kernel,
    kernel_decay_report,
    radial_profile,
    self_similarity_defect,
)
from .operators import (
    BesovValue,
    besov_norm,
    besov_overlap_bounds,
    biot_savart,
    curl,
    divergence,
    dyadic_range,
    frac_laplacian,
    gradient,
    green_apply,
    green_multiplier,
    leray_project,
    lp_bump,
    lp_cutoff,
    lp_project,
    sobolev_seminorm,
)

__all__ = [
    "MAX_POINTS",
    "GridSpec",
    "SpectralField",
    "read_field",
    "read_profile_csv",
    "write_field",
    "write_profile_csv",
    "KernelReport",
    "green_kernel",
    "heat_kernel",
    "kernel_decay_report",
    "radial_profile",
    "self_similarity_defect",
    "BesovValue",
    "besov_norm",
    "besov_overlap_bounds",
    "biot_savart",
    "curl",
    "divergence",
    "dyadic_range",
    "frac_laplacian",
    "gradient",
    "green_apply",
    "green_multiplier",
    "leray_project",
    "lp_bump",
    "lp_cutoff",
    "lp_project",
    "sobolev_seminorm",
]
