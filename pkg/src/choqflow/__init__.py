"""Pseudospectral ground states for mixed local/nonlocal Choquard-type energies.

The package discretizes a periodic box, provides Fourier-multiplier operators
(Laplacian, fractional Laplacian, Riesz-potential convolution), evaluates the
constrained energy and its exact identities, and runs a normalized
semi-implicit gradient flow to locate mass-constrained minimizers.  A
verification layer cross-checks sharp-constant formulas and scaling identities
against independent oracles, and a CLI exposes solve / classify / verify /
sweep / oracle entry points.
"""

__version__ = "0.1.0"

from .grid import (
    BoxDecayWarning,
    Field,
    GridSpec,
    NyquistWarning,
    SpectralField,
    fourier_interpolate,
    inverse_transform,
    make_grid,
    read_field,
    sample_gaussian,
    transform,
    write_field,
    write_field_csv,
)
from .operators import (
    MultiplierCache,
    apply_multiplier,
    build_multiplier,
    direct_convolve_oracle,
    frac_seminorm_sq,
    grad_norm_sq,
    implicit_solve,
    mixed_apply,
    riesz_convolve,
)
from .functionals import (
    EnergyBreakdown,
    ProblemParams,
    action,
    choquard_energy,
    combined_identity_residual,
    energy_identity_gap,
    equation_residual,
    first_variation,
    lagrange_multiplier,
    nehari_residual,
    pohozaev_residual,
)
from .solver import (
    SolveReport,
    SolverOptions,
    delta_rescale,
    dilation_energy_curve,
    flow_step,
    gaussian_seed,
    solve_ground_state,
)
from .regimes import (
    ContradictionReport,
    CriticalExponents,
    RegimeLabel,
    classify,
    classify_exponent,
    critical_exponents,
    mu_star_equivalence,
    mu_star_l2critical,
    nonexistence_contradiction,
)
from .verify import (
    ConstantReport,
    estimate_gn_constant,
    gn_ratio,
    hls_extremal_profile,
    hls_ratio,
    hls_sharp_constant,
    lebesgue_norm,
    linfty_bound_check,
    lngamma_stirling,
    riesz_normalization,
)

__all__ = [
    "__version__",
    "BoxDecayWarning", "Field", "GridSpec", "NyquistWarning", "SpectralField",
    "fourier_interpolate", "inverse_transform", "make_grid", "read_field",
    "sample_gaussian", "transform", "write_field", "write_field_csv",
    "MultiplierCache", "apply_multiplier", "build_multiplier",
    "direct_convolve_oracle", "frac_seminorm_sq", "grad_norm_sq",
    "implicit_solve", "mixed_apply", "riesz_convolve",
    "EnergyBreakdown", "ProblemParams", "action", "choquard_energy",
    "combined_identity_residual", "energy_identity_gap", "equation_residual",
    "first_variation", "lagrange_multiplier", "nehari_residual",
    "pohozaev_residual",
    "SolveReport", "SolverOptions", "delta_rescale", "dilation_energy_curve",
    "flow_step", "gaussian_seed", "solve_ground_state",
    "ContradictionReport", "CriticalExponents", "RegimeLabel", "classify",
    "classify_exponent", "critical_exponents", "mu_star_equivalence",
    "mu_star_l2critical", "nonexistence_contradiction",
    "ConstantReport", "estimate_gn_constant", "gn_ratio",
    "hls_extremal_profile", "hls_ratio", "hls_sharp_constant", "lebesgue_norm",
    "linfty_bound_check", "lngamma_stirling", "riesz_normalization",
]
