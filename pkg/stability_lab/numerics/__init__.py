# stability_lab/numerics/__init__.py
"""
Numerical kernels for coupled beam/wave stability analysis.
Discretization, block coupling, semigroup evolution and decay certification.
"""

from .discretize import (
    Grid,
    DiscreteGenerator,
    BoundaryInjection,
    BoundaryObservation,
    EnergyGenerator,
    build_generator,
    build_gram,
    build_injection,
    build_observation,
    dissipation_rate,
    dissipation_slack,
    free_nodes,
    state_profiles,
)

from .coupling import (
    CoupledGenerator,
    assemble_coupled,
    coupled_from_spec,
    direct_coupled_matrix,
)

from .semigroup import (
    Trajectory,
    evolve_direct,
    evolve_vop,
    convolution_term,
    effective_panels,
    resolvent_apply,
    resolvent_identity_residual,
    semigroup_property_residual,
    strong_continuity_residual,
    lambda_extension_residual,
)

from .stability import (
    SpectralReport,
    DecayFit,
    AdmissibilityEstimate,
    DecayCertificate,
    ProductBoundCheck,
    spectral_abscissa,
    operator_norm_at,
    norms_on_grid,
    fit_decay,
    composite_bound,
    admissibility_control,
    admissibility_observation,
    admissibility_limit,
    saturated_admissibility,
    admissibility_product_check,
    theorem_bound_certificate,
)

__all__ = [
    # Discretization
    'Grid',
    'DiscreteGenerator',
    'BoundaryInjection',
    'BoundaryObservation',
    'EnergyGenerator',
    'build_generator',
    'build_gram',
    'build_injection',
    'build_observation',
    'dissipation_rate',
    'dissipation_slack',
    'free_nodes',
    'state_profiles',

    # Coupling
    'CoupledGenerator',
    'assemble_coupled',
    'coupled_from_spec',
    'direct_coupled_matrix',

    # Evolution
    'Trajectory',
    'evolve_direct',
    'evolve_vop',
    'convolution_term',
    'effective_panels',
    'resolvent_apply',
    'resolvent_identity_residual',
    'semigroup_property_residual',
    'strong_continuity_residual',
    'lambda_extension_residual',

    # Stability
    'SpectralReport',
    'DecayFit',
    'AdmissibilityEstimate',
    'DecayCertificate',
    'ProductBoundCheck',
    'spectral_abscissa',
    'operator_norm_at',
    'norms_on_grid',
    'fit_decay',
    'composite_bound',
    'admissibility_control',
    'admissibility_observation',
    'admissibility_limit',
    'saturated_admissibility',
    'admissibility_product_check',
    'theorem_bound_certificate',
]
