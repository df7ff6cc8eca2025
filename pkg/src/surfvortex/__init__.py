"""Point-vortex dynamics on closed genus-0 surfaces with conformal metrics."""

from .dynamics import (
    MassVortexState,
    Trajectory,
    VortexState,
    hamiltonian,
    integrate_mass_trajectory,
    integrate_trajectory,
    marker_velocity,
    mass_vortex_rhs,
    momentum_invariants,
    single_vortex_field,
    vortex_velocities,
    vortex_velocities_reduced,
)
from .errors import (
    ChartDomainError,
    CollisionError,
    ConfigError,
    MetricError,
    ShootingError,
    SingularityError,
    SurfVortexError,
)
from .experiments import (
    DipoleReport,
    SectionRecord,
    SectionSpec,
    dipole_experiment,
    poincare_section,
)
from .geodesics import conformal_distance, exponential_map, geodesic_integrate
from .greens import GreensEvaluator, green_standard, robin_standard
from .metrics import (
    ConformalMetric,
    ellipsoid_metric,
    gaussian_curvature,
    metric_from_name,
    metric_from_table,
    round_metric,
    scaled_metric,
    spheroid_metric,
    total_area,
)
from .spectral import SphereGrid

__version__ = "0.1.0"

__all__ = [
    "ChartDomainError",
    "CollisionError",
    "ConfigError",
    "ConformalMetric",
    "DipoleReport",
    "GreensEvaluator",
    "MassVortexState",
    "MetricError",
    "SectionRecord",
    "SectionSpec",
    "ShootingError",
    "SingularityError",
    "SphereGrid",
    "SurfVortexError",
    "Trajectory",
    "VortexState",
    "conformal_distance",
    "dipole_experiment",
    "ellipsoid_metric",
    "exponential_map",
    "gaussian_curvature",
    "geodesic_integrate",
    "green_standard",
    "hamiltonian",
    "integrate_mass_trajectory",
    "integrate_trajectory",
    "marker_velocity",
    "mass_vortex_rhs",
    "metric_from_name",
    "metric_from_table",
    "momentum_invariants",
    "poincare_section",
    "robin_standard",
    "round_metric",
    "scaled_metric",
    "single_vortex_field",
    "spheroid_metric",
    "total_area",
    "vortex_velocities",
    "vortex_velocities_reduced",
]
