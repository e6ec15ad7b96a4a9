"""Decoherence of a charged-particle interferometer flying over a conducting grating.

The image charge of the beam oscillates as it crosses the grooves and radiates;
``W`` in the visibility ``|F| = exp(-W)`` measures how much which-path
information that radiation carries away.
"""

__version__ = "0.1.0"

from .decoherence import (  # noqa: E402
    E2_PRESETS,
    FINE_STRUCTURE,
    DecoherenceBreakdown,
    angular_factor,
    eta_closed,
    eta_timedomain,
    visibility,
    w_bb_zz_full,
    w_half_zz,
    w_sp,
)
from .errors import (  # noqa: E402
    ConfigError,
    NonConvergentError,
    ProximityWarning,
    SpdecohereError,
    ToleranceNotMetError,
    ValidationError,
    ValidityWarning,
)
from .profiles import (  # noqa: E402
    BeamConfig,
    GratingGeometry,
    SpectralTransform,
    VelocityProfile,
    profile_from_grating,
    spectral_moment,
    transform,
    triangular_profile,
    zero_profile,
)
from .quadrature import QuadratureSpec, angular_kernel, groove_sum, integrate_spectral  # noqa: E402

__all__ = [
    "__version__",
    "E2_PRESETS",
    "FINE_STRUCTURE",
    "DecoherenceBreakdown",
    "angular_factor",
    "eta_closed",
    "eta_timedomain",
    "visibility",
    "w_bb_zz_full",
    "w_half_zz",
    "w_sp",
    "ConfigError",
    "NonConvergentError",
    "ProximityWarning",
    "SpdecohereError",
    "ToleranceNotMetError",
    "ValidationError",
    "ValidityWarning",
    "BeamConfig",
    "GratingGeometry",
    "SpectralTransform",
    "VelocityProfile",
    "profile_from_grating",
    "spectral_moment",
    "transform",
    "triangular_profile",
    "zero_profile",
    "QuadratureSpec",
    "angular_kernel",
    "groove_sum",
    "integrate_spectral",
]
