"""Phase estimation with dephased coherent states and an optical parametric oscillator."""

__version__ = "0.1.0"

from .errors import (
    ConfigError, IntegrationNotConverged, NegativeThermal, NoBracket, NoHalfCrossing,
    NormalizationError, NoThreshold, NotCoherent, NotDiagonal, NotUnimodal, NumericalError,
    OpoLabError, RangeError, SingularPurity,
)
from .gaussian import (
    GaussianState, SqueezedThermalDecomposition, coherent, loss, mean_photons, purity, rotate,
    squeeze, sts_decompose, thermal, vacuum,
)
from .opo import (
    BlockSchemeFactors, OpoOutputMoments, OpoParams, amplified_mean, apply_opo, block_factors,
    output_moments, squeezing_r,
)
from .noise import GaussianMixture, PhaseNoiseParams, dephase, dephase_then_opo, mixture_moments
from .phase import (
    IndirectPhaseResult, PhaseDistribution, hwhm, indirect_variance, phase_density,
    threshold_alpha, threshold_d, threshold_sigma_direct, threshold_sigma_indirect,
)
from .estimation import (
    EstimationReport, HomodyneModel, cramer_rao, dephasing_qfi_bound, energy,
    fi_homodyne_noiseless, fi_homodyne_noisy, optimized_quadrature, qfi_gaussian,
    qfi_noiseless, relative_fluctuation, threshold_r,
)
from .montecarlo import SampleConfig, empirical_fi, sample_heterodyne, sample_homodyne
