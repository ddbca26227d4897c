"""Channel estimation for hybrid analog/digital massive-MIMO receivers.

Covariance-aware RF combiner design for one or several trainings, MMSE
estimation through a limited number of RF chains, phase-only and quantized
combiner realization, covariance estimation from partial observations and a
seeded Monte Carlo harness.
"""

from .channel import SpatialCovariance, exp_covariance, ray_covariance
from .combiner import (
    Combiner,
    CombinerSet,
    DesignMethod,
    Mode,
    design_alternating,
    design_block_selection,
    design_dft_random,
    design_sequential,
    design_single_optimal,
    fully_digital,
    phase_only_project,
    quantize_phases,
    realize,
)
from .config import SweepConfig, parse_config
from .covest import CovEstConfig, estimate_covariance, psd_project, recover_channel_cov
from .errors import (
    ConfigError,
    DefinitenessError,
    DegenerateError,
    DimensionError,
    DomainError,
    HybridCEError,
    NotHermitianError,
    NotPSDError,
    NumericalError,
    RankError,
)
from .estimator import (
    TrainingScenario,
    analytic_mse,
    analytic_mse_single_optimal,
    empirical_nmse,
    fully_digital_reference,
    wiener_filter,
)
from .precoding import HybridPrecoder, phased_zf_precoder, sum_spectral_efficiency
from .sweep import SweepRecord, run_mse_sweep, run_se_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
