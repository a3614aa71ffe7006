"""Simulation and information-theoretic analysis of sub-critical SINR
random networks: marked-Poisson sampling, SINR/annealed graphs, binned
empirical measures, large-deviation rate functionals, and a calibrated
typicality test.
"""

from .model import (
    ConstantMarkFunction,
    Domain,
    ModelParams,
    ScalingSchedule,
    TabulatedMarkFunction,
    UniformDensity,
    ValidationResult,
    a_of_lambda,
    validate,
)
from .sampler import MarkedPoint, PointSample, assign_marks, replicate_seed, sample_ppp
from .connectivity import (
    CalibratedKernel,
    ConnectivityKernel,
    ConstantKernel,
    EdgeSet,
    ExpDistanceKernel,
    PathLoss,
    ScaledKernel,
    build_annealed_graph,
    build_quenched_graph,
    calibrate_threshold_scale,
    calibrated_kernel,
    sinr,
)
from .simulate import SinrRealization, generate_realization, generate_replicates
from .measures import (
    BinGrid,
    BinnedMeasure,
    BinnedPairMeasure,
    KernelTable,
    empirical_measures,
    kernel_table,
    m1,
    m2,
    m_diag,
    product_kernel_measure,
    ratio_kernel,
    reference_measure,
    sup_distance,
)
from .information import (
    RateReport,
    aep_statistic,
    bits_estimate,
    cardinality_exponent,
    entropy_h,
    kullback_action_closed,
    kullback_action_dual,
    log_likelihood,
    model_entropy,
    rate_i1,
    rate_i2,
    rate_report,
    rel_entropy,
    spectral_potential,
    tilted_entropy,
)
from .detection import (
    DetectionReport,
    EstimatedModel,
    NetworkAnomalyDetector,
    calibrate_threshold,
    detect,
    estimate,
    rejection_rate,
    test_statistic,
)
from .harness import (
    DEFAULT_LADDER,
    FAST_LADDER,
    ExperimentPlan,
    TrendResult,
    run_aep,
    run_aep_gamma_sweep,
    run_calibration,
    run_decay,
    run_wlln,
)
from .io import load_realization, save_realization

__version__ = "0.1.0"
