"""Sobol sequences, shaken (randomised) Sobol integration, Owen scrambling
and variance-based sensitivity indices."""

from .integrands import Integrand, f1_nonsmooth, f2_smooth, get_integrand, read_polynomial_model
from .integration import (
    METHODS,
    ConvergenceReport,
    EstimatorReport,
    PlainMC,
    ShakenSobol,
    SobolQMC,
    StratifiedSymmetrized,
    SymmetrizedShakenSobol,
    convergence_study,
    integrate,
    mca_mss_1,
    mca_mss_2,
    mca_mss_2s,
    plain_mc,
    qmc_sobol,
)
from .prng import DEFAULT_SEED, RandomStream
from .scramble import OwenScrambler, ScrambleSpec, owen_qmc, owen_scramble
from .sensitivity import SobolSensitivity, SubsetSpec, full_report
from .shaking import ShakeConfig, ShakeError
from .sobol import (
    DirectionTable,
    PointSet,
    SobolGenerator,
    check_net_property,
    generate,
    load_direction_table,
    min_pairwise_distance,
)

__version__ = "0.1.0"
