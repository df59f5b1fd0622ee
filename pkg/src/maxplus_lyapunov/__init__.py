"""Max-plus models of queueing networks and their Lyapunov exponents."""

from .semiring import SemifieldKind, TropicalScalar, convert, oplus, otimes, power
from .matrix import TropicalMatrix, TropicalVector, mat_add, mat_mul, mat_power, norm, spectral_radius, trace
from .distributions import ServiceDistribution, parse_distribution
from .expr import ExprMatrix, ServiceExpr, const, tau
from .stochastic import (
    DEFAULT_SEED,
    RandomMatrixProcess,
    expected_matrix,
    kingman_check,
    sample_matrix,
)
from .structure import MatrixType, classify, rank_one_factorize, skeleton_decompose
from .lyapunov import (
    DependencyViolationError,
    ExistenceUnverifiedError,
    LyapunovEstimate,
    estimate_monte_carlo,
    evaluate_by_decomposition,
    evaluate_closed_form,
)
from .network import Blocking, ModelInvalidError, NetworkSpec, compile_network, preset, round_robin_expand

__version__ = "0.1.0"
