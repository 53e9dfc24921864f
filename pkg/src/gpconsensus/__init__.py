"""Simulation and verification of adaptive guaranteed-performance consensus."""
from ._accel import USE_NUMBA
from .analysis import (
    AnalysisReport,
    check_theorems,
    convergence_coefficient,
    convergence_time,
    guaranteed_cost,
    lyapunov,
    lyapunov_rate_analytic,
    performance_cost,
    rho_bounds,
)
from .decomposition import SpectralFrame, build_frame, disagreement, split_components
from .dynamics import (
    ProtocolConfig,
    SystemState,
    Trajectory,
    control_input,
    rk4_step,
    simulate,
    weight_rate,
)
from .graph import (
    Topology,
    algebraic_connectivity,
    builtin_topology,
    is_connected,
    laplacian,
    load_topology,
    parse_edge_list,
    symmetric_eigendecomposition,
)

__version__ = "0.1.0"
