"""Displacement-consensus formation control.

Maneuvering through modified Laplacian weights, and closed-form prediction
of the distorted, drifting formations produced by mismatched sensing.
"""

from .errors import (
    DegenerateEdgeError,
    DesignInconsistencyError,
    DivergenceError,
    EigenSolverError,
    FormationError,
    InfeasibleDesignError,
    NumericError,
    SingularityError,
    StepSizeError,
    UnsupportedTopologyError,
    ValidationError,
)
from .formation import (
    Framework,
    ReferenceShape,
    blocks,
    decompose_reference,
    relative_positions,
    shape_membership,
    stack,
)
from .graph import Graph, build_incidence, build_laplacian, classify_graph, lift
from .maneuver import (
    ManeuverDesign,
    MotionParams,
    SpectrumReport,
    agent_control,
    build_maneuver,
    design_motion_params,
    kappa_bound,
    maneuver_control,
    modal_solution,
    spectrum_check,
)
from .robustness import (
    RobustnessPrediction,
    SensorModel,
    build_sensor_matrix,
    faulty_control,
    predict_distortion,
    two_agent_residual,
)
from .scenario import load_scenario, run_scenario
from .simulation import (
    ConvergenceMetrics,
    DynamicsSpec,
    Trajectory,
    convergence_metrics,
    simulate,
)

__version__ = "0.1.0"
