"""Posterior Cramer-Rao bounds and EKF validation for multipath radio SLAM.

Evaluates recursive posterior lower bounds on agent position, velocity and
orientation errors (PEB, VEB, OEB) and on the position error of specular
reflecting surfaces (MEB) for SLAM with distributed anchors observing
line-of-sight, single-bounce and double-bounce paths, and validates the
bounds empirically with a model-matched EKF-SLAM estimator.
"""

from .ekf import EkfState, MonteCarloResult, run_monte_carlo
from .fim import (
    ComponentOrder,
    IsotropicAperture,
    UniformLinearArray,
    ZeroApertureError,
    angle_variance,
    channel_fim,
    global_jacobian,
    global_snapshot_fim,
    ranging_variance,
)
from .geometry import (
    AgentPose,
    Anchor,
    ChannelParams,
    DegenerateGeometryError,
    PathComponent,
    SurfaceMap,
    channel_params,
    mirrored_agent,
    virtual_anchor,
)
from .pcrlb import (
    BoundRecord,
    SingularFimError,
    StateSpaceModel,
    extract_bounds,
    fuse,
    predict_fim,
    run_recursion,
)
from .scenario import (
    Scenario,
    ScenarioError,
    generate_measurements,
    generate_trajectory,
    ground_truth,
    load_scenario,
)
from .streams import derive_run_stream

__version__ = "0.1.0"

__all__ = [
    "AgentPose",
    "Anchor",
    "BoundRecord",
    "ChannelParams",
    "ComponentOrder",
    "DegenerateGeometryError",
    "EkfState",
    "IsotropicAperture",
    "MonteCarloResult",
    "PathComponent",
    "Scenario",
    "ScenarioError",
    "SingularFimError",
    "StateSpaceModel",
    "SurfaceMap",
    "UniformLinearArray",
    "ZeroApertureError",
    "angle_variance",
    "channel_fim",
    "channel_params",
    "derive_run_stream",
    "extract_bounds",
    "fuse",
    "generate_measurements",
    "generate_trajectory",
    "global_jacobian",
    "global_snapshot_fim",
    "ground_truth",
    "load_scenario",
    "mirrored_agent",
    "predict_fim",
    "ranging_variance",
    "run_monte_carlo",
    "run_recursion",
    "virtual_anchor",
]
