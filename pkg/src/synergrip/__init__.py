"""Fingertip-force grasp controller with synergy-based posture decoding.

The package regulates a single grasp-size variable from 3-axis fingertip
force readings, decodes grasp postures conditioned on grasp type and
size, and executes lift / transport / place / handover scenarios against
a quasi-static contact simulation or a live sensor stream over a socket.
"""

from .controller import (
    ControllerParams,
    ControllerState,
    GripController,
    LoadClass,
    Phase,
    TelemetryRecord,
    classify_load,
    desired_force,
    grasp_step,
    release_step,
)
from .filters import EmaFilter, mean_contact_force
from .hand import (
    HandModel,
    JointConfiguration,
    default_hand_model,
    forward_kinematics,
    load_hand_model,
    thumb_index_distance,
    world_tangential,
)
from .scenario import (
    EpisodeReport,
    ScenarioScript,
    load_script,
    run_episode,
    run_from_recording,
    validate_script,
)
from .sim import ContactSim, SensorModel, SimObject, slip_update
from .synergy import (
    AnalyticSynergy,
    LearnedSynergy,
    calibrate_size_map,
    default_synergy,
    load_decoder_weights,
)
from .units import (
    ConfigError,
    FingertipForce,
    GraspContext,
    GraspType,
    Pose,
    Vec3,
    decompose,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticSynergy",
    "ConfigError",
    "ContactSim",
    "ControllerParams",
    "ControllerState",
    "EmaFilter",
    "EpisodeReport",
    "FingertipForce",
    "GraspContext",
    "GraspType",
    "GripController",
    "HandModel",
    "JointConfiguration",
    "LearnedSynergy",
    "LoadClass",
    "Phase",
    "Pose",
    "ScenarioScript",
    "SensorModel",
    "SimObject",
    "TelemetryRecord",
    "Vec3",
    "calibrate_size_map",
    "classify_load",
    "decompose",
    "default_hand_model",
    "default_synergy",
    "desired_force",
    "forward_kinematics",
    "grasp_step",
    "load_decoder_weights",
    "load_hand_model",
    "load_script",
    "mean_contact_force",
    "release_step",
    "run_episode",
    "run_from_recording",
    "slip_update",
    "thumb_index_distance",
    "validate_script",
    "world_tangential",
    "__version__",
]
