"""softteleop: teleoperation stack for modular parallel soft manipulators."""

from .config import AppConfig, ControlConfig, load_config, reference_modules
from .control import (
    ControlState,
    IkResult,
    PidGains,
    TargetCommand,
    inverse_kinematics,
    pid_step,
    run_to_target,
    workspace_box,
)
from .evaluate import (
    ErrorReport,
    EvalSample,
    StatsRow,
    TrajectorySpec,
    build_report,
    compute_stats,
    dump_samples,
    emit_report,
    run_eval,
)
from .filtering import (
    KalmanParams,
    KalmanState,
    covariance_fixed_point,
    filter_series,
    kalman_step,
    mean_filter,
    steady_state_gain,
)
from .geometry import (
    ModulePose,
    ModuleReading,
    ModuleSpec,
    RobotPose,
    actuator_lengths,
    base_vertices,
    clamp_lengths,
    compose_global,
    forward_chain,
    next_base_origin,
    platform_center_normal,
    rotation_from_imu,
    top_vertices,
)
from .observer import (
    Observer,
    SensorFrame,
    SensorLineError,
    format_command_line,
    format_sensor_line,
    parse_command_line,
    parse_sensor_line,
)
from .plant import ModuleFit, NoiseModel, Plant, inverse_module
from .protocol import Message, ProtocolError, decode, encode

__version__ = "0.1.0"
