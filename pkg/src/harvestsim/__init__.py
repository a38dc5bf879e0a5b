"""harvestsim: a desk-scale simulator for autonomous sweet-pepper harvesting.

Synthetic trellis scenes, colour-based crop detection, grasp and cut pose
selection, 7-DOF arm kinematics, the five-stage harvest state machine with
pluggable attach/detach strategies, and a Monte-Carlo trial harness with
benchmark comparison.
"""

from .arm import (
    Arc,
    ArmModel,
    JointSpec,
    SingleView,
    default_arm,
    forward_kinematics,
    inverse_kinematics,
    plan_scan_trajectory,
    trajectory_duration,
)
from .cloud import ColoredPointCloud, read_ply, write_ply
from .design import (
    FingerLinkBounds,
    FingerLinkDesign,
    ReachabilityResult,
    optimize_finger_links,
    reachability_score,
)
from .errors import (
    ComparisonError,
    ConfigurationError,
    EmptyTrialError,
    FitFailureError,
    IllegalTransitionError,
    InsufficientDataError,
    UnreachableError,
)
from .fsm import (
    AttachOutcome,
    DetachOutcome,
    Event,
    FourFingerGripper,
    HarvestAttempt,
    HarvestState,
    INITIAL_STATE,
    OscillatingBlade,
    Reason,
    SnapPull,
    Stage,
    SuctionCup,
    TimingModel,
    WireLoop,
    attempt_attach,
    attempt_detach,
    cycle_time,
    step,
)
from .geometry import Pose, look_at
from .grasp import (
    EllipsoidFit,
    GraspCandidate,
    GraspMethod,
    GraspPlan,
    fit_ellipsoid,
    fit_model_grasp,
    make_grasp_plan,
    rank_grasp_candidates,
)
from .perception import ColorModel, PepperDetection, detect_color, segment_clusters
from .scene import (
    Leaf,
    Scene,
    SceneConfig,
    SensorModel,
    SweetPepper,
    generate_scene,
    occlusion_fraction,
    read_scene,
    render_pointcloud,
    write_scene,
)
from .trials import (
    ComparisonResult,
    TrialConfig,
    TrialReport,
    bench_snap_pull,
    compare_to_reference,
    run_trial,
    wilson_interval,
)

__version__ = "0.1.0"
