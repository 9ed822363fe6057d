"""
Pallet tracking controller.

Each cycle the measured cloud is registered against the source cloud
captured at descent start, carried along by the fork motion since then.
The residual ICP motion, moved into the chassis-origin frame, is the
pallet's tilt and height relative to the fork. Tilt and height commands
alternate until the heel switch opens with the pallet and fork parallel.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from apps.cloud.pointcloud import (
    BoundingBox,
    Frame,
    PointCloud,
    crop_bb,
    random_downsample,
    transform_cloud,
)
from apps.core.exceptions import DomainError, RegistrationError
from apps.core.logging.logging_utils import StructuredLogger
from apps.geom.kinematics import ForkState, KinematicConfig, camera_pose, fork_pose, pallet_pose
from apps.geom.transforms import E_X, E_Z, RigidTransform
from apps.icp.services import IcpParams, IcpResult, icp_register

logger = logging.getLogger("apps.tracker.services")
events = StructuredLogger("tracker")

# Pallet region in the fork frame (heel pivot): the load above the deck.
DEFAULT_TRACKING_BOX = BoundingBox((-0.10, -0.55, 0.25), (1.10, 0.55, 1.00))
# A height step that moved the fork less than this share of descend_step means it is resting.
RESTING_FRACTION = 0.2


class ControlMode(str, enum.Enum):
    PROPOSED = "Proposed"
    NO_CONTROL = "NoControl"


class TrackerPhase(str, enum.Enum):
    CAPTURE_SOURCE = "CaptureSource"
    DESCEND_AND_TRACK = "DescendAndTrack"
    LOWER_TO_RELEASE = "LowerToRelease"
    READY_TO_WITHDRAW = "ReadyToWithdraw"
    HALTED = "Halted"


ALLOWED_TRANSITIONS = {
    TrackerPhase.CAPTURE_SOURCE: {TrackerPhase.CAPTURE_SOURCE, TrackerPhase.DESCEND_AND_TRACK},
    TrackerPhase.DESCEND_AND_TRACK: {
        TrackerPhase.DESCEND_AND_TRACK,
        TrackerPhase.LOWER_TO_RELEASE,
        TrackerPhase.READY_TO_WITHDRAW,
        TrackerPhase.HALTED,
    },
    TrackerPhase.LOWER_TO_RELEASE: {
        TrackerPhase.LOWER_TO_RELEASE,
        TrackerPhase.READY_TO_WITHDRAW,
        TrackerPhase.HALTED,
    },
    TrackerPhase.READY_TO_WITHDRAW: {TrackerPhase.READY_TO_WITHDRAW},
    TrackerPhase.HALTED: {TrackerPhase.HALTED},
}


class Command(str, enum.Enum):
    NONE = "none"
    TILT = "tilt"
    HEIGHT = "height"


@dataclass(frozen=True)
class TrackerParams:
    tilt_threshold: float = np.radians(0.25)
    cycle_period: float = 0.2
    halt_timeout: float = 30.0
    descend_step: float = 0.005
    release_overtravel: float = 0.05
    min_height: float = 0.0
    downsample_target: int = 7000
    bb_margin: float = 0.15
    mode: ControlMode = ControlMode.PROPOSED
    seed: int = 0
    tracking_box: BoundingBox = DEFAULT_TRACKING_BOX
    icp: IcpParams = field(default_factory=IcpParams)
    kinematics: KinematicConfig = field(default_factory=KinematicConfig)

    def __post_init__(self):
        if self.tilt_threshold <= 0:
            raise DomainError("tilt_threshold must be > 0", value=self.tilt_threshold)
        if self.cycle_period <= 0:
            raise DomainError("cycle_period must be > 0", value=self.cycle_period)
        if self.halt_timeout <= 0:
            raise DomainError("halt_timeout must be > 0", value=self.halt_timeout)
        if self.descend_step <= 0:
            raise DomainError("descend_step must be > 0", value=self.descend_step)
        if self.release_overtravel < 0:
            raise DomainError("release_overtravel must be >= 0", value=self.release_overtravel)
        object.__setattr__(self, "mode", ControlMode(self.mode))


@dataclass(frozen=True, eq=False)
class TrackerState:
    phase: TrackerPhase = TrackerPhase.CAPTURE_SOURCE
    src_cloud: Optional[PointCloud] = None
    capture_height: float = 0.0
    capture_fork_pose: Optional[RigidTransform] = None
    capture_camera_pose: Optional[RigidTransform] = None
    ref_tilt: float = 0.0
    height_ref: float = 0.0
    last_delta_tilt: float = 0.0
    last_delta_height: float = 0.0
    elapsed: float = 0.0
    cycle: int = 0
    last_command: Command = Command.NONE
    last_fork_height: Optional[float] = None
    release_height: Optional[float] = None
    icp_error: float = float("nan")
    icp_iterations: int = 0
    failure: Optional[str] = None

    @property
    def is_terminal(self) -> bool:
        return self.phase in (TrackerPhase.READY_TO_WITHDRAW, TrackerPhase.HALTED)


@dataclass(frozen=True)
class TrackerCommands:
    tilt_ref: float
    height_ref: float


def warm_start_source(
    state: TrackerState,
    fork_height_now: float,
    camera_pose_now: RigidTransform,
    fork_pose_now: Optional[RigidTransform] = None,
) -> PointCloud:
    """
    Carry the source cloud along with the fork since capture, in the current camera frame.

    With ``fork_pose_now`` the whole predicted fork motion (height and tilt)
    is applied; without it only the vertical descent since capture.
    """
    if state.src_cloud is None:
        raise DomainError("Source cloud has not been captured yet")

    if fork_pose_now is not None and state.capture_fork_pose is not None:
        fork_motion = fork_pose_now @ state.capture_fork_pose.inverse()
    else:
        fork_motion = RigidTransform.from_translation(0.0, 0.0, fork_height_now - state.capture_height)

    capture_camera = state.capture_camera_pose or camera_pose_now
    shift = camera_pose_now.inverse() @ fork_motion @ capture_camera
    return transform_cloud(state.src_cloud, shift, Frame.CAMERA)


def extract_delta(
    icp_t: RigidTransform, origin_from_camera: RigidTransform, gaze_point=None
) -> Tuple[float, float]:
    """
    Pallet tilt and height relative to the fork, from a camera-frame ICP result.

    The ICP motion is re-expressed in the chassis-origin frame; the height
    change is the vertical motion of ``gaze_point`` (default the origin).
    """
    delta = origin_from_camera @ icp_t @ origin_from_camera.inverse()
    rotation = delta.rotation
    delta_tilt = float(np.arctan2(E_X @ rotation @ E_Z, E_Z @ rotation @ E_Z))

    point = np.zeros(3) if gaze_point is None else np.asarray(gaze_point, dtype=float)
    delta_height = float(E_Z @ (delta.apply(point) - point))
    return delta_tilt, delta_height


def _bb_to_camera(cfg: KinematicConfig) -> RigidTransform:
    return camera_pose(cfg).inverse() @ fork_pose(cfg)


def _prepare(cloud: PointCloud, box: BoundingBox, cfg: KinematicConfig, params, seed) -> PointCloud:
    cropped = crop_bb(cloud, box, _bb_to_camera(cfg))
    return random_downsample(cropped, params.downsample_target, seed)


def _transition(state: TrackerState, phase: TrackerPhase, **changes) -> TrackerState:
    if phase not in ALLOWED_TRANSITIONS[state.phase]:
        raise DomainError(f"Illegal tracker transition {state.phase.value} -> {phase.value}")
    if phase != state.phase:
        events.event(
            "phase_changed",
            cycle=state.cycle,
            previous=state.phase.value,
            phase=phase.value,
            elapsed=state.elapsed,
        )
    return replace(state, phase=phase, **changes)


def _hold(state: TrackerState) -> TrackerCommands:
    return TrackerCommands(tilt_ref=state.ref_tilt, height_ref=state.height_ref)


def _capture(state, cloud, fork, params, cfg):
    src = _prepare(cloud, params.tracking_box, cfg, params, params.seed + state.cycle)
    if len(src) < params.icp.min_points:
        failure = f"Capture found {len(src)} points in the tracking box"
        events.error_event("capture_failed", cycle=state.cycle, points=len(src))
        new_state = replace(
            state,
            elapsed=state.elapsed + params.cycle_period,
            cycle=state.cycle + 1,
            ref_tilt=fork.tilt,
            height_ref=fork.height,
            failure=failure,
        )
        return _hold(new_state), new_state

    height_ref = max(params.min_height, fork.height - params.descend_step)
    new_state = _transition(
        state,
        TrackerPhase.DESCEND_AND_TRACK,
        src_cloud=src,
        capture_height=fork.height,
        capture_fork_pose=fork_pose(cfg),
        capture_camera_pose=camera_pose(cfg),
        ref_tilt=fork.tilt,
        height_ref=height_ref,
        elapsed=state.elapsed + params.cycle_period,
        cycle=state.cycle + 1,
        last_command=Command.HEIGHT,
        last_fork_height=fork.height,
        failure=None,
    )
    logger.info(
        "Source cloud captured",
        extra={"cycle": state.cycle, "data": {"points": len(src), "height": fork.height}},
    )
    return _hold(new_state), new_state


def _register(state, cloud, fork, params, cfg) -> Tuple[IcpResult, Tuple[float, float]]:
    measured = _prepare(
        cloud, params.tracking_box.dilated(params.bb_margin), cfg, params, params.seed + state.cycle
    )
    cam_now = camera_pose(cfg)
    source = warm_start_source(state, fork.height, cam_now, fork_pose(cfg))
    result = icp_register(source, measured, RigidTransform.identity(), params.icp)
    gaze = pallet_pose(cfg).translation
    return result, extract_delta(result.transform, cam_now, gaze)


def _release_done(state: TrackerState, fork: ForkState, params: TrackerParams) -> bool:
    if state.release_height is None:
        return False
    if fork.height <= state.release_height - params.release_overtravel:
        return True
    resting = (
        state.last_command == Command.HEIGHT
        and state.last_fork_height is not None
        and state.last_fork_height - fork.height < RESTING_FRACTION * params.descend_step
    )
    return resting


def tracker_step(
    state: TrackerState, measured_cloud: PointCloud, fork: ForkState, params: TrackerParams
) -> Tuple[TrackerCommands, TrackerState]:
    """
    Advance the controller by one cycle.

        Args:
            state: Current controller state
            measured_cloud: Raw depth cloud in the camera frame
            fork: Measured fork joints and limit switch
            params: Controller parameters, including the kinematic constants

        Returns:
            The tilt/height references and the next state. A failed
            registration leaves the state unchanged apart from the clock
            and ``failure``.
    """
    if state.is_terminal:
        return _hold(state), state

    cfg = fork.apply_to(params.kinematics)
    if state.phase == TrackerPhase.CAPTURE_SOURCE:
        return _capture(state, measured_cloud, fork, params, cfg)

    elapsed = state.elapsed + params.cycle_period
    if elapsed > params.halt_timeout:
        halted = _transition(
            state,
            TrackerPhase.HALTED,
            elapsed=elapsed,
            cycle=state.cycle + 1,
            height_ref=max(params.min_height, min(state.height_ref, fork.height)),
        )
        events.event("halted", cycle=state.cycle, elapsed=elapsed, message="timeout")
        return _hold(halted), halted

    try:
        result, (delta_tilt, delta_height) = _register(state, measured_cloud, fork, params, cfg)
    except RegistrationError as exc:
        events.error_event("icp_failed", error=exc, cycle=state.cycle)
        skipped = replace(state, elapsed=elapsed, cycle=state.cycle + 1, failure=str(exc))
        return _hold(skipped), skipped

    proposed = params.mode == ControlMode.PROPOSED
    phase = state.phase
    release_height = state.release_height
    if proposed and phase == TrackerPhase.DESCEND_AND_TRACK and not fork.limit_switch:
        phase = TrackerPhase.LOWER_TO_RELEASE
        release_height = fork.height

    aligned = abs(delta_tilt) <= params.tilt_threshold
    measured = dict(
        elapsed=elapsed,
        cycle=state.cycle + 1,
        last_delta_tilt=delta_tilt,
        last_delta_height=delta_height,
        last_fork_height=fork.height,
        release_height=release_height,
        icp_error=result.final_error,
        icp_iterations=result.iterations,
        failure=None,
    )

    if proposed:
        ready = (
            not fork.limit_switch
            and aligned
            and _release_done(replace(state, release_height=release_height), fork, params)
        )
    else:
        ready = not fork.limit_switch

    if ready:
        new_state = _transition(
            state,
            TrackerPhase.READY_TO_WITHDRAW,
            height_ref=max(params.min_height, min(state.height_ref, fork.height)),
            **measured,
        )
        return _hold(new_state), new_state

    if proposed and not aligned and state.last_command != Command.TILT:
        new_state = _transition(
            state,
            phase,
            ref_tilt=fork.tilt + delta_tilt,
            last_command=Command.TILT,
            **measured,
        )
        events.debug_event(
            "tilt_updated", cycle=state.cycle, delta_tilt=delta_tilt, ref_tilt=new_state.ref_tilt
        )
    else:
        height_ref = max(
            params.min_height, min(state.height_ref, fork.height) - params.descend_step
        )
        new_state = _transition(
            state, phase, height_ref=height_ref, last_command=Command.HEIGHT, **measured
        )
    return _hold(new_state), new_state
