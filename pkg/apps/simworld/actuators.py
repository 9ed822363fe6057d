"""Hydraulic-like joint models: first-order lag, rate limit, optional PD drive."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from apps.core.exceptions import DomainError
from apps.simworld.state import JointState, WorldState

MAX_DT = 0.05


@dataclass(frozen=True)
class ActuatorModel:
    time_constant: float
    rate_limit: float = np.inf
    # Height only: can lift against gravity but cannot push a load down.
    one_way: bool = False
    # (stiffness, damping) of a PD position loop; None tracks the lagged reference directly.
    pd_gains: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.time_constant <= 0:
            raise DomainError("time_constant must be > 0", value=self.time_constant)
        if self.rate_limit <= 0:
            raise DomainError("rate_limit must be > 0", value=self.rate_limit)

    def _alpha(self, dt: float) -> float:
        return 1.0 - np.exp(-dt / self.time_constant)

    def track(self, joint: JointState, reference: float, dt: float) -> JointState:
        """Position mode"""
        alpha = self._alpha(dt)
        if self.pd_gains is None:
            target = joint.position + alpha * (reference - joint.position)
            step = np.clip(target - joint.position, -self.rate_limit * dt, self.rate_limit * dt)
            return JointState(joint.position + step, step / dt)

        lagged = joint.position if joint.reference is None else joint.reference
        lagged += alpha * (reference - lagged)
        stiffness, damping = self.pd_gains
        acceleration = stiffness * (lagged - joint.position) - damping * joint.velocity
        velocity = np.clip(joint.velocity + acceleration * dt, -self.rate_limit, self.rate_limit)
        return JointState(joint.position + velocity * dt, velocity, lagged)

    def follow_rate(self, joint: JointState, rate: float, dt: float) -> JointState:
        """Rate mode: the commanded velocity is lagged, limited and integrated"""
        velocity = joint.velocity + self._alpha(dt) * (rate - joint.velocity)
        velocity = float(np.clip(velocity, -self.rate_limit, self.rate_limit))
        return JointState(joint.position + velocity * dt, velocity)


@dataclass(frozen=True)
class ActuatorSet:
    tilt: ActuatorModel = field(
        default_factory=lambda: ActuatorModel(0.4, rate_limit=np.radians(3.0))
    )
    height: ActuatorModel = field(
        default_factory=lambda: ActuatorModel(0.3, rate_limit=0.1, one_way=True)
    )
    drive: ActuatorModel = field(default_factory=lambda: ActuatorModel(0.2, rate_limit=0.5))


@dataclass(frozen=True)
class PlantCommand:
    tilt_ref: float
    height_ref: Optional[float] = None
    height_rate: Optional[float] = None
    drive: float = 0.0

    def __post_init__(self):
        if (self.height_ref is None) == (self.height_rate is None):
            raise DomainError("Give exactly one of height_ref and height_rate")

    @classmethod
    def hold(cls, state: WorldState) -> "PlantCommand":
        return cls(tilt_ref=state.tilt_joint.position, height_ref=state.height_joint.position)


def actuate(
    cmd: PlantCommand, dt: float, state: WorldState, actuators: ActuatorSet = ActuatorSet()
) -> WorldState:
    """
    Advance the joints by ``dt``.

    The fork height written here is the actuator's own position; contact
    resolution may lift the fork back up when the load is in the way.
    """
    if not 0.0 < dt <= MAX_DT:
        raise DomainError(f"Physics step must lie in (0, {MAX_DT}] s, got {dt}", value=dt)

    tilt_joint = actuators.tilt.track(state.tilt_joint, cmd.tilt_ref, dt)
    if cmd.height_rate is not None:
        height_joint = actuators.height.follow_rate(state.height_joint, cmd.height_rate, dt)
    else:
        height_joint = actuators.height.track(state.height_joint, cmd.height_ref, dt)
    drive_joint = actuators.drive.follow_rate(state.drive_joint, cmd.drive, dt)

    return replace(
        state,
        fork=replace(state.fork, tilt=tilt_joint.position, height=max(0.0, height_joint.position)),
        tilt_joint=tilt_joint,
        height_joint=height_joint,
        drive_joint=drive_joint,
        chassis_x=state.chassis_x + drive_joint.velocity * dt,
        time=state.time + dt,
    )
