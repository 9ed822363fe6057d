"""
Withdrawal along the fork's extension line.

The fork height reference follows the line the blades point along at the
moment of release; the chassis reverses at constant speed and a
proportional height-rate command removes the tracking error. Tilt stays
frozen at its release value.

Tilt is positive with the tip down (right-handed rotation about y), so the
reference climbs while backing off a positive tilt: 2 deg over 0.5 m of
odometry raises it 0.01746 m. Under a tip-up-positive convention the same
line reads as a drop for a +2 deg tilt.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from apps.core.exceptions import DomainError, OdometryRegressionError
from apps.geom.kinematics import ForkState

logger = logging.getLogger("apps.withdraw.services")

DEFAULT_FORK_LENGTH = 1.0
DEFAULT_KP_HEIGHT = 2.0
DEFAULT_BACK_SPEED = 0.2
DEFAULT_TARGET_DISTANCE = 1.3


@dataclass(frozen=True)
class WithdrawPlan:
    start_height: float
    start_tilt: float
    kp_height: float = DEFAULT_KP_HEIGHT
    back_speed: float = DEFAULT_BACK_SPEED
    target_distance: float = DEFAULT_TARGET_DISTANCE
    fork_length: float = DEFAULT_FORK_LENGTH

    def __post_init__(self):
        if self.back_speed <= 0:
            raise DomainError("back_speed must be > 0", value=self.back_speed)
        if self.target_distance <= self.fork_length:
            raise DomainError(
                f"target_distance {self.target_distance:.3f} m must exceed the fork length "
                f"{self.fork_length:.3f} m",
                value=self.target_distance,
            )
        if self.kp_height < 0:
            raise DomainError("kp_height must be >= 0", value=self.kp_height)

    def target_height(self, odometry_s: float) -> float:
        """Height on the extension line after backing off ``odometry_s``"""
        # Positive tilt dips the tip, so backing away climbs the line.
        return self.start_height + odometry_s * np.tan(self.start_tilt)


@dataclass(frozen=True)
class WithdrawCommands:
    height_rate_cmd: float
    drive_cmd: float
    tilt_ref: float
    done: bool
    fault: Optional[str] = None


def plan_withdraw(
    fork: ForkState,
    kp_height: float = DEFAULT_KP_HEIGHT,
    back_speed: float = DEFAULT_BACK_SPEED,
    target_distance: float = DEFAULT_TARGET_DISTANCE,
    fork_length: float = DEFAULT_FORK_LENGTH,
) -> WithdrawPlan:
    """Freeze the measured height and tilt at release into a withdrawal plan"""
    plan = WithdrawPlan(
        start_height=fork.height,
        start_tilt=fork.tilt,
        kp_height=kp_height,
        back_speed=back_speed,
        target_distance=target_distance,
        fork_length=fork_length,
    )
    logger.info(
        "Withdrawal planned",
        extra={
            "data": {
                "start_height": plan.start_height,
                "start_tilt_deg": float(np.degrees(plan.start_tilt)),
                "target_distance": plan.target_distance,
            }
        },
    )
    return plan


def withdraw_step(
    plan: WithdrawPlan,
    odometry_s: float,
    measured_height: float,
    previous_s: Optional[float] = None,
) -> WithdrawCommands:
    if previous_s is not None and odometry_s < previous_s:
        fault = OdometryRegressionError(previous_s, odometry_s)
        logger.error(str(fault), extra={"data": {"previous": previous_s, "current": odometry_s}})
        return WithdrawCommands(0.0, 0.0, plan.start_tilt, done=False, fault=str(fault))

    if odometry_s >= plan.target_distance:
        return WithdrawCommands(0.0, 0.0, plan.start_tilt, done=True)

    error = plan.target_height(odometry_s) - measured_height
    return WithdrawCommands(
        height_rate_cmd=plan.kp_height * error,
        drive_cmd=-plan.back_speed,
        tilt_ref=plan.start_tilt,
        done=False,
    )


class WithdrawController:
    """Stateful wrapper remembering the last odometry reading"""

    def __init__(self, plan: WithdrawPlan):
        self.plan = plan
        self.last_s: Optional[float] = None
        self.faulted = False

    def step(self, odometry_s: float, measured_height: float) -> WithdrawCommands:
        commands = withdraw_step(self.plan, odometry_s, measured_height, self.last_s)
        if commands.fault:
            self.faulted = True
        else:
            self.last_s = odometry_s
        return commands

    def tracking_error(self, odometry_s: float, measured_height: float) -> float:
        return abs(measured_height - self.plan.target_height(odometry_s))
