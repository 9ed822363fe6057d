"""Forklift kinematic chain: chassis origin -> reach -> mast / fork -> camera / pallet."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from apps.core.exceptions import DomainError
from apps.geom.transforms import RigidTransform, chain

Breakpoints = Tuple[Tuple[float, float], ...]

# Fork height -> inner mast displacement. Free lift up to 0.3 m, then the
# inner mast travels half as far as the fork.
DEFAULT_MAST_POLYLINE: Breakpoints = ((0.0, 0.0), (0.3, 0.3), (3.0, 1.65))
MAIN_SEGMENT_SLOPE = 0.5


def validate_polyline(polyline: Breakpoints) -> Breakpoints:
    points = tuple((float(h), float(m)) for h, m in polyline)
    if len(points) != 3:
        raise DomainError(
            f"Mast polyline needs exactly 3 breakpoints (2 segments), got {len(points)}",
            value=points,
        )
    heights = [h for h, _ in points]
    if any(b <= a for a, b in zip(heights, heights[1:])):
        raise DomainError("Mast polyline heights must be strictly increasing", value=points)

    (h1, m1), (h2, m2) = points[1], points[2]
    slope = (m2 - m1) / (h2 - h1)
    if abs(slope - MAIN_SEGMENT_SLOPE) > 1e-9:
        raise DomainError(
            f"Main mast segment slope must be {MAIN_SEGMENT_SLOPE}, got {slope:.6f}",
            value=points,
        )
    return points


def mast_from_height(fork_height: float, polyline: Breakpoints = DEFAULT_MAST_POLYLINE) -> float:
    """Inner mast displacement for a fork height (piecewise linear)"""
    heights = np.array([h for h, _ in polyline])
    masts = np.array([m for _, m in polyline])
    if not heights[0] - 1e-12 <= fork_height <= heights[-1] + 1e-12:
        raise DomainError(
            f"Fork height {fork_height:.6f} m outside mast polyline domain "
            f"[{heights[0]:.3f}, {heights[-1]:.3f}] m",
            value=fork_height,
        )
    return float(np.interp(fork_height, heights, masts))


@dataclass(frozen=True, eq=False)
class KinematicConfig:
    """Joint values plus the constant transforms of the forklift chain"""

    reach: float = 0.0
    fork_height: float = 0.0
    fork_tilt: float = 0.0
    camera_on_mast: RigidTransform = field(default_factory=RigidTransform.identity)
    gaze_on_fork: RigidTransform = field(default_factory=RigidTransform.identity)
    mast_polyline: Breakpoints = DEFAULT_MAST_POLYLINE
    # Fork heel (tilt pivot) relative to the reach carriage at zero height.
    heel_offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "mast_polyline", validate_polyline(self.mast_polyline))

    def with_joints(self, fork_height=None, fork_tilt=None, reach=None) -> "KinematicConfig":
        return replace(
            self,
            fork_height=self.fork_height if fork_height is None else fork_height,
            fork_tilt=self.fork_tilt if fork_tilt is None else fork_tilt,
            reach=self.reach if reach is None else reach,
        )


def reach_transform(cfg: KinematicConfig) -> RigidTransform:
    return RigidTransform.from_translation(cfg.reach, 0.0, 0.0)


def camera_pose(cfg: KinematicConfig) -> RigidTransform:
    """Camera pose in the chassis-origin frame: reach . inner mast . camera mount"""
    mast = mast_from_height(cfg.fork_height, cfg.mast_polyline)
    return chain(
        [
            reach_transform(cfg),
            RigidTransform.from_translation(0.0, 0.0, mast),
            cfg.camera_on_mast,
        ]
    )


def fork_pose(cfg: KinematicConfig) -> RigidTransform:
    """Fork frame at the heel pivot, after tilt"""
    hx, hy, hz = cfg.heel_offset
    return chain(
        [
            reach_transform(cfg),
            RigidTransform.from_translation(hx, hy, hz + cfg.fork_height),
            RigidTransform.about_y(cfg.fork_tilt),
        ]
    )


def pallet_pose(cfg: KinematicConfig) -> RigidTransform:
    """Pallet gaze point on the fork, in the chassis-origin frame"""
    return fork_pose(cfg) @ cfg.gaze_on_fork


@dataclass(frozen=True)
class ForkState:
    """Measured fork joints plus the heel limit switch"""

    height: float = 0.0
    reach: float = 0.0
    tilt: float = 0.0
    limit_switch: bool = True

    def apply_to(self, cfg: KinematicConfig) -> KinematicConfig:
        return cfg.with_joints(fork_height=self.height, fork_tilt=self.tilt, reach=self.reach)
