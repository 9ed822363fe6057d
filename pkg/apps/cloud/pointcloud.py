"""Point-cloud containers and the crop / downsample / transform operations."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from apps.core.exceptions import DomainError
from apps.geom.transforms import RigidTransform

logger = logging.getLogger("apps.cloud.pointcloud")


class Frame(str, enum.Enum):
    CHASSIS = "chassis-origin"
    CAMERA = "camera"


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered (N, 3) points in meters, tagged with the frame they live in"""

    points: np.ndarray
    frame: Frame

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise DomainError("Point cloud contains non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "frame", Frame(self.frame))

    def __len__(self):
        return int(self.points.shape[0])

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty(cls, frame: Frame) -> "PointCloud":
        return cls(np.empty((0, 3)), frame)

    def subset(self, indices: np.ndarray) -> "PointCloud":
        return PointCloud(self.points[indices], self.frame)


@dataclass(frozen=True, eq=False)
class BoundingBox:
    """Axis-aligned box in its own frame (the fork frame for the pallet region)"""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.array(self.min_corner, dtype=float).reshape(3)
        hi = np.array(self.max_corner, dtype=float).reshape(3)
        if not np.all(lo < hi):
            raise DomainError(
                f"Bounding box min corner {lo.tolist()} must be below max corner {hi.tolist()}"
            )
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def dilated(self, margin: float) -> "BoundingBox":
        return BoundingBox(self.min_corner - margin, self.max_corner + margin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((points >= self.min_corner) & (points <= self.max_corner), axis=1)


def crop_bb(cloud: PointCloud, bb: BoundingBox, bb_to_cloud_frame: RigidTransform) -> PointCloud:
    """Keep the points inside ``bb``; ``bb_to_cloud_frame`` maps box coordinates into the cloud frame"""
    if cloud.is_empty:
        return cloud
    local = bb_to_cloud_frame.inverse().apply(cloud.points)
    return cloud.subset(np.flatnonzero(bb.contains(local)))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so draws do not depend on call history"""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def random_downsample(cloud: PointCloud, target_n: int, seed: int) -> PointCloud:
    """Uniform sampling without replacement down to ``target_n`` points, order preserved"""
    if target_n < 1:
        raise DomainError(f"Downsample target must be >= 1, got {target_n}", value=target_n)
    if len(cloud) <= target_n:
        return cloud
    picked = make_rng(seed).choice(len(cloud), size=target_n, replace=False)
    return cloud.subset(np.sort(picked))


def transform_cloud(cloud: PointCloud, t: RigidTransform, new_frame: Frame) -> PointCloud:
    if cloud.is_empty:
        return PointCloud.empty(new_frame)
    return PointCloud(t.apply(cloud.points), new_frame)


def write_xyz(cloud: PointCloud, path) -> Path:
    """Debug dump: one "x y z" row per point, meters, 9 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, cloud.points, fmt="%.9g", delimiter=" ")
    logger.debug("Point cloud written", extra={"data": {"path": str(path), "points": len(cloud)}})
    return path


def read_xyz(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=2).reshape(-1, 3)
