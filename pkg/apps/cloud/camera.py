"""
Synthetic depth camera.

Stands in for the RGBD sensor: a pinhole model casts one ray per pixel
against a scene of oriented boxes and returns the nearest hits as a
point cloud in the optical camera frame (z forward, x right, y down).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from apps.cloud.pointcloud import Frame, PointCloud, make_rng
from apps.core.exceptions import DomainError
from apps.core.logging.logging_utils import log_execution_time
from apps.geom.transforms import RigidTransform

logger = logging.getLogger("apps.cloud.camera")

MIN_RANGE = 1e-9
_PARALLEL_EPS = 1e-15


@dataclass(frozen=True, eq=False)
class OrientedBox:
    """Box primitive: ``pose`` maps box-centered coordinates into the scene frame"""

    pose: RigidTransform
    half_extents: np.ndarray
    name: str = ""

    def __post_init__(self):
        half = np.array(self.half_extents, dtype=float).reshape(3)
        if not np.all(half > 0):
            raise DomainError(f"Box half extents must be positive, got {half.tolist()}", value=half)
        object.__setattr__(self, "half_extents", half)

    @classmethod
    def from_corners(cls, min_corner, max_corner, name="") -> "OrientedBox":
        lo = np.asarray(min_corner, dtype=float)
        hi = np.asarray(max_corner, dtype=float)
        return cls(RigidTransform.from_translation(*((lo + hi) / 2)), (hi - lo) / 2, name)

    def transformed(self, t: RigidTransform) -> "OrientedBox":
        return OrientedBox(t @ self.pose, self.half_extents, self.name)


@dataclass(frozen=True, eq=False)
class CameraModel:
    width: int
    height: int
    fov_h: float
    fov_v: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    depth_noise_sigma: float = 0.002
    # Sub-pixel ray offset drawn per frame, as a share of one pixel.
    pixel_jitter: float = 1.0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise DomainError(
                f"Camera resolution must be at least 8x8, got {self.width}x{self.height}",
                value=(self.width, self.height),
            )
        for name in ("fov_h", "fov_v"):
            fov = getattr(self, name)
            if not 0.0 < fov < np.pi:
                raise DomainError(f"Camera {name} must lie in (0, pi), got {fov:.6f}", value=fov)
        if self.depth_noise_sigma < 0:
            raise DomainError("Depth noise sigma must be non-negative", value=self.depth_noise_sigma)
        if not 0.0 <= self.pixel_jitter <= 1.0:
            raise DomainError("Pixel jitter must lie in [0, 1]", value=self.pixel_jitter)

    @property
    def fx(self) -> float:
        return (self.width / 2.0) / np.tan(self.fov_h / 2.0)

    @property
    def fy(self) -> float:
        return (self.height / 2.0) / np.tan(self.fov_v / 2.0)

    def with_pose(self, pose: RigidTransform) -> "CameraModel":
        return CameraModel(
            self.width,
            self.height,
            self.fov_h,
            self.fov_v,
            pose,
            self.depth_noise_sigma,
            self.pixel_jitter,
        )

    def ray_directions(self, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Unit ray per pixel, row-major (v, u), in the camera frame.

        Rays pass through pixel centres unless ``offsets`` (N x 2, in pixels,
        u then v) moves them.
        """
        uu, vv = np.meshgrid(np.arange(self.width) + 0.5, np.arange(self.height) + 0.5)
        uu, vv = uu.ravel(), vv.ravel()
        if offsets is not None:
            uu = uu + offsets[:, 0]
            vv = vv + offsets[:, 1]
        u = (uu - self.width / 2.0) / self.fx
        v = (vv - self.height / 2.0) / self.fy
        rays = np.stack([u, v, np.ones(u.size)], axis=1)
        return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def _ray_box_range(rays: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Entry range of rays cast from the camera origin into one box; inf on a miss"""
    rotation, center = box.pose.rotation, box.pose.translation
    origin = -rotation.T @ center
    local = rays @ rotation
    local = np.where(
        np.abs(local) < _PARALLEL_EPS, np.copysign(_PARALLEL_EPS, local), local
    )

    t1 = (-box.half_extents - origin) / local
    t2 = (box.half_extents - origin) / local
    t_near = np.max(np.minimum(t1, t2), axis=1)
    t_far = np.min(np.maximum(t1, t2), axis=1)

    hit = (t_near <= t_far) & (t_near > MIN_RANGE)
    return np.where(hit, t_near, np.inf)


@log_execution_time()
def render_depth(scene: Sequence[OrientedBox], cam: CameraModel, seed: int) -> PointCloud:
    """
    Ray-cast the scene (boxes given in the chassis-origin frame).

    Gaussian noise is added along each ray, and each ray is shifted inside
    its pixel by up to half of ``cam.pixel_jitter`` per axis so consecutive
    frames do not sample the scene on one fixed grid. Draws are taken per
    pixel of the full grid (noise first, then offsets) so a pixel's values
    depend only on the seed and its index.
    """
    if not scene:
        raise DomainError("Cannot render an empty scene", value=scene)

    rng = make_rng(seed)
    pixels = cam.width * cam.height
    noise = rng.standard_normal(pixels) * cam.depth_noise_sigma
    offsets = None
    if cam.pixel_jitter > 0.0:
        offsets = (rng.random((pixels, 2)) - 0.5) * cam.pixel_jitter

    scene_to_camera = cam.pose.inverse()
    rays = cam.ray_directions(offsets)

    ranges = np.full(rays.shape[0], np.inf)
    for box in scene:
        ranges = np.minimum(ranges, _ray_box_range(rays, box.transformed(scene_to_camera)))

    hit = np.isfinite(ranges)
    points = rays[hit] * (ranges[hit] + noise[hit])[:, np.newaxis]

    logger.debug(
        "Depth frame rendered",
        extra={"data": {"pixels": int(rays.shape[0]), "hits": int(hit.sum()), "seed": seed}},
    )
    return PointCloud(points, Frame.CAMERA)
