"""
Homogeneous rigid transforms.

Axis convention: x forward, y lateral-left, z up. Pitch angles (fork tilt,
pallet pitch) are right-handed rotations about +y, so a positive angle
lowers the fork tip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.linalg import polar

from apps.core.exceptions import DomainError

E_X = np.array([1.0, 0.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])

ORTHONORMAL_TOL = 1e-9
# Above this drift the rotation block is snapped back onto SO(3).
REORTHONORMALIZE_TOL = 1e-7


def orthonormality_error(rotation: np.ndarray) -> float:
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


def reorthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Nearest proper rotation via polar decomposition"""
    unitary, _ = polar(rotation)
    if np.linalg.det(unitary) < 0:
        raise DomainError("Rotation block is a reflection", value=rotation)
    return unitary


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (3x3, orthonormal) plus translation in meters"""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)

        drift = orthonormality_error(rotation)
        if drift > REORTHONORMALIZE_TOL:
            if drift > 1e-3:
                raise DomainError(
                    f"Rotation is not orthonormal (|RtR - I| = {drift:.3e})",
                    value=rotation,
                )
            rotation = reorthonormalize(rotation)
        if abs(np.linalg.det(rotation) - 1.0) > 1e-6:
            raise DomainError("Rotation determinant must be +1", value=rotation)
        if not np.all(np.isfinite(translation)):
            raise DomainError("Translation must be finite", value=translation)

        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, x=0.0, y=0.0, z=0.0) -> "RigidTransform":
        return cls(np.eye(3), np.array([x, y, z], dtype=float))

    @classmethod
    def about_y(cls, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(rot_y(angle), np.asarray(translation, dtype=float))

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def inverse(self) -> "RigidTransform":
        rotation_t = self.rotation.T
        return RigidTransform(rotation_t, -rotation_t @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (N, 3) array (or a single 3-vector) through the transform"""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def pitch(self) -> float:
        """Rotation about y read as atan2(e_x.R.e_z, e_z.R.e_z)"""
        return float(np.arctan2(self.rotation[0, 2], self.rotation[2, 2]))

    def is_close(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Chain product a . b; b is applied to points first"""
    rotation = a.rotation @ b.rotation
    if orthonormality_error(rotation) > REORTHONORMALIZE_TOL:
        rotation = reorthonormalize(rotation)
    return RigidTransform(rotation, a.rotation @ b.translation + a.translation)


def chain(transforms: Iterable[RigidTransform]) -> RigidTransform:
    result = RigidTransform.identity()
    for transform in transforms:
        result = compose(result, transform)
    return result


def optical_mount(position, pitch_down: float) -> RigidTransform:
    """
    Camera mounting looking forward and pitched down by ``pitch_down``.

    The camera frame is the usual optical one: z along the optical axis,
    x to image right, y to image bottom.
    """
    c, s = np.cos(pitch_down), np.sin(pitch_down)
    z_axis = np.array([c, 0.0, -s])
    x_axis = np.array([0.0, -1.0, 0.0])
    y_axis = np.cross(z_axis, x_axis)
    return RigidTransform(np.column_stack([x_axis, y_axis, z_axis]), position)
