"""
World description for the sagittal (x-z) plant.

The pallet pose is planar: ``x``/``z`` locate the rear-bottom corner and
``pitch`` follows the same sign as fork tilt (positive lowers the front).
Surface tilt is a rise angle: positive means the surface climbs going
forward, so a pallet resting flush on it has pitch ``-surface_tilt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from apps.core.exceptions import DomainError
from apps.geom.kinematics import ForkState
from apps.geom.transforms import RigidTransform

GRAVITY = 9.81


@dataclass(frozen=True)
class LoadModel:
    """Rigid load centred on the deck; the centre of mass may be offset"""

    length: float = 0.9
    width: float = 0.9
    height: float = 0.6
    mass: float = 500.0
    com_offset: Tuple[float, float] = (0.0, 0.0)
    name: str = "carton"

    def __post_init__(self):
        if min(self.length, self.width, self.height) <= 0:
            raise DomainError("Load dimensions must be positive", value=self)
        if self.mass < 0:
            raise DomainError("Load mass must be >= 0", value=self.mass)


@dataclass(frozen=True)
class PalletModel:
    deck_length: float = 1.1
    deck_width: float = 1.1
    deck_thickness: float = 0.15
    # Vertical play of the blade in the hole, above and below its centred position.
    hole_clearance: float = 0.012
    # Height of the hole floor above the pallet bottom.
    slot_floor: float = 0.03
    mass: float = 25.0
    friction_mu: float = 0.4
    load: LoadModel = field(default_factory=LoadModel)

    def __post_init__(self):
        if self.hole_clearance <= 0:
            raise DomainError("hole_clearance must be > 0", value=self.hole_clearance)
        if self.mass <= 0:
            raise DomainError("Pallet mass must be > 0", value=self.mass)
        if not 0 <= self.slot_floor < self.slot_ceiling <= self.deck_thickness:
            raise DomainError("Hole must lie inside the deck thickness", value=self.slot_floor)

    @property
    def slot_ceiling(self) -> float:
        return self.slot_floor + 2.0 * self.hole_clearance

    @property
    def total_mass(self) -> float:
        return self.mass + self.load.mass

    @property
    def weight(self) -> float:
        return self.total_mass * GRAVITY

    def center_of_mass(self) -> np.ndarray:
        """(xi, eta) in the pallet frame, mass-weighted over deck and load"""
        deck = np.array([self.deck_length / 2.0, self.deck_thickness / 2.0])
        load = np.array(
            [
                self.deck_length / 2.0 + self.load.com_offset[0],
                self.deck_thickness + self.load.height / 2.0 + self.load.com_offset[1],
            ]
        )
        return (self.mass * deck + self.load.mass * load) / self.total_mass


@dataclass(frozen=True)
class SurfaceModel:
    base_tilt: float = 0.0
    # (load kg, extra tilt rad) breakpoints; empty means a rigid surface.
    tilt_vs_load: Tuple[Tuple[float, float], ...] = ()
    friction_mu: float = 0.3
    # A point on the surface line (x, z).
    origin: Tuple[float, float] = (0.25, 0.30)
    # Load already on the surface before the pallet arrives (kg).
    preload: float = 0.0

    def __post_init__(self):
        points = tuple((float(kg), float(rad)) for kg, rad in self.tilt_vs_load)
        loads = [kg for kg, _ in points]
        tilts = [rad for _, rad in points]
        if any(b <= a for a, b in zip(loads, loads[1:])):
            raise DomainError("tilt_vs_load loads must be strictly increasing", value=points)
        steps = np.diff(tilts)
        if len(steps) and not (np.all(steps >= 0) or np.all(steps <= 0)):
            raise DomainError("tilt_vs_load must be monotone", value=points)
        object.__setattr__(self, "tilt_vs_load", points)


@dataclass(frozen=True)
class ForkGeometry:
    heel_x0: float = 0.40
    blade_length: float = 1.0
    # Limit-switch zone, as a share of the blade measured from the heel.
    heel_zone: float = 0.15


@dataclass(frozen=True)
class PlanarPose:
    x: float
    z: float
    pitch: float

    @property
    def axis(self) -> np.ndarray:
        return np.array([np.cos(self.pitch), -np.sin(self.pitch)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([np.sin(self.pitch), np.cos(self.pitch)])

    def to_world(self, xi: float, eta: float) -> np.ndarray:
        return np.array([self.x, self.z]) + xi * self.axis + eta * self.normal

    def to_local(self, point) -> Tuple[float, float]:
        rel = np.asarray(point, dtype=float) - np.array([self.x, self.z])
        return float(rel @ self.axis), float(rel @ self.normal)

    def as_transform(self) -> RigidTransform:
        return RigidTransform.about_y(self.pitch, (self.x, 0.0, self.z))


@dataclass(frozen=True)
class ContactForces:
    """Vertical support forces on the pallet (N)"""

    heel: float = 0.0
    tip: float = 0.0
    rear_corner: float = 0.0
    front_corner: float = 0.0
    # Distance of the rear blade contact from the heel along the blade.
    heel_contact_offset: float = 0.0
    label: str = "none"

    @property
    def fork(self) -> float:
        return self.heel + self.tip

    @property
    def ground(self) -> float:
        return self.rear_corner + self.front_corner


@dataclass(frozen=True)
class JointState:
    position: float
    velocity: float = 0.0
    # Lagged reference, used by PD-driven joints only.
    reference: Optional[float] = None


@dataclass(frozen=True)
class WorldState:
    fork: ForkState
    pallet: PlanarPose
    surface_tilt: float
    chassis_x: float = 0.0
    time: float = 0.0
    tilt_joint: Optional[JointState] = None
    height_joint: Optional[JointState] = None
    drive_joint: JointState = field(default_factory=lambda: JointState(0.0))
    forces: ContactForces = field(default_factory=ContactForces)
    resolved_chassis_x: float = 0.0
    # Fork height after the last resolution; seeds the next lift search.
    resolved_height: Optional[float] = None
    withdrawing: bool = False
    jam: bool = False

    def __post_init__(self):
        if self.tilt_joint is None:
            object.__setattr__(self, "tilt_joint", JointState(self.fork.tilt))
        if self.height_joint is None:
            object.__setattr__(self, "height_joint", JointState(self.fork.height))

    def heel_position(self, geometry: ForkGeometry) -> np.ndarray:
        return np.array([self.chassis_x + geometry.heel_x0 + self.fork.reach, self.fork.height])

    def with_fork(self, **changes) -> "WorldState":
        return replace(self, fork=replace(self.fork, **changes))
