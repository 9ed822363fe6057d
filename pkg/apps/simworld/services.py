"""Plant stepping, scene construction for the depth camera and drag measurement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Sequence

import numpy as np

from apps.cloud.camera import OrientedBox
from apps.core.logging.logging_utils import LoggingMixin
from apps.geom.kinematics import ForkState
from apps.geom.transforms import RigidTransform
from apps.simworld.actuators import ActuatorSet, PlantCommand, actuate
from apps.simworld.contact import resolve_contacts, surface_height, update_surface_tilt
from apps.simworld.state import (
    ForkGeometry,
    PalletModel,
    PlanarPose,
    SurfaceModel,
    WorldState,
)

logger = logging.getLogger("apps.simworld.services")

BED_LENGTH = 4.0
BED_WIDTH = 3.0
BED_THICKNESS = 0.2


@dataclass(frozen=True)
class PlantModel:
    pallet: PalletModel = field(default_factory=PalletModel)
    surface: SurfaceModel = field(default_factory=SurfaceModel)
    geometry: ForkGeometry = field(default_factory=ForkGeometry)
    actuators: ActuatorSet = field(default_factory=ActuatorSet)


def initial_state(
    model: PlantModel, pallet_rear_x: float = 0.35, initial_gap: float = 0.08, reach: float = 0.0
) -> WorldState:
    """
    Level fork carrying the pallet ``initial_gap`` above the highest
    surface point beneath it.
    """
    pallet = model.pallet
    tilt = update_surface_tilt(model.surface, model.surface.preload)
    highest = max(
        surface_height(model.surface, tilt, pallet_rear_x),
        surface_height(model.surface, tilt, pallet_rear_x + pallet.deck_length),
    )
    bottom = highest + initial_gap
    fork = ForkState(height=bottom + pallet.slot_ceiling, reach=reach, tilt=0.0, limit_switch=True)
    state = WorldState(
        fork=fork,
        pallet=PlanarPose(pallet_rear_x, bottom, 0.0),
        surface_tilt=tilt,
    )
    return resolve_contacts(state, model.pallet, model.surface, model.geometry)


def step(state: WorldState, cmd: PlantCommand, dt: float, model: PlantModel) -> WorldState:
    """One physics step: joints move, then the pallet settles"""
    moved = actuate(cmd, dt, state, model.actuators)
    return resolve_contacts(moved, model.pallet, model.surface, model.geometry)


def build_scene(state: WorldState, model: PlantModel) -> List[OrientedBox]:
    """
    Boxes seen by the depth camera, in the chassis-origin frame: the
    surface slab, the pallet deck and its load.
    """
    world_to_chassis = RigidTransform.from_translation(-state.chassis_x, 0.0, 0.0)
    pallet = model.pallet
    load = pallet.load

    x0, z0 = model.surface.origin
    bed_pose = RigidTransform.about_y(-state.surface_tilt, (x0, 0.0, z0))
    bed = OrientedBox(
        bed_pose @ RigidTransform.from_translation(BED_LENGTH / 2.0, 0.0, -BED_THICKNESS / 2.0),
        (BED_LENGTH / 2.0, BED_WIDTH / 2.0, BED_THICKNESS / 2.0),
        "surface",
    )

    pallet_pose = state.pallet.as_transform()
    half_width = pallet.deck_width / 2.0
    deck = OrientedBox.from_corners(
        (0.0, -half_width, 0.0), (pallet.deck_length, half_width, pallet.deck_thickness), "deck"
    )
    load_start = (pallet.deck_length - load.length) / 2.0
    cargo = OrientedBox.from_corners(
        (load_start, -load.width / 2.0, pallet.deck_thickness),
        (load_start + load.length, load.width / 2.0, pallet.deck_thickness + load.height),
        load.name,
    )
    return [
        bed.transformed(world_to_chassis),
        deck.transformed(world_to_chassis @ pallet_pose),
        cargo.transformed(world_to_chassis @ pallet_pose),
    ]


def drag_metric(history: Sequence[WorldState]) -> float:
    """Largest horizontal pallet displacement after withdrawal started (m)"""
    start = next((s for s in history if s.withdrawing), None)
    if start is None:
        return 0.0
    x0 = start.pallet.x
    return float(max(abs(s.pallet.x - x0) for s in history if s.withdrawing))


class PlantSimulator(LoggingMixin):
    """Owns the world state and its history for one scenario run"""

    def __init__(self, model: PlantModel, state: WorldState, dt: float = 0.02):
        self.model = model
        self.state = state
        self.dt = dt
        self.history: List[WorldState] = [state]

    @classmethod
    def from_model(cls, model: PlantModel, dt: float = 0.02, **placement) -> "PlantSimulator":
        return cls(model, initial_state(model, **placement), dt)

    @property
    def fork(self) -> ForkState:
        return self.state.fork

    @property
    def jammed(self) -> bool:
        return self.state.jam

    def advance(self, cmd: PlantCommand, steps: int = 1) -> WorldState:
        for _ in range(steps):
            if self.state.jam:
                break
            self.state = step(self.state, cmd, self.dt, self.model)
            self.history.append(self.state)
        return self.state

    def begin_withdraw(self) -> float:
        """Mark the start of withdrawal; returns the chassis position odometry counts from"""
        self.state = replace(self.state, withdrawing=True)
        self.history[-1] = self.state
        self.log_info(
            "Withdrawal started",
            time=self.state.time,
            pallet_x=self.state.pallet.x,
            fork_tilt_deg=float(np.degrees(self.state.fork.tilt)),
        )
        return self.state.chassis_x

    def scene(self) -> List[OrientedBox]:
        return build_scene(self.state, self.model)

    def drag(self) -> float:
        return drag_metric(self.history)
