"""
Quasi-static sagittal contact between fork blade, pallet and surface.

The pallet keeps its horizontal position (friction) and settles into the
lowest-potential pose allowed by two kinds of constraint:

* the blade must stay inside the hole (between slot floor and ceiling);
* neither bottom corner may sink below the surface line.

Equilibria have two active supports, so the solver enumerates the
support pairs (both blade ends on the ceiling, both corners on the
surface, or one corner plus one blade end), keeps the poses that respect
every constraint with non-negative support forces and picks the one with
the lowest centre of mass. When none exists the fork is resting on the
pallet and is lifted to the lowest height that admits a pose.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import bisect, brentq

from apps.simworld.state import (
    ContactForces,
    ForkGeometry,
    JointState,
    PalletModel,
    PlanarPose,
    SurfaceModel,
    WorldState,
)

logger = logging.getLogger("apps.simworld.contact")

GEOMETRY_TOL = 1e-9
PITCH_BRACKET = 0.4
# Fork lift searched when the commanded height would push the pallet down:
# doubling steps from LIFT_FIRST_STEP up to LIFT_SEARCH, then bisection.
LIFT_SEARCH = 0.5
LIFT_FIRST_STEP = 1e-4
LIFT_XTOL = 1e-10

# Lower rank wins an equal-potential tie: surface support first.
_SURFACE, _MIXED, _FORK = 0, 1, 2


@dataclass(frozen=True)
class Support:
    pose: PlanarPose
    forces: ContactForces
    com_height: float
    rank: int


def update_surface_tilt(surface: SurfaceModel, load_on_surface: float) -> float:
    """Surface tilt for the load it carries (kg): base tilt plus the suspension map"""
    if load_on_surface < 0:
        load_on_surface = 0.0
    if not surface.tilt_vs_load:
        return surface.base_tilt
    loads, tilts = zip(*surface.tilt_vs_load)
    return float(surface.base_tilt + np.interp(load_on_surface, loads, tilts))


def surface_height(surface: SurfaceModel, tilt: float, x: float) -> float:
    x0, z0 = surface.origin
    return z0 + np.tan(tilt) * (x - x0)


def surface_gap(surface: SurfaceModel, tilt: float, point) -> float:
    """Signed distance of ``point`` above the surface line"""
    x0, z0 = surface.origin
    normal = np.array([-np.sin(tilt), np.cos(tilt)])
    return float(normal @ (np.asarray(point) - np.array([x0, z0])))


class _Frame:
    """Fork, pallet and surface for one resolution"""

    def __init__(self, heel, tilt, pallet: PalletModel, surface: SurfaceModel, surface_tilt, geometry):
        self.heel = np.asarray(heel, dtype=float)
        self.tilt = tilt
        self.direction = np.array([np.cos(tilt), -np.sin(tilt)])
        self.pallet = pallet
        self.surface = surface
        self.surface_tilt = surface_tilt
        self.geometry = geometry
        self.com_local = pallet.center_of_mass()

    def blade_point(self, t: float) -> np.ndarray:
        return self.heel + t * self.direction

    def blade_ends(self, pose: PlanarPose) -> Tuple[float, float]:
        """
        Blade parameters clipped to the pallet's rear and front faces.

        The pair is crossed when the blade misses the pallet; both values
        stay continuous in the pose either way.
        """
        xi_heel, _ = pose.to_local(self.heel)
        rate = float(self.direction @ pose.axis)
        t_rear = max(0.0, -xi_heel / rate)
        t_front = min(self.geometry.blade_length, (self.pallet.deck_length - xi_heel) / rate)
        return t_rear, t_front

    def blade_span(self, pose: PlanarPose) -> Optional[Tuple[float, float]]:
        """Blade parameters [t_rear, t_front] of the part inside the pallet"""
        if float(self.direction @ pose.axis) <= 0:
            return None
        t_rear, t_front = self.blade_ends(pose)
        if t_front <= t_rear:
            return None
        return t_rear, t_front

    def eta(self, pose: PlanarPose, t: float) -> float:
        return float(pose.to_local(self.blade_point(t))[1])

    def blade_etas(self, pose: PlanarPose):
        span = self.blade_span(pose)
        if span is None:
            return None
        return [(t, self.eta(pose, t)) for t in span]

    def corner(self, pose: PlanarPose, front: bool) -> np.ndarray:
        return pose.to_world(self.pallet.deck_length if front else 0.0, 0.0)

    def pose_on_corner(self, x: float, pitch: float, front: bool) -> PlanarPose:
        """Pose whose rear or front bottom corner touches the surface"""
        xi = self.pallet.deck_length if front else 0.0
        corner_x = x + xi * np.cos(pitch)
        z = surface_height(self.surface, self.surface_tilt, corner_x) + xi * np.sin(pitch)
        return PlanarPose(x, z, pitch)

    def flush_pose(self, x: float) -> PlanarPose:
        return self.pose_on_corner(x, -self.surface_tilt, front=False)

    def pose_on_ceiling(self, x: float, pitch: float, t: float) -> PlanarPose:
        """Pose whose hole ceiling passes through blade point ``t``"""
        point = self.blade_point(t)
        ceiling = self.pallet.slot_ceiling
        z = point[1] + ((point[0] - x) * np.sin(pitch) - ceiling) / np.cos(pitch)
        return PlanarPose(x, z, pitch)

    def com(self, pose: PlanarPose) -> np.ndarray:
        return pose.to_world(*self.com_local)

    def admissible(self, pose: PlanarPose) -> bool:
        for front in (False, True):
            if surface_gap(self.surface, self.surface_tilt, self.corner(pose, front)) < -GEOMETRY_TOL:
                return False
        etas = self.blade_etas(pose)
        if etas is not None:
            for _, eta in etas:
                if eta < self.pallet.slot_floor - GEOMETRY_TOL:
                    return False
                if eta > self.pallet.slot_ceiling + GEOMETRY_TOL:
                    return False
        return True

    def lever(self, x_a: float, x_b: float, com_x: float) -> Optional[Tuple[float, float]]:
        """Vertical support split between two contacts; None unless both push"""
        weight = self.pallet.weight
        if abs(x_b - x_a) < 1e-12:
            return None
        share_b = (com_x - x_a) / (x_b - x_a)
        if share_b < -1e-9 or share_b > 1.0 + 1e-9:
            return None
        share_b = min(1.0, max(0.0, share_b))
        return weight * (1.0 - share_b), weight * share_b


def _support(frame: _Frame, pose: PlanarPose, contacts, rank: int, label: str) -> Optional[Support]:
    """contacts: two (kind, x) with kind in heel/tip/rear_corner/front_corner"""
    if not frame.admissible(pose):
        return None
    com = frame.com(pose)
    (kind_a, x_a), (kind_b, x_b) = contacts
    split = frame.lever(x_a, x_b, com[0])
    if split is None:
        return None

    values = {"heel": 0.0, "tip": 0.0, "rear_corner": 0.0, "front_corner": 0.0}
    values[kind_a] += split[0]
    values[kind_b] += split[1]

    span = frame.blade_span(pose)
    offset = span[0] if span is not None else frame.geometry.blade_length
    forces = ContactForces(heel_contact_offset=offset, label=label, **values)
    return Support(pose, forces, float(com[1]), rank)


def _fork_only(frame: _Frame, x: float) -> Optional[Support]:
    # Blade and hole parallel: the whole blade sits on the ceiling.
    pose = frame.pose_on_ceiling(x, frame.tilt, 0.0)
    span = frame.blade_span(pose)
    if span is None:
        return None
    contacts = [("heel", frame.blade_point(span[0])[0]), ("tip", frame.blade_point(span[1])[0])]
    return _support(frame, pose, contacts, _FORK, "fork")


def _surface_only(frame: _Frame, x: float) -> Optional[Support]:
    pose = frame.flush_pose(x)
    contacts = [
        ("rear_corner", frame.corner(pose, False)[0]),
        ("front_corner", frame.corner(pose, True)[0]),
    ]
    return _support(frame, pose, contacts, _SURFACE, "surface")


def _mixed(frame: _Frame, x: float, front_corner: bool, tip: bool) -> Optional[Support]:
    ceiling = frame.pallet.slot_ceiling

    def ceiling_gap(pitch):
        pose = frame.pose_on_corner(x, pitch, front_corner)
        ends = frame.blade_ends(pose)
        return frame.eta(pose, ends[1] if tip else ends[0]) - ceiling

    low, high = ceiling_gap(-PITCH_BRACKET), ceiling_gap(PITCH_BRACKET)
    if not np.isfinite(low * high) or low * high > 0:
        return None
    pitch = brentq(ceiling_gap, -PITCH_BRACKET, PITCH_BRACKET, xtol=1e-14, rtol=1e-12)

    pose = frame.pose_on_corner(x, pitch, front_corner)
    span = frame.blade_span(pose)
    if span is None:
        return None
    blade_kind = "tip" if tip else "heel"
    corner_kind = "front_corner" if front_corner else "rear_corner"
    contacts = [
        (corner_kind, frame.corner(pose, front_corner)[0]),
        (blade_kind, frame.blade_point(span[1] if tip else span[0])[0]),
    ]
    label = f"{corner_kind}+{blade_kind}"
    return _support(frame, pose, contacts, _MIXED, label)


_MIXED_PAIRS = ((True, False), (True, True), (False, False), (False, True))


def _solve(frame: _Frame, x: float) -> Optional[Support]:
    # Every admissible pose sits on or above the flush one.
    flush = _surface_only(frame, x)
    if flush is not None:
        return flush

    hanging = _fork_only(frame, x)
    if hanging is not None and _hangs_clear(frame, hanging.pose):
        return hanging

    candidates: List[Support] = []
    for front_corner, tip in _MIXED_PAIRS:
        candidate = _mixed(frame, x, front_corner=front_corner, tip=tip)
        if candidate is not None:
            candidates.append(candidate)
    if hanging is not None:
        candidates.append(hanging)
    if not candidates:
        return None
    lowest = min(c.com_height for c in candidates)
    return min(
        (c for c in candidates if c.com_height <= lowest + GEOMETRY_TOL),
        key=lambda c: c.rank,
    )


def _hangs_clear(frame: _Frame, pose: PlanarPose) -> bool:
    """No corner can reach the surface while the blade stays inside the hole"""
    t_rear, t_front = frame.blade_span(pose)
    swing = 2.0 * frame.pallet.hole_clearance / (t_front - t_rear)
    reach = 2.0 * swing * frame.pallet.deck_length
    return all(
        surface_gap(frame.surface, frame.surface_tilt, frame.corner(pose, front)) > reach
        for front in (False, True)
    )


def _supported(frame: _Frame, x: float) -> bool:
    if _surface_only(frame, x) is not None or _fork_only(frame, x) is not None:
        return True
    return any(_mixed(frame, x, front_corner=f, tip=t) is not None for f, t in _MIXED_PAIRS)


def _drag(state: WorldState, pallet: PalletModel, surface: SurfaceModel) -> float:
    """Horizontal pallet shift carried along by the fork since the last resolution"""
    dx = state.chassis_x - state.resolved_chassis_x
    forces = state.forces
    if dx == 0.0 or forces.fork <= 0.0:
        return 0.0
    if pallet.friction_mu * forces.fork > surface.friction_mu * forces.ground:
        return dx
    return 0.0


def resolve_contacts(
    state: WorldState,
    pallet: PalletModel,
    surface: SurfaceModel,
    geometry: ForkGeometry = ForkGeometry(),
) -> WorldState:
    """
    Settle the pallet for the current fork pose.

    Surface tilt is refreshed from the load the surface carried at the
    previous resolution. A fork that would have to push the pallet into the
    surface is lifted until it merely rests on it; if no height within
    reach admits a pose the state is flagged as jammed.
    """
    carried = state.forces.ground / pallet.weight if state.forces.ground > 0 else 0.0
    surface_tilt = update_surface_tilt(surface, surface.preload + pallet.total_mass * carried)
    pallet_x = state.pallet.x + _drag(state, pallet, surface)

    def frame_at(height):
        heel = state.heel_position(geometry)
        heel[1] = height
        return _Frame(heel, state.fork.tilt, pallet, surface, surface_tilt, geometry)

    height = state.fork.height
    support = _solve(frame_at(height), pallet_x)
    if support is None:
        support, height = _lift(frame_at, pallet_x, height, hint=state.resolved_height)
    if support is None:
        logger.error(
            "Fork and pallet jammed",
            extra={"data": {"time": state.time, "height": height, "tilt": state.fork.tilt}},
        )
        return replace(state, jam=True, surface_tilt=surface_tilt, resolved_chassis_x=state.chassis_x)

    height_joint = state.height_joint
    if height > height_joint.position:
        height_joint = JointState(height, max(0.0, height_joint.velocity), height_joint.reference)

    resolved = replace(
        state,
        fork=replace(state.fork, height=height),
        height_joint=height_joint,
        pallet=support.pose,
        forces=support.forces,
        surface_tilt=surface_tilt,
        resolved_chassis_x=state.chassis_x,
        resolved_height=height,
    )
    return replace(resolved, fork=replace(resolved.fork, limit_switch=limit_switch(resolved, geometry)))


def _lift(frame_at, pallet_x: float, height: float, hint: Optional[float] = None):
    """
    Lowest fork height above ``height`` that admits a pose, with its support.

    Tried in order: the height the previous resolution settled on, the
    height that puts the blade on the floor of a flush pallet, then a
    doubling scan refined by bisection.
    """

    def feasible(h):
        return _supported(frame_at(h), pallet_x)

    low = height
    if hint is not None and hint > height and feasible(hint):
        if not feasible(max(height, hint - LIFT_XTOL)):
            return _solve(frame_at(hint), pallet_x), hint

    lifted = _floor_lift(frame_at, pallet_x, height)
    if lifted is not None:
        support = _surface_only(frame_at(lifted), pallet_x)
        if support is not None:
            return support, lifted

    step = LIFT_FIRST_STEP
    while True:
        high = height + step
        if feasible(high):
            break
        if step >= LIFT_SEARCH:
            return None, height
        low = high
        step = min(2.0 * step, LIFT_SEARCH)

    lifted = bisect(lambda h: 1.0 if feasible(h) else -1.0, low, high, xtol=LIFT_XTOL)
    for candidate in (lifted, lifted + LIFT_XTOL, high):
        support = _solve(frame_at(candidate), pallet_x)
        if support is not None:
            return support, candidate
    return None, height


def _floor_lift(frame_at, pallet_x: float, height: float) -> Optional[float]:
    """Height at which the blade just clears the floor of a flush pallet"""
    floor = frame_at(height).pallet.slot_floor

    def clearance(h):
        frame = frame_at(h)
        pose = frame.flush_pose(pallet_x)
        return min(frame.eta(pose, t) for t in frame.blade_ends(pose)) - floor

    below, above = clearance(height), clearance(height + LIFT_SEARCH)
    if below >= 0.0 or above <= 0.0:
        return None
    return float(brentq(clearance, height, height + LIFT_SEARCH, xtol=1e-12))


def limit_switch(state: WorldState, geometry: ForkGeometry = ForkGeometry()) -> bool:
    """Heel switch: the pallet presses on the blade within the heel zone"""
    forces = state.forces
    in_zone = forces.heel_contact_offset <= geometry.heel_zone * geometry.blade_length
    return bool(forces.heel > 0.0 and in_zone)
