"""
Scenario files: flat ``section.key = value`` text turned into a runnable
:class:`Scenario`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from marshmallow import ValidationError as SchemaValidationError

from apps.cloud.camera import CameraModel
from apps.cloud.pointcloud import BoundingBox
from apps.core.exceptions import DomainError
from apps.geom.kinematics import KinematicConfig
from apps.geom.transforms import RigidTransform, optical_mount
from apps.harness.schemas import ScenarioFileSchema, flatten_messages
from apps.icp.services import IcpParams
from apps.simworld.actuators import ActuatorModel, ActuatorSet
from apps.simworld.services import PlantModel
from apps.simworld.state import ForkGeometry, LoadModel, PalletModel, SurfaceModel
from apps.tracker.services import DEFAULT_TRACKING_BOX, ControlMode, TrackerParams
from apps.withdraw.services import (
    DEFAULT_BACK_SPEED,
    DEFAULT_KP_HEIGHT,
    DEFAULT_TARGET_DISTANCE,
)

logger = logging.getLogger("apps.harness.scenario")

SCENARIO_SUFFIX = ".scn"

DEFAULT_CAMERA_POSITION = (0.05, 0.0, 1.5)
DEFAULT_CAMERA_PITCH = np.radians(50.0)
# Middle of the pallet, just above the blades, in the fork frame.
DEFAULT_GAZE_POINT = (0.5, 0.0, 0.1)


@dataclass(frozen=True)
class WithdrawSettings:
    kp_height: float = DEFAULT_KP_HEIGHT
    back_speed: float = DEFAULT_BACK_SPEED
    target_distance: float = DEFAULT_TARGET_DISTANCE


@dataclass(frozen=True)
class Expectation:
    """Pass criteria stored alongside a scenario; unset fields are not checked"""

    outcome: Optional[str] = None
    final_tilt: Optional[float] = None
    tilt_tolerance: float = np.radians(0.5)
    max_drag_below: Optional[float] = None
    max_drag_above: Optional[float] = None
    converged_delta_tilt_below: Optional[float] = None
    tracking_error_below: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    plant: PlantModel
    camera: CameraModel
    tracker: TrackerParams
    withdraw: WithdrawSettings = field(default_factory=WithdrawSettings)
    seed: int = 0
    duration_limit: float = 60.0
    physics_dt: float = 0.02
    pallet_rear_x: float = 0.35
    initial_gap: float = 0.08
    reach: float = 0.0
    description: str = ""
    expect: Expectation = field(default_factory=Expectation)

    def __post_init__(self):
        if self.duration_limit <= 0:
            raise DomainError("duration_limit must be > 0", value=self.duration_limit)
        steps = self.tracker.cycle_period / self.physics_dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise DomainError(
                f"cycle_period {self.tracker.cycle_period} s must be a whole number of "
                f"physics steps of {self.physics_dt} s",
                value=self.physics_dt,
            )
        heel = self.tracker.kinematics.heel_offset[0]
        if abs(heel - self.plant.geometry.heel_x0) > 1e-12:
            raise DomainError("Kinematic heel offset and fork geometry disagree", value=heel)

    @property
    def mode(self) -> ControlMode:
        return self.tracker.mode

    @property
    def steps_per_cycle(self) -> int:
        return int(round(self.tracker.cycle_period / self.physics_dt))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed, tracker=replace(self.tracker, seed=seed))


def parse_scenario_text(text: str) -> Dict:
    """
    Parse ``section.key = value`` lines into nested dictionaries.

    ``#`` starts a comment. Values stay strings; the schema converts them.
    """
    tree: Dict = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(
                f"line {number}: expected 'section.key = value', got {raw.strip()!r}",
                code="syntax",
            )
        key, value = (part.strip() for part in line.split("=", 1))
        path = key.split(".")
        if len(path) < 2 or not all(path):
            raise ValidationError(
                f"line {number}: key {key!r} must be written as section.key", code="syntax"
            )

        node = tree
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"line {number}: {key!r} nests under a value", code="syntax")
        if path[-1] in node:
            raise ValidationError(f"line {number}: duplicate key {key!r}", code="duplicate")
        node[path[-1]] = value
    return tree


def _actuator(values: Dict, default: ActuatorModel, **fixed) -> ActuatorModel:
    values = dict(values)
    if "rate_limit_rad" in values:
        values["rate_limit"] = values.pop("rate_limit_rad")
    if "pd_gains" in values:
        values["pd_gains"] = tuple(values["pd_gains"])
    return replace(default, **values, **fixed)


def build_scenario(data: Dict, fallback_name: str = "adhoc") -> Scenario:
    """Assemble a scenario from schema-validated sections"""
    sim_defaults = settings.FORKLIFT_SIM

    def section(name):
        return dict(data.get(name, {}))

    meta = section("scenario")
    pallet_values = section("pallet")
    fork_values = section("fork")
    kin_values = section("kinematics")
    tracker_values = section("tracker")
    actuator_values = section("actuators")

    pallet_rear_x = pallet_values.pop("rear_x", 0.35)
    initial_gap = pallet_values.pop("initial_gap", 0.08)
    reach = fork_values.pop("reach", 0.0)

    load = LoadModel(**section("load"))
    pallet = PalletModel(load=load, **pallet_values)
    geometry = ForkGeometry(**fork_values)
    defaults = ActuatorSet()
    actuators = ActuatorSet(
        tilt=_actuator(actuator_values.get("tilt", {}), defaults.tilt),
        height=_actuator(actuator_values.get("height", {}), defaults.height, one_way=True),
        drive=_actuator(actuator_values.get("drive", {}), defaults.drive),
    )
    plant = PlantModel(
        pallet=pallet, surface=SurfaceModel(**section("surface")), geometry=geometry, actuators=actuators
    )

    kinematics = KinematicConfig(
        reach=reach,
        camera_on_mast=optical_mount(
            kin_values.get("camera_position", DEFAULT_CAMERA_POSITION),
            kin_values.get("camera_pitch", DEFAULT_CAMERA_PITCH),
        ),
        gaze_on_fork=RigidTransform.from_translation(*kin_values.get("gaze_point", DEFAULT_GAZE_POINT)),
        heel_offset=(geometry.heel_x0, 0.0, 0.0),
        **({"mast_polyline": kin_values["mast_polyline"]} if "mast_polyline" in kin_values else {}),
    )

    camera_values = {
        "width": sim_defaults["CAMERA_WIDTH"],
        "height": sim_defaults["CAMERA_HEIGHT"],
        "fov_h": np.radians(75.0),
        "fov_v": np.radians(65.0),
        **section("camera"),
    }

    box = DEFAULT_TRACKING_BOX
    if "box_min" in tracker_values or "box_max" in tracker_values:
        box = BoundingBox(
            tracker_values.pop("box_min", tuple(box.min_corner)),
            tracker_values.pop("box_max", tuple(box.max_corner)),
        )
    seed = meta.get("seed", 0)
    tracker = TrackerParams(
        cycle_period=meta.get("cycle_period", sim_defaults["CYCLE_PERIOD_S"]),
        downsample_target=tracker_values.pop("downsample_target", sim_defaults["DOWNSAMPLE_TARGET"]),
        mode=ControlMode(meta.get("mode", ControlMode.PROPOSED.value)),
        seed=seed,
        tracking_box=box,
        icp=IcpParams(**section("icp")),
        kinematics=kinematics,
        **tracker_values,
    )

    return Scenario(
        name=meta.get("name", fallback_name),
        description=meta.get("description", ""),
        plant=plant,
        camera=CameraModel(**camera_values),
        tracker=tracker,
        withdraw=WithdrawSettings(**section("withdraw")),
        seed=seed,
        duration_limit=meta.get("duration_limit", 60.0),
        physics_dt=meta.get("physics_dt", sim_defaults["PHYSICS_DT_S"]),
        pallet_rear_x=pallet_rear_x,
        initial_gap=initial_gap,
        reach=reach,
        expect=Expectation(**section("expect")),
    )


def loads_scenario(text: str, fallback_name: str = "adhoc") -> Scenario:
    """
    Parse and validate scenario text.

        Raises:
            ValidationError: Syntax errors, unknown keys, bad values or a
                combination that violates a model invariant
    """
    tree = parse_scenario_text(text)
    try:
        data = ScenarioFileSchema().load(tree)
    except SchemaValidationError as exc:
        raise ValidationError(flatten_messages(exc.messages)) from exc
    try:
        return build_scenario(data, fallback_name)
    except DomainError as exc:
        raise ValidationError(str(exc), code="invalid") from exc


def resolve_scenario_path(name: Union[str, Path]) -> Path:
    """Bare names (``case1`` or ``case1.scn``) resolve against the bundled scenario directory"""
    path = Path(name)
    if path.exists():
        return path
    scenario_dir = Path(settings.FORKLIFT_SIM["SCENARIO_DIR"])
    for candidate in (scenario_dir / path.name, scenario_dir / f"{path.name}{SCENARIO_SUFFIX}"):
        if candidate.exists():
            return candidate
    raise ValidationError(f"Scenario file not found: {name}", code="missing")


def load_scenario(name: Union[str, Path]) -> Scenario:
    path = resolve_scenario_path(name)
    scenario = loads_scenario(path.read_text(encoding="utf-8"), fallback_name=path.stem)
    logger.debug("Scenario loaded", extra={"data": {"path": str(path), "name": scenario.name}})
    return scenario


def bundled_scenarios():
    """Bundled scenario files, sorted by name"""
    return sorted(Path(settings.FORKLIFT_SIM["SCENARIO_DIR"]).glob(f"*{SCENARIO_SUFFIX}"))


def describe_validation_error(exc: ValidationError) -> str:
    """One line, naming the offending keys when known"""
    if hasattr(exc, "error_dict"):
        return "; ".join(
            f"{key}: {' '.join(messages)}" for key, messages in sorted(exc.message_dict.items())
        )
    return "; ".join(exc.messages)
