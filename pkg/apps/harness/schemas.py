"""
Marshmallow schemas for scenario files.

Every value arrives as text from the flat ``section.key = value`` format;
the fields below turn it into numbers, vectors and breakpoint tables.
Angles are written in degrees and loaded in radians.
"""

import numpy as np
from marshmallow import RAISE, Schema, fields, validate


class Degrees(fields.Float):
    """Float written in degrees, loaded in radians"""

    def _deserialize(self, value, attr, data, **kwargs):
        return float(np.radians(super()._deserialize(value, attr, data, **kwargs)))


class Vector(fields.Field):
    """Comma separated floats of a fixed length, e.g. ``0.05, 0, 1.5``"""

    default_error_messages = {
        "invalid": "Not a valid list of numbers.",
        "length": "Expected {length} comma separated numbers, got {count}.",
    }

    def __init__(self, length, **kwargs):
        super().__init__(**kwargs)
        self.length = length

    def _deserialize(self, value, attr, data, **kwargs):
        try:
            items = tuple(float(item) for item in str(value).split(","))
        except ValueError as exc:
            raise self.make_error("invalid") from exc
        if len(items) != self.length:
            raise self.make_error("length", length=self.length, count=len(items))
        return items


class Breakpoints(fields.Field):
    """
    Comma separated ``x:y`` pairs, e.g. ``0:0, 1500:3``.

    ``y_degrees`` converts the second column from degrees to radians.
    """

    default_error_messages = {
        "invalid": "Not a valid list of x:y pairs.",
        "empty": "At least one x:y pair is required.",
    }

    def __init__(self, y_degrees=False, **kwargs):
        super().__init__(**kwargs)
        self.y_degrees = y_degrees

    def _deserialize(self, value, attr, data, **kwargs):
        pairs = []
        try:
            for item in str(value).split(","):
                x, y = item.split(":")
                y = float(y)
                pairs.append((float(x), float(np.radians(y)) if self.y_degrees else y))
        except ValueError as exc:
            raise self.make_error("invalid") from exc
        if not pairs:
            raise self.make_error("empty")
        return tuple(pairs)


positive = validate.Range(min=0, min_inclusive=False)
non_negative = validate.Range(min=0)


class SectionSchema(Schema):
    class Meta:
        unknown = RAISE


class ScenarioSectionSchema(SectionSchema):
    name = fields.String()
    description = fields.String()
    mode = fields.String(validate=validate.OneOf(["Proposed", "NoControl"]))
    seed = fields.Integer(validate=non_negative)
    duration_limit = fields.Float(validate=positive)
    cycle_period = fields.Float(validate=positive)
    physics_dt = fields.Float(validate=validate.Range(min=0, max=0.05, min_inclusive=False))


class SurfaceSchema(SectionSchema):
    base_tilt = Degrees(data_key="base_tilt_deg")
    tilt_vs_load = Breakpoints(y_degrees=True, data_key="tilt_vs_load_deg")
    friction_mu = fields.Float(validate=non_negative)
    origin = Vector(2)
    preload = fields.Float(validate=non_negative)


class PalletSchema(SectionSchema):
    deck_length = fields.Float(validate=positive)
    deck_width = fields.Float(validate=positive)
    deck_thickness = fields.Float(validate=positive)
    hole_clearance = fields.Float(validate=positive)
    slot_floor = fields.Float(validate=non_negative)
    mass = fields.Float(validate=positive)
    friction_mu = fields.Float(validate=non_negative)
    rear_x = fields.Float()
    initial_gap = fields.Float(validate=non_negative)


class LoadSchema(SectionSchema):
    name = fields.String()
    length = fields.Float(validate=positive)
    width = fields.Float(validate=positive)
    height = fields.Float(validate=positive)
    mass = fields.Float(validate=non_negative)
    com_offset = Vector(2)


class ForkSchema(SectionSchema):
    heel_x0 = fields.Float()
    blade_length = fields.Float(validate=positive)
    heel_zone = fields.Float(validate=validate.Range(min=0, max=1))
    reach = fields.Float()


class KinematicsSchema(SectionSchema):
    camera_position = Vector(3)
    camera_pitch = Degrees(data_key="camera_pitch_deg")
    gaze_point = Vector(3)
    mast_polyline = Breakpoints()


class CameraSchema(SectionSchema):
    width = fields.Integer(validate=positive)
    height = fields.Integer(validate=positive)
    fov_h = Degrees(data_key="fov_h_deg")
    fov_v = Degrees(data_key="fov_v_deg")
    depth_noise_sigma = fields.Float(data_key="noise_sigma", validate=non_negative)
    pixel_jitter = fields.Float(validate=validate.Range(min=0.0, max=1.0))


class ActuatorSchema(SectionSchema):
    time_constant = fields.Float(validate=positive)
    rate_limit = fields.Float(validate=positive)
    rate_limit_rad = Degrees(data_key="rate_limit_deg", validate=positive)
    pd_gains = Vector(2)


class ActuatorsSchema(SectionSchema):
    tilt = fields.Nested(ActuatorSchema)
    height = fields.Nested(ActuatorSchema)
    drive = fields.Nested(ActuatorSchema)


class TrackerSchema(SectionSchema):
    tilt_threshold = Degrees(data_key="tilt_threshold_deg", validate=positive)
    halt_timeout = fields.Float(validate=positive)
    descend_step = fields.Float(validate=positive)
    release_overtravel = fields.Float(validate=non_negative)
    min_height = fields.Float(validate=non_negative)
    downsample_target = fields.Integer(validate=positive)
    bb_margin = fields.Float(validate=non_negative)
    box_min = Vector(3)
    box_max = Vector(3)


class IcpSchema(SectionSchema):
    max_iterations = fields.Integer(validate=positive)
    convergence_eps = fields.Float(validate=positive)
    max_correspondence_dist = fields.Float(validate=positive)
    min_points = fields.Integer(validate=validate.Range(min=3))


class WithdrawSchema(SectionSchema):
    kp_height = fields.Float(validate=non_negative)
    back_speed = fields.Float(validate=positive)
    target_distance = fields.Float(validate=positive)


class ExpectSchema(SectionSchema):
    outcome = fields.String(
        validate=validate.OneOf(["WithdrawCompleted", "HaltedTimeout", "JamFault"])
    )
    final_tilt = Degrees(data_key="final_tilt_deg")
    tilt_tolerance = Degrees(data_key="tilt_tolerance_deg", validate=non_negative)
    max_drag_below = fields.Float(validate=non_negative)
    max_drag_above = fields.Float(validate=non_negative)
    converged_delta_tilt_below = Degrees(
        data_key="converged_delta_tilt_below_deg", validate=non_negative
    )
    tracking_error_below = fields.Float(validate=non_negative)


class ScenarioFileSchema(SectionSchema):
    scenario = fields.Nested(ScenarioSectionSchema)
    surface = fields.Nested(SurfaceSchema)
    pallet = fields.Nested(PalletSchema)
    load = fields.Nested(LoadSchema)
    fork = fields.Nested(ForkSchema)
    kinematics = fields.Nested(KinematicsSchema)
    camera = fields.Nested(CameraSchema)
    actuators = fields.Nested(ActuatorsSchema)
    tracker = fields.Nested(TrackerSchema)
    icp = fields.Nested(IcpSchema)
    withdraw = fields.Nested(WithdrawSchema)
    expect = fields.Nested(ExpectSchema)


def flatten_messages(messages, prefix=""):
    """Nested marshmallow error messages -> {"section.key": [...]}"""
    flat = {}
    for key, value in messages.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(flatten_messages(value, dotted))
        else:
            flat[dotted] = value
    return flat

