import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings
from django.conf import settings

from apps.harness.scenario import (
    bundled_scenarios,
    load_scenario,
    loads_scenario,
    parse_scenario_text,
    resolve_scenario_path,
)
from apps.geom.kinematics import ForkState
from apps.tracker.services import ControlMode
from apps.withdraw.services import plan_withdraw


class ParseScenarioTextTestCase(SimpleTestCase):
    """Tests for parse_scenario_text"""

    def test_nested_sections(self):
        tree = parse_scenario_text(
            "# header\n"
            "scenario.name = demo   # trailing comment\n"
            "\n"
            "actuators.tilt.time_constant = 0.4\n"
            "surface.origin = 0.25, 0.30\n"
        )
        self.assertEqual(
            tree,
            {
                "scenario": {"name": "demo"},
                "actuators": {"tilt": {"time_constant": "0.4"}},
                "surface": {"origin": "0.25, 0.30"},
            },
        )

    def test_line_without_equals(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_scenario_text("scenario.name demo")
        self.assertIn("line 1", ctx.exception.messages[0])

    def test_key_without_section(self):
        with self.assertRaises(ValidationError):
            parse_scenario_text("seed = 3")

    def test_duplicate_key(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_scenario_text("scenario.seed = 1\nscenario.seed = 2")
        self.assertIn("duplicate", ctx.exception.messages[0])

    def test_value_and_section_clash(self):
        with self.assertRaises(ValidationError):
            parse_scenario_text("actuators.tilt = 1\nactuators.tilt.time_constant = 0.4")


class LoadsScenarioTestCase(SimpleTestCase):
    """Tests for loads_scenario"""

    def test_empty_text_gives_defaults(self):
        scenario = loads_scenario("")
        self.assertEqual(scenario.name, "adhoc")
        self.assertEqual(scenario.mode, ControlMode.PROPOSED)
        self.assertEqual(scenario.camera.width, settings.FORKLIFT_SIM["CAMERA_WIDTH"])
        self.assertEqual(scenario.steps_per_cycle, 10)
        self.assertEqual(scenario.tracker.kinematics.heel_offset[0], scenario.plant.geometry.heel_x0)

    def test_withdraw_defaults_match_plan(self):
        scenario = loads_scenario("")
        plan = plan_withdraw(ForkState(height=0.4, tilt=0.0))
        self.assertEqual(scenario.withdraw.kp_height, plan.kp_height)
        self.assertEqual(scenario.withdraw.back_speed, plan.back_speed)
        self.assertEqual(scenario.withdraw.target_distance, plan.target_distance)

    def test_camera_jitter_key(self):
        self.assertEqual(loads_scenario("").camera.pixel_jitter, 1.0)
        self.assertEqual(loads_scenario("camera.pixel_jitter = 0\n").camera.pixel_jitter, 0.0)
        with self.assertRaises(ValidationError):
            loads_scenario("camera.pixel_jitter = 2\n")

    def test_degrees_loaded_as_radians(self):
        scenario = loads_scenario(
            "surface.base_tilt_deg = 4\n"
            "surface.tilt_vs_load_deg = 0:0, 1500:3, 2000:4\n"
            "camera.fov_h_deg = 60\n"
            "actuators.tilt.rate_limit_deg = 2\n"
        )
        self.assertAlmostEqual(scenario.plant.surface.base_tilt, np.radians(4.0))
        self.assertEqual(
            scenario.plant.surface.tilt_vs_load,
            ((0.0, 0.0), (1500.0, float(np.radians(3.0))), (2000.0, float(np.radians(4.0)))),
        )
        self.assertAlmostEqual(scenario.camera.fov_h, np.radians(60.0))
        self.assertAlmostEqual(scenario.plant.actuators.tilt.rate_limit, np.radians(2.0))

    def test_sections_reach_models(self):
        scenario = loads_scenario(
            "scenario.mode = NoControl\n"
            "scenario.seed = 7\n"
            "pallet.rear_x = 0.4\n"
            "pallet.hole_clearance = 0.02\n"
            "load.mass = 300\n"
            "fork.heel_x0 = 0.5\n"
            "tracker.halt_timeout = 12\n"
            "icp.max_iterations = 40\n"
            "withdraw.back_speed = 0.15\n"
            "actuators.height.time_constant = 0.5\n"
            "actuators.drive.pd_gains = 40, 12\n"
        )
        self.assertEqual(scenario.mode, ControlMode.NO_CONTROL)
        self.assertEqual(scenario.tracker.seed, 7)
        self.assertEqual(scenario.pallet_rear_x, 0.4)
        self.assertEqual(scenario.plant.pallet.hole_clearance, 0.02)
        self.assertEqual(scenario.plant.pallet.load.mass, 300.0)
        self.assertEqual(scenario.tracker.kinematics.heel_offset, (0.5, 0.0, 0.0))
        self.assertEqual(scenario.tracker.halt_timeout, 12.0)
        self.assertEqual(scenario.tracker.icp.max_iterations, 40)
        self.assertEqual(scenario.withdraw.back_speed, 0.15)
        self.assertTrue(scenario.plant.actuators.height.one_way)
        self.assertEqual(scenario.plant.actuators.height.time_constant, 0.5)
        self.assertEqual(scenario.plant.actuators.drive.pd_gains, (40.0, 12.0))

    def test_unknown_key_is_named(self):
        with self.assertRaises(ValidationError) as ctx:
            loads_scenario("surface.bogus = 1")
        self.assertIn("surface.bogus", ctx.exception.message_dict)

    def test_bad_value_is_named(self):
        with self.assertRaises(ValidationError) as ctx:
            loads_scenario("surface.base_tilt_deg = steep\ncamera.width = -3")
        self.assertIn("surface.base_tilt_deg", ctx.exception.message_dict)
        self.assertIn("camera.width", ctx.exception.message_dict)

    def test_bad_vector_length(self):
        with self.assertRaises(ValidationError) as ctx:
            loads_scenario("kinematics.camera_position = 0, 1")
        self.assertIn("kinematics.camera_position", ctx.exception.message_dict)

    def test_model_invariant_violation(self):
        """Cycle period must be a whole number of physics steps"""
        with self.assertRaises(ValidationError):
            loads_scenario("scenario.physics_dt = 0.03")

    def test_non_monotone_tilt_map(self):
        with self.assertRaises(ValidationError):
            loads_scenario("surface.tilt_vs_load_deg = 0:0, 1000:3, 2000:1")

    @override_settings(
        FORKLIFT_SIM={**settings.FORKLIFT_SIM, "CAMERA_WIDTH": 64, "CAMERA_HEIGHT": 48}
    )
    def test_camera_defaults_follow_settings(self):
        scenario = loads_scenario("")
        self.assertEqual((scenario.camera.width, scenario.camera.height), (64, 48))
        self.assertEqual(loads_scenario("camera.width = 32").camera.width, 32)

    def test_with_seed(self):
        scenario = loads_scenario("scenario.seed = 1").with_seed(9)
        self.assertEqual(scenario.seed, 9)
        self.assertEqual(scenario.tracker.seed, 9)


class BundledScenarioTestCase(SimpleTestCase):
    """The shipped scenario files"""

    def test_all_bundled_files_load(self):
        names = [load_scenario(path).name for path in bundled_scenarios()]
        self.assertEqual(names, ["case1", "case2", "case3", "case4", "flat"])

    def test_case_parameters(self):
        case1 = load_scenario("case1")
        self.assertEqual(case1.plant.surface.preload, 1500.0)
        self.assertEqual(case1.expect.outcome, "WithdrawCompleted")
        self.assertAlmostEqual(case1.expect.final_tilt, np.radians(-4.0))

        case2 = load_scenario("case2.scn")
        self.assertEqual(case2.mode, ControlMode.NO_CONTROL)
        self.assertEqual(case2.tracker.halt_timeout, 20.0)

        case4 = load_scenario("case4")
        self.assertAlmostEqual(case4.plant.surface.base_tilt, np.radians(-2.0))
        self.assertEqual(case4.plant.pallet.load.name, "cage")
        self.assertEqual(case4.camera.width, 160)

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            resolve_scenario_path("no_such_case")
