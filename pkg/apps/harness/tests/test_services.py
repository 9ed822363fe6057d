import io
import shutil
import tempfile
from pathlib import Path
from time import perf_counter

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.test import SimpleTestCase, override_settings

from apps.harness.scenario import Expectation, bundled_scenarios, load_scenario, loads_scenario
from apps.harness.services import (
    CSV_COLUMNS,
    WITHDRAW_PHASE,
    RunOutcome,
    RunReport,
    check_expectations,
    render_seed,
    run_scenario,
)


def run_case(name):
    return run_scenario(load_scenario(name))


class ExpectationTestCase(SimpleTestCase):
    """Tests for check_expectations"""

    def setUp(self):
        self.report = RunReport(
            scenario="demo",
            outcome=RunOutcome.WITHDRAW_COMPLETED,
            final_fork_tilt=np.radians(-3.8),
            max_drag=0.004,
            cycles=40,
            converged_delta_tilt=np.radians(0.1),
            max_withdraw_tracking_error=0.003,
        )

    def test_all_met(self):
        expect = Expectation(
            outcome="WithdrawCompleted",
            final_tilt=np.radians(-4.0),
            max_drag_below=0.01,
            converged_delta_tilt_below=np.radians(0.25),
            tracking_error_below=0.005,
        )
        self.assertEqual(check_expectations(self.report, expect), [])

    def test_each_failure_reported(self):
        expect = Expectation(
            outcome="HaltedTimeout",
            final_tilt=np.radians(-2.0),
            max_drag_above=0.05,
            tracking_error_below=0.001,
        )
        failures = check_expectations(self.report, expect)
        self.assertEqual(len(failures), 4)
        self.assertIn("outcome", failures[0])

    def test_report_as_dict_in_degrees(self):
        data = self.report.as_dict()
        self.assertEqual(data["outcome"], "WithdrawCompleted")
        self.assertAlmostEqual(data["final_fork_tilt_deg"], -3.8)
        self.assertTrue(data["passed"])
        self.assertNotIn("final_fork_tilt", data)


class RenderSeedTestCase(SimpleTestCase):
    def test_distinct_and_reproducible(self):
        self.assertEqual(render_seed(3, 10), render_seed(3, 10))
        self.assertNotEqual(render_seed(3, 10), render_seed(3, 11))
        self.assertNotEqual(render_seed(3, 10), render_seed(4, 10))


class CaseOutcomeTestCase(SimpleTestCase):
    """End-to-end runs of the bundled cases"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.results, cls.wall_times = {}, {}
        for name in ("case1", "case2", "case3", "case4"):
            start = perf_counter()
            cls.results[name] = run_case(name)
            cls.wall_times[name] = perf_counter() - start

    def test_each_case_within_ten_seconds(self):
        for name, seconds in self.wall_times.items():
            self.assertLessEqual(seconds, 10.0, name)

    def test_case1_follows_surface_and_releases(self):
        """Up & variable surface: tilt follows the loaded surface to -4 deg, no drag"""
        report = self.results["case1"].report
        self.assertEqual(report.outcome, RunOutcome.WITHDRAW_COMPLETED)
        self.assertLessEqual(abs(np.degrees(report.final_fork_tilt) + 4.0), 0.5)
        self.assertLessEqual(report.max_drag, 0.010)
        self.assertLessEqual(abs(np.degrees(report.converged_delta_tilt)), 0.25)
        self.assertLessEqual(report.max_withdraw_tracking_error, 0.005)
        self.assertAlmostEqual(np.degrees(report.final_surface_tilt), 4.0, places=3)
        self.assertTrue(report.passed, report.failures)

    def test_case2_halts_without_tilt_control(self):
        log = self.results["case2"].log
        report = self.results["case2"].report
        self.assertEqual(report.outcome, RunOutcome.HALTED_TIMEOUT)
        self.assertTrue((log["limit_switch"] == 1).all())
        self.assertEqual(log["phase"].iloc[-1], "Halted")
        self.assertTrue((log["fork_tilt_meas_deg"].abs() < 1e-9).all())

    def test_case3_switch_opens_before_tilt_matches(self):
        """Down surface: heel switch opens first, tilt is corrected afterwards"""
        report = self.results["case3"].report
        log = self.results["case3"].log
        self.assertEqual(report.outcome, RunOutcome.WITHDRAW_COMPLETED)
        self.assertLessEqual(abs(np.degrees(report.final_fork_tilt) - 2.0), 0.5)
        self.assertLessEqual(report.max_drag, 0.010)
        self.assertLessEqual(report.max_withdraw_tracking_error, 0.005)

        released = log[log["limit_switch"] == 0].iloc[0]
        self.assertLess(abs(released["fork_tilt_meas_deg"]), 1.0)
        self.assertIn("LowerToRelease", set(log["phase"]))
        self.assertTrue(report.passed, report.failures)

    def test_case4_drags_the_cage(self):
        report = self.results["case4"].report
        self.assertEqual(report.outcome, RunOutcome.WITHDRAW_COMPLETED)
        self.assertGreater(report.max_drag, 0.050)
        self.assertTrue(report.passed, report.failures)

    def test_convergence_before_handoff(self):
        """Proposed cases hand over with the tilt error inside the threshold"""
        for name in ("case1", "case3"):
            log = self.results[name].log
            handoff = log[log["phase"] == "ReadyToWithdraw"].iloc[0]
            self.assertLessEqual(abs(handoff["delta_tilt_deg"]), 0.25, name)

    def test_log_layout(self):
        for name, result in self.results.items():
            log = result.log
            self.assertEqual(list(log.columns), CSV_COLUMNS, name)
            self.assertTrue(np.all(np.diff(log["time_s"].to_numpy()) > 0), name)
        withdraw_rows = self.results["case1"].log["phase"] == WITHDRAW_PHASE
        self.assertGreater(withdraw_rows.sum(), 10)


class DeterminismTestCase(SimpleTestCase):
    """Same scenario and seed give byte-identical CSV"""

    def test_byte_identical_csv(self):
        scenario = load_scenario("flat")
        with tempfile.TemporaryDirectory() as tmp:
            first = run_scenario(scenario, csv_path=Path(tmp) / "a.csv").csv_path
            second = run_scenario(scenario, csv_path=Path(tmp) / "b.csv").csv_path
            self.assertEqual(first.read_bytes(), second.read_bytes())

            log = pd.read_csv(first)
            self.assertEqual(list(log.columns), CSV_COLUMNS)

    def test_suite_twice_gives_identical_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario_dir = Path(tmp) / "scenarios"
            scenario_dir.mkdir()
            flat = next(p for p in bundled_scenarios() if p.stem == "flat")
            shutil.copy(flat, scenario_dir / "flat.scn")
            sim = {**settings.FORKLIFT_SIM, "SCENARIO_DIR": str(scenario_dir)}
            with override_settings(FORKLIFT_SIM=sim):
                for run in ("first", "second"):
                    call_command("suite", "--csv-dir", str(Path(tmp) / run), stdout=io.StringIO())

            first = (Path(tmp) / "first" / "flat.csv").read_bytes()
            second = (Path(tmp) / "second" / "flat.csv").read_bytes()
            self.assertGreater(len(first), 0)
            self.assertEqual(first, second)

    def test_seed_changes_noise(self):
        scenario = loads_scenario("scenario.duration_limit = 1.0")
        a = run_scenario(scenario).log
        b = run_scenario(scenario.with_seed(5)).log
        self.assertFalse(a["icp_error_m"].equals(b["icp_error_m"]))


class CloudDumpTestCase(SimpleTestCase):
    def test_dump_one_file_per_cycle(self):
        scenario = loads_scenario("scenario.duration_limit = 0.6\ncamera.width = 40\ncamera.height = 36")
        with tempfile.TemporaryDirectory() as tmp:
            result = run_scenario(scenario, dump_clouds=tmp)
            files = sorted(Path(tmp).glob("*.xyz"))
            self.assertEqual(len(files), len(result.log))
            self.assertEqual(result.report.outcome, RunOutcome.HALTED_TIMEOUT)
