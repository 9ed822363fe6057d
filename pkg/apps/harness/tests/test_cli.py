import io
import json
import shutil
import tempfile
from contextlib import redirect_stderr
from pathlib import Path
from unittest.mock import patch

import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from apps.core.exceptions import NoCorrespondencesError
from apps.harness.cli import cli
from apps.harness.models import SimulationRun
from apps.harness.scenario import bundled_scenarios
from apps.harness.services import CSV_COLUMNS

SHORT_RUN = "scenario.name = short\nscenario.duration_limit = 0.6\n"


class CliTestCase(SimpleTestCase):
    """Tests for apps.harness.cli.cli"""

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp)

    def test_run_flat_writes_csv(self):
        csv_path = self.tmp / "flat.csv"
        out = io.StringIO()
        call_command("run", "flat", "--csv", str(csv_path), stdout=out)
        self.assertIn("flat passed", out.getvalue())
        self.assertEqual(list(pd.read_csv(csv_path).columns), CSV_COLUMNS)
        self.assertEqual(cli(["run", "flat.scn", "--csv", str(self.tmp / "again.csv")]), 0)

    def test_run_missing_file(self):
        stderr = io.StringIO()
        with redirect_stderr(stderr):
            code = cli(["run", "missing.scn"])
        self.assertNotEqual(code, 0)
        self.assertIn("not found", stderr.getvalue())

    def test_unknown_flag(self):
        with redirect_stderr(io.StringIO()):
            self.assertNotEqual(cli(["run", "flat", "--bogus"]), 0)

    def test_unknown_subcommand(self):
        stderr = io.StringIO()
        with redirect_stderr(stderr):
            self.assertEqual(cli(["fly"]), 2)
        self.assertIn("usage", stderr.getvalue())

    def test_invalid_scenario(self):
        path = self.tmp / "broken.scn"
        path.write_text("surface.tilt = 4\n")
        with self.assertRaisesMessage(CommandError, "surface.tilt"):
            call_command("run", str(path), "--csv", str(self.tmp / "x.csv"))

    def test_missed_expectation_fails(self):
        path = self.tmp / "short.scn"
        path.write_text(SHORT_RUN + "expect.outcome = WithdrawCompleted\n")
        with redirect_stderr(io.StringIO()):
            self.assertEqual(cli(["run", str(path), "--csv", str(self.tmp / "short.csv")]), 1)

    def test_json_report(self):
        path = self.tmp / "short.scn"
        path.write_text(SHORT_RUN)
        out = io.StringIO()
        call_command(
            "run", str(path), "--csv", str(self.tmp / "s.csv"), "--report", "json", "--seed", "4",
            stdout=out,
        )
        report, _ = json.JSONDecoder().raw_decode(out.getvalue())
        self.assertEqual(report["scenario"], "short")
        self.assertEqual(report["seed"], 4)
        self.assertEqual(report["outcome"], "HaltedTimeout")

    def test_suite_table(self):
        scenario_dir = self.tmp / "scenarios"
        scenario_dir.mkdir()
        flat = next(p for p in bundled_scenarios() if p.stem == "flat")
        shutil.copy(flat, scenario_dir / "flat.scn")
        csv_dir = self.tmp / "csv"
        out = io.StringIO()
        with override_settings(FORKLIFT_SIM={**settings.FORKLIFT_SIM, "SCENARIO_DIR": str(scenario_dir)}):
            call_command("suite", "--csv-dir", str(csv_dir), stdout=out)
        self.assertIn("PASS", out.getvalue())
        self.assertTrue((csv_dir / "flat.csv").exists())


    @patch("apps.harness.services.ScenarioService.run_suite")
    def test_suite_simulation_error_is_command_error(self, run_suite):
        for error in (NoCorrespondencesError(0.15), ValueError("f(a) and f(b) must differ")):
            run_suite.side_effect = error
            with self.assertRaisesMessage(CommandError, "Simulation failed"):
                call_command("suite", stdout=io.StringIO())

    @patch("apps.harness.services.ScenarioService.run")
    def test_run_simulation_error_exits_non_zero(self, run):
        run.side_effect = ValueError("f(a) and f(b) must differ")
        stderr = io.StringIO()
        with redirect_stderr(stderr):
            self.assertNotEqual(cli(["run", "flat", "--csv", str(self.tmp / "x.csv")]), 0)
        self.assertIn("Simulation failed", stderr.getvalue())

class SimulationRunTestCase(TestCase):
    """Tests for persisted runs"""

    def test_run_saved_with_metrics(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "short.scn"
            path.write_text(SHORT_RUN)
            call_command("run", str(path), "--csv", str(Path(tmp) / "s.csv"), "--save", stdout=io.StringIO())

        run = SimulationRun.objects.get()
        self.assertEqual(run.scenario, "short")
        self.assertEqual(run.outcome, "HaltedTimeout")
        self.assertTrue(run.passed)
        self.assertEqual(run.mode, "Proposed")
        self.assertEqual(str(run), "short (seed 0): HaltedTimeout")
