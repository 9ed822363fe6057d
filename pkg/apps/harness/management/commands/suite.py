import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ForkliftSimError
from apps.harness.scenario import bundled_scenarios, describe_validation_error
from apps.harness.services import ScenarioService


class Command(BaseCommand):
    help = "Run every bundled scenario and print a pass/fail table"

    def add_arguments(self, parser):
        parser.add_argument("--csv-dir", dest="csv_dir", help="Write one CSV per scenario here")
        parser.add_argument("--seed", type=int, default=None, help="Override every scenario seed")

    def handle(self, *args, **options):
        paths = bundled_scenarios()
        if not paths:
            raise CommandError("No bundled scenarios found")
        try:
            results = ScenarioService.run_suite(paths, csv_dir=options["csv_dir"], seed=options["seed"])
        except ValidationError as exc:
            raise CommandError(f"Invalid scenario: {describe_validation_error(exc)}") from exc
        except (ForkliftSimError, ValueError) as exc:
            raise CommandError(f"Simulation failed: {exc}") from exc

        table = pd.DataFrame(
            [
                {
                    "scenario": r.report.scenario,
                    "mode": r.report.mode,
                    "outcome": r.report.outcome.value,
                    "final_tilt_deg": round(float(np.degrees(r.report.final_fork_tilt)), 2),
                    "max_drag_mm": round(r.report.max_drag * 1000.0, 1),
                    "result": "PASS" if r.report.passed else "FAIL",
                }
                for r in results
            ]
        )
        self.stdout.write(table.to_string(index=False))

        failed = [r.report for r in results if not r.report.passed]
        for report in failed:
            self.stderr.write(f"{report.scenario}: {'; '.join(report.failures)}")
        if failed:
            raise CommandError(f"{len(failed)} of {len(results)} scenarios failed")
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} scenarios passed"))
