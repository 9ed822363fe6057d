import json
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ForkliftSimError
from apps.harness.scenario import describe_validation_error
from apps.harness.services import ScenarioService


class Command(BaseCommand):
    help = "Run one forklift unloading scenario and write its cycle log as CSV"

    def add_arguments(self, parser):
        parser.add_argument("scenario", help="Scenario file, or the name of a bundled scenario")
        parser.add_argument("--csv", dest="csv", help="CSV output path (default: OUTPUT_DIR/<name>.csv)")
        parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
        parser.add_argument("--report", choices=["text", "json"], default="text")
        parser.add_argument("--save", action="store_true", help="Store the run in the database")
        parser.add_argument("--dump-clouds", dest="dump_clouds", help="Write every depth frame as .xyz")

    def handle(self, *args, **options):
        csv_path = options["csv"] or (
            Path(settings.FORKLIFT_SIM["OUTPUT_DIR"]) / f"{Path(options['scenario']).stem}.csv"
        )
        try:
            result = ScenarioService.run(
                options["scenario"],
                csv_path=csv_path,
                seed=options["seed"],
                dump_clouds=options["dump_clouds"],
            )
        except ValidationError as exc:
            raise CommandError(f"Invalid scenario: {describe_validation_error(exc)}") from exc
        except (ForkliftSimError, ValueError) as exc:
            raise CommandError(f"Simulation failed: {exc}") from exc

        if options["save"]:
            ScenarioService.save(result)

        report = result.report
        if options["report"] == "json":
            self.stdout.write(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        else:
            self.stdout.write(
                f"{report.scenario}: {report.outcome.value} after {report.cycles} cycles, "
                f"final tilt {np.degrees(report.final_fork_tilt):.2f} deg, "
                f"max drag {report.max_drag * 1000:.1f} mm"
            )
            self.stdout.write(f"CSV written to {result.csv_path}")

        if not report.passed:
            raise CommandError(f"{report.scenario} missed expectations: {'; '.join(report.failures)}")
        self.stdout.write(self.style.SUCCESS(f"{report.scenario} passed"))
