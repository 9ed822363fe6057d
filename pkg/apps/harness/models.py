from django.db import models

from apps.core.models import TimestampedModel, UUIDModel


class SimulationRun(UUIDModel, TimestampedModel):
    """Stored outcome of one scenario run"""

    OUTCOME_CHOICES = [
        ("WithdrawCompleted", "Withdraw completed"),
        ("HaltedTimeout", "Halted on timeout"),
        ("JamFault", "Jam fault"),
    ]

    scenario = models.CharField(max_length=255)
    seed = models.PositiveIntegerField(default=0)
    mode = models.CharField(max_length=32)
    outcome = models.CharField(max_length=32, choices=OUTCOME_CHOICES)
    passed = models.BooleanField(default=False)

    # Metrics
    final_fork_tilt_deg = models.FloatField()
    max_drag_m = models.FloatField()
    cycles = models.PositiveIntegerField(default=0)
    converged_delta_tilt_deg = models.FloatField()
    max_withdraw_tracking_error_m = models.FloatField(default=0.0)
    sim_time_s = models.FloatField(default=0.0)

    csv_path = models.CharField(max_length=1024, blank=True)
    failures = models.JSONField(default=list, blank=True)

    class Meta:
        db_table = "simulation_runs"
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["scenario", "seed"], name="sim_run_scenario_seed_idx"),
        ]

    def __str__(self):
        return f"{self.scenario} (seed {self.seed}): {self.outcome}"

    @classmethod
    def from_result(cls, result):
        report = result.report
        data = report.as_dict()
        return cls.objects.create(
            scenario=report.scenario,
            seed=report.seed,
            mode=report.mode,
            outcome=data["outcome"],
            passed=report.passed,
            final_fork_tilt_deg=data["final_fork_tilt_deg"],
            max_drag_m=report.max_drag,
            cycles=report.cycles,
            converged_delta_tilt_deg=data["converged_delta_tilt_deg"],
            max_withdraw_tracking_error_m=report.max_withdraw_tracking_error,
            sim_time_s=report.sim_time,
            csv_path=str(result.csv_path or ""),
            failures=list(report.failures),
        )
