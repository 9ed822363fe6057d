# Generated by Django 4.2.11 on 2026-10-17 09:12

from django.db import migrations, models
import uuid


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SimulationRun",
            fields=[
                (
                    "id",
                    models.UUIDField(
                        default=uuid.uuid4,
                        editable=False,
                        primary_key=True,
                        serialize=False,
                    ),
                ),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
                ("scenario", models.CharField(max_length=255)),
                ("seed", models.PositiveIntegerField(default=0)),
                ("mode", models.CharField(max_length=32)),
                (
                    "outcome",
                    models.CharField(
                        choices=[
                            ("WithdrawCompleted", "Withdraw completed"),
                            ("HaltedTimeout", "Halted on timeout"),
                            ("JamFault", "Jam fault"),
                        ],
                        max_length=32,
                    ),
                ),
                ("passed", models.BooleanField(default=False)),
                ("final_fork_tilt_deg", models.FloatField()),
                ("max_drag_m", models.FloatField()),
                ("cycles", models.PositiveIntegerField(default=0)),
                ("converged_delta_tilt_deg", models.FloatField()),
                ("max_withdraw_tracking_error_m", models.FloatField(default=0.0)),
                ("sim_time_s", models.FloatField(default=0.0)),
                ("csv_path", models.CharField(blank=True, max_length=1024)),
                ("failures", models.JSONField(blank=True, default=list)),
            ],
            options={
                "db_table": "simulation_runs",
                "ordering": ["-created_at"],
                "indexes": [
                    models.Index(fields=["scenario", "seed"], name="sim_run_scenario_seed_idx")
                ],
            },
        ),
    ]
