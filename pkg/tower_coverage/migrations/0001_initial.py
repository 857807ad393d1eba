# Generated by Django 6.0 on 2026-10-19 12:00

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SimulationRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "command",
                    models.CharField(
                        help_text="Management command name", max_length=50
                    ),
                ),
                (
                    "seed",
                    models.PositiveBigIntegerField(help_text="Master seed of the run"),
                ),
                (
                    "config_json",
                    models.TextField(help_text="Canonical resolved run config"),
                ),
                (
                    "config_sha256",
                    models.CharField(
                        help_text="SHA-256 of the canonical config", max_length=64
                    ),
                ),
                (
                    "out_dir",
                    models.CharField(help_text="Artifact directory", max_length=500),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("succeeded", "Succeeded"),
                            ("failed", "Failed"),
                        ],
                        default="running",
                        max_length=10,
                    ),
                ),
                ("error", models.TextField(blank=True, default="")),
                ("started_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "verbose_name": "Simulation Run",
                "verbose_name_plural": "Simulation Runs",
                "ordering": ["-started_at"],
                "indexes": [
                    models.Index(
                        fields=["command", "config_sha256"], name="idx_run_cmd_digest"
                    )
                ],
            },
        ),
        migrations.CreateModel(
            name="CoverageRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("site_type", models.CharField(max_length=20)),
                (
                    "num_users",
                    models.PositiveIntegerField(help_text="Active users K"),
                ),
                ("carrier_mhz", models.PositiveIntegerField()),
                ("duplex", models.CharField(max_length=3)),
                ("bandwidth_mhz", models.FloatField()),
                ("polarizations", models.PositiveSmallIntegerField()),
                ("d_cov_km", models.FloatField(blank=True, null=True)),
                ("diagnostic", models.TextField(blank=True, default="")),
                ("error", models.TextField(blank=True, default="")),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="coverage_records",
                        to="tower_coverage.simulationrun",
                    ),
                ),
            ],
            options={
                "verbose_name": "Coverage Record",
                "verbose_name_plural": "Coverage Records",
                "ordering": [
                    "run",
                    "site_type",
                    "carrier_mhz",
                    "num_users",
                    "polarizations",
                ],
                "unique_together": {
                    ("run", "site_type", "num_users", "carrier_mhz", "polarizations")
                },
            },
        ),
    ]
