"""Run registry for tower coverage commands."""

from django.core.exceptions import ValidationError
from django.db import models


class SimulationRun(models.Model):
    """One invocation of a tower coverage management command."""

    STATUS_CHOICES = [
        ("running", "Running"),
        ("succeeded", "Succeeded"),
        ("failed", "Failed"),
    ]

    command = models.CharField(max_length=50, help_text="Management command name")
    seed = models.PositiveBigIntegerField(help_text="Master seed of the run")
    config_json = models.TextField(help_text="Canonical resolved run config")
    config_sha256 = models.CharField(
        max_length=64, help_text="SHA-256 of the canonical config"
    )
    out_dir = models.CharField(max_length=500, help_text="Artifact directory")
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default="running")
    error = models.TextField(blank=True, default="")
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-started_at"]
        verbose_name = "Simulation Run"
        verbose_name_plural = "Simulation Runs"
        indexes = [
            models.Index(
                fields=["command", "config_sha256"], name="idx_run_cmd_digest"
            ),
        ]

    def clean(self):
        if len(self.config_sha256) != 64:
            raise ValidationError({"config_sha256": "Digest must be 64 hex characters"})

    def __str__(self):
        return f"{self.command} #{self.pk} (seed {self.seed}, {self.status})"


class CoverageRecord(models.Model):
    """Coverage distance of one evaluated configuration of a run."""

    run = models.ForeignKey(
        SimulationRun, on_delete=models.CASCADE, related_name="coverage_records"
    )
    site_type = models.CharField(max_length=20)
    num_users = models.PositiveIntegerField(help_text="Active users K")
    carrier_mhz = models.PositiveIntegerField()
    duplex = models.CharField(max_length=3)
    bandwidth_mhz = models.FloatField()
    polarizations = models.PositiveSmallIntegerField()
    d_cov_km = models.FloatField(null=True, blank=True)
    diagnostic = models.TextField(blank=True, default="")
    error = models.TextField(blank=True, default="")

    class Meta:
        ordering = ["run", "site_type", "carrier_mhz", "num_users", "polarizations"]
        verbose_name = "Coverage Record"
        verbose_name_plural = "Coverage Records"
        unique_together = [
            ["run", "site_type", "num_users", "carrier_mhz", "polarizations"]
        ]

    def clean(self):
        if self.d_cov_km is not None and self.d_cov_km < 0:
            raise ValidationError({"d_cov_km": "Coverage distance cannot be negative"})

    def __str__(self):
        d_cov = "error" if self.d_cov_km is None else f"{self.d_cov_km} km"
        return (
            f"{self.site_type} K={self.num_users} {self.carrier_mhz} MHz "
            f"pol={self.polarizations}: {d_cov}"
        )
