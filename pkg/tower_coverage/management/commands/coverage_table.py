"""Django management command to compute the coverage distance table."""

import logging
from typing import Any, Dict

import pandas as pd

from tower_coverage.coverage import coverage_table, pivot_rows
from tower_coverage.management.base import RunCommand
from tower_coverage.models import CoverageRecord
from tower_coverage.runconfig import coverage_queries
from tower_coverage.serializers import PROFILES
from tower_coverage.utils import write_csv_artifact, write_json_artifact

logger = logging.getLogger("tower_coverage.commands")

CURVE_COLUMNS = [
    "type",
    "K",
    "fc",
    "polarizations",
    "distance_km",
    "satisfied_fraction",
    "half_width",
    "satisfied",
    "samples",
]


class Command(RunCommand):
    help = "Estimate coverage distances for the site x K x carrier sweep"

    def add_command_arguments(self, parser: Any) -> None:
        parser.add_argument(
            "--site-types", nargs="+", help="Subset of site types (legacy, high_tower)"
        )
        parser.add_argument("--users", nargs="+", type=int, help="Active user counts K")
        parser.add_argument(
            "--carriers", nargs="+", type=int, help="Carrier frequencies in MHz"
        )
        parser.add_argument(
            "--polarizations", nargs="+", type=int, help="1 (single) and/or 2 (dual)"
        )
        parser.add_argument("--trials", type=int, help="Drops per distance")
        parser.add_argument(
            "--threshold", type=float, help="Required satisfied-user fraction"
        )
        parser.add_argument("--grid-km", type=float, help="Distance grid step")
        parser.add_argument("--max-distance-km", type=float, help="Search limit")
        parser.add_argument(
            "--profile", choices=PROFILES, help="Channel parameter profile"
        )

    def config_flags(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "sweep.site_types": options["site_types"],
            "sweep.users": options["users"],
            "sweep.carriers_mhz": options["carriers"],
            "sweep.polarizations": options["polarizations"],
            "coverage.trials": options["trials"],
            "coverage.satisfaction_threshold": options["threshold"],
            "coverage.distance_grid_km": options["grid_km"],
            "coverage.max_distance_km": options["max_distance_km"],
            "profile": options["profile"],
        }

    def run(self, resolved, executor, record, options) -> None:
        config, seed = resolved.config, resolved.seed
        queries = coverage_queries(config)
        self.stdout.write(f"Evaluating {len(queries)} configuration(s)...")

        rows = coverage_table(queries, executor)
        table = pivot_rows(rows)
        curves = pd.DataFrame(
            [
                {
                    "type": row.site_type,
                    "K": row.num_users,
                    "fc": row.carrier_mhz,
                    "polarizations": row.polarizations,
                    **vars(point),
                }
                for row in rows
                for point in row.curve
            ],
            columns=CURVE_COLUMNS,
        )

        out_dir = resolved.out_dir
        write_csv_artifact(out_dir / "coverage_table.csv", table, config, seed)
        write_csv_artifact(out_dir / "coverage_curves.csv", curves, config, seed)
        write_json_artifact(
            out_dir / "coverage_table.json",
            {"rows": [row.as_dict() for row in rows]},
            config,
            seed,
        )

        if record is not None:
            CoverageRecord.objects.bulk_create(
                [
                    CoverageRecord(
                        run=record,
                        site_type=row.site_type,
                        num_users=row.num_users,
                        carrier_mhz=row.carrier_mhz,
                        duplex=row.duplex,
                        bandwidth_mhz=row.bandwidth_mhz,
                        polarizations=row.polarizations,
                        d_cov_km=row.d_cov_km,
                        diagnostic=row.diagnostic or "",
                        error=row.error or "",
                    )
                    for row in rows
                ]
            )

        for row in rows:
            label = (
                f"{row.site_type} K={row.num_users} fc={row.carrier_mhz} MHz "
                f"pol={row.polarizations}"
            )
            if row.error:
                self.stdout.write(self.style.ERROR(f"✗ {label}: {row.error}"))
            elif row.diagnostic:
                message = f"! {label}: {row.d_cov_km} km ({row.diagnostic})"
                self.stdout.write(self.style.WARNING(message))
            else:
                self.stdout.write(self.style.SUCCESS(f"✓ {label}: {row.d_cov_km} km"))

        failed = [row for row in rows if row.error]
        if failed:
            exit_code = max(row.exit_code for row in failed)
            self.fail(
                {
                    "error": "CoverageRowsFailed",
                    "message": f"{len(failed)} of {len(rows)} configurations failed",
                    "failed": [row.as_dict() for row in failed],
                    "exit_code": exit_code,
                },
                exit_code,
            )

        self.stdout.write(self.style.SUCCESS(f"Coverage table written to {out_dir}"))
