"""Django management command to relocate high towers greedily."""

import logging
from typing import Any, Dict

import pandas as pd

from tower_coverage.exceptions import MissingRadiusError
from tower_coverage.geo import (
    covered_population,
    export_geojson,
    greedy_relocate,
    load_raster,
    load_towers,
    scenario_report,
)
from tower_coverage.management.base import RunCommand
from tower_coverage.runconfig import (
    assign_radii,
    coverage_radius_table,
    scenario_params,
)
from tower_coverage.utils import write_csv_artifact, write_json_artifact

logger = logging.getLogger("tower_coverage.commands")

PLACEMENT_COLUMNS = ["id", "lat", "lon", "radius_km", "added_persons"]


class Command(RunCommand):
    help = "Place N high towers where they add the most covered persons"

    def add_command_arguments(self, parser: Any) -> None:
        parser.add_argument("--raster", required=True, help="Population raster")
        parser.add_argument(
            "--cell-deg", type=float, help="Cell size of a CSV raster in degrees"
        )
        parser.add_argument("--towers", required=True, help="Tower CSV")
        parser.add_argument("-n", "--n-towers", type=int, help="Towers to place")
        parser.add_argument("--radius-km", type=float, help="Relocated tower radius")
        parser.add_argument(
            "--coverage-run", type=int, help="coverage_table run id for radii"
        )
        parser.add_argument("--coverage-csv", help="coverage_table.csv for radii")

    def config_flags(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "geo.relocate.n_towers": options["n_towers"],
            "geo.relocate.radius_km": options["radius_km"],
            "geo.coverage_run": options["coverage_run"],
            "geo.coverage_csv": options["coverage_csv"],
        }

    def relocation_radius(self, config, table) -> float:
        geo = config["geo"]
        for radius in (
            geo["relocate"]["radius_km"],
            geo["radii"].get("tv-tower"),
            table.get("high_tower", {}).get(geo["num_users"]),
        ):
            if radius is not None:
                return radius
        raise MissingRadiusError("relocated", "tv-tower")

    def run(self, resolved, executor, record, options) -> None:
        config, seed = resolved.config, resolved.seed
        geo = config["geo"]
        params = scenario_params(config)
        raster = load_raster(options["raster"], options["cell_deg"])
        table = coverage_radius_table(config)
        sites = assign_radii(config, load_towers(options["towers"]), table)
        legacy = [site for site in sites if site.site_class == "legacy"]

        before = scenario_report(raster, sites, params)
        n_towers = geo["relocate"]["n_towers"]

        placements = []
        if n_towers == 0:
            logger.warning("n=0: no towers relocated, coverage unchanged")
            self.stdout.write(
                self.style.WARNING("No-op: n=0, no towers relocated")
            )
            after = before
            radius = None
        else:
            radius = self.relocation_radius(config, table)
            placements = greedy_relocate(
                raster, n_towers, radius, existing_sites=legacy
            )
            after = scenario_report(raster, legacy + placements, params)

        added = []
        covered = covered_population(raster, legacy) if legacy else 0.0
        for number in range(len(placements)):
            total = covered_population(raster, legacy + placements[: number + 1])
            added.append(total - covered)
            covered = total

        frame = pd.DataFrame(
            [
                {
                    "id": site.id,
                    "lat": f"{site.latitude:.6f}",
                    "lon": f"{site.longitude:.6f}",
                    "radius_km": site.coverage_radius_km,
                    "added_persons": gain,
                }
                for site, gain in zip(placements, added)
            ],
            columns=PLACEMENT_COLUMNS,
        )

        out_dir = resolved.out_dir
        write_csv_artifact(out_dir / "relocate.csv", frame, config, seed)
        write_json_artifact(
            out_dir / "relocate.json",
            {
                "n_towers": n_towers,
                "radius_km": radius,
                "before": before.as_dict(),
                "after": after.as_dict(),
                "delta_persons": after.covered_combined - before.covered_combined,
            },
            config,
            seed,
        )
        export_geojson(
            legacy + placements,
            path=out_dir / "relocated.geojson",
            segments=geo["geojson_segments"],
            seed=seed,
            config=config,
        )

        for site, gain in zip(placements, added):
            self.stdout.write(
                f"{site.id}: ({site.latitude:.6f}, {site.longitude:.6f}) "
                f"+{gain:,.0f} persons"
            )
        self.stdout.write(
            f"Before: {before.covered_combined:,.0f} persons "
            f"({before.percent_combined:.2f}%)"
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"After: {after.covered_combined:,.0f} persons "
                f"({after.percent_combined:.2f}%)"
            )
        )
