"""Django management command to report population covered by tower sites."""

import logging
from typing import Any, Dict, List

import pandas as pd

from tower_coverage.exceptions import InvalidConfigError
from tower_coverage.geo import (
    ScenarioReport,
    TowerSite,
    assign_load_radii,
    export_geojson,
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

SUMMARY_COLUMNS = ["scope", "covered_persons", "percent"]


def parse_radius(value: str):
    """Parse a CLASS=KM radius override."""
    try:
        site_class, radius = value.split("=", 1)
        return site_class.strip(), float(radius)
    except ValueError:
        raise InvalidConfigError(
            f"Radius override must look like CLASS=KM, got {value!r}"
        )


def summary_frame(report: ScenarioReport) -> pd.DataFrame:
    """Covered persons and percentages per scope."""
    scopes = [
        (f"class:{name}", count)
        for name, count in sorted(report.covered_by_class.items())
    ]
    scopes += [
        ("legacy", report.covered_legacy),
        ("high_towers", report.covered_high_towers),
        ("combined", report.covered_combined),
        ("tv_incremental", report.tv_incremental),
        ("total", report.total_population),
    ]
    return pd.DataFrame(
        [
            {"scope": scope, "covered_persons": count, "percent": report.percent(count)}
            for scope, count in scopes
        ],
        columns=SUMMARY_COLUMNS,
    )


def sites_frame(sites: List[TowerSite], report: ScenarioReport) -> pd.DataFrame:
    coverage = {row.id: row for row in report.sites}
    return pd.DataFrame(
        [
            {
                "id": site.id,
                "kind": site.kind,
                "lat": f"{site.latitude:.6f}",
                "lon": f"{site.longitude:.6f}",
                "radius_km": site.coverage_radius_km,
                "covered_persons": coverage[site.id].covered_persons,
                "active_users_low": coverage[site.id].active_users_low,
                "active_users_high": coverage[site.id].active_users_high,
                "active_users_early_adoption": (
                    coverage[site.id].active_users_early_adoption
                ),
            }
            for site in sites
        ]
    )


class Command(RunCommand):
    help = "Covered population of legacy sites and recycled TV towers"

    def add_command_arguments(self, parser: Any) -> None:
        parser.add_argument("--raster", required=True, help="Population raster")
        parser.add_argument(
            "--cell-deg", type=float, help="Cell size of a CSV raster in degrees"
        )
        parser.add_argument("--towers", required=True, help="Tower CSV")
        parser.add_argument(
            "--coverage-run", type=int, help="coverage_table run id for radii"
        )
        parser.add_argument("--coverage-csv", help="coverage_table.csv for radii")
        parser.add_argument(
            "--radius",
            action="append",
            metavar="CLASS=KM",
            help="Fixed radius per site class (legacy, tv-tower, candidate)",
        )
        parser.add_argument(
            "--load-based",
            action="store_true",
            default=None,
            help="Pick radii from the load each site would carry",
        )
        parser.add_argument("--carrier", type=int, help="Carrier in MHz for radii")
        parser.add_argument(
            "--polarizations", type=int, help="Polarizations for radii (1 or 2)"
        )
        parser.add_argument("--users", type=int, help="K used for fixed radii")

    def config_flags(self, options: Dict[str, Any]) -> Dict[str, Any]:
        flags = {
            "geo.coverage_run": options["coverage_run"],
            "geo.coverage_csv": options["coverage_csv"],
            "geo.load_based": options["load_based"],
            "geo.carrier_mhz": options["carrier"],
            "geo.polarizations": options["polarizations"],
            "geo.num_users": options["users"],
        }
        for value in options["radius"] or []:
            site_class, radius = parse_radius(value)
            flags[f"geo.radii.{site_class}"] = radius
        return flags

    def resolve_sites(self, config, raster, sites) -> List[TowerSite]:
        geo = config["geo"]
        table = coverage_radius_table(config)
        if not geo["load_based"]:
            return assign_radii(config, sites, table)

        if not table:
            raise InvalidConfigError(
                "Load-based radii need a coverage run or coverage CSV"
            )
        fixed = [site for site in sites if site.site_class in geo["radii"]]
        adaptive = [site for site in sites if site.site_class not in geo["radii"]]
        assignments = assign_load_radii(
            raster, adaptive, table, scenario_params(config).early_adoption_fraction
        )
        for assignment in assignments:
            if assignment.overloaded:
                self.stdout.write(
                    self.style.WARNING(
                        f"! {assignment.site.id}: "
                        f"{assignment.active_users:.1f} active users exceed "
                        f"K={assignment.num_users}"
                    )
                )
        by_id = {a.site.id: a.site for a in assignments}
        by_id.update({s.id: s for s in assign_radii(config, fixed, table)})
        return [by_id[site.id] for site in sites]

    def run(self, resolved, executor, record, options) -> None:
        config, seed = resolved.config, resolved.seed
        geo = config["geo"]
        raster = load_raster(options["raster"], options["cell_deg"])
        sites = self.resolve_sites(config, raster, load_towers(options["towers"]))

        for site in sites:
            if not raster.contains(site.latitude, site.longitude):
                self.stdout.write(
                    self.style.WARNING(f"! {site.id} lies outside the raster")
                )

        report = scenario_report(raster, sites, scenario_params(config))

        out_dir = resolved.out_dir
        write_json_artifact(out_dir / "geo_report.json", report.as_dict(), config, seed)
        write_csv_artifact(
            out_dir / "geo_report.csv", summary_frame(report), config, seed
        )
        write_csv_artifact(
            out_dir / "geo_sites.csv", sites_frame(sites, report), config, seed
        )
        export_geojson(
            sites,
            path=out_dir / "coverage_circles.geojson",
            segments=geo["geojson_segments"],
            seed=seed,
            config=config,
        )

        self.stdout.write(
            f"Total population: {report.total_population:,.0f} persons"
        )
        self.stdout.write(
            f"Legacy sites: {report.covered_legacy:,.0f} persons "
            f"({report.percent_legacy:.2f}%)"
        )
        self.stdout.write(
            f"High towers: {report.covered_high_towers:,.0f} persons "
            f"({report.percent_high_towers:.2f}%)"
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"Combined: {report.covered_combined:,.0f} persons "
                f"({report.percent_combined:.2f}%)"
            )
        )
