"""Django management command to generate a synthetic population raster."""

import logging
from typing import Any

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from tower_coverage.exceptions import TowerCoverageError
from tower_coverage.geo import synthetic_raster, write_raster
from tower_coverage.utils import canonical_json

logger = logging.getLogger("tower_coverage.commands")


class Command(BaseCommand):
    help = "Write a seeded clustered rural population raster (CSV or .asc)"

    def add_arguments(self, parser: Any) -> None:
        parser.add_argument("output", type=str, help="Output path (.csv or .asc)")
        parser.add_argument(
            "--bounds",
            nargs=4,
            type=float,
            metavar=("SOUTH", "WEST", "NORTH", "EAST"),
            default=[8.0, 38.0, 9.0, 39.0],
            help="Bounding box in degrees",
        )
        parser.add_argument("--cell-deg", type=float, default=0.01)
        parser.add_argument("--settlements", type=int, default=8)
        parser.add_argument("--background", type=float, default=5.0)
        parser.add_argument("--seed", type=int, help="Generator seed")

    def handle(self, *args: Any, **options: Any) -> None:
        seed = options["seed"]
        if seed is None:
            seed = settings.TOWER_COVERAGE_SEED
        south, west, north, east = options["bounds"]
        try:
            if south >= north or west >= east or options["cell_deg"] <= 0:
                raise TowerCoverageError(
                    f"Invalid bounds {options['bounds']} or cell size "
                    f"{options['cell_deg']}"
                )
            raster = synthetic_raster(
                south,
                west,
                north,
                east,
                options["cell_deg"],
                n_settlements=options["settlements"],
                background_density=options["background"],
                seed=seed,
            )
            path = write_raster(raster, options["output"])
        except TowerCoverageError as e:
            self.stderr.write(canonical_json(e.as_dict(), indent=None))
            raise CommandError(str(e), returncode=e.exit_code)

        logger.info(f"Synthetic raster written to {path} (seed {seed})")
        self.stdout.write(
            self.style.SUCCESS(
                f"✓ {path}: {raster.shape[0]}x{raster.shape[1]} cells, "
                f"{raster.total_population:,.0f} persons"
            )
        )
