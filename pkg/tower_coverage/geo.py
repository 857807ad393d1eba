"""
Population rasters, tower sites and covered-population analysis.

A cell counts as covered when its centre lies within the great-circle
radius of at least one site. Cell areas are latitude corrected.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import geojson
import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .exceptions import (
    EmptyCandidateGridError,
    InputFormatError,
    InvalidArgumentError,
    InvalidConfigError,
    IrregularGridError,
    MissingRadiusError,
    UndefinedPercentageError,
)

logger = logging.getLogger("tower_coverage")

EARTH_RADIUS_KM = 6371.0
KM_PER_DEGREE = 111.195
COORDINATE_DECIMALS = 6
CIRCLE_SEGMENTS = 64

TOWER_KINDS = ("legacy-3G", "legacy-4G", "tv-tower", "candidate")

# Report class and coverage-table site type for each tower kind
SITE_CLASSES = {
    "legacy-3G": "legacy",
    "legacy-4G": "legacy",
    "tv-tower": "tv-tower",
    "candidate": "candidate",
}
COVERAGE_SITE_TYPES = {
    "legacy": "legacy",
    "tv-tower": "high_tower",
    "candidate": "high_tower",
}

PathLike = Union[str, Path]


def haversine(a: Tuple[Any, Any], b: Tuple[Any, Any]):
    """
    Great-circle distance in km between (lat, lon) points in degrees.

    Components may be numpy arrays; they broadcast against each other.
    """
    lat1, lon1 = np.deg2rad(np.asarray(a[0], dtype=float)), np.deg2rad(
        np.asarray(a[1], dtype=float)
    )
    lat2, lon2 = np.deg2rad(np.asarray(b[0], dtype=float)), np.deg2rad(
        np.asarray(b[1], dtype=float)
    )
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    distance = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    return float(distance) if np.ndim(distance) == 0 else distance


def destination(lat: float, lon: float, bearing_deg: float, distance_km: float):
    """Point reached from (lat, lon) along a great circle."""
    phi1 = np.deg2rad(lat)
    lambda1 = np.deg2rad(lon)
    theta = np.deg2rad(bearing_deg)
    delta = distance_km / EARTH_RADIUS_KM

    phi2 = np.arcsin(
        np.sin(phi1) * np.cos(delta) + np.cos(phi1) * np.sin(delta) * np.cos(theta)
    )
    lambda2 = lambda1 + np.arctan2(
        np.sin(theta) * np.sin(delta) * np.cos(phi1),
        np.cos(delta) - np.sin(phi1) * np.sin(phi2),
    )
    return np.rad2deg(phi2), (np.rad2deg(lambda2) + 540.0) % 360.0 - 180.0


@dataclass(frozen=True, eq=False)
class PopulationRaster:
    """
    Regular lat/lon grid of population density (persons per km^2).

    `latitudes` and `longitudes` are ascending cell-centre coordinates;
    `density[i, j]` belongs to (latitudes[i], longitudes[j]).
    """

    latitudes: np.ndarray
    longitudes: np.ndarray
    density: np.ndarray
    cell_size_lat: float
    cell_size_lon: float

    def __post_init__(self):
        density = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "latitudes", np.asarray(self.latitudes, dtype=float))
        object.__setattr__(self, "longitudes", np.asarray(self.longitudes, dtype=float))
        if density.shape != (self.latitudes.size, self.longitudes.size):
            raise InvalidArgumentError(
                f"Density shape {density.shape} does not match "
                f"{self.latitudes.size} x {self.longitudes.size} grid"
            )
        if np.any(density < 0):
            raise InvalidArgumentError("Population density cannot be negative")
        if self.cell_size_lat <= 0 or self.cell_size_lon <= 0:
            raise InvalidArgumentError("Cell sizes must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.density.shape

    @property
    def cell_area_km2(self) -> np.ndarray:
        """Area of every cell, shape (rows, cols)."""
        row_area = (KM_PER_DEGREE * self.cell_size_lat) * (
            KM_PER_DEGREE * self.cell_size_lon * np.cos(np.deg2rad(self.latitudes))
        )
        return np.broadcast_to(row_area[:, None], self.shape)

    @property
    def persons(self) -> np.ndarray:
        return self.density * self.cell_area_km2

    @property
    def total_population(self) -> float:
        return float(self.persons.sum())

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(south, west, north, east) edges of the raster."""
        return (
            float(self.latitudes[0] - self.cell_size_lat / 2),
            float(self.longitudes[0] - self.cell_size_lon / 2),
            float(self.latitudes[-1] + self.cell_size_lat / 2),
            float(self.longitudes[-1] + self.cell_size_lon / 2),
        )

    def contains(self, lat: float, lon: float) -> bool:
        south, west, north, east = self.bounds
        return south <= lat <= north and west <= lon <= east

    def cell_centres(self) -> Tuple[np.ndarray, np.ndarray]:
        """Broadcast (lat, lon) grids of cell centres."""
        return np.meshgrid(self.latitudes, self.longitudes, indexing="ij")


@dataclass(frozen=True)
class TowerSite:
    id: str
    latitude: float
    longitude: float
    kind: str
    coverage_radius_km: Optional[float] = None
    height_m: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TOWER_KINDS:
            raise InvalidConfigError(
                f"Unknown tower kind {self.kind} (known: {', '.join(TOWER_KINDS)})"
            )
        if self.coverage_radius_km is not None and self.coverage_radius_km < 0:
            raise InvalidConfigError(
                f"Coverage radius of {self.id} cannot be negative"
            )

    @property
    def site_class(self) -> str:
        return SITE_CLASSES[self.kind]

    @property
    def coverage_site_type(self) -> str:
        return COVERAGE_SITE_TYPES[self.site_class]

    def with_radius(self, radius_km: float) -> "TowerSite":
        return replace(self, coverage_radius_km=float(radius_km))


@dataclass(frozen=True)
class ScenarioParams:
    active_fraction_low: float = 0.01
    active_fraction_high: float = 0.02
    adoption_rate: float = 0.02
    active_share_of_subscribers: float = 1 / 20

    def __post_init__(self):
        for name in (
            "active_fraction_low",
            "active_fraction_high",
            "adoption_rate",
            "active_share_of_subscribers",
        ):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise InvalidConfigError(f"{name} must lie in (0, 1], got {value}")

    @property
    def early_adoption_fraction(self) -> float:
        return self.adoption_rate * self.active_share_of_subscribers


# ==============================================================================
# RASTER AND TOWER FILES
# ==============================================================================


def _regular_axis(
    values: np.ndarray, name: str, filename: str, step: Optional[float] = None
) -> Tuple[np.ndarray, Optional[float]]:
    axis = np.unique(values)
    if axis.size == 1:
        return axis, step
    if step is None:
        step = float(axis[-1] - axis[0]) / (axis.size - 1)
    # Coordinates are written rounded to COORDINATE_DECIMALS
    tolerance = max(10.0**-COORDINATE_DECIMALS, 1e-3 * step)
    steps = np.diff(axis)
    if np.any(np.abs(steps - step) > tolerance):
        raise IrregularGridError(
            f"Non-uniform {name} spacing",
            filename=filename,
            expected=f"constant step {step:.6f}",
            got=f"steps between {steps.min():.6f} and {steps.max():.6f}",
        )
    return axis, step


def _csv_cell_size(path: Path) -> Tuple[Optional[float], Optional[float]]:
    """Cell size from a leading `# cellsize=<deg>` or `# cellsize=<lat> <lon>`."""
    with open(path, "r", encoding="utf-8") as file:
        for line in file:
            if not line.startswith("#"):
                break
            key, _, value = line.lstrip("#").partition("=")
            if key.strip().lower() != "cellsize":
                continue
            try:
                sizes = [float(v) for v in value.replace(",", " ").split()]
            except ValueError:
                sizes = []
            if len(sizes) not in (1, 2) or min(sizes) <= 0:
                raise InputFormatError(
                    "Invalid cellsize comment",
                    filename=path.name,
                    expected="# cellsize=<deg> or # cellsize=<lat_deg> <lon_deg>",
                    got=line.strip(),
                )
            return sizes[0], sizes[-1]
    return None, None


def _load_csv_raster(path: Path, cell_deg: Optional[float] = None) -> PopulationRaster:
    filename = path.name
    size_lat, size_lon = (cell_deg, cell_deg) if cell_deg else _csv_cell_size(path)
    try:
        frame = pd.read_csv(path, comment="#", dtype=str, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputFormatError(f"Unreadable raster CSV: {e}", filename=filename)

    missing = {"lat", "lon", "density"} - set(frame.columns)
    if missing:
        raise InputFormatError(
            "Missing raster columns",
            filename=filename,
            expected="lat,lon,density",
            got=",".join(frame.columns),
        )

    values = frame[["lat", "lon", "density"]].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputFormatError(
            "Malformed raster row",
            filename=filename,
            line_number=row + 2,
            expected="numeric lat,lon,density",
            got=",".join(str(v) for v in frame.iloc[row][["lat", "lon", "density"]]),
        )
    negative = values["density"] < 0
    if negative.any():
        row = int(np.flatnonzero(negative.to_numpy())[0])
        raise InputFormatError(
            "Negative population density",
            filename=filename,
            line_number=row + 2,
        )

    lats, dlat = _regular_axis(
        values["lat"].to_numpy(), "latitude", filename, size_lat
    )
    lons, dlon = _regular_axis(
        values["lon"].to_numpy(), "longitude", filename, size_lon
    )
    dlat = dlat or dlon
    dlon = dlon or dlat
    if dlat is None:
        raise IrregularGridError(
            "Cannot infer the cell size of a single-cell CSV raster; "
            "add a '# cellsize=<deg>' comment",
            filename=filename,
        )

    if len(values) != lats.size * lons.size:
        raise IrregularGridError(
            "Raster rows do not form a complete grid",
            filename=filename,
            expected=f"{lats.size * lons.size} cells",
            got=f"{len(values)} rows",
        )
    rows = np.searchsorted(lats, values["lat"].to_numpy())
    cols = np.searchsorted(lons, values["lon"].to_numpy())
    if np.unique(rows * lons.size + cols).size != len(values):
        raise IrregularGridError("Duplicate raster cells", filename=filename)

    density = np.zeros((lats.size, lons.size))
    density[rows, cols] = values["density"].to_numpy()
    return PopulationRaster(lats, lons, density, dlat, dlon)


def _load_ascii_grid(path: Path) -> PopulationRaster:
    filename = path.name
    header: Dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as file:
        lines = file.read().splitlines()

    body_start = 0
    for line_num, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0][0].isalpha():
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError:
                raise InputFormatError(
                    f"Invalid header value for {parts[0]}",
                    filename=filename,
                    line_number=line_num + 1,
                )
            body_start = line_num + 1
        else:
            break

    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise InputFormatError(
                f"Missing ESRI ASCII header field {key}", filename=filename
            )
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    cellsize = header["cellsize"]
    if "xllcenter" in header:
        west_centre = header["xllcenter"]
    elif "xllcorner" in header:
        west_centre = header["xllcorner"] + cellsize / 2
    else:
        raise InputFormatError("Missing xllcorner/xllcenter", filename=filename)
    if "yllcenter" in header:
        south_centre = header["yllcenter"]
    elif "yllcorner" in header:
        south_centre = header["yllcorner"] + cellsize / 2
    else:
        raise InputFormatError("Missing yllcorner/yllcenter", filename=filename)

    rows = []
    for offset, line in enumerate(lines[body_start:]):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split()]
        except ValueError:
            raise InputFormatError(
                "Non-numeric raster value",
                filename=filename,
                line_number=body_start + offset + 1,
            )
        if len(row) != ncols:
            raise IrregularGridError(
                "Wrong number of columns",
                filename=filename,
                line_number=body_start + offset + 1,
                expected=str(ncols),
                got=str(len(row)),
            )
        rows.append(row)
    if len(rows) != nrows:
        raise IrregularGridError(
            "Wrong number of rows",
            filename=filename,
            expected=str(nrows),
            got=str(len(rows)),
        )

    # ESRI grids list the northernmost row first
    density = np.flipud(np.array(rows, dtype=float))
    nodata = header.get("nodata_value")
    if nodata is not None:
        missing = density == nodata
        if missing.any():
            logger.warning(f"{filename}: {int(missing.sum())} NODATA cells read as 0")
        density[missing] = 0.0
    if np.any(density < 0):
        raise InputFormatError("Negative population density", filename=filename)

    lats = south_centre + cellsize * np.arange(nrows)
    lons = west_centre + cellsize * np.arange(ncols)
    return PopulationRaster(lats, lons, density, cellsize, cellsize)


def _is_ascii_grid(path: Path) -> bool:
    if path.suffix.lower() == ".asc":
        return True
    with open(path, "r", encoding="utf-8") as file:
        return file.readline().strip().lower().startswith("ncols")


def load_raster(path: PathLike, cell_deg: Optional[float] = None) -> PopulationRaster:
    """
    Load a `lat,lon,density` CSV or an ESRI ASCII grid.

    A CSV takes its cell size from `cell_deg`, then from a leading
    `# cellsize=` comment, then from the coordinate spacing.
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError("Raster file not found", filename=str(path))
    if cell_deg is not None and cell_deg <= 0:
        raise InvalidArgumentError(f"Cell size must be positive, got {cell_deg}")
    if _is_ascii_grid(path):
        raster = _load_ascii_grid(path)
    else:
        raster = _load_csv_raster(path, cell_deg)
    logger.info(
        f"Loaded raster {path.name}: {raster.shape[0]}x{raster.shape[1]} cells, "
        f"{raster.total_population:,.0f} persons"
    )
    return raster


def write_raster(raster: PopulationRaster, path: PathLike) -> Path:
    """Write a raster as CSV, or as ESRI ASCII grid for a `.asc` suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = f"{{:.{COORDINATE_DECIMALS}f}}"

    if path.suffix.lower() == ".asc":
        if not np.isclose(raster.cell_size_lat, raster.cell_size_lon):
            raise InvalidArgumentError("ESRI ASCII grids need square cells")
        lines = [
            f"ncols {raster.shape[1]}",
            f"nrows {raster.shape[0]}",
            f"xllcenter {fmt.format(raster.longitudes[0])}",
            f"yllcenter {fmt.format(raster.latitudes[0])}",
            f"cellsize {float(raster.cell_size_lat)!r}",
        ]
        for row in np.flipud(raster.density):
            lines.append(" ".join(repr(float(v)) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    lat, lon = raster.cell_centres()
    frame = pd.DataFrame(
        {
            "lat": [fmt.format(v) for v in lat.ravel()],
            "lon": [fmt.format(v) for v in lon.ravel()],
            "density": raster.density.ravel(),
        }
    )
    size_lat, size_lon = float(raster.cell_size_lat), float(raster.cell_size_lon)
    if np.isclose(size_lat, size_lon):
        header = f"# cellsize={size_lat!r}\n"
    else:
        header = f"# cellsize={size_lat!r} {size_lon!r}\n"
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(header)
        frame.to_csv(file, index=False, lineterminator="\n")
    return path


def load_towers(path: PathLike) -> List[TowerSite]:
    """Load towers from a CSV with columns id,lat,lon,kind,height_m."""
    path = Path(path)
    filename = path.name
    if not path.exists():
        raise InputFormatError("Tower file not found", filename=str(path))
    frame = pd.read_csv(path, comment="#", dtype=str, skipinitialspace=True)

    expected = ["id", "lat", "lon", "kind", "height_m"]
    if list(frame.columns[:4]) != expected[:4]:
        raise InputFormatError(
            "Unexpected tower columns",
            filename=filename,
            expected=",".join(expected),
            got=",".join(frame.columns),
        )

    sites = []
    for row_num, row in enumerate(frame.itertuples(index=False), 2):
        try:
            height = getattr(row, "height_m", None)
            sites.append(
                TowerSite(
                    id=str(row.id).strip(),
                    latitude=float(row.lat),
                    longitude=float(row.lon),
                    kind=str(row.kind).strip(),
                    height_m=float(height) if height and not pd.isna(height) else None,
                )
            )
        except (ValueError, TypeError, InvalidConfigError) as e:
            raise InputFormatError(
                f"Invalid tower record: {e}", filename=filename, line_number=row_num
            ) from e
    logger.info(f"Loaded {len(sites)} towers from {filename}")
    return sites


# ==============================================================================
# COVERAGE
# ==============================================================================


def _require_radius(site: TowerSite) -> float:
    if site.coverage_radius_km is None:
        raise MissingRadiusError(site.id, site.kind)
    return site.coverage_radius_km


def covered_mask(raster: PopulationRaster, sites: Iterable[TowerSite]) -> np.ndarray:
    """Cells whose centre lies inside the union of the site disks."""
    lat, lon = raster.cell_centres()
    mask = np.zeros(raster.shape, dtype=bool)
    for site in sites:
        radius = _require_radius(site)
        if not raster.contains(site.latitude, site.longitude):
            logger.warning(f"Site {site.id} lies outside the raster bounds")
        mask |= haversine((lat, lon), (site.latitude, site.longitude)) <= radius
    return mask


def covered_population(raster: PopulationRaster, sites: Sequence[TowerSite]) -> float:
    """Persons living in cells covered by at least one site."""
    if not sites:
        logger.warning("No sites given; covered population is 0")
        return 0.0
    return float(raster.persons[covered_mask(raster, sites)].sum())


@dataclass
class SiteCoverage:
    id: str
    kind: str
    radius_km: float
    covered_persons: float
    active_users_low: float
    active_users_high: float
    active_users_early_adoption: float


@dataclass
class ScenarioReport:
    """
    Covered persons per site class and as a share of the total population.

    Percentages are always 100 * count / total_population.
    """

    total_population: float
    covered_by_class: Dict[str, float]
    covered_legacy: float
    covered_high_towers: float
    covered_combined: float
    sites: List[SiteCoverage] = field(default_factory=list)
    params: ScenarioParams = field(default_factory=ScenarioParams)

    def __post_init__(self):
        if not self.total_population > 0:
            raise UndefinedPercentageError(self.total_population)

    @property
    def tv_incremental(self) -> float:
        """Persons covered by high towers on top of the legacy network."""
        return self.covered_combined - self.covered_legacy

    def percent(self, count: float) -> float:
        return 100.0 * count / self.total_population

    @property
    def percent_legacy(self) -> float:
        return self.percent(self.covered_legacy)

    @property
    def percent_high_towers(self) -> float:
        return self.percent(self.covered_high_towers)

    @property
    def percent_combined(self) -> float:
        return self.percent(self.covered_combined)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "total_population": self.total_population,
            "covered_by_class": dict(sorted(self.covered_by_class.items())),
            "covered_legacy": self.covered_legacy,
            "covered_high_towers": self.covered_high_towers,
            "covered_combined": self.covered_combined,
            "tv_incremental": self.tv_incremental,
            "percent_legacy": self.percent_legacy,
            "percent_high_towers": self.percent_high_towers,
            "percent_combined": self.percent_combined,
            "scenario": {
                "active_fraction_low": self.params.active_fraction_low,
                "active_fraction_high": self.params.active_fraction_high,
                "adoption_rate": self.params.adoption_rate,
                "active_share_of_subscribers": self.params.active_share_of_subscribers,
                "early_adoption_fraction": self.params.early_adoption_fraction,
            },
            "sites": [vars(site) for site in self.sites],
        }


def scenario_report(
    raster: PopulationRaster,
    sites: Sequence[TowerSite],
    params: Optional[ScenarioParams] = None,
    total_population: Optional[float] = None,
) -> ScenarioReport:
    """Covered-population report for legacy sites, high towers and both."""
    params = params or ScenarioParams()
    total = raster.total_population if total_population is None else total_population
    if not total > 0:
        raise UndefinedPercentageError(total)

    by_class: Dict[str, List[TowerSite]] = {}
    for site in sites:
        by_class.setdefault(site.site_class, []).append(site)

    legacy = by_class.get("legacy", [])
    high = [site for site in sites if site.site_class != "legacy"]

    site_rows = []
    for site in sites:
        persons = covered_population(raster, [site])
        site_rows.append(
            SiteCoverage(
                id=site.id,
                kind=site.kind,
                radius_km=_require_radius(site),
                covered_persons=persons,
                active_users_low=persons * params.active_fraction_low,
                active_users_high=persons * params.active_fraction_high,
                active_users_early_adoption=persons * params.early_adoption_fraction,
            )
        )

    return ScenarioReport(
        total_population=float(total),
        covered_by_class={
            name: covered_population(raster, members)
            for name, members in by_class.items()
        },
        covered_legacy=covered_population(raster, legacy) if legacy else 0.0,
        covered_high_towers=covered_population(raster, high) if high else 0.0,
        covered_combined=covered_population(raster, list(sites)),
        sites=site_rows,
        params=params,
    )


@dataclass(frozen=True)
class RadiusAssignment:
    site: TowerSite
    num_users: int
    active_users: float
    overloaded: bool


def assign_load_radii(
    raster: PopulationRaster,
    sites: Sequence[TowerSite],
    radius_table: Mapping[str, Mapping[int, float]],
    active_fraction: float,
) -> List[RadiusAssignment]:
    """
    Give each site the largest tabulated radius whose load it can carry.

    `radius_table[site_type][K]` is the coverage distance for K active users.
    Radii are tried from the smallest K upward; a site whose expected active
    users (covered persons x active fraction) fit within K takes that
    radius. Sites that fit nowhere get the largest-K radius and are flagged.
    """
    assignments = []
    for site in sites:
        options = sorted(radius_table.get(site.coverage_site_type, {}).items())
        if not options:
            raise MissingRadiusError(site.id, site.kind)

        chosen = None
        for num_users, radius in options:
            candidate = site.with_radius(radius)
            active = covered_population(raster, [candidate]) * active_fraction
            if active <= num_users:
                chosen = RadiusAssignment(candidate, num_users, active, False)
                break
        if chosen is None:
            logger.warning(
                f"Site {site.id} exceeds {options[-1][0]} active users at every radius"
            )
            chosen = RadiusAssignment(candidate, num_users, active, True)
        assignments.append(chosen)
    return assignments


# ==============================================================================
# RELOCATION
# ==============================================================================


def _unit_vectors(lat, lon) -> np.ndarray:
    phi = np.deg2rad(np.asarray(lat, dtype=float))
    lam = np.deg2rad(np.asarray(lon, dtype=float))
    return np.column_stack(
        [np.cos(phi) * np.cos(lam), np.cos(phi) * np.sin(lam), np.sin(phi)]
    )


def greedy_relocate(
    raster: PopulationRaster,
    n_towers: int,
    radius_km: float,
    candidate_grid: Optional[Sequence[Tuple[float, float]]] = None,
    existing_sites: Sequence[TowerSite] = (),
) -> List[TowerSite]:
    """
    Place towers one at a time where they add the most covered persons.

    Candidates default to the raster cell centres. Cells already covered by
    `existing_sites` bring no gain. Ties go to the lexicographically smallest
    (lat, lon) candidate.
    """
    if n_towers < 1:
        raise InvalidArgumentError(f"n_towers must be >= 1, got {n_towers}")
    if radius_km < 0:
        raise InvalidArgumentError(f"Radius cannot be negative, got {radius_km}")

    if candidate_grid is None:
        lat, lon = raster.cell_centres()
        candidates = np.column_stack([lat.ravel(), lon.ravel()])
    else:
        candidates = np.asarray(candidate_grid, dtype=float).reshape(-1, 2)
    if candidates.shape[0] == 0:
        raise EmptyCandidateGridError()
    candidates = candidates[np.lexsort((candidates[:, 1], candidates[:, 0]))]

    cell_lat, cell_lon = raster.cell_centres()
    cell_lat, cell_lon = cell_lat.ravel(), cell_lon.ravel()
    weights = raster.persons.ravel()
    covered = (
        covered_mask(raster, existing_sites).ravel()
        if existing_sites
        else np.zeros(weights.size, dtype=bool)
    )

    # Chord search on the unit sphere, then the exact haversine rule
    tree = cKDTree(_unit_vectors(cell_lat, cell_lon))
    chord = 2 * np.sin(min(radius_km / EARTH_RADIUS_KM, np.pi) / 2) * (1 + 1e-9)
    balls = []
    for c_lat, c_lon in candidates:
        near = np.asarray(
            tree.query_ball_point(_unit_vectors([c_lat], [c_lon])[0], chord + 1e-12),
            dtype=int,
        )
        distance = haversine((cell_lat[near], cell_lon[near]), (c_lat, c_lon))
        inside = distance <= radius_km
        balls.append(near[np.atleast_1d(inside)])

    placements = []
    for number in range(1, n_towers + 1):
        gains = np.array([weights[ball][~covered[ball]].sum() for ball in balls])
        best = int(np.argmax(gains))
        covered[balls[best]] = True
        placements.append(
            TowerSite(
                id=f"relocated-{number}",
                latitude=float(candidates[best, 0]),
                longitude=float(candidates[best, 1]),
                kind="candidate",
                coverage_radius_km=float(radius_km),
            )
        )
        logger.info(
            f"Placed tower {number} at ({candidates[best, 0]:.6f}, "
            f"{candidates[best, 1]:.6f}) adding {gains[best]:,.0f} persons"
        )
    return placements


# ==============================================================================
# SYNTHETIC DATA AND EXPORT
# ==============================================================================


def synthetic_raster(
    south: float,
    west: float,
    north: float,
    east: float,
    cell_deg: float,
    n_settlements: int = 8,
    background_density: float = 5.0,
    peak_density: Tuple[float, float] = (50.0, 400.0),
    spread_km: Tuple[float, float] = (2.0, 8.0),
    seed: int = 0,
) -> PopulationRaster:
    """
    Clustered rural population: Gaussian settlements over a flat background.

    Settlement centres, peaks and spreads are drawn uniformly from the given
    ranges with a seeded generator.
    """
    rng = np.random.default_rng(seed)
    lats = np.arange(south + cell_deg / 2, north, cell_deg)
    lons = np.arange(west + cell_deg / 2, east, cell_deg)
    lat, lon = np.meshgrid(lats, lons, indexing="ij")

    density = np.full(lat.shape, float(background_density))
    for _ in range(n_settlements):
        centre = (rng.uniform(south, north), rng.uniform(west, east))
        peak = rng.uniform(*peak_density)
        sigma = rng.uniform(*spread_km)
        distance = haversine((lat, lon), centre)
        density += peak * np.exp(-(distance**2) / (2 * sigma**2))

    return PopulationRaster(
        np.round(lats, COORDINATE_DECIMALS),
        np.round(lons, COORDINATE_DECIMALS),
        density,
        cell_deg,
        cell_deg,
    )


def circle_polygon(site: TowerSite, radius_km: float, segments: int = CIRCLE_SEGMENTS):
    bearings = np.linspace(0.0, 360.0, segments, endpoint=False)
    lat, lon = destination(site.latitude, site.longitude, bearings, radius_km)
    ring = [
        [round(float(x), COORDINATE_DECIMALS), round(float(y), COORDINATE_DECIMALS)]
        for x, y in zip(lon, lat)
    ]
    ring.append(ring[0])
    return geojson.Polygon([ring])


def export_geojson(
    sites: Sequence[TowerSite],
    radii: Optional[Mapping[str, float]] = None,
    path: Optional[PathLike] = None,
    segments: int = CIRCLE_SEGMENTS,
    **extra: Any,
) -> geojson.FeatureCollection:
    """
    Coverage circles as a GeoJSON FeatureCollection, one polygon per site.

    `radii` maps site id to radius in km and overrides the radius carried
    by the site. Extra keyword arguments become top-level members.
    """
    radii = radii or {}
    features = []
    for site in sites:
        radius = radii.get(site.id, site.coverage_radius_km)
        if radius is None:
            raise MissingRadiusError(site.id, site.kind)
        features.append(
            geojson.Feature(
                geometry=circle_polygon(site, radius, segments),
                properties={"id": site.id, "kind": site.kind, "radius_km": radius},
            )
        )
    collection = geojson.FeatureCollection(features, **extra)

    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            geojson.dump(collection, file, sort_keys=True, indent=2)
            file.write("\n")
        logger.info(f"Wrote {len(features)} coverage circles to {path}")
    return collection
