"""
Run configuration resolution.

Precedence: command-line flags > config document > Django settings >
built-in defaults. The resolved document, minus the runtime-only keys
`jobs` and `out_dir`, is what every artifact echoes.
"""

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd
from django.conf import settings

from .array import ArrayConfig
from .channel import FadingParams, RadioConfig, Scenario, SiteConfig
from .coverage import CoverageQuery, table_queries
from .exceptions import InputFormatError, InvalidConfigError
from .geo import ScenarioParams, TowerSite
from .serializers import RunConfigSerializer
from .utils import canonical_json

logger = logging.getLogger("tower_coverage")


@dataclass
class ResolvedConfig:
    config: Dict[str, Any]
    jobs: int
    out_dir: Path

    @property
    def seed(self) -> int:
        return self.config["seed"]

    def section(self, name: str) -> Dict[str, Any]:
        return self.config[name]


def load_config_document(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as file:
            document = json.load(file)
    except FileNotFoundError:
        raise InvalidConfigError("Config file not found", filename=str(path))
    except json.JSONDecodeError as e:
        raise InvalidConfigError(
            f"Invalid JSON: {e.msg}", filename=str(path), line_number=e.lineno
        )
    if not isinstance(document, dict):
        raise InvalidConfigError(
            "Config document must be a JSON object", filename=str(path)
        )
    return document


def _set_path(document: Dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = document
    for key in parents:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise InvalidConfigError(f"Config key {key} must be an object")
        node = child
    node[leaf] = value


def resolve_run_config(
    document: Optional[Mapping[str, Any]] = None,
    flags: Optional[Mapping[str, Any]] = None,
) -> ResolvedConfig:
    """
    Validate a run document with flag overrides applied.

    `flags` maps dotted config paths (e.g. "geo.relocate.n_towers") to
    values; None values are ignored.
    """
    merged = copy.deepcopy(dict(document or {}))
    for dotted, value in (flags or {}).items():
        if value is not None:
            _set_path(merged, dotted, value)

    merged.setdefault("seed", settings.TOWER_COVERAGE_SEED)
    merged.setdefault("jobs", settings.TOWER_COVERAGE_JOBS)
    merged.setdefault("out_dir", str(settings.TOWER_COVERAGE_OUTPUT_DIR))

    serializer = RunConfigSerializer(data=merged)
    if not serializer.is_valid():
        raise InvalidConfigError(
            f"Invalid run config: {canonical_json(serializer.errors, indent=None)}"
        )

    # Plain dicts and lists only, so the document hashes and echoes canonically
    config = json.loads(canonical_json(serializer.validated_data, indent=None))
    jobs = config.pop("jobs")
    out_dir = Path(config.pop("out_dir"))
    return ResolvedConfig(config=config, jobs=jobs, out_dir=out_dir)


# ==============================================================================
# DOMAIN OBJECTS
# ==============================================================================


def array_config(config: Dict[str, Any], polarizations: int = 1) -> ArrayConfig:
    array = config["array"]
    return ArrayConfig(
        m_h=array["m_h"],
        m_v=array["m_v"],
        polarizations=polarizations,
        spacing=array["spacing"],
    )


def site_config(
    config: Dict[str, Any], site_type: str, polarizations: int = 1
) -> SiteConfig:
    site = config["sites"][site_type]
    return SiteConfig(
        tx_height_m=site["tx_height_m"],
        tx_power_w=site["tx_power_w"],
        scenario=Scenario(site["scenario"]),
        array=array_config(config, polarizations),
    )


def radio_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
    radio = config["radio"]
    return {
        "cp_overhead": radio["cp_overhead"],
        "noise_figure_db": radio["noise_figure_db"],
        "target_rate_bps": radio["target_rate_mbps"] * 1e6,
    }


def radio_config(config: Dict[str, Any], carrier_mhz: int) -> RadioConfig:
    return RadioConfig.for_carrier(carrier_mhz, **radio_overrides(config))


def fading_params(config: Dict[str, Any], site_type: str) -> FadingParams:
    return FadingParams(**config["fading"][site_type])


def coverage_queries(config: Dict[str, Any]) -> List[CoverageQuery]:
    """Queries of the configured sweep."""
    sweep = config["sweep"]
    return table_queries(
        site_types=sweep["site_types"],
        users=sweep["users"],
        carriers_mhz=sweep["carriers_mhz"],
        polarizations=sweep["polarizations"],
        array=array_config(config),
        site_overrides={
            site_type: {
                "tx_height_m": site["tx_height_m"],
                "tx_power_w": site["tx_power_w"],
                "scenario": Scenario(site["scenario"]),
            }
            for site_type, site in config["sites"].items()
        },
        radio_overrides=radio_overrides(config),
        fading_overrides=config["fading"],
        master_seed=config["seed"],
        **config["coverage"],
    )


def scenario_params(config: Dict[str, Any]) -> ScenarioParams:
    return ScenarioParams(**config["geo"]["scenario"])


# ==============================================================================
# COVERAGE RADII
# ==============================================================================

COVERAGE_FRAME_COLUMNS = [
    "site_type",
    "num_users",
    "carrier_mhz",
    "polarizations",
    "d_cov_km",
]


def load_coverage_csv(path: str) -> pd.DataFrame:
    """Read a coverage table CSV into one row per polarization."""
    try:
        table = pd.read_csv(path, comment="#")
    except FileNotFoundError:
        raise InputFormatError("Coverage table not found", filename=str(path))
    expected = {"type", "K", "fc", "dcov_single", "dcov_dual"}
    if not expected <= set(table.columns):
        raise InputFormatError(
            "Not a coverage table",
            filename=str(path),
            expected=",".join(sorted(expected)),
            got=",".join(table.columns),
        )
    frame = table.melt(
        id_vars=["type", "K", "fc"],
        value_vars=["dcov_single", "dcov_dual"],
        var_name="polarizations",
        value_name="d_cov_km",
    )
    frame["polarizations"] = frame["polarizations"].map(
        {"dcov_single": 1, "dcov_dual": 2}
    )
    frame = frame.rename(
        columns={"type": "site_type", "K": "num_users", "fc": "carrier_mhz"}
    )
    return frame[COVERAGE_FRAME_COLUMNS]


def coverage_frame_from_run(run_id: int) -> pd.DataFrame:
    from .models import SimulationRun

    try:
        run = SimulationRun.objects.get(pk=run_id, command="coverage_table")
    except SimulationRun.DoesNotExist:
        raise InvalidConfigError(f"No coverage_table run with id {run_id}")
    records = run.coverage_records.values(*COVERAGE_FRAME_COLUMNS)
    return pd.DataFrame(list(records), columns=COVERAGE_FRAME_COLUMNS)


def radius_table(
    frame: pd.DataFrame, carrier_mhz: int, polarizations: int
) -> Dict[str, Dict[int, float]]:
    """{site_type: {K: d_cov_km}} for one carrier and polarization."""
    selected = frame[
        (frame["carrier_mhz"] == carrier_mhz)
        & (frame["polarizations"] == polarizations)
        & frame["d_cov_km"].notna()
    ]
    table: Dict[str, Dict[int, float]] = {}
    for row in selected.itertuples(index=False):
        table.setdefault(row.site_type, {})[int(row.num_users)] = float(row.d_cov_km)
    return table


def coverage_radius_table(config: Dict[str, Any]) -> Dict[str, Dict[int, float]]:
    geo = config["geo"]
    if geo["coverage_run"] is not None:
        frame = coverage_frame_from_run(geo["coverage_run"])
    elif geo["coverage_csv"]:
        frame = load_coverage_csv(geo["coverage_csv"])
    else:
        return {}
    return radius_table(frame, geo["carrier_mhz"], geo["polarizations"])


def assign_radii(
    config: Dict[str, Any],
    sites: Sequence[TowerSite],
    table: Mapping[str, Mapping[int, float]],
) -> List[TowerSite]:
    """
    Fixed radii per site: a configured class radius wins, otherwise the
    coverage distance for the configured K. Sites with neither keep None.
    """
    geo = config["geo"]
    assigned = []
    for site in sites:
        radius = geo["radii"].get(site.site_class)
        if radius is None:
            radius = table.get(site.coverage_site_type, {}).get(geo["num_users"])
        assigned.append(site if radius is None else site.with_radius(radius))
    return assigned
