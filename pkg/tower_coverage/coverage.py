"""
Monte-Carlo coverage distance estimation.

A distance is covered when at least `satisfaction_threshold` of the user
instances dropped on the disk of that radius reach the target rate. User
instances are pooled across all trials of a distance. Every trial draws
from its own seed derived from (master seed, distance index, trial index),
so results do not depend on evaluation order or worker count.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from itertools import repeat
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import norm

from .array import ArrayConfig
from .channel import (
    SITE_PRESETS,
    ChannelProfile,
    FadingParams,
    RadioConfig,
    SiteConfig,
    drop_users,
    generate_channel,
    noise_power,
)
from .exceptions import InvalidConfigError, TowerCoverageError
from .mimo import effective_gains, maxmin_power, rzf_precode, user_rates

logger = logging.getLogger("tower_coverage")

SITE_ORDER = {"legacy": 0, "high_tower": 1}

TABLE_COLUMNS = ["type", "K", "fc", "duplex", "B", "dcov_single", "dcov_dual"]


@dataclass(frozen=True)
class CoverageQuery:
    site_type: str
    site: SiteConfig
    radio: RadioConfig
    num_users: int
    fading: Optional[FadingParams] = None
    trials: int = 100
    satisfaction_threshold: float = 0.95
    distance_grid_km: float = 0.1
    max_distance_km: float = 100.0
    master_seed: int = 0
    rx_height_m: float = 8.0

    def __post_init__(self):
        if not 0 < self.satisfaction_threshold < 1:
            raise InvalidConfigError(
                f"Threshold must lie in (0, 1), got {self.satisfaction_threshold}"
            )
        if self.trials < 1:
            raise InvalidConfigError(f"At least one trial required, got {self.trials}")
        if self.num_users < 1:
            raise InvalidConfigError(
                f"At least one user required, got {self.num_users}"
            )
        if self.distance_grid_km <= 0 or self.max_distance_km < self.distance_grid_km:
            raise InvalidConfigError(
                f"Invalid distance grid {self.distance_grid_km} km "
                f"up to {self.max_distance_km} km"
            )
        if self.fading is None:
            object.__setattr__(
                self, "fading", FadingParams.for_scenario(self.site.scenario)
            )

    @property
    def polarizations(self) -> int:
        return self.site.array.polarizations

    def describe(self) -> str:
        return (
            f"{self.site_type} K={self.num_users} "
            f"fc={self.radio.carrier_frequency / 1e6:.0f} MHz "
            f"pol={self.polarizations}"
        )


@dataclass(frozen=True)
class CurvePoint:
    distance_km: float
    satisfied_fraction: float
    half_width: float
    satisfied: int
    samples: int


@dataclass
class CoverageResult:
    d_cov_km: float
    curve: List[CurvePoint] = field(default_factory=list)
    diagnostic: Optional[str] = None


@dataclass
class CoverageRow:
    """One evaluated configuration; `error` is set when the row failed."""

    site_type: str
    num_users: int
    carrier_mhz: int
    duplex: str
    bandwidth_mhz: float
    polarizations: int
    d_cov_km: Optional[float] = None
    curve: List[CurvePoint] = field(default_factory=list)
    diagnostic: Optional[str] = None
    error: Optional[str] = None
    exit_code: int = 0

    def as_dict(self) -> Dict[str, Any]:
        return {
            "type": self.site_type,
            "K": self.num_users,
            "fc": self.carrier_mhz,
            "duplex": self.duplex,
            "B": self.bandwidth_mhz,
            "polarizations": self.polarizations,
            "d_cov_km": self.d_cov_km,
            "diagnostic": self.diagnostic,
            "error": self.error,
            "curve": [
                {
                    "distance_km": point.distance_km,
                    "satisfied_fraction": point.satisfied_fraction,
                    "half_width": point.half_width,
                    "satisfied": point.satisfied,
                    "samples": point.samples,
                }
                for point in self.curve
            ],
        }


def wilson_half_width(successes: int, n: int, confidence: float = 0.95) -> float:
    """Half-width of the Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0
    z = norm.ppf(0.5 + confidence / 2)
    p_hat = successes / n
    denominator = 1 + z**2 / n
    spread = np.sqrt(p_hat * (1 - p_hat) / n + z**2 / (4 * n**2))
    return float(z * spread / denominator)


def trial_seed(master_seed: int, distance_index: int, trial_index: int):
    return np.random.SeedSequence(
        entropy=master_seed, spawn_key=(distance_index, trial_index)
    )


def simulate_trial(
    query: CoverageQuery, distance_km: float, distance_index: int, trial_index: int
) -> int:
    """Number of users of one drop that reach the target rate."""
    rng = np.random.default_rng(
        trial_seed(query.master_seed, distance_index, trial_index)
    )
    drop = drop_users(
        query.num_users, distance_km * 1000.0, rng, rx_height_m=query.rx_height_m
    )
    channel = generate_channel(query.site, query.radio, drop, query.fading, rng)

    noise = noise_power(query.radio)
    total_power = query.site.tx_power_w
    precoder = rzf_precode(channel, noise, total_power)
    gains = effective_gains(channel, precoder)
    allocation = maxmin_power(gains, noise, total_power)
    report = user_rates(allocation, gains, query.radio, noise)
    return int(np.count_nonzero(report.rate_bps >= query.radio.target_rate_bps))


def _distance_index(query: CoverageQuery, distance_km: float) -> int:
    return int(round(distance_km / query.distance_grid_km))


def sample_distance(
    query: CoverageQuery, distance_km: float, executor: Optional[Executor] = None
) -> CurvePoint:
    """Pooled satisfaction statistics over `trials` drops at one radius."""
    index = _distance_index(query, distance_km)
    trials = range(query.trials)
    if executor is None:
        counts = [simulate_trial(query, distance_km, index, t) for t in trials]
    else:
        counts = list(
            executor.map(
                simulate_trial,
                repeat(query),
                repeat(distance_km),
                repeat(index),
                trials,
            )
        )

    satisfied = int(sum(counts))
    samples = query.trials * query.num_users
    fraction = satisfied / samples
    logger.debug(f"{query.describe()} d={distance_km:.1f} km: {fraction:.4f}")
    return CurvePoint(
        distance_km=round(distance_km, 6),
        satisfied_fraction=fraction,
        half_width=wilson_half_width(satisfied, samples),
        satisfied=satisfied,
        samples=samples,
    )


def evaluate_distance(
    query: CoverageQuery, d: float, executor: Optional[Executor] = None
) -> float:
    """Fraction of user instances reaching the target rate at radius d (km)."""
    return sample_distance(query, d, executor).satisfied_fraction


def coverage_distance(
    query: CoverageQuery, executor: Optional[Executor] = None
) -> CoverageResult:
    """
    Largest grid distance whose satisfied fraction meets the threshold.

    Doubles the radius from the first grid point until the threshold fails,
    then bisects on grid indices between the last passing and first failing
    radius.
    """
    grid = query.distance_grid_km
    max_index = int(np.floor(query.max_distance_km / grid + 1e-9))
    evaluated: Dict[int, CurvePoint] = {}

    def passes(index: int) -> bool:
        if index not in evaluated:
            evaluated[index] = sample_distance(query, index * grid, executor)
        return evaluated[index].satisfied_fraction >= query.satisfaction_threshold

    def result(last_pass: int, diagnostic: Optional[str] = None) -> CoverageResult:
        curve = [evaluated[i] for i in sorted(evaluated)]
        return CoverageResult(
            d_cov_km=round(last_pass * grid, 6), curve=curve, diagnostic=diagnostic
        )

    if not passes(1):
        diagnostic = (
            f"Threshold {query.satisfaction_threshold} unmet at the first grid "
            f"distance {grid} km"
        )
        logger.warning(f"{query.describe()}: {diagnostic}")
        return result(0, diagnostic)

    low, high = 1, 2
    while high <= max_index and passes(high):
        low, high = high, high * 2

    if high > max_index:
        if passes(max_index):
            diagnostic = f"Coverage reaches the search limit {query.max_distance_km} km"
            logger.warning(f"{query.describe()}: {diagnostic}")
            return result(max_index, diagnostic)
        high = max_index

    while high - low > 1:
        middle = (low + high) // 2
        if passes(middle):
            low = middle
        else:
            high = middle

    logger.info(f"{query.describe()}: d_cov = {low * grid:.1f} km")
    return result(low)


def table_queries(
    site_types: Iterable[str] = ("legacy", "high_tower"),
    users: Iterable[int] = (20, 50, 100),
    carriers_mhz: Iterable[int] = (700, 1800, 3500),
    polarizations: Iterable[int] = (1, 2),
    array: Optional[ArrayConfig] = None,
    site_overrides: Optional[Dict[str, Dict[str, Any]]] = None,
    radio_overrides: Optional[Dict[str, Any]] = None,
    fading_overrides: Optional[Dict[str, Dict[str, Any]]] = None,
    profile: ChannelProfile = ChannelProfile.CALIBRATED,
    **query_options: Any,
) -> List[CoverageQuery]:
    """
    Queries for the site x K x carrier x polarization coverage sweep.

    The channel profile fills radio and fading fields that the overrides
    leave out.
    """
    array = array or ArrayConfig()
    site_overrides = site_overrides or {}
    radio_overrides = radio_overrides or {}
    fading_overrides = fading_overrides or {}

    queries = []
    for site_type in site_types:
        if site_type not in SITE_PRESETS:
            raise InvalidConfigError(
                f"Unknown site type {site_type} (known: {sorted(SITE_PRESETS)})"
            )
        base_site = replace(
            SITE_PRESETS[site_type], **site_overrides.get(site_type, {})
        )
        fading = FadingParams.for_scenario(
            base_site.scenario, profile, **fading_overrides.get(site_type, {})
        )
        for carrier in carriers_mhz:
            radio = RadioConfig.for_carrier(carrier, profile, **radio_overrides)
            for pol in polarizations:
                site = replace(base_site, array=replace(array, polarizations=pol))
                for num_users in users:
                    queries.append(
                        CoverageQuery(
                            site_type=site_type,
                            site=site,
                            radio=radio,
                            num_users=num_users,
                            fading=fading,
                            **query_options,
                        )
                    )
    return queries


def _row_key(row: CoverageRow):
    return (
        SITE_ORDER.get(row.site_type, len(SITE_ORDER)),
        row.carrier_mhz,
        row.num_users,
        row.polarizations,
    )


def coverage_table(
    queries: Sequence[CoverageQuery], executor: Optional[Executor] = None
) -> List[CoverageRow]:
    """
    Coverage distance for every query, sorted by (type, f_c, K).

    A failing query yields a row carrying the error; remaining queries still
    run.
    """
    if not queries:
        raise InvalidConfigError("Coverage table needs at least one query")

    rows = []
    for query in queries:
        row = CoverageRow(
            site_type=query.site_type,
            num_users=query.num_users,
            carrier_mhz=int(round(query.radio.carrier_frequency / 1e6)),
            duplex=str(query.radio.duplex.value),
            bandwidth_mhz=query.radio.bandwidth / 1e6,
            polarizations=query.polarizations,
        )
        try:
            result = coverage_distance(query, executor)
            row.d_cov_km = result.d_cov_km
            row.curve = result.curve
            row.diagnostic = result.diagnostic
        except TowerCoverageError as e:
            logger.error(f"Coverage failed for {query.describe()}: {str(e)}")
            row.error = str(e)
            row.exit_code = e.exit_code
        rows.append(row)

    return sorted(rows, key=_row_key)


def pivot_rows(rows: Sequence[CoverageRow]) -> pd.DataFrame:
    """Fold single/dual polarization rows into one line per (type, K, f_c)."""
    lines: Dict[tuple, Dict[str, Any]] = {}
    for row in sorted(rows, key=_row_key):
        key = (row.site_type, row.num_users, row.carrier_mhz)
        line = lines.setdefault(
            key,
            {
                "type": row.site_type,
                "K": row.num_users,
                "fc": row.carrier_mhz,
                "duplex": row.duplex,
                "B": row.bandwidth_mhz,
                "dcov_single": None,
                "dcov_dual": None,
            },
        )
        column = "dcov_dual" if row.polarizations == 2 else "dcov_single"
        line[column] = row.d_cov_km
    return pd.DataFrame(list(lines.values()), columns=TABLE_COLUMNS)
