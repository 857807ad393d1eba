"""
Downlink channel generation for rural macro sites.

Large-scale gains follow the 3GPP TR 38.901 RMa LoS/NLoS pathloss and
log-normal shadowing. Small-scale fading is a flat, clustered,
geometry-based model: each user sees a specular component along its
line-of-sight direction plus a set of diffuse clusters spread around it,
projected onto the array through the steering vectors so that the spatial
correlation of the cylindrical array is preserved.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.constants import speed_of_light

from .array import ArrayConfig, build_geometry, steering_matrix
from .exceptions import InvalidConfigError, InvalidDropError, OutOfRangeError
from .utils import write_csv_artifact

logger = logging.getLogger("tower_coverage")

MIN_DROP_DISTANCE_M = 35.0
MIN_PATHLOSS_DISTANCE_M = 10.0
AVERAGE_BUILDING_HEIGHT_M = 5.0
STREET_WIDTH_M = 20.0
THERMAL_NOISE_DBM_PER_HZ = -174.0
DEFAULT_RX_HEIGHT_M = 8.0
DEFAULT_NOISE_FIGURE_DB = 7.0

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


class Scenario(str, Enum):
    RMA_LOS = "RMa-LoS"
    RMA_NLOS = "RMa-NLoS"


class ChannelProfile(str, Enum):
    """Parameter set layered under explicit overrides."""

    STANDARD = "3gpp"
    CALIBRATED = "calibrated"


class Duplex(str, Enum):
    FDD = "FDD"
    TDD = "TDD"

    @property
    def dl_fraction(self) -> float:
        # TDD frames grant 3/4 of the resources to the downlink
        return 0.75 if self is Duplex.TDD else 1.0


@dataclass(frozen=True)
class SiteConfig:
    """Transmitter side of a deployment."""

    tx_height_m: float
    tx_power_w: float
    scenario: Scenario
    array: ArrayConfig = field(default_factory=ArrayConfig)

    def __post_init__(self):
        if self.tx_power_w <= 0:
            raise InvalidConfigError(
                f"Transmit power must be positive, got {self.tx_power_w} W"
            )
        if self.tx_height_m <= 0:
            raise InvalidConfigError(
                f"Transmitter height must be positive, got {self.tx_height_m} m"
            )


# Legacy tower versus recycled TV tower
SITE_PRESETS: Dict[str, SiteConfig] = {
    "legacy": SiteConfig(tx_height_m=25.0, tx_power_w=40.0, scenario=Scenario.RMA_NLOS),
    "high_tower": SiteConfig(
        tx_height_m=150.0, tx_power_w=100.0, scenario=Scenario.RMA_LOS
    ),
}


@dataclass(frozen=True)
class RadioConfig:
    carrier_frequency: float
    bandwidth: float
    duplex: Duplex = Duplex.FDD
    cp_overhead: float = 0.05
    noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB
    target_rate_bps: float = 10e6

    def __post_init__(self):
        if self.carrier_frequency <= 0 or self.bandwidth <= 0:
            raise InvalidConfigError(
                "Carrier frequency and bandwidth must be positive "
                f"(fc={self.carrier_frequency}, B={self.bandwidth})"
            )
        if not 0 <= self.cp_overhead < 1:
            raise InvalidConfigError(
                f"Cyclic prefix overhead must lie in [0, 1), got {self.cp_overhead}"
            )

    @property
    def dl_fraction(self) -> float:
        return Duplex(self.duplex).dl_fraction

    @property
    def dl_bandwidth(self) -> float:
        return self.bandwidth * self.dl_fraction

    @classmethod
    def for_carrier(
        cls,
        carrier_mhz: float,
        profile: ChannelProfile = ChannelProfile.STANDARD,
        **overrides,
    ) -> "RadioConfig":
        """5G NR band plan used by the tower study, keyed by carrier in MHz."""
        overrides = {**profile_radio_defaults(profile), **overrides}
        try:
            bandwidth, duplex = BAND_PLAN[int(carrier_mhz)]
        except KeyError:
            raise InvalidConfigError(
                f"No band plan for {carrier_mhz} MHz (known: {sorted(BAND_PLAN)})"
            )
        return cls(
            carrier_frequency=carrier_mhz * 1e6,
            bandwidth=bandwidth,
            duplex=duplex,
            **overrides,
        )


BAND_PLAN: Dict[int, Tuple[float, Duplex]] = {
    700: (10e6, Duplex.FDD),
    1800: (20e6, Duplex.FDD),
    3500: (100e6, Duplex.TDD),
}


@dataclass(frozen=True, eq=False)
class UserDrop:
    """User positions relative to the tower base."""

    distances_m: np.ndarray
    azimuths_deg: np.ndarray
    rx_height_m: float = DEFAULT_RX_HEIGHT_M

    def __post_init__(self):
        object.__setattr__(self, "distances_m", np.atleast_1d(self.distances_m))
        object.__setattr__(self, "azimuths_deg", np.atleast_1d(self.azimuths_deg))
        if self.distances_m.shape != self.azimuths_deg.shape:
            raise InvalidDropError(
                f"Got {self.distances_m.size} distances for "
                f"{self.azimuths_deg.size} azimuths"
            )
        if np.any(self.distances_m < MIN_DROP_DISTANCE_M - 1e-9):
            raise InvalidDropError(
                f"Users must be at least {MIN_DROP_DISTANCE_M} m from the tower "
                f"(closest {self.distances_m.min():.1f} m)"
            )

    @property
    def num_users(self) -> int:
        return self.distances_m.size


@dataclass(frozen=True)
class FadingParams:
    """
    Small-scale and shadowing parameters of the clustered generator.

    `shadow_sigma_far_db` applies beyond the LoS breakpoint distance; when
    None the same sigma is used at every distance.
    """

    rician_k_mean_db: float = 7.0
    rician_k_std_db: float = 4.0
    n_clusters: int = 10
    azimuth_spread_deg: float = 9.0
    zenith_spread_deg: float = 2.0
    xpr_mean_db: float = 7.0
    shadow_sigma_db: float = 8.0
    shadow_sigma_far_db: Optional[float] = None

    def __post_init__(self):
        if self.n_clusters < 1:
            raise InvalidConfigError(
                f"At least one cluster is required, got {self.n_clusters}"
            )
        spreads = (
            self.rician_k_std_db,
            self.azimuth_spread_deg,
            self.zenith_spread_deg,
            self.shadow_sigma_db,
            self.shadow_sigma_far_db or 0.0,
        )
        if min(spreads) < 0:
            raise InvalidConfigError("Spreads and standard deviations must be >= 0")

    @classmethod
    def for_scenario(
        cls,
        scenario: Scenario,
        profile: ChannelProfile = ChannelProfile.STANDARD,
        **overrides,
    ) -> "FadingParams":
        scenario = Scenario(scenario)
        defaults = dict(FADING_DEFAULTS[scenario])
        if _as_profile(profile) is ChannelProfile.CALIBRATED:
            defaults.update(CALIBRATED_FADING[scenario])
        defaults.update(overrides)
        return cls(**defaults)


FADING_DEFAULTS = {
    Scenario.RMA_LOS: {
        "n_clusters": 11,
        "azimuth_spread_deg": 8.0,
        "xpr_mean_db": 12.0,
        "shadow_sigma_db": 4.0,
        "shadow_sigma_far_db": 6.0,
    },
    Scenario.RMA_NLOS: {
        "n_clusters": 10,
        "azimuth_spread_deg": 9.0,
        "xpr_mean_db": 7.0,
        "shadow_sigma_db": 8.0,
        "shadow_sigma_far_db": None,
    },
}

# Coverage sweep settings. The LoS sigma holds on both sides of the breakpoint.
CALIBRATED_FADING = {
    Scenario.RMA_LOS: {
        "zenith_spread_deg": 8.0,
        "shadow_sigma_far_db": None,
    },
    Scenario.RMA_NLOS: {
        "zenith_spread_deg": 8.0,
        "xpr_mean_db": 20.0,
        "shadow_sigma_db": 10.0,
    },
}
CALIBRATED_NOISE_FIGURE_DB = 10.0


def _as_profile(profile) -> ChannelProfile:
    try:
        return ChannelProfile(profile)
    except ValueError:
        raise InvalidConfigError(
            f"Unknown channel profile {profile!r} "
            f"(known: {[p.value for p in ChannelProfile]})"
        )


def profile_radio_defaults(profile: ChannelProfile) -> Dict[str, Any]:
    """Radio fields a profile sets ahead of explicit overrides."""
    if _as_profile(profile) is ChannelProfile.CALIBRATED:
        return {"noise_figure_db": CALIBRATED_NOISE_FIGURE_DB}
    return {}


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """M x K downlink channel; column k belongs to user k."""

    entries: np.ndarray
    large_scale_gain: np.ndarray
    los_azimuth_deg: np.ndarray
    los_elevation_deg: np.ndarray
    pathloss_db: np.ndarray
    shadowing_db: np.ndarray

    @property
    def num_antennas(self) -> int:
        return self.entries.shape[0]

    @property
    def num_users(self) -> int:
        return self.entries.shape[1]


def _as_output(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def _check_pathloss_domain(d2d: np.ndarray, h_ut: float) -> None:
    if np.any(d2d < MIN_PATHLOSS_DISTANCE_M):
        raise OutOfRangeError(
            "2-D distance below the pathloss model minimum",
            expected=f">= {MIN_PATHLOSS_DISTANCE_M} m",
            got=f"{np.min(d2d):.3f} m",
        )
    if not 1.0 <= h_ut <= 10.0:
        raise OutOfRangeError(
            "User terminal height outside the RMa model range",
            expected="1-10 m",
            got=f"{h_ut} m",
        )


def breakpoint_distance(fc: float, h_bs: float, h_ut: float) -> float:
    return 2 * np.pi * h_bs * h_ut * fc / speed_of_light


def beyond_breakpoint(d2d, fc: float, h_bs: float, h_ut: float) -> np.ndarray:
    """Users on the far slope of the LoS model, by ground distance."""
    return np.asarray(d2d, dtype=float) > breakpoint_distance(fc, h_bs, h_ut)


def _pl1(d, fc_ghz: float, h: float = AVERAGE_BUILDING_HEIGHT_M):
    return (
        20 * np.log10(40 * np.pi * d * fc_ghz / 3)
        + min(0.03 * h**1.72, 10) * np.log10(d)
        - min(0.044 * h**1.72, 14.77)
        + 0.002 * np.log10(h) * d
    )


def pathloss_rma_los(d2d, fc: float, h_bs: float, h_ut: float):
    """
    RMa LoS pathloss in dB (two-slope model).

    Both branches and the slope switch are evaluated on the ground distance;
    shadowing switches its sigma at the same distance.
    """
    d2d = np.asarray(d2d, dtype=float)
    _check_pathloss_domain(d2d, h_ut)
    fc_ghz = fc / 1e9
    d_bp = breakpoint_distance(fc, h_bs, h_ut)

    near = _pl1(d2d, fc_ghz)
    far = _pl1(d_bp, fc_ghz) + 40 * np.log10(d2d / d_bp)
    return _as_output(np.where(beyond_breakpoint(d2d, fc, h_bs, h_ut), far, near))


def pathloss_rma_nlos(d2d, fc: float, h_bs: float, h_ut: float):
    """RMa NLoS pathloss in dB, never below the LoS value."""
    d2d = np.asarray(d2d, dtype=float)
    _check_pathloss_domain(d2d, h_ut)
    fc_ghz = fc / 1e9
    d3d = np.hypot(d2d, h_bs - h_ut)
    h = AVERAGE_BUILDING_HEIGHT_M
    w = STREET_WIDTH_M

    nlos = (
        161.04
        - 7.1 * np.log10(w)
        + 7.5 * np.log10(h)
        - (24.37 - 3.7 * (h / h_bs) ** 2) * np.log10(h_bs)
        + (43.42 - 3.1 * np.log10(h_bs)) * (np.log10(d3d) - 3)
        + 20 * np.log10(fc_ghz)
        - (3.2 * np.log10(11.75 * h_ut) ** 2 - 4.97)
    )
    los = pathloss_rma_los(d2d, fc, h_bs, h_ut)
    return _as_output(np.maximum(los, nlos))


def noise_power(radio: RadioConfig) -> float:
    """Receiver noise power in watts over the downlink bandwidth."""
    noise_dbm = (
        THERMAL_NOISE_DBM_PER_HZ
        + 10 * np.log10(radio.dl_bandwidth)
        + radio.noise_figure_db
    )
    return 10 ** ((noise_dbm - 30) / 10)


def large_scale_gain(
    site: SiteConfig,
    radio: RadioConfig,
    drop: UserDrop,
    fading: FadingParams,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear gain beta, pathloss and shadowing (both dB) per user."""
    d2d = drop.distances_m
    args = (radio.carrier_frequency, site.tx_height_m, drop.rx_height_m)
    if Scenario(site.scenario) is Scenario.RMA_LOS:
        pathloss = pathloss_rma_los(d2d, *args)
    else:
        pathloss = pathloss_rma_nlos(d2d, *args)
    pathloss = np.atleast_1d(pathloss)

    sigma = np.full(d2d.shape, fading.shadow_sigma_db)
    if fading.shadow_sigma_far_db is not None:
        sigma[beyond_breakpoint(d2d, *args)] = fading.shadow_sigma_far_db
    shadowing = rng.normal(0.0, 1.0, size=d2d.shape) * sigma

    beta = 10 ** (-(pathloss + shadowing) / 10)
    return beta, pathloss, shadowing


def drop_users(
    num_users: int,
    radius_m: float,
    rng: np.random.Generator,
    min_distance_m: float = MIN_DROP_DISTANCE_M,
    rx_height_m: float = DEFAULT_RX_HEIGHT_M,
) -> UserDrop:
    """Drop users uniformly over the area of a disk around the tower."""
    u = rng.random(num_users)
    azimuths = rng.uniform(0.0, 360.0, num_users)
    if radius_m <= min_distance_m:
        distances = np.full(num_users, float(min_distance_m))
    else:
        distances = np.sqrt(
            u * (radius_m**2 - min_distance_m**2) + min_distance_m**2
        )
    return UserDrop(distances, azimuths, rx_height_m)


def _polarization_response(
    slants_deg: np.ndarray, xpr_db: float, rng: np.random.Generator, shape
) -> np.ndarray:
    """
    Per-cluster, per-element coupling onto the vertically polarized receiver.

    Each cluster carries random co- and cross-polar phases; the cross-polar
    leakage is attenuated by the XPR. The response is normalized to unit
    mean power per element.
    """
    zeta = np.deg2rad(slants_deg)
    inv_xpr = 10 ** (-xpr_db / 10)
    phases = rng.uniform(-np.pi, np.pi, size=shape + (2,))
    co = np.exp(1j * phases[..., 0:1])
    cross = np.exp(1j * phases[..., 1:2])
    response = np.cos(zeta) * co + np.sin(zeta) * np.sqrt(inv_xpr) * cross
    scale = np.sqrt(np.mean(np.cos(zeta) ** 2 + np.sin(zeta) ** 2 * inv_xpr))
    return response / scale


def generate_channel(
    site: SiteConfig,
    radio: RadioConfig,
    drop: UserDrop,
    fading: FadingParams,
    seed: SeedLike,
) -> ChannelMatrix:
    """
    Draw one M x K channel realization.

    Deterministic for a given seed: draws are consumed in a fixed order
    (shadowing, K-factors, cluster angles, cluster weights, polarization).
    """
    if drop.num_users == 0:
        raise InvalidDropError("Cannot generate a channel for zero users")
    if site.tx_height_m <= drop.rx_height_m:
        raise InvalidConfigError(
            f"Transmitter height {site.tx_height_m} m must exceed receiver "
            f"height {drop.rx_height_m} m"
        )

    rng = np.random.default_rng(seed)
    geometry = build_geometry(site.array, radio.carrier_frequency)
    num_users = drop.num_users
    n_clusters = fading.n_clusters

    beta, pathloss, shadowing = large_scale_gain(site, radio, drop, fading, rng)

    los_az = drop.azimuths_deg.astype(float)
    los_el = -np.rad2deg(
        np.arctan2(site.tx_height_m - drop.rx_height_m, drop.distances_m)
    )

    is_los = Scenario(site.scenario) is Scenario.RMA_LOS
    if is_los:
        kappa_db = fading.rician_k_mean_db + fading.rician_k_std_db * rng.normal(
            size=num_users
        )
        diffuse_weight = np.sqrt(1.0 / (10 ** (kappa_db / 10) + 1.0))
    else:
        diffuse_weight = np.ones(num_users)
    # Both slants of a dual-polarized pair project equally onto the vertical
    # receive polarization, so the specular term is the plain steering vector.
    specular_weight = np.sqrt(1.0 - diffuse_weight**2)

    # Laplacian angular offsets with the configured rms spread
    cluster_az = los_az[:, None] + rng.laplace(
        0.0, fading.azimuth_spread_deg / np.sqrt(2), size=(num_users, n_clusters)
    )
    cluster_el = los_el[:, None] + rng.laplace(
        0.0, fading.zenith_spread_deg / np.sqrt(2), size=(num_users, n_clusters)
    )
    weights = (
        rng.normal(size=(num_users, n_clusters))
        + 1j * rng.normal(size=(num_users, n_clusters))
    ) / np.sqrt(2 * n_clusters)
    polarization = _polarization_response(
        geometry.element_polarization_angles,
        fading.xpr_mean_db,
        rng,
        (num_users, n_clusters),
    )

    cluster_vectors = steering_matrix(geometry, cluster_az, cluster_el)
    diffuse = np.einsum("kn,knm->km", weights, polarization * cluster_vectors)
    specular = steering_matrix(geometry, los_az, los_el)

    small_scale = (
        specular_weight[:, None] * specular + diffuse_weight[:, None] * diffuse
    )
    entries = (np.sqrt(beta)[:, None] * small_scale).T

    return ChannelMatrix(
        entries=entries,
        large_scale_gain=beta,
        los_azimuth_deg=los_az,
        los_elevation_deg=los_el,
        pathloss_db=pathloss,
        shadowing_db=shadowing,
    )


def write_channel_csv(
    channel: ChannelMatrix,
    path: Union[str, Path],
    config: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> Tuple[Path, Path]:
    """
    Dump a channel as text for cross-checking against external simulators.

    Writes `<path>` with antenna,user,real,imag rows and
    `<stem>_users.csv` with the per-user large-scale parameters. With a
    config both files open with the seed and config echo lines.
    """
    path = Path(path)
    antenna, user = np.indices(channel.entries.shape)
    matrix = pd.DataFrame(
        {
            "antenna": antenna.ravel(),
            "user": user.ravel(),
            "real": channel.entries.real.ravel(),
            "imag": channel.entries.imag.ravel(),
        }
    )
    users_path = path.with_name(f"{path.stem}_users.csv")
    users = pd.DataFrame(
        {
            "user": np.arange(channel.num_users),
            "azimuth_deg": channel.los_azimuth_deg,
            "elevation_deg": channel.los_elevation_deg,
            "pathloss_db": channel.pathloss_db,
            "shadowing_db": channel.shadowing_db,
            "beta_db": 10 * np.log10(channel.large_scale_gain),
        }
    )
    for frame, target in ((matrix, path), (users, users_path)):
        if config is None:
            target.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(target, index=False, float_format="%.9e", lineterminator="\n")
        else:
            write_csv_artifact(target, frame, config, seed, float_format="%.9e")
    logger.info(f"Channel dump written to {path} and {users_path}")
    return path, users_path
