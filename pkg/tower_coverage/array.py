"""
Uniform cylindrical array (UCyA) geometry and steering vectors.

Columns are spread evenly in azimuth so that the arc length between
horizontal neighbours equals the element spacing; rings are stacked along
the vertical cylinder axis with the same spacing. The origin sits at the
centre of the cylinder.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.constants import speed_of_light

from .exceptions import InvalidArgumentError, InvalidConfigError

logger = logging.getLogger("tower_coverage")

# Slant angles of the co-located pair used for dual polarization
DUAL_POLARIZATION_SLANTS = (45.0, -45.0)


def wavelength(carrier_frequency: float) -> float:
    """Free-space wavelength in metres."""
    return speed_of_light / carrier_frequency


@dataclass(frozen=True)
class ArrayConfig:
    """Element counts and spacing of the cylindrical array."""

    m_h: int = 32
    m_v: int = 8
    polarizations: int = 1
    spacing: float = 0.5

    def __post_init__(self):
        if self.m_h < 1 or self.m_v < 1:
            raise InvalidConfigError(
                f"Element counts must be positive (m_h={self.m_h}, m_v={self.m_v})"
            )
        if self.polarizations not in (1, 2):
            raise InvalidConfigError(
                f"Polarizations must be 1 or 2, got {self.polarizations}"
            )
        if self.spacing <= 0:
            raise InvalidConfigError(f"Spacing must be positive, got {self.spacing}")

    @property
    def num_elements(self) -> int:
        return self.m_h * self.m_v * self.polarizations


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions (M x 3, metres) and per-element polarization slants."""

    element_positions: np.ndarray
    element_polarization_angles: np.ndarray
    radius_m: float
    height_m: float
    carrier_frequency: float

    @property
    def num_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_frequency)


def build_geometry(config: ArrayConfig, carrier_frequency: float) -> ArrayGeometry:
    """
    Lay out the UCyA for a given carrier.

    Element index runs polarization fastest, then azimuthal column, then
    vertical ring: m = (ring * m_h + column) * polarizations + pol.
    """
    if not carrier_frequency or carrier_frequency <= 0:
        raise InvalidConfigError(
            f"Carrier frequency must be positive, got {carrier_frequency}"
        )

    lam = wavelength(carrier_frequency)
    step = config.spacing * lam

    # A single column is a vertical line, not a cylinder
    radius = config.m_h * step / (2 * np.pi) if config.m_h > 1 else 0.0
    height = (config.m_v - 1) * step

    azimuths = 2 * np.pi * np.arange(config.m_h) / config.m_h
    heights = (np.arange(config.m_v) - (config.m_v - 1) / 2) * step

    ring, column, _ = np.meshgrid(
        np.arange(config.m_v),
        np.arange(config.m_h),
        np.arange(config.polarizations),
        indexing="ij",
    )
    ring = ring.ravel()
    column = column.ravel()

    positions = np.column_stack(
        [
            radius * np.cos(azimuths[column]),
            radius * np.sin(azimuths[column]),
            heights[ring],
        ]
    )

    if config.polarizations == 2:
        slants = np.tile(DUAL_POLARIZATION_SLANTS, config.m_h * config.m_v)
    else:
        slants = np.zeros(config.num_elements)

    logger.debug(
        f"Built {config.m_h}x{config.m_v}x{config.polarizations} UCyA at "
        f"{carrier_frequency / 1e6:.0f} MHz: r_a={radius:.3f} m, h_a={height:.3f} m"
    )

    return ArrayGeometry(
        element_positions=positions,
        element_polarization_angles=np.asarray(slants, dtype=float),
        radius_m=float(radius),
        height_m=float(height),
        carrier_frequency=float(carrier_frequency),
    )


def wave_vectors(azimuth, elevation) -> np.ndarray:
    """Unit direction vectors for azimuth/elevation in degrees (elevation up)."""
    az = np.deg2rad(np.asarray(azimuth, dtype=float))
    el = np.deg2rad(np.asarray(elevation, dtype=float))
    return np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1
    )


def steering_matrix(geometry: ArrayGeometry, azimuth, elevation) -> np.ndarray:
    """
    Steering vectors for broadcastable arrays of directions.

    Returns an array of shape direction_shape + (M,).
    """
    k = 2 * np.pi / geometry.wavelength * wave_vectors(azimuth, elevation)
    phases = k @ geometry.element_positions.T
    return np.exp(1j * phases)


def steering_vector(
    geometry: ArrayGeometry,
    azimuth: float,
    elevation: float,
    carrier_frequency: float,
) -> np.ndarray:
    """Steering vector toward a single direction; every entry has modulus 1."""
    if not np.isclose(carrier_frequency, geometry.carrier_frequency, rtol=1e-9):
        raise InvalidArgumentError(
            f"Geometry built for {geometry.carrier_frequency:.6g} Hz, "
            f"steering requested at {carrier_frequency:.6g} Hz"
        )
    return steering_matrix(geometry, azimuth, elevation)

