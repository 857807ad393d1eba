"""
Multi-user downlink processing: RZF precoding, max-min power control and
per-user rates.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .channel import ChannelMatrix, RadioConfig
from .exceptions import DegenerateChannelError, InvalidArgumentError, NumericalError

logger = logging.getLogger("tower_coverage")

MAX_CONDITION_NUMBER = 1e12
MAX_BISECTION_ITERATIONS = 200
BISECTION_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class PrecodeResult:
    """Unit-norm precoding vectors (columns of W) and the regularization used."""

    W: np.ndarray
    alpha: float


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    p: np.ndarray
    common_sinr: float


@dataclass(frozen=True, eq=False)
class RateReport:
    sinr: np.ndarray
    rate_bps: np.ndarray


def _channel_entries(H: Union[ChannelMatrix, np.ndarray]) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H)


def rzf_precode(
    H: Union[ChannelMatrix, np.ndarray],
    noise_power: float,
    total_power: float,
    alpha: Optional[float] = None,
) -> PrecodeResult:
    """
    Regularized zero-forcing: W proportional to H (H^H H + alpha I)^-1.

    alpha defaults to K * noise_power / total_power. Columns are normalized
    so the subsequent power allocation is the per-user radiated power.
    """
    H = _channel_entries(H)
    num_antennas, num_users = H.shape
    if num_users > num_antennas:
        raise InvalidArgumentError(
            f"RZF needs K <= M, got K={num_users} users for M={num_antennas}"
        )
    if not np.all(np.isfinite(H)):
        raise InvalidArgumentError("Channel matrix contains non-finite entries")

    if alpha is None:
        alpha = num_users * noise_power / total_power

    gram = H.conj().T @ H + alpha * np.eye(num_users)
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise NumericalError(
            "RZF system is singular or ill-conditioned", condition_number=condition
        )

    W = H @ np.linalg.solve(gram, np.eye(num_users))
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms == 0):
        raise DegenerateChannelError(int(np.argmin(norms)))
    return PrecodeResult(W=W / norms, alpha=float(alpha))


def effective_gains(
    H: Union[ChannelMatrix, np.ndarray], W: Union[PrecodeResult, np.ndarray]
) -> np.ndarray:
    """G[k, j] = |h_k^H w_j|^2."""
    H = _channel_entries(H)
    W = W.W if isinstance(W, PrecodeResult) else np.asarray(W)
    if H.shape != W.shape:
        raise InvalidArgumentError(
            f"Channel shape {H.shape} does not match precoder shape {W.shape}"
        )
    return np.abs(H.conj().T @ W) ** 2


def sinr(G: np.ndarray, p: np.ndarray, noise_power: float) -> np.ndarray:
    """Per-user SINR for powers p on gain matrix G."""
    received = G * p[None, :]
    signal = np.diag(received)
    interference = received.sum(axis=1) - signal
    return signal / (noise_power + interference)


def _powers_for_target(
    diagonal: np.ndarray, cross: np.ndarray, noise_power: float, target: float
) -> Optional[np.ndarray]:
    """
    Powers meeting SINR == target for every user, or None if no nonnegative
    solution exists.
    """
    system = np.diag(diagonal / target) - cross
    try:
        p = np.linalg.solve(system, np.full(diagonal.size, noise_power))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        return None
    return p


def maxmin_power(
    G: np.ndarray, noise_power: float, total_power: float
) -> PowerAllocation:
    """
    Max-min SINR power allocation under a sum-power constraint.

    Bisection on the common SINR t with a linear feasibility solve per step:
    t is feasible when the powers equalizing every SINR at t are positive and
    sum to at most the total power.
    """
    G = np.asarray(G, dtype=float)
    diagonal = np.diag(G).copy()
    for user, gain in enumerate(diagonal):
        if not gain > 0:
            raise DegenerateChannelError(user)
    cross = G - np.diag(diagonal)

    low = 0.0
    high = float(np.max(total_power * diagonal / noise_power))
    best = None
    for _ in range(MAX_BISECTION_ITERATIONS):
        mid = 0.5 * (low + high)
        p = _powers_for_target(diagonal, cross, noise_power, mid)
        if p is not None and p.sum() <= total_power:
            low, best = mid, p
        else:
            high = mid
        if high - low <= BISECTION_TOLERANCE * high:
            break
    else:
        raise NumericalError(
            f"Max-min bisection did not converge in {MAX_BISECTION_ITERATIONS} "
            f"iterations (bracket [{low:.6e}, {high:.6e}])"
        )

    if best is None:
        raise NumericalError("Max-min bisection found no feasible SINR target")

    p = best * (total_power / best.sum())
    achieved = sinr(G, p, noise_power)
    return PowerAllocation(p=p, common_sinr=float(achieved.min()))


def user_rates(
    power_alloc: PowerAllocation,
    G: np.ndarray,
    radio: RadioConfig,
    noise_power: Optional[float] = None,
) -> RateReport:
    """
    Achievable downlink rate per user after duplex and cyclic prefix losses.

    Without a noise power every user is credited the common max-min SINR.
    """
    p = np.asarray(power_alloc.p, dtype=float)
    if np.any(p < 0):
        raise InvalidArgumentError("Power allocation contains negative powers")
    if noise_power is None:
        achieved = np.full(p.size, power_alloc.common_sinr)
    else:
        achieved = sinr(np.asarray(G, dtype=float), p, noise_power)
    return RateReport(sinr=achieved, rate_bps=rate_from_sinr(achieved, radio))


def rate_from_sinr(sinr_values, radio: RadioConfig):
    return (
        radio.dl_fraction
        * (1 - radio.cp_overhead)
        * radio.bandwidth
        * np.log2(1 + np.asarray(sinr_values, dtype=float))
    )
