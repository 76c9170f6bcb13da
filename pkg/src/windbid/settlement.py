"""Dual-price imbalance settlement arithmetic.

Under dual pricing the price paid for underproduction is never below the
day-ahead price and the price received for overproduction never above it, so
deviating from the day-ahead schedule can only cost money.  The per-MWh cost
of a deviation is captured by the marginal opportunity costs ``psi_minus``
(short) and ``psi_plus`` (long); at most one of them is nonzero in any hour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PriceError


@dataclass(frozen=True)
class SettlementRecord:
    """Per-hour settlement prices and the derived marginal opportunity costs."""

    lambda_d: float
    lambda_b: float
    lambda_minus: float
    lambda_plus: float
    psi_minus: float
    psi_plus: float


def derive_settlement(lambda_d: float, lambda_b: float) -> SettlementRecord:
    """Derive imbalance prices and marginal opportunity costs from the
    day-ahead and balancing prices of one hour.

    Negative prices are legitimate inputs; the piecewise rules do not care
    about sign.  The tie ``lambda_b == lambda_d`` yields zero costs on both
    sides.
    """
    if not (math.isfinite(lambda_d) and math.isfinite(lambda_b)):
        raise PriceError(f"invalid price: lambda_d={lambda_d}, lambda_b={lambda_b}")
    if lambda_b >= lambda_d:
        lambda_minus, lambda_plus = lambda_b, lambda_d
    else:
        lambda_minus, lambda_plus = lambda_d, lambda_b
    return SettlementRecord(
        lambda_d=lambda_d,
        lambda_b=lambda_b,
        lambda_minus=lambda_minus,
        lambda_plus=lambda_plus,
        psi_minus=lambda_minus - lambda_d,
        psi_plus=lambda_d - lambda_plus,
    )


def derive_settlement_arrays(
    lambda_d: np.ndarray, lambda_b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(psi_minus, psi_plus)`` for aligned price arrays."""
    lambda_d = np.asarray(lambda_d, dtype=np.float64)
    lambda_b = np.asarray(lambda_b, dtype=np.float64)
    if not (np.isfinite(lambda_d).all() and np.isfinite(lambda_b).all()):
        raise PriceError("invalid price: non-finite value in price series")
    short = lambda_b >= lambda_d
    psi_minus = np.where(short, lambda_b - lambda_d, 0.0)
    psi_plus = np.where(short, 0.0, lambda_d - lambda_b)
    return psi_minus, psi_plus


def opportunity_loss(energy, bid, psi_minus, psi_plus):
    """Cost of deviating from the day-ahead bid:
    ``psi_minus * (bid - energy)^+ + psi_plus * (energy - bid)^+``.

    Accepts scalars or aligned arrays.  With unit weights this is exactly
    ``|energy - bid|``.
    """
    under = np.maximum(np.subtract(bid, energy), 0.0)
    over = np.maximum(np.subtract(energy, bid), 0.0)
    loss = np.add(np.multiply(psi_minus, under), np.multiply(psi_plus, over))
    return float(loss) if np.ndim(loss) == 0 else loss


def revenue(lambda_d, energy, bid, psi_minus, psi_plus):
    """Producer market revenue: day-ahead income minus the opportunity loss.

    ``revenue + opportunity_loss == lambda_d * energy`` holds exactly because
    the same loss term is subtracted here.
    """
    loss = opportunity_loss(energy, bid, psi_minus, psi_plus)
    result = np.subtract(np.multiply(lambda_d, energy), loss)
    return float(result) if np.ndim(result) == 0 else result
