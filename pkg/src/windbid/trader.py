"""Two-step trading: a single-coefficient correction of an improved forecast.

The trading fit rescales the forecast ``w_hat`` by one coefficient ``a`` so
that the realized opportunity costs over the training window are minimized.
The objective is piecewise linear in ``a`` with breakpoints at ``E_t / w_t``,
so the exact optimum is found by a breakpoint scan; ties on flat segments
resolve to the smallest optimal ``a``.  The generic simplex stays available
as a cross-check through the primal LP formulation in the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import FitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TradingRule:
    """Multiplicative bid correction ``bid = a * w_hat``."""

    coefficient: float
    window_id: str = ""


def trading_objective(a: float, w_hat, targets, psi_minus, psi_plus) -> float:
    """Mean opportunity cost of bidding ``a * w_hat`` over a window."""
    residual = a * np.asarray(w_hat, dtype=np.float64) - np.asarray(targets, dtype=np.float64)
    loss = np.asarray(psi_minus) @ np.maximum(residual, 0.0)
    loss += np.asarray(psi_plus) @ np.maximum(-residual, 0.0)
    return float(loss) / len(residual)


def _validate_trading_inputs(w_hat, targets, psi_minus, psi_plus):
    w_hat = np.asarray(w_hat, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    psi_minus = np.asarray(psi_minus, dtype=np.float64)
    psi_plus = np.asarray(psi_plus, dtype=np.float64)
    n = len(w_hat)
    if n == 0:
        raise FitError("empty trading window")
    if targets.shape != (n,) or psi_minus.shape != (n,) or psi_plus.shape != (n,):
        raise FitError("trading inputs must have equal lengths")
    if np.any(w_hat < 0):
        raise FitError("forecast values must be nonnegative")
    if np.any(psi_minus < 0) or np.any(psi_plus < 0):
        raise FitError("opportunity costs must be nonnegative")
    return w_hat, targets, psi_minus, psi_plus


def fit_trading(w_hat, targets, psi_minus, psi_plus, window_id: str = "") -> TradingRule:
    """Fit the bid coefficient on realized opportunity costs.

    Exact minimization: the objective is evaluated at every breakpoint
    ``E_t / w_t`` (and at 0) via prefix sums over the sorted breakpoints;
    the smallest minimizer is returned.  A negative coefficient is possible
    with adversarial targets and is returned as-is; bids clip at zero later.
    """
    w_hat, targets, psi_minus, psi_plus = _validate_trading_inputs(
        w_hat, targets, psi_minus, psi_plus
    )
    positive = w_hat > 0
    if not positive.any():
        raise FitError("uninformative forecast: all forecast values are zero")

    # rows with w == 0 contribute a constant; they cannot move the optimum
    zero_rows = ~positive
    constant = 0.0
    if zero_rows.any():
        e0 = targets[zero_rows]
        constant = float(
            psi_minus[zero_rows] @ np.maximum(-e0, 0.0)
            + psi_plus[zero_rows] @ np.maximum(e0, 0.0)
        )

    w = w_hat[positive]
    e = targets[positive]
    pm = psi_minus[positive]
    pp = psi_plus[positive]
    breaks = e / w
    order = np.argsort(breaks, kind="stable")
    breaks = breaks[order]
    w, e, pm, pp = w[order], e[order], pm[order], pp[order]

    # prefix sums over rows below a candidate, suffix sums over rows above it
    pm_w = np.concatenate([[0.0], np.cumsum(pm * w)])
    pm_e = np.concatenate([[0.0], np.cumsum(pm * e)])
    pp_w_suf = np.concatenate([np.cumsum((pp * w)[::-1])[::-1], [0.0]])
    pp_e_suf = np.concatenate([np.cumsum((pp * e)[::-1])[::-1], [0.0]])

    candidates = np.unique(np.concatenate([breaks, [0.0]]))
    left = np.searchsorted(breaks, candidates, side="left")
    right = np.searchsorted(breaks, candidates, side="right")
    objective = (
        candidates * pm_w[left]
        - pm_e[left]
        + pp_e_suf[right]
        - candidates * pp_w_suf[right]
        + constant
    ) / len(w_hat)

    best = int(np.argmin(objective))  # candidates ascend: first min is smallest a
    a = float(candidates[best])
    if a < 0:
        logger.warning("trading fit produced negative coefficient a=%g", a)
    return TradingRule(coefficient=a, window_id=window_id)


def bid(rule: TradingRule, w_hat, capacity: float):
    """Day-ahead bid ``clip(a * w_hat, 0, capacity)`` in MWh."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    if np.any(w_hat < 0):
        raise FitError("forecast values must be nonnegative")
    if not (np.isfinite(capacity) and capacity > 0):
        raise FitError(f"capacity must be positive, got {capacity}")
    result = np.clip(rule.coefficient * w_hat, 0.0, capacity)
    return float(result) if result.ndim == 0 else result


def critical_fractile(psi_minus, psi_plus) -> float:
    """Share of the mean opportunity cost carried by overproduction.

    Above 0.5 the optimal bid exceeds the forecast (hedge against long
    positions being the expensive side); below 0.5 it sits under it.
    """
    psi_minus = np.asarray(psi_minus, dtype=np.float64)
    psi_plus = np.asarray(psi_plus, dtype=np.float64)
    if len(psi_minus) == 0 or psi_minus.shape != psi_plus.shape:
        raise FitError("critical fractile needs aligned, nonempty cost series")
    mean_minus = float(psi_minus.mean())
    mean_plus = float(psi_plus.mean())
    if mean_minus + mean_plus <= 0.0:
        raise FitError("degenerate costs: both mean opportunity costs are zero")
    return mean_plus / (mean_minus + mean_plus)
