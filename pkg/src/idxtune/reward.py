"""Differential reward for the tuning agent.

Progress is tracked by two relative runtime deltas: one against the initial
(default-configuration) runtime and one against the previous tuning step.
The reward amplifies improvement over the baseline and modulates it by the
most recent trend; the exponents ``omega`` (odd) and ``kappa`` (even) control
the two emphases.
"""

from __future__ import annotations

from dataclasses import dataclass


class RewardError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaPair:
    delta_to_0: float
    delta_to_prev: float


@dataclass(frozen=True)
class RewardParams:
    omega: int = 1
    kappa: int = 2

    def __post_init__(self):
        if self.omega <= 0 or self.omega % 2 == 0:
            raise RewardError("omega must be an odd positive integer")
        if self.kappa <= 0 or self.kappa % 2 == 1:
            raise RewardError("kappa must be an even positive integer")


def compute_deltas(r_t: float, r_0: float, r_prev: float) -> DeltaPair:
    """Relative runtime changes vs the initial and the previous step.

    Positive values mean the current runtime improved (got smaller).
    """
    if r_t <= 0 or r_0 <= 0 or r_prev <= 0:
        raise RewardError("runtimes must be strictly positive")
    return DeltaPair((r_0 - r_t) / r_0, (r_prev - r_t) / r_prev)


def compute_reward(d: DeltaPair, p: RewardParams = RewardParams()) -> float:
    """Two-branch differential reward.

    Improvement over baseline (delta_to_0 > 0) earns a positive reward scaled
    by the recent trend; regression earns a mirrored negative one.  With the
    integer parity constraints on omega/kappa the sign of the reward always
    follows the sign of delta_to_0 (unless the trend factor vanishes).
    """
    d0, dp = d.delta_to_0, d.delta_to_prev
    if d0 > 0:
        return ((1.0 + d0) ** 2 - 1.0) ** p.omega * (1.0 + dp) ** p.kappa
    return -(((1.0 - d0) ** 2 - 1.0) ** p.omega) * (1.0 - dp) ** p.kappa


def composite_metric(latency: float, inv_throughput: float,
                     weights: tuple[float, float] = (1.0, 0.0)) -> float:
    """Weighted runtime objective, e.g. 0.8*latency + 0.2/throughput.

    The default weights (1, 0) reduce to pure runtime.
    """
    wl, wt = weights
    if wl < 0 or wt < 0 or wl + wt == 0:
        raise RewardError("weights must be nonnegative and not all zero")
    if latency <= 0 or inv_throughput <= 0:
        raise RewardError("metric inputs must be positive")
    return wl * latency + wt * inv_throughput
