"""Small-cell input power (linear load model) and network-level accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnergyParams:
    """Per-antenna-chain power model of one base-station class."""

    p0: float
    delta_p: float
    p_max: float
    p_sleep: float
    n_t: int = 4

    def __post_init__(self):
        if min(self.p0, self.delta_p, self.p_max, self.p_sleep, self.n_t) < 0:
            raise ValueError("energy parameters must be non-negative")
        if not self.p0 + self.delta_p * self.p_max > self.p_sleep:
            raise ValueError("active power must exceed sleep power")

    @property
    def active_full_load(self) -> float:
        return self.n_t * (self.p0 + self.delta_p * self.p_max)

    @property
    def idle(self) -> float:
        return self.n_t * self.p_sleep


FEMTO = EnergyParams(p0=2.4, delta_p=4.0, p_max=0.025, p_sleep=1.45)
PICO = EnergyParams(p0=3.4, delta_p=8.0, p_max=0.065, p_sleep=2.15)
PRESETS = {"femto": FEMTO, "pico": PICO}


def enb_power(params: EnergyParams, active: bool, load_output: float | None = None) -> float:
    """Input power of one eNB in watts.

    ``load_output`` is the RF output per chain; full buffer traffic means
    it defaults to ``p_max``.
    """
    if not active:
        return params.n_t * params.p_sleep
    p_out = params.p_max if load_output is None else load_output
    if p_out < 0 or p_out > params.p_max:
        raise ValueError("load_output must be within [0, p_max]")
    return params.n_t * (params.p0 + params.delta_p * p_out)


def network_power(active, params: EnergyParams) -> tuple[float, list[float]]:
    """Total and per-cell input power of the small cells (macros excluded).

    ``active`` is the activity flag per small cell, or a
    :class:`~mureassign.network.NetworkState`.
    """
    flags = getattr(active, "active", active)
    per_cell = [enb_power(params, bool(a)) for a in np.asarray(flags, dtype=bool)]
    return float(sum(per_cell)), per_cell


def savings_report(before: float, after: float) -> float:
    if before <= 0:
        raise ValueError("before must be positive")
    return (before - after) / before
