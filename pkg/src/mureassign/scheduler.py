"""
Proportional-fair semi-orthogonal user selection (SUS) with SU fallback.

Per RB: the UE with the best PF metric on its SU rate is the anchor; among
UEs whose quantised channel is semi-orthogonal to the anchor's, the best PF
metric on the MU rate is the partner; the pair is adopted only if the sum
of both MU PF metrics beats the anchor's SU PF metric. At most two UEs
share an RB.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .link import CsiReport, MuAdjustParams, mu_cqi_adjust, rate_from_sinr
from .phy import codebook_correlation, codebook_matrix, correlation, quantized_channel_vector

AVG_FLOOR = 1e-6


@dataclass(frozen=True)
class UeSchedState:
    ue_id: int
    avg_throughput: float
    csi: CsiReport

    def __post_init__(self):
        if not self.avg_throughput > 0:
            raise ValueError("avg_throughput must be positive")


@dataclass
class ScheduleDecision:
    """Per-RB allocation of one cell for one TTI.

    ``first[rb]`` is the anchor UE, ``second[rb]`` the MU partner or -1.
    ``su_objective``/``mu_objective`` are the two PF objectives compared
    on each RB (``mu_objective`` is NaN when no partner was available).
    """

    first: np.ndarray
    second: np.ndarray
    su_objective: np.ndarray
    mu_objective: np.ndarray

    @property
    def n_rb(self) -> int:
        return len(self.first)

    @property
    def is_mu(self) -> np.ndarray:
        return self.second >= 0

    @property
    def n_mu(self) -> np.ndarray:
        return np.where(self.is_mu, 2, 1)

    def entries(self) -> list[tuple]:
        return [(int(a),) if b < 0 else (int(a), int(b)) for a, b in zip(self.first, self.second)]

    def adopted_objective(self) -> np.ndarray:
        return np.where(self.is_mu, self.mu_objective, self.su_objective)

    def rejected_objective(self) -> np.ndarray:
        return np.where(self.is_mu, self.su_objective, self.mu_objective)


def pf_metric(ue: UeSchedState, candidate_rate: float) -> float:
    return candidate_rate / ue.avg_throughput


def semi_orthogonal_set(anchor: UeSchedState, candidates: Sequence[UeSchedState],
                        epsilon: float) -> list[int]:
    """Ids of candidates whose quantised channel correlates < epsilon with the anchor's."""
    cb = codebook_matrix()
    qa = quantized_channel_vector(cb[anchor.csi.pmi])
    out = []
    for c in candidates:
        if c.ue_id == anchor.ue_id:
            continue
        if correlation(qa, quantized_channel_vector(cb[c.csi.pmi])) < epsilon:
            out.append(c.ue_id)
    return out


def schedule_tti(ues: Sequence[UeSchedState], epsilon: float = 0.1,
                 mu_params: Optional[MuAdjustParams] = None, cell=None) -> ScheduleDecision:
    """Allocate every RB of one cell for one TTI.

    ``ues`` are the UEs attached to the cell; their CSI reports must cover
    the same RBs. Ties go to the lowest UE id.
    """
    if not ues:
        raise ValueError("no attached UEs")
    ues = sorted(ues, key=lambda u: u.ue_id)
    params = MuAdjustParams(0.05 if mu_params is None else mu_params.delta_mui, 2)
    ids = np.array([u.ue_id for u in ues])
    cqi = np.stack([u.csi.su_cqi_per_rb for u in ues])
    avg = np.array([u.avg_throughput for u in ues])[:, None]
    su_pf = rate_from_sinr(cqi) / avg
    mu_pf = rate_from_sinr(mu_cqi_adjust(cqi, params)) / avg
    n_rb = cqi.shape[1]
    rbs = np.arange(n_rb)

    anchor = np.argmax(su_pf, axis=0)
    su_obj = su_pf[anchor, rbs]

    pmi = np.array([u.csi.pmi for u in ues])
    semi = codebook_correlation()[np.ix_(pmi, pmi)] < epsilon
    np.fill_diagonal(semi, False)
    allowed = semi[anchor]  # (n_rb, n_ue)
    masked = np.where(allowed, mu_pf.T, -np.inf)
    partner = np.argmax(masked, axis=1)
    has = allowed.any(axis=1)
    mu_obj = np.where(has, mu_pf[anchor, rbs] + mu_pf[partner, rbs], np.nan)
    use_mu = has & (mu_obj > su_obj)

    first = ids[anchor]
    second = np.where(use_mu, ids[partner], -1)
    return ScheduleDecision(first, second, su_obj, mu_obj)


def update_avg_throughput(state: UeSchedState, realised_rate: float, alpha: float = 0.02) -> UeSchedState:
    """Exponential moving average of served throughput."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    avg = (1 - alpha) * state.avg_throughput + alpha * realised_rate
    return replace(state, avg_throughput=max(avg, AVG_FLOOR))
