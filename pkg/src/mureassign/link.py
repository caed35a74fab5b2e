"""
Link abstraction: CQI quantisation, the MU-MIMO CQI adjustment, the
residual-MUI estimate and the SINR-to-rate mapping.

Rates are in bits per symbol per RB. A UE sharing an RB with ``n_mu - 1``
others gets ``rate_from_sinr(mu_cqi_adjust(cqi, n_mu))``; its spectral
efficiency in bits/RB is that rate times ``n_mu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import phy
from .radio import RadioSnapshot

RATE_SLOPE = 0.75
RATE_CAP = 5.55
CQI_MIN_DB = -10.0
CQI_MAX_DB = 30.0


@dataclass(frozen=True)
class MuAdjustParams:
    delta_mui: float = 0.05
    n_mu: int = 2

    def __post_init__(self):
        if self.delta_mui < 0:
            raise ValueError("delta_mui must be >= 0")
        if self.n_mu not in (1, 2):
            raise ValueError("n_mu must be 1 or 2")


@dataclass
class CsiReport:
    """Rank-1 CSI one UE reports for one eNB.

    ``su_cqi_per_rb`` holds quantised linear SINRs without MUI;
    ``wideband_su_cqi`` is the SINR whose rate equals the mean per-RB rate.
    """

    ue_id: int
    enb_id: int
    pmi: int
    su_cqi_per_rb: np.ndarray
    wideband_su_cqi: float

    def __post_init__(self):
        cqi = np.asarray(self.su_cqi_per_rb, dtype=float)
        if np.any(cqi < 0) or not np.all(np.isfinite(cqi)):
            raise ValueError("CQI values must be finite and >= 0")
        self.su_cqi_per_rb = cqi


def quantize_cqi(sinr):
    """Snap a linear SINR to the 1-dB CQI grid on [-10, 30] dB."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("invalid SINR")
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(s)
    q = 10 ** (np.clip(np.round(db), CQI_MIN_DB, CQI_MAX_DB) / 10)
    return float(q) if q.ndim == 0 else q


def mu_cqi_adjust(cqi_su, params: MuAdjustParams = MuAdjustParams()):
    """SU CQI -> per-UE CQI when sharing the RB with n_mu - 1 others.

    Written as c / (n + delta*(n-1)*c), which equals
    1 / (n/c + delta*(n-1)) and is exact at n = 1 and at delta = 0.
    """
    c = np.asarray(cqi_su, dtype=float)
    n = params.n_mu
    out = c / (n + params.delta_mui * (n - 1) * c)
    return float(out) if out.ndim == 0 else out


def rate_from_sinr(sinr):
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("invalid SINR")
    r = np.minimum(RATE_SLOPE * np.log2(1.0 + s), RATE_CAP)
    return float(r) if r.ndim == 0 else r


def sinr_from_rate(rate):
    """Inverse of :func:`rate_from_sinr` below the cap."""
    r = np.minimum(np.asarray(rate, dtype=float), RATE_CAP)
    s = 2.0 ** (r / RATE_SLOPE) - 1.0
    return float(s) if s.ndim == 0 else s


def expected_rate(
    csi: CsiReport,
    n_mu: int = 1,
    params: Optional[MuAdjustParams] = None,
    *,
    ue: Optional[int] = None,
    enb: Optional[int] = None,
) -> float:
    """Per-UE rate averaged over RBs when co-scheduled as one of ``n_mu``."""
    if (ue is not None and ue != csi.ue_id) or (enb is not None and enb != csi.enb_id):
        raise ValueError("CSI report does not belong to this UE/eNB pair")
    delta = 0.05 if params is None else params.delta_mui
    cqi = mu_cqi_adjust(csi.su_cqi_per_rb, MuAdjustParams(delta, n_mu))
    return float(np.mean(rate_from_sinr(cqi)))


# -- CSI measurement --------------------------------------------------------


def measure(radio: RadioSnapshot, ues, enbs, tx_on) -> tuple[np.ndarray, np.ndarray]:
    """Wideband PMI and unquantised per-subband SU SINR for many links.

    Parameters
    ----------
    ues, enbs : int arrays of length P
        The measured links.
    tx_on : bool array (P, n_enb)
        Which eNBs interfere with each measurement. Entries for the
        measured eNB itself are ignored.

    Returns
    -------
    pmi : (P,) int
    sinr : (P, n_sb) float
    """
    ues = np.asarray(ues, dtype=int)
    enbs = np.asarray(enbs, dtype=int)
    p = len(ues)
    mask = np.array(tx_on, dtype=float, copy=True)
    mask[np.arange(p), enbs] = 0.0
    b = radio.interference_vectors()[ues]  # (P, n_enb, n_sb, N_r)
    b = np.transpose(b, (0, 2, 1, 3))  # (P, n_sb, n_enb, N_r)
    r = phy.covariance(b, mask[:, None, :], radio.noise_var)
    h = radio.h[ues, enbs]  # (P, n_sb, N_r, N_t)
    sinr = phy.codebook_sinr(h, r)  # (P, n_sb, n_cb)
    metric = np.einsum("psc,s->pc", np.log2(1.0 + sinr), radio.sb_sizes)
    pmi = np.argmax(metric, axis=1)
    chosen = sinr[np.arange(p), :, pmi]
    return pmi, chosen


def make_reports(radio: RadioSnapshot, ues, enbs, pmi, sinr_sb) -> list[CsiReport]:
    cqi = quantize_cqi(radio.to_rb(np.asarray(sinr_sb)))
    cqi = np.atleast_2d(cqi)
    wb = sinr_from_rate(rate_from_sinr(cqi).mean(axis=1))
    return [
        CsiReport(int(k), int(e), int(w), cqi[i], float(wb[i]))
        for i, (k, e, w) in enumerate(zip(ues, enbs, pmi))
    ]


def serving_cell_csi(radio: RadioSnapshot, state, ues=None) -> dict[int, CsiReport]:
    """Report of each UE for its own cell; all other active eNBs interfere."""
    ues = np.arange(state.n_ue) if ues is None else np.asarray(ues, dtype=int)
    if len(ues) == 0:
        return {}
    enbs = state.serving[ues]
    tx = np.tile(radio.tx_mask(state.active), (len(ues), 1))
    pmi, sinr = measure(radio, ues, enbs, tx)
    return {r.ue_id: r for r in make_reports(radio, ues, enbs, pmi, sinr)}


def target_tx_mask(radio: RadioSnapshot, state, ue: int, target: int) -> np.ndarray:
    """Interferers for a target-cell report: original and target cells excluded."""
    tx = radio.tx_mask(state.active)
    tx[target] = False
    tx[state.serving[ue]] = False
    return tx


def target_cell_csi(radio: RadioSnapshot, state, ue: int, target: int) -> CsiReport:
    """Report of ``ue`` for a neighbouring small cell it might move to."""
    if not state.active[target]:
        raise ValueError("target asleep")
    if target == state.serving[ue]:
        raise ValueError("target is the serving cell")
    tx = target_tx_mask(radio, state, ue, target)[None, :]
    pmi, sinr = measure(radio, [ue], [target], tx)
    return make_reports(radio, [ue], [target], pmi, sinr)[0]


def all_target_csi(radio: RadioSnapshot, state) -> dict[tuple[int, int], CsiReport]:
    """Target-cell reports for every UE towards every other active small cell."""
    pairs = [
        (k, e)
        for k in range(state.n_ue)
        for e in range(state.n_cells)
        if state.active[e] and e != state.serving[k]
    ]
    if not pairs:
        return {}
    ues = np.array([k for k, _ in pairs])
    enbs = np.array([e for _, e in pairs])
    tx = np.tile(radio.tx_mask(state.active), (len(pairs), 1))
    tx[np.arange(len(pairs)), state.serving[ues]] = False
    pmi, sinr = measure(radio, ues, enbs, tx)
    return {(r.ue_id, r.enb_id): r for r in make_reports(radio, ues, enbs, pmi, sinr)}


# -- residual MUI -----------------------------------------------------------


def mui_ratio(h, w_k, w_j, noise_var: float, n_mu: int = 2) -> float:
    """Suppressed MUI power over SU signal power for one channel draw."""
    g = phy.mmse_irc_filter(h, w_k, co_sched=w_j, noise_var=noise_var)
    g = np.asarray(g)
    h = np.asarray(h)
    sig = abs(g @ h @ np.asarray(w_k)) ** 2
    mui = abs(g @ h @ np.asarray(w_j)) ** 2
    return float(mui / (n_mu * sig))


def estimate_delta_mui(
    n_samples: int = 20000,
    epsilon: float = 0.1,
    noise_var: float = 0.1,
    rng_seed: int = 0,
    n_mu: int = 2,
    n_rx: int = phy.N_RX,
) -> float:
    """Monte Carlo mean residual MUI ratio over semi-orthogonal pairs.

    Each draw takes an i.i.d. Rayleigh channel, lets the desired UE pick
    its SU-optimal precoder, and pairs it with a random codebook precoder
    whose correlation to it is below ``epsilon``.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    corr = phy.codebook_correlation()
    partners = corr < epsilon
    np.fill_diagonal(partners, False)
    if not partners.any():
        raise ValueError("epsilon too small for codebook")
    cb = phy.codebook_matrix()
    rng = np.random.default_rng(rng_seed)
    h = (rng.standard_normal((n_samples, n_rx, phy.N_TX))
         + 1j * rng.standard_normal((n_samples, n_rx, phy.N_TX))) / np.sqrt(2)
    gains = np.linalg.norm(np.einsum("nij,cj->nci", h, cb), axis=2)
    k_idx = np.argmax(gains, axis=1)
    has_partner = partners[k_idx].any(axis=1)
    u = rng.random(n_samples)
    j_idx = np.empty(n_samples, dtype=int)
    for n in range(n_samples):
        cand = np.flatnonzero(partners[k_idx[n]])
        j_idx[n] = cand[int(u[n] * len(cand))] if len(cand) else 0
    a = np.einsum("nij,nj->ni", h, cb[k_idx])
    b = np.einsum("nij,nj->ni", h, cb[j_idx])
    r = phy.covariance(b[:, None, :], None, noise_var)
    r_inv = phy.inv_hermitian(r)
    g = np.einsum("ni,nij->nj", a.conj(), r_inv)
    sig = np.abs(np.einsum("ni,ni->n", g, a)) ** 2
    mui = np.abs(np.einsum("ni,ni->n", g, b)) ** 2
    ratio = mui[has_partner] / (n_mu * sig[has_partner])
    return float(ratio.mean())
