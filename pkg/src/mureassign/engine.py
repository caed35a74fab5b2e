"""
Monte Carlo snapshot driver.

A snapshot drops a deployment and its UEs, schedules ``tti_before`` TTIs,
runs the reassignment mechanism once, and schedules ``tti_after`` more
TTIs on the new network state. CSI used in TTI ``t`` is measured on the
channel of TTI ``t - feedback_delay``.

Every random draw comes from a named sub-stream of the snapshot seed, so
two configurations run on the same seed see identical deployments,
channels and interferer precoders. A tau sweep therefore shares its
pre-reassignment phase, which :func:`simulate_taus` exploits.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import link, phy, scenario
from .config import SimConfig
from .energy import network_power
from .link import MuAdjustParams, rate_from_sinr
from .network import NetworkState
from .radio import RadioSnapshot, subband_sizes
from .reassignment import apply_plan, rate_table, run_mechanism
from .scheduler import AVG_FLOOR, UeSchedState, schedule_tti, update_avg_throughput

# sub-stream identifiers
_DEPLOY, _DROP, _FADING, _ITF = 1, 2, 3, 4
MAX_LAYOUT_ATTEMPTS = 20


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass
class SnapshotMetrics:
    seed: int
    scenario: str
    ues_per_cell: int
    tau: float
    n_cells: int
    n_deactivated: int
    deactivated_fraction: float
    power_before: float
    power_after: float
    power_saved_fraction: float
    reassignment_occurred: bool
    n_moves: int
    rue_tue_se_before: float  # NaN without a reassignment
    rue_tue_se_after: float
    se_gain_rue_tue: float
    mu_rb_fraction_before: float
    mu_rb_fraction: float
    throughput_before: float
    throughput_after: float
    sched_violations: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Prepared:
    """Everything random about a snapshot, drawn up front.

    Tests may build one by hand to drive the pipeline on a fixed channel.
    """

    cfg: SimConfig
    state: NetworkState
    radios: list  # index t + delay -> RadioSnapshot for TTI t
    delay: int
    dep: Optional[scenario.Deployment] = None


def _noise_var(cfg: SimConfig) -> float:
    dbm = cfg.noise_density_dbm_hz + 10 * math.log10(180e3) + cfg.noise_figure_db
    return float(scenario.dbm_to_w(dbm))


def _deploy(cfg: SimConfig, seed: int, attempt: int) -> scenario.Deployment:
    rng = substream(seed, _DEPLOY, attempt)
    if cfg.scenario == "dual_stripe":
        return scenario.generate_dual_stripe(
            cfg.dr, rng, cfg.small_cell_power_dbm, cfg.macro_power_dbm, cfg.macro_distance_m)
    return scenario.generate_outdoor(
        cfg.n_cells, (cfg.area_m, cfg.area_m), cfg.mean_isd_m, rng,
        cfg.small_cell_power_dbm, cfg.macro_power_dbm, cfg.macro_ring_radius_m)


def prepare(cfg: SimConfig, seed: int) -> Prepared:
    """Deployment, UE drop, initial association and all channel draws."""
    cfg = cfg.resolved()
    for attempt in range(MAX_LAYOUT_ATTEMPTS):
        dep = _deploy(cfg, seed, attempt)
        try:
            pos, budgets = scenario.drop_ues(dep, cfg.ues_per_cell, substream(seed, _DROP, attempt),
                                             cfg.shadowing_db)
            break
        except ValueError:
            continue
    else:
        raise ValueError("could not build a deployment meeting the UE quota")
    dep.ues = pos
    state = scenario.initial_assignment(dep, budgets, cfg.ues_per_cell)

    n_rb = cfg.n_rb
    sb = subband_sizes(n_rb, cfg.subband_rbs)
    p_rb = budgets.tx_power / n_rb
    amplitude = np.sqrt(p_rb[None, :] * budgets.gain())
    noise = _noise_var(cfg)
    delay = cfg.feedback_delay
    radios = []
    for t in range(-delay, cfg.tti_before + cfg.tti_after):
        h = scenario.fading_tensor(amplitude, len(sb), substream(seed, _FADING, t + delay))
        pmi = substream(seed, _ITF, t + delay).integers(0, 16, size=(dep.n_enb, len(sb)))
        radios.append(RadioSnapshot(h, pmi, sb, noise, dep.n_cells))
    return Prepared(cfg, state, radios, delay, dep)


class _Phase:
    """Per-UE accumulators for one half of a snapshot."""

    def __init__(self, n_ue: int):
        self.bits = np.zeros(n_ue)
        self.occupancy = np.zeros(n_ue)
        self.rb_total = 0
        self.rb_mu = 0
        self.n_tti = 0
        self.violations = 0

    def se(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.occupancy > 0, self.bits / self.occupancy, np.nan)


def _realised_sinr(radio: RadioSnapshot, state: NetworkState, pmi: np.ndarray,
                   partner_pmi: np.ndarray) -> np.ndarray:
    """Post-SINR of every UE on every RB given its (possible) co-scheduled precoder.

    ``partner_pmi[k, rb]`` is -1 for SU transmission. Returns (n_ue, n_rb).
    """
    n_ue = state.n_ue
    ues = np.arange(n_ue)
    tx = radio.tx_mask(state.active).astype(float)
    mask = np.tile(tx, (n_ue, 1))
    mask[ues, state.serving] = 0.0
    b = np.transpose(radio.interference_vectors(), (0, 2, 1, 3))
    r_inv = phy.inv_hermitian(phy.covariance(b, mask[:, None, :], radio.noise_var))  # (k, s, 2, 2)
    h = radio.h[ues, state.serving]  # (k, s, N_r, N_t)
    all_a = np.einsum("ksij,cj->ksci", h, phy.codebook_matrix())  # (k, s, c, N_r)
    a = all_a[ues, :, pmi]  # (k, s, N_r)
    q_aa = phy.irc_sinr(a, r_inv)  # (k, s)
    ra = np.einsum("ksij,ksj->ksi", r_inv, a)
    q_ab = np.einsum("ksi,ksci->ksc", ra.conj(), all_a)
    q_bb = phy.irc_sinr(all_a, r_inv[:, :, None])
    # half power per layer; Sherman-Morrison on R + b b^H
    mu = 0.5 * q_aa[..., None] - 0.25 * np.abs(q_ab) ** 2 / (1.0 + 0.5 * q_bb)
    sb_of_rb = np.repeat(np.arange(len(radio.sb_sizes)), radio.sb_sizes)
    su_rb = q_aa[:, sb_of_rb]
    safe = np.where(partner_pmi >= 0, partner_pmi, 0)
    mu_rb = mu[ues[:, None], sb_of_rb[None, :], safe]
    return np.maximum(np.where(partner_pmi >= 0, mu_rb, su_rb), 0.0)


def _run_tti(prep: Prepared, t: int, state: NetworkState, avg: np.ndarray,
             params: MuAdjustParams, phase: _Phase) -> None:
    cfg = prep.cfg
    csi = link.serving_cell_csi(prep.radios[t], state)  # measured delay TTIs earlier
    radio = prep.radios[t + prep.delay]
    n_rb = radio.n_rb
    pmi = np.array([csi[k].pmi for k in range(state.n_ue)])
    partner = np.full((state.n_ue, n_rb), -1)
    scheduled = np.zeros((state.n_ue, n_rb), dtype=bool)
    for e in np.flatnonzero(state.active):
        members = state.attached(int(e))
        if not members:
            continue
        ues = [UeSchedState(k, float(avg[k]), csi[k]) for k in members]
        dec = schedule_tti(ues, cfg.epsilon, params)
        rbs = np.arange(n_rb)
        scheduled[dec.first, rbs] = True
        mu = dec.is_mu
        scheduled[dec.second[mu], rbs[mu]] = True
        partner[dec.first[mu], rbs[mu]] = pmi[dec.second[mu]]
        partner[dec.second[mu], rbs[mu]] = pmi[dec.first[mu]]
        phase.rb_total += n_rb
        phase.rb_mu += int(mu.sum())
        # scheduler invariants: epsilon bound on pairs, adopted objective >= rejected
        corr = phy.codebook_correlation()[pmi[dec.first[mu]], pmi[dec.second[mu]]]
        phase.violations += int(np.sum(corr >= cfg.epsilon))
        rej = dec.rejected_objective()
        ok = np.isnan(rej) | (dec.adopted_objective() >= rej)
        phase.violations += int(np.sum(~ok))

    sinr = _realised_sinr(radio, state, pmi, partner)
    rate = np.where(scheduled, rate_from_sinr(sinr), 0.0)
    n_mu = np.where(partner >= 0, 2, 1)
    phase.bits += rate.sum(axis=1)
    phase.occupancy += np.where(scheduled, 1.0 / n_mu, 0.0).sum(axis=1)
    phase.n_tti += 1
    served = rate.mean(axis=1)
    for k in range(state.n_ue):
        avg[k] = update_avg_throughput(UeSchedState(k, float(avg[k]), csi[k]), served[k],
                                       cfg.pf_alpha).avg_throughput


def _pair_se(se_pre: np.ndarray, se_post: np.ndarray, pairs: Sequence[tuple]) -> tuple:
    """Mean (RUE, TUE) spectral efficiency before and after.

    A UE never scheduled in a phase has no SE; its pair is left out of
    both averages so the two stay comparable.
    """
    if not pairs:
        return math.nan, math.nan
    idx = np.array(pairs)
    before = se_pre[idx].mean(axis=1)
    after = se_post[idx].mean(axis=1)
    ok = np.isfinite(before) & np.isfinite(after)
    if not ok.any():
        return math.nan, math.nan
    return float(before[ok].mean()), float(after[ok].mean())


def simulate_taus(cfg: SimConfig, seed: int, taus: Iterable[float],
                  return_details: bool = False):
    """Run one snapshot for several thresholds sharing every random draw.

    Returns ``{tau: SnapshotMetrics}``; with ``return_details`` also
    ``{tau: MechanismResult}``.
    """
    return simulate_prepared(prepare(cfg, seed), taus, seed, return_details)


def simulate_prepared(prep: Prepared, taus: Iterable[float], seed: int = 0,
                      return_details: bool = False):
    cfg = prep.cfg
    params = MuAdjustParams(cfg.delta_mui, 2)
    state0 = prep.state
    n_ue = state0.n_ue
    avg = np.full(n_ue, AVG_FLOOR)
    pre = _Phase(n_ue)
    for t in range(cfg.tti_before):
        _run_tti(prep, t, state0, avg, params, pre)

    # reassignment decision on CSI from the last pre-reassignment TTI
    radio_dec = prep.radios[cfg.tti_before - 1 + prep.delay]
    decision = state0.copy()
    decision.serving_csi = link.serving_cell_csi(radio_dec, decision)
    decision.target_csi = link.all_target_csi(radio_dec, decision)
    rates = rate_table(decision, params)
    energy = cfg.energy_params()
    p_before, _ = network_power(state0.active, energy)
    se_pre = pre.se()
    overhead = (1 - cfg.overhead_fraction) if cfg.feedback_overhead else 1.0

    out, details = {}, {}
    for tau in taus:
        res = run_mechanism(decision, rates, tau, cfg.epsilon, cfg.sinr_floor_db, cfg.solver)
        state1 = apply_plan(decision, res.plan)
        post = _Phase(n_ue)
        avg1 = avg.copy()
        for t in range(cfg.tti_before, cfg.tti_before + cfg.tti_after):
            _run_tti(prep, t, state1, avg1, params, post)
        p_after, _ = network_power(state1.active, energy)
        pairs = [(m.ue, m.target_ue) for m in res.plan.moves]
        se_b, se_a = _pair_se(se_pre, post.se(), pairs)
        n_sleep = len(res.plan.cells_to_sleep)
        out[tau] = SnapshotMetrics(
            seed=int(seed), scenario=cfg.scenario, ues_per_cell=cfg.ues_per_cell, tau=float(tau),
            n_cells=state0.n_cells, n_deactivated=n_sleep,
            deactivated_fraction=n_sleep / state0.n_cells,
            power_before=p_before, power_after=p_after,
            power_saved_fraction=(p_before - p_after) / p_before,
            reassignment_occurred=bool(res.plan.moves), n_moves=len(res.plan.moves),
            rue_tue_se_before=se_b, rue_tue_se_after=se_a, se_gain_rue_tue=se_a - se_b,
            mu_rb_fraction_before=pre.rb_mu / pre.rb_total,
            mu_rb_fraction=post.rb_mu / post.rb_total,
            throughput_before=overhead * float(pre.bits.sum()) / pre.n_tti,
            throughput_after=overhead * float(post.bits.sum()) / post.n_tti,
            sched_violations=pre.violations + post.violations,
        )
        details[tau] = res
    return (out, details) if return_details else out


def run_snapshot(cfg: SimConfig, seed: int) -> SnapshotMetrics:
    return simulate_taus(cfg, seed, [cfg.tau])[cfg.tau]


# -- aggregation ------------------------------------------------------------

SUMMARY_FIELDS = (
    "deactivated_fraction", "power_saved_fraction", "power_before", "power_after",
    "rue_tue_se_before", "rue_tue_se_after", "se_gain_rue_tue",
    "mu_rb_fraction_before", "mu_rb_fraction", "reassignment_occurred",
    "throughput_before", "throughput_after",
)


@dataclass
class Stat:
    mean: float
    ci95: float  # half-width, 1.96 * standard error
    n: int
    degenerate: bool = False  # fewer than two samples, ci95 carries no information

    @classmethod
    def of(cls, values) -> "Stat":
        v = np.asarray([x for x in values if not (isinstance(x, float) and math.isnan(x))], dtype=float)
        if len(v) == 0:
            return cls(math.nan, math.nan, 0, True)
        if len(v) == 1:
            return cls(float(v[0]), 0.0, 1, True)
        return cls(float(v.mean()), float(1.96 * v.std(ddof=1) / math.sqrt(len(v))), len(v))


@dataclass
class RunSummary:
    scenario: str
    ues_per_cell: int
    tau: float
    n_iterations: int
    seed_base: int
    stats: dict = field(default_factory=dict)
    per_cell_saving_deployed_w: float = math.nan
    per_cell_saving_deactivated_w: float = math.nan
    sched_violations: int = 0

    @classmethod
    def from_metrics(cls, cfg: SimConfig, metrics: Sequence[SnapshotMetrics], seed_base: int) -> "RunSummary":
        stats = {f: Stat.of([float(getattr(m, f)) for m in metrics]) for f in SUMMARY_FIELDS}
        saved = [m.power_before - m.power_after for m in metrics]
        cells = sum(m.n_cells for m in metrics)
        slept = sum(m.n_deactivated for m in metrics)
        return cls(
            scenario=cfg.scenario, ues_per_cell=cfg.ues_per_cell, tau=float(cfg.tau),
            n_iterations=len(metrics), seed_base=seed_base, stats=stats,
            per_cell_saving_deployed_w=float(sum(saved) / cells) if cells else math.nan,
            per_cell_saving_deactivated_w=float(sum(saved) / slept) if slept else math.nan,
            sched_violations=int(sum(m.sched_violations for m in metrics)),
        )

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "stats"}
        d["stats"] = {k: asdict(v) for k, v in self.stats.items()}
        return d


def _sweep_job(args):
    cfg, seed, taus = args
    return seed, simulate_taus(cfg, seed, taus)


def run_sweep(grid: Sequence[SimConfig], n_iterations: int, seed_base: int = 0,
              workers: int = 1, keep_metrics: bool = False):
    """Aggregate ``n_iterations`` snapshots per grid point.

    Seeds ``seed_base .. seed_base + n - 1`` are shared by every grid
    point. Grid points differing only in ``tau`` reuse one simulation of
    the pre-reassignment phase.

    Returns a list of :class:`RunSummary` in grid order, plus the raw
    per-snapshot metrics keyed by grid index when ``keep_metrics``.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    groups: dict = {}
    for i, cfg in enumerate(grid):
        groups.setdefault(cfg.replace(tau=0.0), []).append(i)
    jobs = []
    for key, idx in groups.items():
        taus = sorted({grid[i].tau for i in idx})
        for s in range(seed_base, seed_base + n_iterations):
            jobs.append((key, s, taus))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_job, jobs, chunksize=4))
    else:
        results = [_sweep_job(j) for j in jobs]

    per_point: dict = {i: [] for i in range(len(grid))}
    for (key, _, _), (seed, by_tau) in zip(jobs, results):
        for i in groups[key]:
            per_point[i].append(by_tau[grid[i].tau])
    summaries = [RunSummary.from_metrics(grid[i].resolved(), per_point[i], seed_base)
                 for i in range(len(grid))]
    return (summaries, per_point) if keep_metrics else summaries
