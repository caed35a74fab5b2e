"""
Acceptance checks, one test per criterion.

Each test records a single ``[criterion N] PASS|FAIL ...`` line with the
measured quantity and its tolerance, then asserts. The lines are printed
together at the end of the session. Run on its own with

    pytest tests/test_acceptance.py -v -s
"""

import math
import sys
import time

import numpy as np
import pytest

from mureassign import cli, phy
from mureassign.config import SimConfig
from mureassign.energy import FEMTO, PICO, enb_power
from mureassign.engine import simulate_taus
from mureassign.link import MuAdjustParams, mu_cqi_adjust
from mureassign.phy import Interferer
from mureassign.setcover import is_cover, solve_set_cover_exact, solve_set_cover_greedy

TAUS = (-3.0, -1.5, 0.0, 1.5)
N_INDOOR = 500
N_OUTDOOR = 300
N_UPC4 = 300


RESULTS = {}


def report(n, ok, detail):
    # printed live under -s; conftest repeats the lines in the terminal summary
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _collect(cfg, n, taus):
    t0 = time.perf_counter()
    per = {t: [] for t in taus}
    for seed in range(n):
        for t, m in simulate_taus(cfg, seed, taus).items():
            per[t].append(m)
    return per, time.perf_counter() - t0


@pytest.fixture(scope="module")
def indoor():
    return _collect(SimConfig(scenario="dual_stripe", dr=0.2, ues_per_cell=1), N_INDOOR, TAUS)


@pytest.fixture(scope="module")
def outdoor():
    return _collect(SimConfig(scenario="outdoor", n_cells=21, ues_per_cell=1), N_OUTDOOR, (-1.5, 0.0, 1.5))


@pytest.fixture(scope="module")
def indoor_upc4():
    return _collect(SimConfig(scenario="dual_stripe", dr=0.2, ues_per_cell=4), N_UPC4, (-1.5,))


def mean(ms, field):
    v = [float(getattr(m, field)) for m in ms]
    v = [x for x in v if not math.isnan(x)]
    return float(np.mean(v)) if v else math.nan


def test_c01_arithmetic_oracles():
    t0 = time.perf_counter()
    errs = [
        abs(mu_cqi_adjust(10.0, MuAdjustParams(0.05, 2)) - 4.0),
        abs(enb_power(FEMTO, True) - 10.0),
        abs(enb_power(FEMTO, False) - 5.8),
        abs(enb_power(PICO, True) - 15.68),
    ]
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-12 and dt < 1.0
    report(1, ok, f"max abs error {max(errs):.3g} (tol 1e-12), {dt * 1e3:.1f} ms (< 1 s)")
    assert ok


def _brute_cover(cov, cells):
    import itertools
    for r in range(len(cells) + 1):
        for combo in itertools.combinations(sorted(cells), r):
            if is_cover(combo, cov):
                return set(combo)


def test_c02_set_cover():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        n_cells = int(rng.integers(1, 13))
        n_ue = int(rng.integers(1, 13))
        cov = {k: set(int(c) for c in rng.choice(n_cells, int(rng.integers(1, min(4, n_cells) + 1)),
                                                  replace=False)) for k in range(n_ue)}
        cells = list(range(n_cells))
        exact = solve_set_cover_exact(cov, cells)
        greedy = solve_set_cover_greedy(cov, cells)
        ok = (exact == _brute_cover(cov, cells) and is_cover(greedy, cov)
              and len(exact) <= len(greedy) <= (1 + math.log(n_ue)) * len(exact))
        bad += not ok
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 30
    report(2, ok, f"{200 - bad}/200 instances correct, {dt:.2f} s (< 30 s)")
    assert ok


def test_c03_sinr_physics():
    rng = np.random.default_rng(3)
    cb = phy.codebook_matrix()
    t0 = time.perf_counter()
    bad_mf = bad_rm = 0

    def draw():
        return (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) / np.sqrt(2)

    for _ in range(1000):
        h = draw()
        wk = cb[rng.integers(16)]
        wj = cb[rng.integers(16)] if rng.random() < 0.5 else None
        itf = [Interferer(draw(), cb[rng.integers(16)]) for _ in range(int(rng.integers(1, 4)))]
        noise = float(10 ** rng.uniform(-2, 0))
        g = phy.mmse_irc_filter(h, wk, wj, itf, noise)
        s = phy.post_sinr(g, h, wk, wj, itf, noise)
        if s < phy.post_sinr((h @ wk).conj(), h, wk, wj, itf, noise) * (1 - 1e-9):
            bad_mf += 1
        for i in range(len(itf)):
            red = list(itf)
            red[i] = Interferer(itf[i].channel, itf[i].precoder, False)
            if phy.post_sinr(phy.mmse_irc_filter(h, wk, wj, red, noise), h, wk, wj, red, noise) < s * (1 - 1e-9):
                bad_rm += 1
    dt = time.perf_counter() - t0
    ok = bad_mf == 0 and bad_rm == 0 and dt < 10
    report(3, ok, f"IRC<MF violations {bad_mf}, removal violations {bad_rm}, {dt:.2f} s (< 10 s)")
    assert ok


def test_c04_tau_monotonicity(indoor):
    per, dt = indoor
    n = 300
    path_bad = sum(
        not all(per[a][i].deactivated_fraction >= per[b][i].deactivated_fraction for a, b in zip(TAUS, TAUS[1:]))
        for i in range(n)
    )
    means = [mean(per[t][:n], "deactivated_fraction") for t in TAUS]
    ok = path_bad == 0 and all(a >= b for a, b in zip(means, means[1:]))
    report(4, ok, f"pathwise violations {path_bad}/{n}; means "
                  + ", ".join(f"tau={t:g}: {100 * m:.2f}%" for t, m in zip(TAUS, means))
                  + f" (non-increasing); shared run {dt:.0f} s")
    assert ok


def test_c05_indoor_deactivation(indoor):
    per, _ = indoor
    m = mean(per[-1.5], "deactivated_fraction")
    ok = 0.15 <= m <= 0.45
    report(5, ok, f"indoor mean deactivated {100 * m:.2f}% over {len(per[-1.5])} iterations (tol [15%, 45%])")
    assert ok


def test_c06_outdoor_deactivation(outdoor):
    per, dt = outdoor
    m = mean(per[-1.5], "deactivated_fraction")
    ok = 0.20 <= m <= 0.55
    report(6, ok, f"outdoor mean deactivated {100 * m:.2f}% over {len(per[-1.5])} iterations "
                  f"(tol [20%, 55%]); run {dt:.0f} s")
    assert ok


def test_c07_power_savings(indoor, outdoor):
    ind = indoor[0][-1.5]
    out = outdoor[0][-1.5]
    si = mean(ind, "power_saved_fraction")
    so = mean(out, "power_saved_fraction")
    mono = all(m.power_after <= m.power_before for m in ind + out)
    ok = 0.06 <= si <= 0.20 and 0.08 <= so <= 0.24 and mono
    report(7, ok, f"power saving indoor {100 * si:.2f}% (tol [6%, 20%]), outdoor {100 * so:.2f}% "
                  f"(tol [8%, 24%]), power_after <= power_before on all snapshots: {mono}")
    assert ok


def test_c08_ues_per_cell(indoor, indoor_upc4):
    p1 = mean(indoor[0][-1.5], "reassignment_occurred")
    p4 = mean(indoor_upc4[0][-1.5], "reassignment_occurred")
    d4 = mean(indoor_upc4[0][-1.5], "deactivated_fraction")
    ok = p4 < 0.10 and p4 < p1
    report(8, ok, f"reassignment probability 4 UEs/cell {100 * p4:.2f}% (tol < 10%), "
                  f"1 UE/cell {100 * p1:.2f}%; deactivated at 4 UEs/cell {100 * d4:.2f}%")
    assert ok


def test_c09_se_gains(indoor, outdoor):
    vals = {}
    for name, (per, _) in (("indoor", indoor), ("outdoor", outdoor)):
        for t in (0.0, 1.5):
            ms = per[t][:300]
            vals[(name, t)] = (mean(ms, "se_gain_rue_tue"), sum(not math.isnan(m.se_gain_rue_tue) for m in ms))
    ok = all(v[0] > 0 for v in vals.values())
    report(9, ok, "mean RUE/TUE SE gain (bits/RB, >0): " + ", ".join(
        f"{n} tau={t:g}: {v[0]:+.3f} (n={v[1]})" for (n, t), v in vals.items()))
    assert ok


def test_c10_scheduler_invariants(indoor, indoor_upc4):
    v1 = sum(m.sched_violations for ms in indoor[0].values() for m in ms)
    v4 = sum(m.sched_violations for ms in indoor_upc4[0].values() for m in ms)
    mu = mean(indoor_upc4[0][-1.5], "mu_rb_fraction_before")
    ok = v1 == 0 and v4 == 0
    report(10, ok, f"violations 1 UE/cell run {v1}, 4 UEs/cell run {v4} (tol 0); "
                   f"MU RB share before reassignment at 4 UEs/cell {100 * mu:.1f}%")
    assert ok


def test_c11_determinism(tmp_path):
    args = ["run", "--scenario", "dual_stripe", "--dr", "0.2", "--ues-per-cell", "1", "--tau", "-1.5",
            "--iterations", str(N_INDOOR), "--seed", "0"]
    t0 = time.perf_counter()
    codes = [cli.main(args + ["--output-dir", str(tmp_path / d)]) for d in ("a", "b")]
    dt = time.perf_counter() - t0
    a = (tmp_path / "a" / "summary.csv").read_bytes()
    b = (tmp_path / "b" / "summary.csv").read_bytes()
    ok = codes == [0, 0] and a == b
    report(11, ok, f"two runs of {N_INDOOR} iterations: CSV byte-identical {a == b}, exit codes {codes}, {dt:.0f} s")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
