"""
MU-MIMO driven reassignment of UEs between neighbouring small cells.

The mechanism runs once per snapshot on a centralised controller:

1. keep UEs that cannot already pair in their own cell and expect a gain
   of more than ``tau`` bits/RB from MU-MIMO in some neighbour;
2. look for a semi-orthogonal, high-enough-SINR target UE in each such
   neighbour;
3. pick the minimum set of active cells still able to serve every UE;
4. move every UE of a non-selected cell to a selected neighbour;
5. put the emptied cells to sleep.

Rates used here are per-UE expected rates ``(r1, r2)`` per (UE, cell):
SU and two-layer MU. Spectral efficiency in bits/RB is ``n * r_n``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .link import MuAdjustParams, expected_rate
from .network import NetworkState
from .phy import codebook_correlation
from .setcover import is_cover, solve_set_cover_exact, solve_set_cover_greedy

SOLVERS = {"exact": solve_set_cover_exact, "greedy": solve_set_cover_greedy}


@dataclass(frozen=True)
class Move:
    ue: int
    from_cell: int
    to_cell: int
    target_ue: int


@dataclass
class ReassignmentPlan:
    moves: list = field(default_factory=list)
    cells_to_sleep: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.moves) or bool(self.cells_to_sleep)

    def to_dict(self) -> dict:
        return {
            "moves": [{"ue": m.ue, "from_cell": m.from_cell, "to_cell": m.to_cell,
                       "target_ue": m.target_ue} for m in self.moves],
            "cells_to_sleep": list(self.cells_to_sleep),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReassignmentPlan":
        return cls([Move(m["ue"], m["from_cell"], m["to_cell"], m["target_ue"]) for m in d["moves"]],
                   list(d["cells_to_sleep"]))


def rate_table(state: NetworkState, mu_params: Optional[MuAdjustParams] = None) -> dict:
    """(ue, cell) -> (r1, r2) from the serving and target reports held by ``state``."""
    params = mu_params or MuAdjustParams()
    rates = {}
    for k, csi in state.serving_csi.items():
        rates[(k, csi.enb_id)] = (expected_rate(csi, 1, params), expected_rate(csi, 2, params))
    for (k, e), csi in state.target_csi.items():
        rates[(k, e)] = (expected_rate(csi, 1, params), expected_rate(csi, 2, params))
    return rates


def _semi_orth(pmi_a: int, pmi_b: int, epsilon: float) -> bool:
    return codebook_correlation()[pmi_a, pmi_b] < epsilon


def has_local_partner(state: NetworkState, ue: int, epsilon: float) -> bool:
    """I_{k,O}: another UE of the serving cell has a semi-orthogonal precoder."""
    mine = state.serving_csi[ue].pmi
    return any(
        _semi_orth(mine, state.serving_csi[j].pmi, epsilon)
        for j in state.attached(int(state.serving[ue]))
        if j != ue
    )


def gain_targets(state: NetworkState, rates: Mapping, ue: int, tau: float) -> list[int]:
    """Neighbour cells where 2*r2(T) - r1(O) > tau."""
    r1_o = rates[(ue, int(state.serving[ue]))][0]
    out = []
    for e in range(state.n_cells):
        if e == state.serving[ue] or not state.active[e] or (ue, e) not in rates:
            continue
        if 2 * rates[(ue, e)][1] - r1_o > tau:
            out.append(e)
    return out


def select_considered_ues(state: NetworkState, rates: Mapping, tau: Optional[float] = None,
                          epsilon: float = 0.1) -> list[int]:
    tau = state.tau if tau is None else tau
    out = []
    for k in range(state.n_ue):
        r1_o, r2_o = rates[(k, int(state.serving[k]))]
        removable = 2 * r2_o * has_local_partner(state, k, epsilon) > r1_o
        if not removable and gain_targets(state, rates, k, tau):
            out.append(k)
    return out


def find_target_ues(state: NetworkState, considered, rates: Mapping, epsilon: float = 0.1,
                    sinr_floor_db: float = 0.0, tau: Optional[float] = None) -> dict:
    """Considered UE -> [(target cell, target UE), ...]; only non-empty lists are kept."""
    tau = state.tau if tau is None else tau
    floor = 10 ** (sinr_floor_db / 10)
    out = {}
    for k in considered:
        found = []
        for t in gain_targets(state, rates, k, tau):
            pmi_kt = state.target_csi[(k, t)].pmi
            for j in state.attached(t):
                csi_j = state.serving_csi[j]
                if _semi_orth(pmi_kt, csi_j.pmi, epsilon) and csi_j.wideband_su_cqi >= floor:
                    found.append((t, j))
        if found:
            out[k] = found
    return out


def build_coverage_sets(state: NetworkState, reassignable: Mapping) -> dict:
    """f(k): the serving cell plus every cell holding a target UE for k."""
    cov = {k: {int(state.serving[k])} for k in range(state.n_ue)}
    for k, targets in reassignable.items():
        cov[k] |= {t for t, _ in targets}
    return cov


def build_plan(state: NetworkState, cover, reassignable: Mapping, rates: Mapping) -> ReassignmentPlan:
    """Move every UE off the cells left out of ``cover``.

    Each displaced UE goes to the in-cover target cell with the highest
    2*r2 (lowest id on ties) and is paired with that cell's target UE of
    highest wideband SINR.
    """
    cover = set(cover)
    sleep = [e for e in range(state.n_cells) if state.active[e] and e not in cover]
    moves = []
    for e in sleep:
        for k in state.attached(e):
            options = [(t, j) for t, j in reassignable.get(k, ()) if t in cover]
            if not options:
                raise ValueError("invalid cover")
            cells = sorted({t for t, _ in options})
            t_best = max(cells, key=lambda t: (2 * rates[(k, t)][1], -t))
            tues = sorted(j for t, j in options if t == t_best)
            j_best = max(tues, key=lambda j: (state.serving_csi[j].wideband_su_cqi, -j))
            moves.append(Move(k, e, t_best, j_best))
    return ReassignmentPlan(moves, sleep)


def validate_plan(state: NetworkState, plan: ReassignmentPlan) -> None:
    seen = set()
    sleeping = set(plan.cells_to_sleep)
    for m in plan.moves:
        if m.ue in seen:
            raise ValueError(f"UE {m.ue} moved twice")
        seen.add(m.ue)
        if not 0 <= m.ue < state.n_ue or state.serving[m.ue] != m.from_cell:
            raise ValueError(f"UE {m.ue} is not served by cell {m.from_cell}")
        if m.to_cell in sleeping or not state.active[m.to_cell]:
            raise ValueError(f"cell {m.to_cell} cannot receive UEs")
    for e in sleeping:
        if not 0 <= e < state.n_cells:
            raise ValueError(f"unknown cell {e}")
        if any(k not in seen for k in state.attached(e)):
            raise ValueError(f"cell {e} would sleep with UEs attached")


def apply_plan(state: NetworkState, plan: ReassignmentPlan) -> NetworkState:
    """New state with moves applied and emptied cells asleep.

    CSI held by the old state is dropped; it no longer matches the
    interference picture.
    """
    validate_plan(state, plan)
    new = NetworkState(state.serving.copy(), state.active.copy(), state.tau)
    for m in plan.moves:
        new.serving[m.ue] = m.to_cell
    new.active[list(plan.cells_to_sleep)] = False
    new.validate()
    return new


@dataclass
class MechanismResult:
    considered: list
    reassignable: dict
    coverage: dict
    cover: set
    plan: ReassignmentPlan


def run_mechanism(state: NetworkState, rates: Mapping, tau: Optional[float] = None,
                  epsilon: float = 0.1, sinr_floor_db: float = 0.0,
                  solver: str = "exact") -> MechanismResult:
    """Steps A-D; apply the returned plan to execute step E."""
    tau = state.tau if tau is None else tau
    considered = select_considered_ues(state, rates, tau, epsilon)
    reassignable = find_target_ues(state, considered, rates, epsilon, sinr_floor_db, tau)
    coverage = build_coverage_sets(state, reassignable)
    cells = [e for e in range(state.n_cells) if state.active[e]]
    cover = SOLVERS[solver](coverage, cells)
    assert is_cover(cover, coverage)
    plan = build_plan(state, cover, reassignable, rates)
    return MechanismResult(considered, reassignable, coverage, cover, plan)
