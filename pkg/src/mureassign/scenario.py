"""
Deployment geometry and large-scale propagation.

Two layouts are provided: a single-storey dual-stripe residential block
with femtocells and one tri-sector macro site, and an outdoor picocell
area surrounded by a ring of tri-sector macro sites. Both return a
:class:`Deployment`; UEs are dropped separately so that every small cell
starts with the same number of attached users.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .network import NetworkState
from .phy import N_RX, N_TX, ChannelMatrix

APARTMENT = 10.0
STRIPE_APARTMENTS = 10
STREET = 10.0
INTERIOR_WALL_DB = 5.0
EXTERIOR_WALL_DB = 10.0
INDOOR_LOSS_DB_PER_M = 0.7
FREE_SPACE_1M_DB = 38.46  # 2 GHz
SECTOR_BEAMWIDTH_DEG = 70.0
SECTOR_FRONT_BACK_DB = 20.0


def dbm_to_w(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


def w_to_dbm(w):
    return 10 * np.log10(np.asarray(w, dtype=float)) + 30


@dataclass(frozen=True)
class Wall:
    x0: float
    y0: float
    x1: float
    y1: float
    exterior: bool = False

    @property
    def loss_db(self) -> float:
        return EXTERIOR_WALL_DB if self.exterior else INTERIOR_WALL_DB


@dataclass(frozen=True)
class SmallCell:
    id: int
    position: tuple
    max_tx_power: float  # W


@dataclass(frozen=True)
class MacroSector:
    id: int
    position: tuple
    tx_power: float  # W
    boresight_deg: float


@dataclass
class Deployment:
    """Small cells, macro interferers and (optionally) UEs.

    eNB ids are global: small cells take ``0..n_cells-1`` and macro
    sectors follow.
    """

    scenario: str
    small_cells: list
    macros: list
    bounds: tuple  # (xmin, ymin, xmax, ymax)
    walls: list = field(default_factory=list)
    buildings: list = field(default_factory=list)  # (xmin, ymin, xmax, ymax)
    power_class: str = "femto"
    ues: Optional[np.ndarray] = None

    @property
    def n_cells(self) -> int:
        return len(self.small_cells)

    @property
    def n_enb(self) -> int:
        return len(self.small_cells) + len(self.macros)

    @property
    def indoor(self) -> bool:
        return self.scenario == "dual_stripe"

    def enb_positions(self) -> np.ndarray:
        pts = [c.position for c in self.small_cells] + [m.position for m in self.macros]
        return np.array(pts, dtype=float).reshape(-1, 2)

    def enb_powers(self) -> np.ndarray:
        return np.array(
            [c.max_tx_power for c in self.small_cells] + [m.tx_power for m in self.macros]
        )

    def wall_array(self) -> np.ndarray:
        return np.array([[w.x0, w.y0, w.x1, w.y1, w.exterior] for w in self.walls],
                        dtype=float).reshape(-1, 5)

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "power_class": self.power_class,
            "bounds_m": list(self.bounds),
            "small_cells": [
                {"id": c.id, "x": c.position[0], "y": c.position[1],
                 "tx_power_dbm": round(float(w_to_dbm(c.max_tx_power)), 6)}
                for c in self.small_cells
            ],
            "macros": [
                {"id": m.id, "x": m.position[0], "y": m.position[1],
                 "tx_power_dbm": round(float(w_to_dbm(m.tx_power)), 6),
                 "boresight_deg": m.boresight_deg}
                for m in self.macros
            ],
            "walls": [
                {"x0": w.x0, "y0": w.y0, "x1": w.x1, "y1": w.y1, "loss_db": w.loss_db}
                for w in self.walls
            ],
            "buildings": [list(b) for b in self.buildings],
        }
        if self.ues is not None:
            out["ues"] = [{"id": i, "x": float(p[0]), "y": float(p[1])}
                          for i, p in enumerate(self.ues)]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Deployment":
        cells = [SmallCell(c["id"], (c["x"], c["y"]), float(dbm_to_w(c["tx_power_dbm"])))
                 for c in d["small_cells"]]
        macros = [MacroSector(m["id"], (m["x"], m["y"]), float(dbm_to_w(m["tx_power_dbm"])),
                              m["boresight_deg"]) for m in d["macros"]]
        walls = [Wall(w["x0"], w["y0"], w["x1"], w["y1"], w["loss_db"] >= EXTERIOR_WALL_DB)
                 for w in d["walls"]]
        ues = None
        if "ues" in d:
            ues = np.array([[u["x"], u["y"]] for u in d["ues"]], dtype=float).reshape(-1, 2)
        return cls(d["scenario"], cells, macros, tuple(d["bounds_m"]), walls,
                   [tuple(b) for b in d["buildings"]], d["power_class"], ues)


@dataclass(frozen=True)
class LinkBudget:
    ue_id: int
    enb_id: int
    pathloss_db: float
    shadowing_db: float
    rsrp: float  # W per antenna port


@dataclass
class LinkBudgets:
    """Large-scale gains of every UE<->eNB link, arrays of shape (n_ue, n_enb)."""

    pathloss_db: np.ndarray
    shadowing_db: np.ndarray
    tx_power: np.ndarray  # (n_enb,) W

    @property
    def rsrp(self) -> np.ndarray:
        port = self.tx_power / N_TX
        return port[None, :] * 10 ** (-(self.pathloss_db + self.shadowing_db) / 10)

    def gain(self) -> np.ndarray:
        """Linear power gain (pathloss and shadowing), no transmit power."""
        return 10 ** (-(self.pathloss_db + self.shadowing_db) / 10)

    def link(self, ue: int, enb: int) -> LinkBudget:
        return LinkBudget(ue, enb, float(self.pathloss_db[ue, enb]),
                          float(self.shadowing_db[ue, enb]), float(self.rsrp[ue, enb]))


# -- geometry ---------------------------------------------------------------


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def walls_crossed(tx, rx, walls: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Count interior and exterior walls strictly crossed by each tx->rx path.

    ``tx`` and ``rx`` broadcast against each other with a trailing axis of
    size 2; ``walls`` is an (n_w, 5) array of x0, y0, x1, y1, exterior.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    shape = np.broadcast_shapes(tx.shape, rx.shape)[:-1]
    if len(walls) == 0:
        z = np.zeros(shape, dtype=int)
        return z, z.copy()
    px, py = tx[..., 0, None], tx[..., 1, None]
    qx, qy = rx[..., 0, None], rx[..., 1, None]
    ax, ay, bx, by, ext = (walls[:, i] for i in range(5))
    dx, dy = qx - px, qy - py
    d1 = _cross(dx, dy, ax - px, ay - py)
    d2 = _cross(dx, dy, bx - px, by - py)
    ex, ey = bx - ax, by - ay
    d3 = _cross(ex, ey, px - ax, py - ay)
    d4 = _cross(ex, ey, qx - ax, qy - ay)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    ext = ext.astype(bool)
    n_ext = (hit & ext).sum(axis=-1)
    n_int = (hit & ~ext).sum(axis=-1)
    return np.broadcast_to(n_int, shape), np.broadcast_to(n_ext, shape)


def indoor_length(tx, rx, buildings: Sequence) -> np.ndarray:
    """Length of each tx->rx segment that lies inside any building rectangle."""
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = rx - tx
    length = np.hypot(d[..., 0], d[..., 1])
    total = np.zeros(np.broadcast_shapes(tx.shape, rx.shape)[:-1])
    for xmin, ymin, xmax, ymax in buildings:
        t0 = np.zeros_like(total)
        t1 = np.ones_like(total)
        for axis, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
            p = tx[..., axis] + np.zeros_like(total)
            v = d[..., axis] + np.zeros_like(total)
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo - p) / v
                tb = (hi - p) / v
            lo_t = np.where(v == 0, np.where((p >= lo) & (p <= hi), -np.inf, np.inf), np.minimum(ta, tb))
            hi_t = np.where(v == 0, np.where((p >= lo) & (p <= hi), np.inf, -np.inf), np.maximum(ta, tb))
            t0 = np.maximum(t0, lo_t)
            t1 = np.minimum(t1, hi_t)
        total += np.clip(t1 - t0, 0.0, None) * length
    return total


def distance(tx, rx) -> np.ndarray:
    d = np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float)
    return np.hypot(d[..., 0], d[..., 1])


def pathloss_indoor(tx, rx, walls, buildings: Optional[Sequence] = None) -> np.ndarray:
    """Simplified dual-stripe indoor pathloss in dB.

    38.46 + 20 log10(max(d, 1)) + 0.7 d_in + 5 dB per interior wall
    + 10 dB per exterior wall. ``d_in`` is the part of the path inside
    buildings; without ``buildings`` the whole path counts as indoor.
    """
    walls = walls if isinstance(walls, np.ndarray) else np.array(
        [[w.x0, w.y0, w.x1, w.y1, w.exterior] for w in walls], dtype=float).reshape(-1, 5)
    d = distance(tx, rx)
    d_in = d if buildings is None else indoor_length(tx, rx, buildings)
    n_int, n_ext = walls_crossed(tx, rx, walls)
    pl = (FREE_SPACE_1M_DB + 20 * np.log10(np.maximum(d, 1.0)) + INDOOR_LOSS_DB_PER_M * d_in
          + INTERIOR_WALL_DB * n_int + EXTERIOR_WALL_DB * n_ext)
    return pl if np.ndim(pl) else float(pl)


def pathloss_outdoor(tx, rx) -> np.ndarray:
    """Urban-micro NLOS pathloss, never below free space."""
    d = np.maximum(distance(tx, rx), 1e-3)
    umi = 140.7 + 36.7 * np.log10(d / 1000.0)
    fs = FREE_SPACE_1M_DB + 20 * np.log10(np.maximum(d, 1.0))
    pl = np.maximum(umi, fs)
    return pl if np.ndim(pl) else float(pl)


def pathloss_macro(tx, rx, walls=None) -> np.ndarray:
    """Macro-to-UE pathloss: 3GPP macro urban form plus any wall losses."""
    d = np.maximum(distance(tx, rx), 35.0)
    pl = 128.1 + 37.6 * np.log10(d / 1000.0)
    if walls is not None and len(walls):
        n_int, n_ext = walls_crossed(tx, rx, walls)
        pl = pl + INTERIOR_WALL_DB * n_int + EXTERIOR_WALL_DB * n_ext
    return pl


def sector_gain_db(tx, rx, boresight_deg: float) -> np.ndarray:
    d = np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float)
    ang = np.degrees(np.arctan2(d[..., 1], d[..., 0]))
    off = (ang - boresight_deg + 180.0) % 360.0 - 180.0
    return -np.minimum(12.0 * (off / SECTOR_BEAMWIDTH_DEG) ** 2, SECTOR_FRONT_BACK_DB)


def pathloss_matrix(dep: Deployment, ue_pos: np.ndarray) -> np.ndarray:
    """Pathloss (dB, macro antenna pattern included) of every UE<->eNB link."""
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 2)
    enb = dep.enb_positions()
    small = enb[: dep.n_cells]
    walls = dep.wall_array()
    u = ue_pos[:, None, :]
    if dep.indoor:
        pl_small = pathloss_indoor(small[None, :, :], u, walls, dep.buildings)
    else:
        pl_small = pathloss_outdoor(small[None, :, :], u)
    cols = [np.asarray(pl_small).reshape(len(ue_pos), dep.n_cells)]
    for m in dep.macros:
        p = np.asarray(m.position, dtype=float)
        pl = pathloss_macro(p, ue_pos, walls if dep.indoor else None)
        cols.append((pl - sector_gain_db(p, ue_pos, m.boresight_deg))[:, None])
    return np.concatenate(cols, axis=1)


# -- deployments ------------------------------------------------------------


def _macro_site(first_id: int, pos, power_w: float, base_deg: float) -> list:
    return [MacroSector(first_id + s, (float(pos[0]), float(pos[1])), power_w,
                        (base_deg + 120.0 * s) % 360.0) for s in range(3)]


def dual_stripe_geometry() -> tuple[list, list]:
    """Walls and building rectangles of the two-building, two-stripe block."""
    width = APARTMENT * STRIPE_APARTMENTS
    depth = 2 * APARTMENT
    walls, buildings = [], []
    for b in range(2):
        y0 = b * (depth + STREET)
        buildings.append((0.0, y0, width, y0 + depth))
        walls += [
            Wall(0.0, y0, width, y0, True),
            Wall(0.0, y0 + depth, width, y0 + depth, True),
            Wall(0.0, y0, 0.0, y0 + depth, True),
            Wall(width, y0, width, y0 + depth, True),
            Wall(0.0, y0 + APARTMENT, width, y0 + APARTMENT, False),
        ]
        walls += [Wall(APARTMENT * i, y0, APARTMENT * i, y0 + depth, False)
                  for i in range(1, STRIPE_APARTMENTS)]
    return walls, buildings


def apartments() -> np.ndarray:
    """Lower-left corners of the 40 apartments, building-major order."""
    out = []
    for b in range(2):
        y0 = b * (2 * APARTMENT + STREET)
        for row in range(2):
            for col in range(STRIPE_APARTMENTS):
                out.append((col * APARTMENT, y0 + row * APARTMENT))
    return np.array(out)


def generate_dual_stripe(
    dr: float = 0.2,
    rng_seed=0,
    small_cell_power_dbm: float = 20.0,
    macro_power_dbm: float = 46.0,
    macro_distance: float = 100.0,
) -> Deployment:
    """Dual-stripe femtocell block.

    Each of the 40 apartments holds a HeNB with probability ``dr`` at a
    uniform position inside it. A layout without any HeNB is redrawn.
    The macro site sits ``macro_distance`` metres south of the first
    building, centred, with one sector facing the block.
    """
    if not 0 < dr <= 1:
        raise ValueError("dr must be in (0,1]")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    corners = apartments()
    while True:
        has = rng.random(len(corners)) < dr
        offs = rng.random((len(corners), 2)) * APARTMENT
        if has.any():
            break
    pos = corners[has] + offs[has]
    p = float(dbm_to_w(small_cell_power_dbm))
    cells = [SmallCell(i, (float(x), float(y)), p) for i, (x, y) in enumerate(pos)]
    walls, buildings = dual_stripe_geometry()
    width = APARTMENT * STRIPE_APARTMENTS
    site = (width / 2, -macro_distance)
    macros = _macro_site(len(cells), site, float(dbm_to_w(macro_power_dbm)), 90.0)
    top = 2 * (2 * APARTMENT) + STREET
    return Deployment("dual_stripe", cells, macros, (0.0, 0.0, width, top),
                      walls, buildings, "femto")


def generate_outdoor(
    n_cells: int = 21,
    area: tuple = (250.0, 250.0),
    mean_isd: float = 37.0,
    rng_seed=0,
    small_cell_power_dbm: float = 24.0,
    macro_power_dbm: float = 43.0,
    macro_ring_radius: float = 350.0,
    n_macro_sites: int = 6,
    max_tries: int = 20000,
) -> Deployment:
    """Picocells placed by dart throwing with minimum spacing 0.7 * mean ISD."""
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    w, h = area
    sep = 0.7 * mean_isd
    pts = []
    tries = 0
    while len(pts) < n_cells:
        if tries >= max_tries:
            raise ValueError("area too dense")
        tries += 1
        cand = rng.random(2) * (w, h)
        if all(np.hypot(*(cand - q)) >= sep for q in pts):
            pts.append(cand)
    p = float(dbm_to_w(small_cell_power_dbm))
    cells = [SmallCell(i, (float(x), float(y)), p) for i, (x, y) in enumerate(pts)]
    macros = []
    centre = np.array([w / 2, h / 2])
    pm = float(dbm_to_w(macro_power_dbm))
    for s in range(n_macro_sites):
        ang = 2 * np.pi * s / n_macro_sites + np.pi / n_macro_sites
        site = centre + macro_ring_radius * np.array([np.cos(ang), np.sin(ang)])
        facing = np.degrees(ang) + 180.0
        macros += _macro_site(n_cells + len(macros), site, pm, facing)
    return Deployment("outdoor", cells, macros, (0.0, 0.0, w, h), [], [], "pico")


# -- random large/small scale ---------------------------------------------


def draw_shadowing(shape, sigma_db: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean log-normal shadowing in dB, one value per link."""
    if sigma_db == 0:
        return np.zeros(shape)
    return rng.normal(0.0, sigma_db, size=shape)


def _fading_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def draw_fading(link: tuple, rb_index: int, tti: int, seed: int, gain: float = 1.0,
                sb_size: int = 6, n_rx: int = N_RX, n_tx: int = N_TX) -> ChannelMatrix:
    """Rayleigh block-fading channel for one link, RB and TTI.

    Constant over the ``sb_size`` RBs of a subband within one TTI.
    ``gain`` is the linear power gain (transmit power included); the
    i.i.d. unit-variance entries are scaled by its square root.
    """
    ue, enb = link
    rng = _fading_rng(seed, ue, enb, tti, rb_index // sb_size)
    g = (rng.standard_normal((n_rx, n_tx)) + 1j * rng.standard_normal((n_rx, n_tx))) / np.sqrt(2)
    return ChannelMatrix(np.sqrt(gain) * g, ue, enb, rb_index)


def fading_tensor(amplitude: np.ndarray, n_sb: int, rng: np.random.Generator,
                  n_rx: int = N_RX, n_tx: int = N_TX) -> np.ndarray:
    """Bulk Rayleigh draw for one TTI: shape (n_ue, n_enb, n_sb, n_rx, n_tx)."""
    n_ue, n_enb = amplitude.shape
    shape = (n_ue, n_enb, n_sb, n_rx, n_tx)
    g = rng.standard_normal(shape + (2,)).view(complex)[..., 0] / np.sqrt(2)
    return g * amplitude[:, :, None, None, None]


# -- UE placement and association -----------------------------------------


def _candidate_positions(dep: Deployment, n: int, rng: np.random.Generator) -> np.ndarray:
    if dep.buildings:
        rects = np.array(dep.buildings)
        areas = (rects[:, 2] - rects[:, 0]) * (rects[:, 3] - rects[:, 1])
        which = rng.choice(len(rects), size=n, p=areas / areas.sum())
        r = rects[which]
        u = rng.random((n, 2))
        return r[:, :2] + u * (r[:, 2:] - r[:, :2])
    xmin, ymin, xmax, ymax = dep.bounds
    return np.array([xmin, ymin]) + rng.random((n, 2)) * (xmax - xmin, ymax - ymin)


def drop_ues(dep: Deployment, ues_per_cell: int, rng: np.random.Generator, shadow_sigma_db: float,
             batch: int = 256, max_batches: int = 400, small_cell_dominance: bool = True):
    """Quota-driven UE drop.

    Candidate points are drawn uniformly over the UE region (building
    floor area indoors, the whole area outdoors) with their own shadowing
    draws; a point is kept for the small cell with the highest RSRP until
    that cell holds ``ues_per_cell`` UEs. With ``small_cell_dominance``
    a point is rejected when a macro sector is heard stronger than every
    small cell.

    Returns
    -------
    positions : (n_ue, 2) array, UEs ordered cell by cell
    budgets : LinkBudgets
    """
    n_cells = dep.n_cells
    buckets = [[] for _ in range(n_cells)]
    tx_power = dep.enb_powers()
    for _ in range(max_batches):
        pos = _candidate_positions(dep, batch, rng)
        pl = pathloss_matrix(dep, pos)
        sf = draw_shadowing(pl.shape, shadow_sigma_db, rng)
        rsrp = (tx_power / N_TX)[None, :] * 10 ** (-(pl + sf) / 10)
        best = np.argmax(rsrp[:, :n_cells], axis=1)
        ok = np.ones(batch, dtype=bool)
        if small_cell_dominance and dep.macros:
            ok = rsrp[:, :n_cells].max(axis=1) > rsrp[:, n_cells:].max(axis=1)
        for i in np.flatnonzero(ok):
            c = best[i]
            if len(buckets[c]) < ues_per_cell:
                buckets[c].append((pos[i], pl[i], sf[i]))
        if all(len(b) == ues_per_cell for b in buckets):
            break
    else:
        raise ValueError("UE quota unsatisfiable")
    rows = [item for b in buckets for item in b]
    positions = np.array([r[0] for r in rows])
    budgets = LinkBudgets(np.array([r[1] for r in rows]), np.array([r[2] for r in rows]), tx_power)
    return positions, budgets


def initial_assignment(dep: Deployment, budgets: LinkBudgets,
                       ues_per_cell: Optional[int] = None) -> NetworkState:
    """Attach every UE to its strongest small cell; all cells start active."""
    rsrp = budgets.rsrp[:, : dep.n_cells]
    serving = np.argmax(rsrp, axis=1)
    if ues_per_cell is not None:
        counts = np.bincount(serving, minlength=dep.n_cells)
        if np.any(counts != ues_per_cell):
            raise ValueError("UE quota not met by max-RSRP association")
    return NetworkState.all_active(serving, dep.n_cells)
