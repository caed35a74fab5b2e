"""Network state: which small cell serves which UE, and which cells are awake."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class NetworkState:
    """Assignment relation plus activity flags.

    UE and cell ids are indices: UE ``k`` is served by small cell
    ``serving[k]``; ``active[e]`` is the activity flag a_e.
    """

    serving: np.ndarray
    active: np.ndarray
    tau: float = 0.0
    serving_csi: dict = field(default_factory=dict)
    target_csi: dict = field(default_factory=dict)

    def __post_init__(self):
        self.serving = np.asarray(self.serving, dtype=int)
        self.active = np.asarray(self.active, dtype=bool)

    @classmethod
    def all_active(cls, serving, n_cells: int, tau: float = 0.0) -> "NetworkState":
        return cls(serving=serving, active=np.ones(n_cells, dtype=bool), tau=tau)

    @property
    def n_ue(self) -> int:
        return len(self.serving)

    @property
    def n_cells(self) -> int:
        return len(self.active)

    def attached(self, cell: int) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.serving == cell)]

    def validate(self) -> None:
        if np.any((self.serving < 0) | (self.serving >= self.n_cells)):
            raise ValueError("UE attached to unknown cell")
        if not np.all(self.active[self.serving]):
            raise ValueError("UE attached to a sleeping cell")

    def copy(self) -> "NetworkState":
        return NetworkState(
            serving=self.serving.copy(),
            active=self.active.copy(),
            tau=self.tau,
            serving_csi=dict(self.serving_csi),
            target_csi=dict(self.target_csi),
        )
