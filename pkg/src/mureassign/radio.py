"""Per-TTI channel state shared by CSI measurement and SINR evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phy import codebook_matrix


@dataclass
class RadioSnapshot:
    """All UE<->eNB channels for one TTI.

    Attributes
    ----------
    h : ndarray, shape (n_ue, n_enb, n_sb, N_r, N_t)
        Block-fading channels, one per 6-RB subband. Transmit power per RB
        and large-scale gain are folded in.
    itf_pmi : ndarray of int, shape (n_enb, n_sb)
        Random precoder each eNB applies when seen as an interferer.
    sb_sizes : ndarray of int, shape (n_sb,)
        Number of RBs in each subband.
    noise_var : float
        Thermal noise power per RB and receive antenna, watts.
    n_small : int
        eNBs ``0..n_small-1`` are small cells, the rest are macro sectors.
    """

    h: np.ndarray
    itf_pmi: np.ndarray
    sb_sizes: np.ndarray
    noise_var: float
    n_small: int
    _itf: np.ndarray = field(default=None, init=False, repr=False)

    @property
    def n_ue(self) -> int:
        return self.h.shape[0]

    @property
    def n_enb(self) -> int:
        return self.h.shape[1]

    @property
    def n_rb(self) -> int:
        return int(self.sb_sizes.sum())

    def interference_vectors(self) -> np.ndarray:
        """H_{k,l} w_l for every link, shape (n_ue, n_enb, n_sb, N_r)."""
        if self._itf is None:
            w = codebook_matrix()[self.itf_pmi]  # (n_enb, n_sb, N_t)
            self._itf = np.einsum("kesij,esj->kesi", self.h, w)
        return self._itf

    def tx_mask(self, active_small: np.ndarray) -> np.ndarray:
        """Transmitting eNBs: active small cells plus every macro sector."""
        mask = np.ones(self.n_enb, dtype=bool)
        mask[: self.n_small] = np.asarray(active_small, dtype=bool)
        return mask

    def to_rb(self, per_sb: np.ndarray) -> np.ndarray:
        """Expand a trailing subband axis to RBs."""
        return np.repeat(per_sb, self.sb_sizes, axis=-1)


def subband_sizes(n_rb: int, sb_size: int = 6) -> np.ndarray:
    full, rest = divmod(n_rb, sb_size)
    sizes = [sb_size] * full + ([rest] if rest else [])
    return np.array(sizes, dtype=int)
