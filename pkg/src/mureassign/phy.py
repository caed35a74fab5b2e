"""
Complex-valued MIMO primitives.

Rank-1 precoding from the LTE Rel-8 four-port codebook, wideband PMI
selection, the MMSE-IRC receive filter and the post-reception SINR it
achieves, plus the quantised-channel correlation used for semi-orthogonal
user pairing.

All functions accept plain ``numpy`` arrays; :class:`ChannelMatrix` and
:class:`Precoder` implement ``__array__`` so they can be passed directly.

The batched helpers at the bottom (:func:`irc_sinr`, :func:`covariance`,
:func:`codebook_sinr`) operate on stacked arrays and are what the
simulator uses on its hot path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

N_RX = 2
N_TX = 4

# Householder generators u_n of the Rel-8 four-port codebook (36.211).
_S = 1 / np.sqrt(2)
_REL8_GENERATORS = np.array(
    [
        [1, -1, -1, -1],
        [1, -1j, 1, 1j],
        [1, 1, -1, 1],
        [1, 1j, 1, -1j],
        [1, (-1 - 1j) * _S, -1j, (1 - 1j) * _S],
        [1, (1 - 1j) * _S, 1j, (-1 - 1j) * _S],
        [1, (1 + 1j) * _S, -1j, (-1 + 1j) * _S],
        [1, (-1 + 1j) * _S, 1j, (1 + 1j) * _S],
        [1, -1, 1, 1],
        [1, -1j, -1, -1j],
        [1, 1, 1, -1],
        [1, 1j, -1, 1j],
        [1, -1, -1, 1],
        [1, -1, 1, -1],
        [1, 1, -1, -1],
        [1, 1, 1, 1],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class ChannelMatrix:
    """N_r x N_t channel between one UE and one eNB on one resource block.

    Large-scale gain (pathloss, shadowing, transmit power) is folded into
    the entries.
    """

    entries: np.ndarray
    ue_id: int = -1
    enb_id: int = -1
    rb_index: int = -1

    def __post_init__(self):
        h = np.asarray(self.entries, dtype=complex)
        if h.ndim != 2:
            raise ValueError("channel must be a 2-D matrix")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "entries", h)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class Precoder:
    vector: np.ndarray
    codebook_index: int = -1

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).ravel()
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("precoder must have unit norm")
        object.__setattr__(self, "vector", v)

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


@dataclass(frozen=True)
class Interferer:
    """One neighbouring transmitter as seen by the receiver.

    ``power`` scales the covariance contribution. The simulator folds
    transmit power into the channel and leaves it at 1.
    """

    channel: np.ndarray
    precoder: np.ndarray
    active: bool = True
    power: float = 1.0

    def effective(self) -> np.ndarray:
        return np.sqrt(self.power) * (np.asarray(self.channel) @ np.asarray(self.precoder))


@dataclass(frozen=True)
class ReceiveFilter:
    vector: np.ndarray = field(repr=False)

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


@lru_cache(maxsize=1)
def _codebook_array() -> np.ndarray:
    cols = []
    for u in _REL8_GENERATORS:
        u = u[:, None]
        w = np.eye(N_TX) - 2 * (u @ u.conj().T) / (u.conj().T @ u)
        cols.append(w[:, 0])
    cb = np.array(cols)
    cb /= np.linalg.norm(cb, axis=1, keepdims=True)
    cb.setflags(write=False)
    return cb


def codebook_matrix() -> np.ndarray:
    """The 16 rank-1 precoders stacked as rows, shape (16, 4)."""
    return _codebook_array()


def rel8_codebook_4tx() -> list[Precoder]:
    """Rank-1 precoders of the Rel-8 four-port codebook."""
    return [Precoder(v, i) for i, v in enumerate(_codebook_array())]


@lru_cache(maxsize=1)
def codebook_correlation() -> np.ndarray:
    """Pairwise quantised-channel correlation of the rank-1 codebook."""
    cb = _codebook_array()
    c = np.abs(cb.conj() @ cb.T)
    c[c < 1e-12] = 0.0
    c.setflags(write=False)
    return c


def _stack(channels) -> np.ndarray:
    return np.stack([np.asarray(h, dtype=complex) for h in channels])


def select_wideband_pmi(
    channels: Sequence,
    codebook: Optional[Sequence] = None,
    noise_var: float = 1.0,
    interference_cov: Optional[np.ndarray] = None,
) -> int:
    """Pick the precoder maximising SU mutual information summed over RBs.

    Parameters
    ----------
    channels : sequence of (N_r, N_t) arrays
        One channel per RB for the same UE/eNB link.
    codebook : sequence of precoders, optional
        Defaults to the Rel-8 rank-1 codebook.
    noise_var : float
        Noise power per receive antenna.
    interference_cov : ndarray, optional
        Per-RB interference covariance, shape (n_rb, N_r, N_r). When
        given, the metric is the IRC post-SINR rather than plain SNR.

    Returns
    -------
    int
        Codebook index. Ties go to the lowest index.
    """
    if len(channels) == 0:
        raise ValueError("no channel samples")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    h = _stack(channels)
    cb = _codebook_array() if codebook is None else _stack(codebook)
    n_r = h.shape[1]
    r = np.broadcast_to(noise_var * np.eye(n_r), (h.shape[0], n_r, n_r)).astype(complex)
    if interference_cov is not None:
        r = r + np.asarray(interference_cov)
    sinr = codebook_sinr(h, r, cb)  # (n_rb, n_cb)
    metric = np.log2(1.0 + sinr).sum(axis=0)
    return int(np.argmax(metric))


def _covariance(desired, co_sched, interferers, noise_var) -> np.ndarray:
    h = np.asarray(desired, dtype=complex)
    n_r = h.shape[0]
    r = noise_var * np.eye(n_r, dtype=complex)
    if co_sched is not None:
        b = h @ np.asarray(co_sched)
        r += np.outer(b, b.conj())
    for itf in interferers or ():
        if itf.active:
            b = itf.effective()
            r += np.outer(b, b.conj())
    return r


def mmse_irc_filter(desired, w_k, co_sched=None, interferers=(), noise_var: float = 1.0) -> ReceiveFilter:
    """MMSE-IRC receive filter g = (H w_k)^H R^{-1}.

    R is the full interference-plus-noise covariance: the co-scheduled
    layer (if any), every active interferer and white noise.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    a = np.asarray(desired, dtype=complex) @ np.asarray(w_k)
    r = _covariance(desired, co_sched, interferers, noise_var)
    g = np.linalg.solve(r.T, a.conj())  # a^H R^{-1}, R Hermitian
    return ReceiveFilter(g)


def post_sinr(g, desired, w_k, co_sched=None, interferers=(), noise_var: float = 1.0) -> float:
    """Post-reception SINR of a linear receive filter."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    g = np.asarray(g, dtype=complex)
    h = np.asarray(desired, dtype=complex)
    signal = abs(g @ h @ np.asarray(w_k)) ** 2
    denom = noise_var * float(np.vdot(g, g).real)
    if co_sched is not None:
        denom += abs(g @ h @ np.asarray(co_sched)) ** 2
    for itf in interferers or ():
        if itf.active:
            denom += abs(g @ itf.effective()) ** 2
    if denom == 0.0:
        return 0.0
    return float(signal / denom)


def quantized_channel_vector(p) -> np.ndarray:
    """Pseudo-inverse of a unit-norm column precoder, i.e. its conjugate row."""
    return np.asarray(p, dtype=complex).ravel().conj()


def correlation(v1, v2) -> float:
    v1 = np.asarray(v1, dtype=complex).ravel()
    v2 = np.asarray(v2, dtype=complex).ravel()
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0 or n2 == 0:
        raise ValueError("degenerate vector")
    return float(min(abs(np.vdot(v2, v1)) / (n1 * n2), 1.0))


# -- batched helpers -------------------------------------------------------


def covariance(vectors: np.ndarray, mask: Optional[np.ndarray], noise_var: float) -> np.ndarray:
    """Sum of rank-1 covariances plus noise.

    ``vectors`` has shape (..., L, N_r); ``mask`` (broadcastable to
    ``vectors.shape[:-1]``) gates each term. Returns (..., N_r, N_r).
    """
    v = vectors if mask is None else vectors * mask[..., None]
    r = np.einsum("...li,...lj->...ij", v, v.conj())
    n_r = vectors.shape[-1]
    return r + noise_var * np.eye(n_r)


def _inv2(r: np.ndarray) -> np.ndarray:
    a, b, c, d = r[..., 0, 0], r[..., 0, 1], r[..., 1, 0], r[..., 1, 1]
    det = a * d - b * c
    out = np.empty_like(r)
    out[..., 0, 0] = d
    out[..., 0, 1] = -b
    out[..., 1, 0] = -c
    out[..., 1, 1] = a
    return out / det[..., None, None]


def inv_hermitian(r: np.ndarray) -> np.ndarray:
    if r.shape[-1] == 2:
        return _inv2(r)
    return np.linalg.inv(r)


def irc_sinr(a: np.ndarray, r_inv: np.ndarray) -> np.ndarray:
    """MMSE-IRC post-SINR a^H R^{-1} a for stacked vectors.

    With g = a^H R^{-1} the ratio |g a|^2 / (g R g^H) collapses to this
    quadratic form.
    """
    q = np.einsum("...i,...ij,...j->...", a.conj(), r_inv, a)
    return np.maximum(q.real, 0.0)


def codebook_sinr(h: np.ndarray, r: np.ndarray, cb: Optional[np.ndarray] = None) -> np.ndarray:
    """IRC SINR of every codebook precoder.

    ``h`` is (..., N_r, N_t), ``r`` is (..., N_r, N_r). Returns (..., n_cb).
    """
    cb = _codebook_array() if cb is None else cb
    a = np.einsum("...ij,cj->...ci", h, cb)
    r_inv = inv_hermitian(r)[..., None, :, :]
    return irc_sinr(a, r_inv)
