import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mureassign import phy
from mureassign.phy import Interferer

# generator phases in units of pi/4, written out from the standard table
_PHASES = [
    (0, 4, 4, 4), (0, 6, 0, 2), (0, 0, 4, 0), (0, 2, 0, 6),
    (0, 5, 6, 7), (0, 7, 2, 5), (0, 1, 6, 3), (0, 3, 2, 1),
    (0, 4, 0, 0), (0, 6, 4, 6), (0, 0, 0, 4), (0, 2, 4, 2),
    (0, 4, 4, 0), (0, 4, 0, 4), (0, 0, 4, 4), (0, 0, 0, 0),
]


def householder_first_columns():
    # u[0] = 1 and |u|^2 = 4, so the first column of I - 2uu^H/4 is e0 - u/2
    out = []
    for ph in _PHASES:
        u = np.exp(1j * np.pi * np.array(ph) / 4)
        e0 = np.array([1, 0, 0, 0], dtype=complex)
        out.append(e0 - u / 2)
    return np.array(out)


def rand_h(rng, n_r=2, n_t=4, scale=1.0):
    return scale * (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2)


def test_codebook_shape_and_norms():
    cb = phy.rel8_codebook_4tx()
    assert len(cb) == 16
    for p in cb:
        assert abs(np.linalg.norm(p.vector) - 1) < 1e-9
        np.testing.assert_allclose(np.abs(p.vector), 0.5, atol=1e-12)


def test_codebook_distinct():
    cb = phy.codebook_matrix()
    for i in range(16):
        for j in range(i + 1, 16):
            assert np.max(np.abs(cb[i] - cb[j])) > 1e-9


def test_codebook_matches_householder_oracle():
    np.testing.assert_allclose(phy.codebook_matrix(), householder_first_columns(), atol=1e-12)


def test_codebook_correlation_values():
    c = phy.codebook_correlation()
    np.testing.assert_allclose(np.diag(c), 1.0)
    assert np.allclose(c, c.T)
    # each precoder has exactly orthogonal partners inside the codebook
    assert np.all((c == 0).sum(axis=1) >= 3)


def test_precoder_norm_check():
    with pytest.raises(ValueError):
        phy.Precoder(np.ones(4))


def test_channel_matrix_validation():
    with pytest.raises(ValueError):
        phy.ChannelMatrix(np.ones(4))
    with pytest.raises(ValueError):
        phy.ChannelMatrix(np.array([[np.nan, 0], [0, 0]]))


def test_pmi_dominant_direction():
    cb = phy.codebook_matrix()
    # a rank-1 channel aligned with w_3 puts all gain on index 3
    h = np.outer([1.0, 0.5j], cb[3].conj())
    assert phy.select_wideband_pmi([h], noise_var=0.1) == 3


def test_pmi_zero_channel_tie():
    assert phy.select_wideband_pmi([np.zeros((2, 4))]) == 0


def test_pmi_empty():
    with pytest.raises(ValueError, match="no channel samples"):
        phy.select_wideband_pmi([])


def test_pmi_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    cb = phy.rel8_codebook_4tx()
    for _ in range(20):
        hs = [rand_h(rng) for _ in range(50)]
        noise = 0.3
        best, best_m = None, -np.inf
        for i, w in enumerate(cb):
            m = 0.0
            for h in hs:
                a = h @ w.vector
                m += np.log2(1 + np.vdot(a, a).real / noise)
            if m > best_m + 1e-12:
                best, best_m = i, m
        assert phy.select_wideband_pmi(hs, noise_var=noise) == best


def test_irc_matched_filter_without_interference():
    rng = np.random.default_rng(2)
    h = rand_h(rng)
    w = phy.codebook_matrix()[5]
    g = np.asarray(phy.mmse_irc_filter(h, w, noise_var=0.5))
    a = h @ w
    # proportional to a^H
    ratio = g / a.conj()
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)


def test_irc_nulls_orthogonal_co_scheduled_layer():
    # desired and co-scheduled effective channels orthogonal in C^2
    h = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=complex)
    w_k = np.array([1, 0, 0, 0], dtype=complex)
    w_j = np.array([0, 1, 0, 0], dtype=complex)
    g = np.asarray(phy.mmse_irc_filter(h, w_k, co_sched=w_j, noise_var=0.1))
    assert abs(g @ h @ w_j) < 1e-9


def test_post_sinr_snr_only():
    a = np.array([1.0, 0.0], dtype=complex)
    h = np.zeros((2, 4), dtype=complex)
    h[:, 0] = a
    w = np.array([1, 0, 0, 0], dtype=complex)
    assert phy.post_sinr(a.conj(), h, w, noise_var=0.01) == pytest.approx(100.0)


def _post_sinr_oracle(g, h, w_k, w_j, itf, noise):
    # term-by-term scalar evaluation
    def inner(vec_h, w):
        s = 0j
        for r in range(len(g)):
            for t in range(len(w)):
                s += g[r] * vec_h[r, t] * w[t]
        return s
    sig = abs(inner(h, w_k)) ** 2
    den = noise * sum(abs(x) ** 2 for x in g)
    if w_j is not None:
        den += abs(inner(h, w_j)) ** 2
    for hl, wl, on in itf:
        if on:
            den += abs(inner(hl, wl)) ** 2
    return sig / den


def test_post_sinr_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    cb = phy.codebook_matrix()
    for _ in range(50):
        h = rand_h(rng)
        wk, wj = cb[rng.integers(16)], cb[rng.integers(16)]
        itf = [(rand_h(rng, scale=0.5), cb[rng.integers(16)], bool(rng.integers(2))) for _ in range(3)]
        interferers = [Interferer(hl, wl, on) for hl, wl, on in itf]
        g = np.asarray(phy.mmse_irc_filter(h, wk, wj, interferers, 0.2))
        got = phy.post_sinr(g, h, wk, wj, interferers, 0.2)
        assert got == pytest.approx(_post_sinr_oracle(g, h, wk, wj, itf, 0.2), rel=1e-10)


def test_inactive_interferer_equals_removed():
    rng = np.random.default_rng(4)
    cb = phy.codebook_matrix()
    h = rand_h(rng)
    hl = rand_h(rng)
    a = phy.mmse_irc_filter(h, cb[0], interferers=[Interferer(hl, cb[1], False)], noise_var=0.1)
    b = phy.mmse_irc_filter(h, cb[0], interferers=[], noise_var=0.1)
    np.testing.assert_allclose(np.asarray(a), np.asarray(b))
    assert phy.post_sinr(a, h, cb[0], interferers=[Interferer(hl, cb[1], False)], noise_var=0.1) == \
        phy.post_sinr(b, h, cb[0], noise_var=0.1)


def test_interferer_power_scales_covariance():
    rng = np.random.default_rng(5)
    cb = phy.codebook_matrix()
    h, hl = rand_h(rng), rand_h(rng)
    a = phy.mmse_irc_filter(h, cb[0], interferers=[Interferer(hl, cb[1], True, 4.0)], noise_var=0.1)
    b = phy.mmse_irc_filter(h, cb[0], interferers=[Interferer(2 * hl, cb[1], True)], noise_var=0.1)
    np.testing.assert_allclose(np.asarray(a), np.asarray(b))


def test_irc_sinr_equals_quadratic_form():
    rng = np.random.default_rng(6)
    cb = phy.codebook_matrix()
    h, hl = rand_h(rng), rand_h(rng)
    itf = [Interferer(hl, cb[2])]
    g = phy.mmse_irc_filter(h, cb[0], interferers=itf, noise_var=0.3)
    direct = phy.post_sinr(g, h, cb[0], interferers=itf, noise_var=0.3)
    b = hl @ cb[2]
    r = 0.3 * np.eye(2) + np.outer(b, b.conj())
    a = h @ cb[0]
    assert direct == pytest.approx(float(phy.irc_sinr(a, np.linalg.inv(r))), rel=1e-10)


def test_quantized_channel_vector():
    np.testing.assert_allclose(phy.quantized_channel_vector([1, 0, 0, 0]), [1, 0, 0, 0])
    p = np.array([1, 1j, -1, -1j]) / 2
    np.testing.assert_allclose(phy.quantized_channel_vector(p), np.array([1, -1j, -1, 1j]) / 2)
    for w in phy.codebook_matrix():
        assert abs(np.linalg.norm(phy.quantized_channel_vector(w)) - 1) < 1e-9


def test_correlation_examples():
    v = np.array([1, 0, 0, 0])
    assert phy.correlation(v, v) == pytest.approx(1.0)
    assert phy.correlation(v, [0, 1, 0, 0]) == 0.0
    assert phy.correlation(v, np.array([1, 1, 0, 0]) / np.sqrt(2)) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ValueError, match="degenerate vector"):
        phy.correlation(v, np.zeros(4))


complex_vec = st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=4, max_size=4).map(
    lambda xs: np.array([complex(a, b) for a, b in xs]))


@given(complex_vec, complex_vec, st.floats(0.1, 10), st.floats(0, 6.28))
def test_correlation_symmetric_scale_invariant(v1, v2, mag, ph):
    if np.linalg.norm(v1) < 1e-3 or np.linalg.norm(v2) < 1e-3:
        return
    c = phy.correlation(v1, v2)
    assert 0 <= c <= 1
    assert c == pytest.approx(phy.correlation(v2, v1), abs=1e-12)
    alpha = mag * np.exp(1j * ph)
    assert c == pytest.approx(phy.correlation(alpha * v1, v2), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 4), st.floats(0.01, 2.0))
def test_irc_dominates_matched_and_removal_helps(seed, n_itf, noise):
    rng = np.random.default_rng(seed)
    cb = phy.codebook_matrix()
    h = rand_h(rng)
    wk = cb[rng.integers(16)]
    wj = cb[rng.integers(16)] if rng.random() < 0.5 else None
    itf = [Interferer(rand_h(rng), cb[rng.integers(16)]) for _ in range(n_itf)]
    g = phy.mmse_irc_filter(h, wk, wj, itf, noise)
    s_irc = phy.post_sinr(g, h, wk, wj, itf, noise)
    s_mf = phy.post_sinr((h @ wk).conj(), h, wk, wj, itf, noise)
    assert s_irc >= 0
    assert s_irc >= s_mf * (1 - 1e-9)
    for i in range(n_itf):
        reduced = itf[:i] + [Interferer(itf[i].channel, itf[i].precoder, False)] + itf[i + 1:]
        g2 = phy.mmse_irc_filter(h, wk, wj, reduced, noise)
        assert phy.post_sinr(g2, h, wk, wj, reduced, noise) >= s_irc * (1 - 1e-9)
