import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridce.errors import DimensionError, DomainError
from hybridce.precoding import HybridPrecoder, phased_zf_precoder, sum_spectral_efficiency


def cgauss(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def test_equal_gain_identity():
    h = cgauss(np.random.default_rng(0), 32, 1)
    p = phased_zf_precoder(h, 1)
    rho = 3.0
    received = rho * np.abs(h.conj().T @ p.composite) ** 2
    assert received.item() == pytest.approx(rho * np.sum(np.abs(h)) ** 2 / 32, rel=1e-12)
    np.testing.assert_allclose(np.abs(p.analog), 1.0)


def test_exact_zf_with_full_analog_dimension():
    H = cgauss(np.random.default_rng(1), 8, 4)
    P = phased_zf_precoder(H, 8).composite
    G = H.conj().T @ P
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(2, 32), data=st.data())
def test_power_normalization_and_shapes(seed, M, data):
    L = data.draw(st.integers(1, M))
    K = data.draw(st.integers(1, L))
    bits = data.draw(st.sampled_from([0, 1, 2, 3]))
    H = cgauss(np.random.default_rng(seed), 3, M, K)
    p = phased_zf_precoder(H, L, bits=bits)
    assert p.analog.shape == (3, M, L) and p.baseband.shape == (3, L, K)
    np.testing.assert_allclose(np.linalg.norm(p.composite, axis=(-2, -1)), 1.0, atol=1e-9)
    np.testing.assert_allclose(np.abs(p.analog), 1.0, atol=1e-12)
    if not p.regularized.any():
        G = np.swapaxes(H.conj(), -1, -2) @ p.composite
        off = G * (1 - np.eye(K))
        assert np.max(np.abs(off), initial=0.0) <= 1e-8 * np.max(np.abs(G))


def test_zf_within_analog_span():
    H = cgauss(np.random.default_rng(2), 5, 64, 8)
    p = phased_zf_precoder(H, 8)
    G = np.swapaxes(H.conj(), -1, -2) @ p.composite
    off = G * (1 - np.eye(8))
    assert np.max(np.abs(off)) <= 1e-9 * np.max(np.abs(G))
    assert not p.regularized.any()


def test_quantized_analog_grid():
    H = cgauss(np.random.default_rng(3), 16, 2)
    p = phased_zf_precoder(H, 4, bits=2)
    k = np.angle(p.analog) / (np.pi / 2)
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)


def test_matched_filter_when_L_equals_M():
    h = cgauss(np.random.default_rng(4), 16, 1)
    P = phased_zf_precoder(h, 16).composite
    np.testing.assert_allclose(P, h / np.linalg.norm(h), atol=1e-12)


def test_rank_deficient_channel_is_regularized():
    h = cgauss(np.random.default_rng(5), 16, 1)
    p = phased_zf_precoder(np.hstack([h, h]), 2)
    assert bool(p.regularized)
    assert np.all(np.isfinite(p.composite))
    assert np.linalg.norm(p.composite) == pytest.approx(1.0)
    # the composite precoder must be realizable through the analog stage
    np.testing.assert_allclose(p.analog @ p.baseband, p.composite)


def test_zero_entries_get_unit_phase():
    H = np.zeros((4, 1), dtype=complex)
    H[0] = 1.0
    p = phased_zf_precoder(H, 1)
    np.testing.assert_allclose(p.analog[:, 0], np.ones(4))


def test_precoder_validation():
    with pytest.raises(DomainError):
        phased_zf_precoder(np.ones((4, 3)), 2)
    with pytest.raises(DomainError):
        phased_zf_precoder(np.ones((4, 1)), 5)
    with pytest.raises(DomainError):
        phased_zf_precoder(np.ones((4, 1)), 1, bits=-1)
    with pytest.raises(DimensionError):
        phased_zf_precoder(np.ones(4), 1)


class TestSumRate:
    def test_single_user_aligned(self):
        h = cgauss(np.random.default_rng(6), 8, 1)
        p = h / np.linalg.norm(h)
        assert sum_spectral_efficiency(h, p, 2.0) == pytest.approx(np.log2(1 + 2.0 * np.sum(np.abs(h) ** 2)))

    def test_orthogonal_users_no_interference(self):
        H = np.eye(4)[:, :2].astype(complex)
        P = H / np.sqrt(2)
        G = np.abs(H.conj().T @ P) ** 2
        assert np.max(G * (1 - np.eye(2))) <= 1e-12
        assert sum_spectral_efficiency(H, P, 10.0) == pytest.approx(2 * np.log2(1 + 5.0))

    def test_zero_power(self):
        H = cgauss(np.random.default_rng(7), 8, 3)
        assert sum_spectral_efficiency(H, phased_zf_precoder(H, 4), 0.0) == 0.0

    def test_interference_counted(self):
        H = np.array([[1.0, 1.0], [1.0, 0.0]], dtype=complex)
        P = np.eye(2, dtype=complex)
        # users are columns: h1 = (1, 1) gets signal 1 and interference 1,
        # h2 = (1, 0) gets no signal on its own beam and interference 1
        assert sum_spectral_efficiency(H, P, 1.0) == pytest.approx(np.log2(1.5))

    def test_batched(self):
        H = cgauss(np.random.default_rng(8), 4, 8, 2)
        p = phased_zf_precoder(H, 4)
        se = sum_spectral_efficiency(H, p, 5.0)
        assert se.shape == (4,)
        assert se[1] == pytest.approx(sum_spectral_efficiency(H[1], p.composite[1], 5.0))

    def test_errors(self):
        with pytest.raises(DomainError):
            sum_spectral_efficiency(np.ones((2, 1)), np.ones((2, 1)), -1.0)
        with pytest.raises(DimensionError):
            sum_spectral_efficiency(np.ones((2, 1)), np.ones((3, 1)), 1.0)

    def test_accepts_precoder_object(self):
        H = cgauss(np.random.default_rng(9), 8, 2)
        p = phased_zf_precoder(H, 3)
        assert isinstance(p, HybridPrecoder)
        assert sum_spectral_efficiency(H, p, 1.0) == sum_spectral_efficiency(H, p.composite, 1.0)
