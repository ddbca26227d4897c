"""Substitute downlink hybrid precoder and sum spectral efficiency.

The analog stage steers one phase-only beam per user, matched to the phases
of that user's estimated channel; spare RF chains get DFT beams. The baseband
stage is zero-forcing on the effective channel. Everything is batched over
leading dimensions so a whole chunk of trials is handled at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combiner import quantize_unit_modulus
from .errors import DimensionError, DomainError
from .numerics import dft_matrix

GRAM_COND_LIMIT = 1e12
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HybridPrecoder:
    analog: np.ndarray  # (..., M, L), unit modulus
    baseband: np.ndarray  # (..., L, K)
    regularized: np.ndarray  # (...,) bool

    @property
    def composite(self):
        return self.analog @ self.baseband


def _phases(X):
    mag = np.abs(X)
    zero = mag == 0
    return np.where(zero, 1.0, X / np.where(zero, 1.0, mag))


def phased_zf_precoder(H_hat, L, bits=0):
    """Hybrid precoder for estimated channels ``H_hat`` of shape ``(..., M, K)``.

    Column ``k`` of the analog stage is ``exp(j angle(h_k))`` so that
    ``h_k^H f_k = sum_m |h_km|``. The baseband stage is the minimum-norm ZF
    solution in the span of the analog beams, and the composite precoder has
    unit Frobenius norm. When the effective channel is numerically singular a
    small diagonal loading is used and ``regularized`` is set.
    """
    H = np.asarray(H_hat, dtype=complex)
    if H.ndim < 2:
        raise DimensionError("H_hat must have shape (..., M, K)")
    M, K = H.shape[-2:]
    if not K <= L <= M:
        raise DomainError(f"need K <= L <= M, got K={K}, L={L}, M={M}")
    if bits < 0:
        raise DomainError("bits must be >= 0")

    extra = dft_matrix(M)[:, : L - K]
    F = np.concatenate([_phases(H), np.broadcast_to(extra, H.shape[:-2] + extra.shape)], axis=-1)
    if bits:
        F = quantize_unit_modulus(F, bits)

    Q, Rf = np.linalg.qr(F)
    d = np.abs(np.diagonal(Rf, axis1=-2, axis2=-1))
    deficient = ~(d.min(axis=-1) > RANK_TOL * d.max(axis=-1))
    if np.any(deficient):
        # Duplicate beams: keep only an orthonormal basis of the analog span.
        U, sv, _ = np.linalg.svd(F[deficient], full_matrices=False)
        Q[deficient] = U * (sv > RANK_TOL * sv[..., :1])[..., None, :]

    Heff = np.swapaxes(H.conj(), -1, -2) @ Q  # (..., K, L)
    gram = Heff @ np.swapaxes(Heff.conj(), -1, -2)
    ev = np.linalg.eigvalsh(gram)
    regularized = ~(ev[..., 0] > ev[..., -1] / GRAM_COND_LIMIT)
    if np.any(regularized):
        load = 1e-6 * np.trace(gram, axis1=-2, axis2=-1).real / K
        load = np.where(regularized, np.maximum(load, np.finfo(float).tiny), 0.0)
        gram = gram + load[..., None, None] * np.eye(K)
    W = np.swapaxes(Heff.conj(), -1, -2) @ np.linalg.inv(gram)
    W = W / np.linalg.norm(W, axis=(-2, -1))[..., None, None]

    # composite P = Q W; with F = Q Rf the baseband stage is Rf^{-1} W
    eye = np.broadcast_to(np.eye(L), Rf.shape)
    baseband = np.linalg.solve(np.where(deficient[..., None, None], eye, Rf), W)
    if np.any(deficient):
        baseband[deficient] = np.linalg.pinv(F[deficient]) @ (Q[deficient] @ W[deficient])
    return HybridPrecoder(analog=F, baseband=baseband, regularized=regularized)


def sum_spectral_efficiency(H_true, precoder, rho):
    """``sum_k log2(1 + SINR_k)`` for channels ``(..., M, K)`` and a precoder.

    ``precoder`` may be a :class:`HybridPrecoder` or the composite ``(..., M, K)``
    matrix. Returns a float for unbatched input, otherwise an array over the
    leading dimensions.
    """
    if rho < 0:
        raise DomainError("rho must be non-negative")
    H = np.asarray(H_true, dtype=complex)
    P = precoder.composite if isinstance(precoder, HybridPrecoder) else np.asarray(precoder)
    if H.shape[-2] != P.shape[-2] or H.shape[-1] != P.shape[-1]:
        raise DimensionError(f"channel {H.shape} and precoder {P.shape} disagree")
    G = np.abs(np.swapaxes(H.conj(), -1, -2) @ P) ** 2  # G[k, j] = |h_k^H p_j|^2
    signal = np.diagonal(G, axis1=-2, axis2=-1)
    interference = np.clip(np.sum(G, axis=-1) - signal, 0.0, None)
    se = np.sum(np.log2(1.0 + rho * signal / (1.0 + rho * interference)), axis=-1)
    return float(se) if se.ndim == 0 else se
