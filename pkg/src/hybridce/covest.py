"""Spatial covariance estimation from hybrid front-end observations.

Over ``N_c`` coherence intervals the receiver applies the same invertible
unit-modulus training matrix (the DFT, split into ``T = M/L`` blocks of ``L``
rows), averages the outer products of the stacked observations, then undoes
the training matrix and subtracts the known noise term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import SpatialCovariance
from .errors import DegenerateError, DimensionError, DomainError, NumericalError
from .numerics import as_hermitian, dft_matrix, eigh
from .rng import complex_normal, stream


@dataclass(frozen=True)
class CovEstConfig:
    M: int
    L: int
    rho: float
    n_c: int
    training_matrix: str = "dft"

    def __post_init__(self):
        if not 1 <= self.L <= self.M:
            raise DomainError(f"need 1 <= L <= M, got L={self.L}, M={self.M}")
        if self.M % self.L:
            raise DomainError(f"L={self.L} must divide M={self.M} for covariance training")
        if self.n_c < 1:
            raise DomainError("n_c must be >= 1")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if self.training_matrix != "dft":
            raise DomainError(f"unsupported training matrix {self.training_matrix!r}")

    @property
    def T(self):
        return self.M // self.L


def dft_training_matrix(M):
    return dft_matrix(M)


def training_blocks(M, L):
    """The ``T = M/L`` row blocks of the DFT training matrix."""
    if M % L:
        raise DomainError(f"L={L} must divide M={M}")
    F = dft_training_matrix(M)
    return [F[t * L:(t + 1) * L] for t in range(M // L)]


class SampleCovariance:
    """Running mean of ``y y^H``; instances can be merged by count-weighted averaging."""

    def __init__(self, M):
        self.M = M
        self.count = 0
        self._sum = np.zeros((M, M), dtype=complex)

    def accumulate(self, y):
        """Add one vector (shape ``(M,)``) or a batch (shape ``(n, M)``); returns ``self``."""
        Y = np.atleast_2d(np.asarray(y, dtype=complex))
        if Y.shape[1] != self.M:
            raise DimensionError(f"expected vectors of length {self.M}, got {Y.shape[1]}")
        self._sum += Y.T @ Y.conj()
        self.count += Y.shape[0]
        return self

    def merge(self, other):
        if other.M != self.M:
            raise DimensionError("cannot merge sample covariances of different size")
        out = SampleCovariance(self.M)
        out._sum = self._sum + other._sum
        out.count = self.count + other.count
        return out

    @property
    def R_yc_hat(self):
        if self.count == 0:
            raise DegenerateError("no observations accumulated")
        S = self._sum / self.count
        return 0.5 * (S + S.conj().T)


def _inverse(F_c):
    F_c = np.asarray(F_c, dtype=complex)
    if F_c.ndim != 2 or F_c.shape[0] != F_c.shape[1]:
        raise DimensionError("F_c must be square for covariance recovery")
    cond = float(np.linalg.cond(F_c))
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"F_c is not invertible (condition number {cond:.3e})", cond)
    return scipy.linalg.inv(F_c)


def recover_channel_cov(sample, F_c, F_d, rho):
    """``(1/rho) F_c^{-1} (R_yc - F_d F_d^H) F_c^{-H}``, symmetrized.

    ``sample`` may be a :class:`SampleCovariance` or a plain matrix (for
    instance the population covariance of ``y_c``).
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    R_y = sample.R_yc_hat if isinstance(sample, SampleCovariance) else as_hermitian(sample)
    Finv = _inverse(F_c)
    F_d = np.asarray(F_d, dtype=complex)
    R = Finv @ (R_y - F_d @ F_d.conj().T) @ Finv.conj().T / rho
    return 0.5 * (R + R.conj().T)


def psd_project(R_raw, trace=None):
    """Clip negative eigenvalues and renormalize the trace (default ``M``)."""
    es = eigh(R_raw)
    lam = np.clip(es.values, 0.0, None)
    if not np.any(lam > 0):
        raise DegenerateError("matrix has no positive eigenvalue")
    U = es.vectors
    R = (U * lam[None, :]) @ U.conj().T
    M = R.shape[0]
    R = R * ((M if trace is None else trace) / float(np.sum(lam)))
    return SpatialCovariance.from_matrix(R, normalize=False)


@dataclass(frozen=True, eq=False)
class CovEstimate:
    cov: SpatialCovariance
    R_raw: np.ndarray
    sample: SampleCovariance
    rel_errors: np.ndarray | None = None


def estimate_covariance(cov_true, cfg, seed, user=0, trajectory=False):
    """Simulate ``cfg.n_c`` training intervals against ``cov_true`` and estimate ``R``.

    With ``trajectory=True`` the relative Frobenius error of the raw recovery
    after every interval is returned in ``rel_errors``.
    """
    if cov_true.M != cfg.M:
        raise DimensionError("covariance and config disagree on M")
    M, T, rho = cfg.M, cfg.T, cfg.rho
    blocks = training_blocks(M, cfg.L)
    F_c = np.vstack(blocks)
    F_d = scipy.linalg.block_diag(*blocks)
    draws = complex_normal(stream(seed, "covest", user), (cfg.n_c, M + T * M))
    G = draws[:, :M] @ cov_true.sqrt.T
    Y = np.sqrt(rho) * (G @ F_c.T) + draws[:, M:] @ F_d.T
    sample = SampleCovariance(M).accumulate(Y)
    R_raw = recover_channel_cov(sample, F_c, F_d, rho)

    errors = None
    if trajectory:
        Finv = _inverse(F_c)
        Z = Y @ Finv.T
        noise_term = Finv @ (F_d @ F_d.conj().T) @ Finv.conj().T
        R = cov_true.R
        norm_R = np.linalg.norm(R)
        acc = np.zeros((M, M), dtype=complex)
        errors = np.empty(cfg.n_c)
        for i in range(cfg.n_c):
            acc += np.outer(Z[i], Z[i].conj())
            est = (acc / (i + 1) - noise_term) / rho
            errors[i] = np.linalg.norm(0.5 * (est + est.conj().T) - R) / norm_R
    return CovEstimate(cov=psd_project(R_raw), R_raw=R_raw, sample=sample, rel_errors=errors)


def relative_error(R_est, cov_true):
    R_est = R_est.R if isinstance(R_est, SpatialCovariance) else R_est
    return float(np.linalg.norm(R_est - cov_true.R) / np.linalg.norm(cov_true.R))
