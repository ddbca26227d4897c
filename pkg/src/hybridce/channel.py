"""Spatial covariance models and channel sampling."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError, NotPSDError
from .numerics import PSD_CLIP_TOL, EigenSystem, as_hermitian, eigh, majorizes, sqrt_psd
from .rng import complex_normal, stream


@dataclass(frozen=True, eq=False)
class SpatialCovariance:
    """Hermitian PSD channel covariance normalized to ``tr(R) = M``.

    Build instances through :meth:`from_matrix` or the model constructors
    below; the eigensystem is computed once and cached.
    """

    R: np.ndarray
    eig: EigenSystem

    @classmethod
    def from_matrix(cls, R, normalize=True):
        R = as_hermitian(R, name="R")
        M = R.shape[0]
        if normalize:
            tr = float(np.trace(R).real)
            if tr <= 0:
                raise DomainError("covariance has non-positive trace")
            R = R * (M / tr)
        es = eigh(R)
        if es.values[-1] < -PSD_CLIP_TOL * max(1.0, es.values[0]):
            raise NotPSDError(f"covariance is not PSD (smallest eigenvalue {es.values[-1]:.3e})")
        return cls(R=R, eig=es)

    @property
    def M(self):
        return self.R.shape[0]

    @property
    def trace_target(self):
        return float(self.M)

    @property
    def lambdas(self):
        """Eigenvalues, descending, with round-off negatives clipped to zero."""
        return np.clip(self.eig.values, 0.0, None)

    @property
    def U(self):
        return self.eig.vectors

    @cached_property
    def sqrt(self):
        return sqrt_psd(self.R)

    def is_full_rank(self, rtol=1e-10):
        return bool(self.eig.values[-1] > rtol * self.eig.values[0])


def exp_covariance(M, a):
    """Exponential correlation model ``[R]_{mn} = a^{|m-n|}`` (real, trace ``M``)."""
    if not 0.0 <= a < 1.0:
        raise DomainError(f"correlation coefficient a must lie in [0, 1), got {a}")
    if M < 1:
        raise DomainError("M must be positive")
    idx = np.arange(M)
    R = float(a) ** np.abs(idx[:, None] - idx[None, :])
    return SpatialCovariance.from_matrix(R, normalize=False)


def steering_vector(M, theta):
    """Half-wavelength ULA response ``exp(j*pi*m*sin(theta))``, unnormalized."""
    m = np.arange(M)
    return np.exp(1j * np.pi * m * np.sin(theta))


def ray_angles(num_paths, angle_spread, mean_angle, rng_seed):
    """Per-path arrival angles, Laplacian around ``mean_angle`` with std ``angle_spread``."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else stream(rng_seed, "ray")
    if angle_spread == 0:
        return np.full(num_paths, float(mean_angle))
    return mean_angle + rng.laplace(0.0, angle_spread / np.sqrt(2.0), size=num_paths)


def ray_covariance(M, num_paths, angle_spread, mean_angle=0.0, rng_seed=0):
    """Discrete-ray covariance ``(M/P) sum_p a(theta_p) a(theta_p)^H``, trace-normalized.

    Stand-in for a geometric spatial channel model: rank is at most
    ``num_paths``.
    """
    if num_paths < 1:
        raise DomainError("num_paths must be >= 1")
    if M < 1:
        raise DomainError("M must be positive")
    if angle_spread < 0:
        raise DomainError("angle_spread must be non-negative")
    thetas = ray_angles(num_paths, angle_spread, mean_angle, rng_seed)
    A = np.stack([steering_vector(M, th) for th in thetas], axis=1)
    R = (M / num_paths) * (A @ A.conj().T)
    return SpatialCovariance.from_matrix(R, normalize=True)


def sample_channel(cov, rng):
    """One realization ``g = R^{1/2} h`` with ``h ~ CN(0, I_M)``."""
    h = complex_normal(rng, cov.M)
    return cov.sqrt @ h


def sample_channels(cov, rng, n):
    """``n`` realizations as rows of an ``(n, M)`` array."""
    H = complex_normal(rng, (n, cov.M))
    return H @ cov.sqrt.T


def more_correlated(c1, c2):
    """True iff the spectrum of ``c1`` majorizes that of ``c2``."""
    if c1.M != c2.M:
        raise DimensionError(f"dimension mismatch: {c1.M} vs {c2.M}")
    return majorizes(c1.lambdas, c2.lambdas)
