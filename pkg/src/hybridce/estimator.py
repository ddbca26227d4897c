"""Observation synthesis, linear MMSE estimation and MSE evaluation.

Noise variance is normalized to one, so ``rho`` is the per-training SNR.
Pilot symbols are taken as 1 after compensation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import SpatialCovariance
from .errors import DimensionError, DomainError, NumericalError
from .montecarlo import draw, mean_and_stderr, run_chunks, stderr_db, to_db
from .rng import complex_normal


@dataclass(frozen=True)
class TrainingScenario:
    M: int
    L: int
    T: int
    rho: float

    def __post_init__(self):
        if not 1 <= self.L <= self.M:
            raise DomainError(f"need 1 <= L <= M, got L={self.L}, M={self.M}")
        if self.T < 1:
            raise DomainError("T must be >= 1")
        if not self.rho > 0:
            raise DomainError("rho must be positive")


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    y_c: np.ndarray
    F_c: np.ndarray
    F_d: np.ndarray


@dataclass(frozen=True, eq=False)
class EstimateReport:
    g_hat: np.ndarray
    squared_error: float

    @property
    def nmse_linear(self):
        return self.squared_error / self.g_hat.shape[0]


@dataclass(frozen=True)
class NMSEEstimate:
    nmse: float
    std_err: float
    trials: int

    @property
    def nmse_db(self):
        return float(to_db(self.nmse))

    @property
    def std_err_db(self):
        return stderr_db(self.nmse, self.std_err)


def _cov_matrix(cov):
    return cov.R if isinstance(cov, SpatialCovariance) else np.asarray(cov, dtype=complex)


def _cho(C, what):
    try:
        return scipy.linalg.cho_factor(C, lower=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = float(np.linalg.cond(C))
        raise NumericalError(f"{what} is singular (condition number {cond:.3e})", cond) from exc


def _check_shapes(R, F_c, F_d):
    F_c = np.atleast_2d(np.asarray(F_c, dtype=complex))
    F_d = np.atleast_2d(np.asarray(F_d, dtype=complex))
    if F_c.shape[1] != R.shape[0]:
        raise DimensionError(f"F_c has {F_c.shape[1]} columns, R is {R.shape[0]}x{R.shape[0]}")
    if F_d.shape[0] != F_c.shape[0]:
        raise DimensionError("F_c and F_d must have the same number of rows")
    return F_c, F_d


def stack_observations(cs, g, scenario, rng=None, noise=True):
    """Stacked observation ``y_c = sqrt(rho) F_c g + F_d n_c`` for one channel draw."""
    g = np.asarray(g, dtype=complex).ravel()
    if (cs.M, cs.L, cs.T) != (scenario.M, scenario.L, scenario.T) or g.size != scenario.M:
        raise DimensionError("combiner set, channel and scenario dimensions disagree")
    F_c, F_d = cs.F_c, cs.F_d
    y = np.sqrt(scenario.rho) * (F_c @ g)
    if noise:
        if rng is None:
            raise DomainError("noisy observations need an rng")
        y = y + F_d @ complex_normal(rng, F_d.shape[1])
    return ObservationBatch(y_c=y, F_c=F_c, F_d=F_d)


def observe_batch(blocks, G, noise, rho):
    """Row-wise ``y = sqrt(rho) F_c g + F_d n`` for ``G`` of shape (n, M).

    ``noise`` has shape (n, >= T*M) or is ``None`` for noiseless observations.
    """
    M = G.shape[1]
    parts = []
    for t, F in enumerate(blocks):
        y = np.sqrt(rho) * (G @ F.T)
        if noise is not None:
            y = y + noise[:, t * M:(t + 1) * M] @ F.T
        parts.append(y)
    return np.concatenate(parts, axis=1)


def wiener_filter(cov, F_c, F_d, rho, noise_var=1.0):
    """``W = sqrt(rho) R F_c^H (rho F_c R F_c^H + noise_var F_d F_d^H)^{-1}``."""
    R = _cov_matrix(cov)
    F_c, F_d = _check_shapes(R, F_c, F_d)
    C = rho * (F_c @ R @ F_c.conj().T) + noise_var * (F_d @ F_d.conj().T)
    C = 0.5 * (C + C.conj().T)
    X = np.sqrt(rho) * (F_c @ R)
    return scipy.linalg.cho_solve(_cho(C, "rho F_c R F_c^H + R_Fd"), X).conj().T


def _mse_information(R, F_c, F_d, rho):
    M = R.shape[0]
    R_Fd = F_d @ F_d.conj().T
    J = F_c.conj().T @ scipy.linalg.cho_solve(_cho(R_Fd, "R_Fd"), F_c)
    R_inv = scipy.linalg.cho_solve(_cho(R, "R"), np.eye(M))
    A = R_inv + rho * J
    A = 0.5 * (A + A.conj().T)
    return float(np.trace(scipy.linalg.cho_solve(_cho(A, "R^-1 + rho J"), np.eye(M))).real)


def _mse_covariance(R, F_c, F_d, rho):
    C = rho * (F_c @ R @ F_c.conj().T) + F_d @ F_d.conj().T
    C = 0.5 * (C + C.conj().T)
    X = F_c @ R
    gain = X.conj().T @ scipy.linalg.cho_solve(_cho(C, "rho F_c R F_c^H + R_Fd"), X)
    return float(np.trace(R).real - rho * np.trace(gain).real)


def analytic_mse(cov, F_c, F_d, rho, form="auto"):
    """Closed-form MMSE ``E||g - g_hat||^2``.

    ``form="information"`` evaluates ``tr((R^{-1} + rho F_c^H R_Fd^{-1} F_c)^{-1})``
    and needs an invertible ``R``; ``form="covariance"`` evaluates the
    equivalent ``tr(R - rho R F_c^H (rho F_c R F_c^H + R_Fd)^{-1} F_c R)``.
    ``"auto"`` picks the first when ``R`` is well conditioned.
    """
    R = _cov_matrix(cov)
    F_c, F_d = _check_shapes(R, F_c, F_d)
    if not rho > 0:
        raise DomainError("rho must be positive")
    if form == "auto":
        if isinstance(cov, SpatialCovariance):
            full = cov.is_full_rank()
        else:
            w = np.linalg.eigvalsh(0.5 * (R + R.conj().T))
            full = w[0] > 1e-10 * w[-1]
        form = "information" if full else "covariance"
    if form == "information":
        return _mse_information(R, F_c, F_d, rho)
    if form == "covariance":
        return _mse_covariance(R, F_c, F_d, rho)
    raise DomainError(f"unknown form {form!r}")


def mismatched_mse(cov_true, W, F_c, F_d, rho):
    """Exact MSE of an arbitrary linear estimator ``W`` when the true covariance is ``cov_true``."""
    R = _cov_matrix(cov_true)
    F_c, F_d = _check_shapes(R, F_c, F_d)
    cross = np.sqrt(rho) * np.trace(W @ F_c @ R).real
    C = rho * (F_c @ R @ F_c.conj().T) + F_d @ F_d.conj().T
    quad = np.trace(W @ C @ W.conj().T).real
    return float(np.trace(R).real - 2.0 * cross + quad)


def analytic_mse_single_optimal(lambdas, L, rho):
    """Optimal single-training MSE ``M - sum_{l<L} lam_l^2 / (lam_l + 1/rho)``."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    M = lam.size
    if not 1 <= L <= M:
        raise DomainError(f"need 1 <= L <= M, got L={L}, M={M}")
    if not rho > 0:
        raise DomainError("rho must be positive")
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.any(np.diff(lam) > 1e-12 * scale):
        raise DomainError("eigenvalues must be sorted in descending order")
    if abs(float(np.sum(lam)) - M) > 1e-9 * M:
        raise DomainError(f"eigenvalues must sum to M={M}, got {np.sum(lam)!r}")
    top = lam[:L]
    return float(M - np.sum(top**2 / (top + 1.0 / rho)))


def fully_digital_reference(cov, rho):
    """MMSE with ``F = I_M`` in one training: ``sum_l lam_l / (1 + rho lam_l)``."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    lam = cov.lambdas if isinstance(cov, SpatialCovariance) else np.linalg.eigvalsh(cov)
    return float(np.sum(lam / (1.0 + rho * lam)))


def estimate(W, obs, g=None):
    """Apply ``W`` to an observation; the error is reported when ``g`` is known."""
    g_hat = W @ obs.y_c
    err = float(np.sum(np.abs(np.asarray(g) - g_hat) ** 2)) if g is not None else float("nan")
    return EstimateReport(g_hat=g_hat, squared_error=err)


def trial_errors(cs, cov, rho, seed, indices, filter_cov=None, noiseless=False, user=0):
    """Per-trial ``||g - g_hat||^2 / M`` for the given trial indices."""
    M = cov.M
    noise_var = 0.0 if noiseless else 1.0
    design = cov if filter_cov is None else filter_cov
    W = wiener_filter(design, cs.F_c, cs.F_d, rho, noise_var=noise_var)
    G = draw(seed, "channel", indices, M, user) @ cov.sqrt.T
    noise = None if noiseless else draw(seed, "noise", indices, cs.T * M, user)
    Y = observe_batch(cs.blocks, G, noise, rho)
    G_hat = Y @ W.T
    return np.sum(np.abs(G - G_hat) ** 2, axis=1) / M


def empirical_nmse(cs, cov, scenario, trials, seed, filter_cov=None, noiseless=False, threads=1):
    """Monte Carlo NMSE of the Wiener estimator for combiner set ``cs``.

    Each trial draws its channel and noise from its own stream derived from
    ``seed``; ``filter_cov`` lets the filter use a different (e.g. estimated)
    covariance than the one generating the channels.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if (cs.M, cs.L, cs.T) != (scenario.M, scenario.L, scenario.T):
        raise DimensionError("combiner set and scenario dimensions disagree")
    parts = run_chunks(
        trials,
        lambda idx: trial_errors(cs, cov, scenario.rho, seed, idx, filter_cov, noiseless),
        threads=threads,
    )
    mean, se = mean_and_stderr(np.concatenate(parts))
    return NMSEEstimate(nmse=mean, std_err=se, trials=trials)
