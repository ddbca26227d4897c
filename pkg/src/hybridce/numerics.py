"""Dense complex Hermitian linear algebra used by the designs and estimators.

Everything here is a pure function of its inputs. Eigenvalues are always
returned in descending order; ties keep the order produced by LAPACK.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DefinitenessError,
    DimensionError,
    DomainError,
    NotHermitianError,
    NotPSDError,
    NumericalError,
    RankError,
)

HERMITIAN_TOL = 1e-12
PSD_CLIP_TOL = 1e-10
PSD_REJECT_TOL = 1e-6
PD_TOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs sorted by descending value; ``vectors[:, k]`` pairs with ``values[k]``."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    def top(self, k):
        return self.values[:k], self.vectors[:, :k]


def as_hermitian(H, tol=HERMITIAN_TOL, name="matrix"):
    """Validate ``H`` as square Hermitian and return an exactly Hermitian copy.

    The asymmetry tolerance is relative to ``max(1, max|H|)``.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise DomainError(f"{name} has non-finite entries")
    H = H.astype(complex)
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if H.size and np.max(np.abs(H - H.conj().T)) > tol * scale:
        raise NotHermitianError(f"{name} is not Hermitian")
    return 0.5 * (H + H.conj().T)


def _sort_desc(values, vectors):
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


def _fix_phase(vectors):
    # Rotate each column so its first largest-magnitude entry is real positive.
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    mags = np.abs(pivots)
    mags[mags == 0] = 1.0
    return vectors * (pivots.conj() / mags)[None, :]


def eigh(H):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    H = as_hermitian(H)
    try:
        w, v = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    w, v = _sort_desc(w, v)
    return EigenSystem(values=w, vectors=_fix_phase(v))


def _inv_sqrt_pd(B, name="B"):
    es = eigh(B)
    if es.values[-1] <= PD_TOL:
        raise DefinitenessError(
            f"{name} is not positive definite (smallest eigenvalue {es.values[-1]:.3e})"
        )
    U = es.vectors
    return (U * (1.0 / np.sqrt(es.values))[None, :]) @ U.conj().T


def gen_eigh_pencil(A, B):
    """Generalized eigenpairs ``A v = lam B v`` of a Hermitian-definite pencil.

    Solved by whitening with ``B^{-1/2}``; the returned vectors are
    B-orthonormal (``v_i^H B v_j = delta_ij``).
    """
    A = as_hermitian(A, name="A")
    B = as_hermitian(B, name="B")
    if A.shape != B.shape:
        raise DimensionError(f"pencil shapes differ: {A.shape} vs {B.shape}")
    W = _inv_sqrt_pd(B)
    es = eigh(W @ A @ W)
    return EigenSystem(values=es.values, vectors=W @ es.vectors)


def block_grq(V, A, B):
    """Block generalized Rayleigh quotient ``tr((V^H B V)^{-1} V^H A V)``."""
    V = np.asarray(V, dtype=complex)
    if V.ndim == 1:
        V = V[:, None]
    A = as_hermitian(A, name="A")
    B = as_hermitian(B, name="B")
    if V.shape[0] != A.shape[0] or A.shape != B.shape:
        raise DimensionError("V, A and B dimensions disagree")
    if np.linalg.matrix_rank(V) < V.shape[1]:
        raise RankError("V must have full column rank")
    _inv_sqrt_pd(B)
    VH = V.conj().T
    try:
        val = np.trace(np.linalg.solve(VH @ B @ V, VH @ A @ V))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"V^H B V is singular: {exc}") from exc
    return float(val.real)


def grq_bounds(values, T):
    """Lower and upper bounds on a rank-``T`` block GRQ given pencil eigenvalues."""
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    return float(np.sum(values[-T:])), float(np.sum(values[:T]))


def sqrt_psd(R):
    """Hermitian PSD square root ``U diag(sqrt(lam)) U^H``.

    Eigenvalues in ``[-1e-6, 0)`` are treated as round-off and clipped.
    """
    es = eigh(R)
    if es.values[-1] < -PSD_REJECT_TOL:
        raise NotPSDError(f"matrix is not PSD (smallest eigenvalue {es.values[-1]:.3e})")
    U = es.vectors
    S = (U * np.sqrt(np.clip(es.values, 0.0, None))[None, :]) @ U.conj().T
    return 0.5 * (S + S.conj().T)


def majorizes(x, y):
    """True iff ``x`` weakly majorizes ``y`` (equal totals, dominating prefix sums)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DomainError(f"length mismatch: {x.size} vs {y.size}")
    sx, sy = float(np.sum(x)), float(np.sum(y))
    tol = 1e-9 * max(1.0, abs(sx), abs(sy))
    if abs(sx - sy) > tol:
        raise DomainError(f"sums differ: {sx!r} vs {sy!r}")
    px = np.cumsum(np.sort(x)[::-1])
    py = np.cumsum(np.sort(y)[::-1])
    return bool(np.all(px >= py - tol))


def dft_matrix(M):
    """Unnormalized ``M``-point DFT matrix, entries ``exp(-j 2 pi m n / M)``."""
    if M < 1:
        raise DomainError("M must be positive")
    n = np.arange(M)
    return np.exp(-2j * np.pi * (np.outer(n, n) % M) / M)
