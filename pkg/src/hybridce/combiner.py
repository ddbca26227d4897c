"""RF combiner design.

All unconstrained designs work in the eigenbasis of the covariance: a
training is described by an ``M x L`` orthonormal matrix ``V`` (the rotated
combiner) and the physical combiner is ``F = (U V)^H``. When every ``V`` is a
selection of identity columns the designs reduce to picking eigen-indices,
which is how single-training, block selection, sequential and (by default)
alternating designs are represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError
from .numerics import dft_matrix, gen_eigh_pencil
from .rng import complex_normal


class Mode(str, Enum):
    UNCONSTRAINED = "unconstrained"
    PHASE_ONLY = "phase_only"
    QUANTIZED = "quantized"


class DesignMethod(str, Enum):
    SINGLE_OPTIMAL = "single_optimal"
    BLOCK_SELECTION = "block_selection"
    SEQUENTIAL = "sequential"
    ALTERNATING = "alternating"
    DFT_RANDOM = "dft_random"
    FULLY_DIGITAL = "fully_digital"


ORTHONORMAL_TOL = 1e-10
ZERO_ENTRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Combiner:
    """One ``L x M`` analog combiner together with its hardware mode."""

    entries: np.ndarray
    mode: Mode = Mode.UNCONSTRAINED
    bits: int | None = None

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        object.__setattr__(self, "entries", F)
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.UNCONSTRAINED:
            gram = F @ F.conj().T
            if np.linalg.norm(gram - np.eye(F.shape[0])) > ORTHONORMAL_TOL * max(1, F.shape[0]):
                raise DomainError("unconstrained combiner rows must be orthonormal")
        elif not np.allclose(np.abs(F), 1.0, rtol=0, atol=1e-12):
            raise DomainError(f"{self.mode.value} combiner entries must be unit-modulus")
        if self.mode is Mode.QUANTIZED:
            if self.bits is None or self.bits < 1:
                raise DomainError("quantized combiner needs bits >= 1")
            k = np.angle(F) * (2**self.bits) / (2 * np.pi)
            if np.max(np.abs(k - np.round(k)), initial=0.0) > 1e-9:
                raise DomainError("quantized combiner entries are off the phase grid")

    @property
    def L(self):
        return self.entries.shape[0]

    @property
    def M(self):
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class CombinerSet:
    """Combiners for ``T`` trainings plus design metadata.

    ``index_sets[t]`` lists the eigen-indices chosen for training ``t`` when
    the design is a selection; it is ``None`` otherwise.
    """

    combiners: tuple
    design_method: DesignMethod
    index_sets: tuple | None = None
    mse_predicted: float | None = None
    iterations: int | None = None
    truncated: bool = False
    mse_trajectory: tuple = field(default_factory=tuple)

    def __post_init__(self):
        combs = tuple(self.combiners)
        if not combs:
            raise DimensionError("a combiner set needs at least one training")
        shapes = {c.entries.shape for c in combs}
        modes = {(c.mode, c.bits) for c in combs}
        if len(shapes) != 1:
            raise DimensionError(f"combiners disagree in shape: {sorted(shapes)}")
        if len(modes) != 1:
            raise DomainError("combiners disagree in mode")
        object.__setattr__(self, "combiners", combs)
        object.__setattr__(self, "design_method", DesignMethod(self.design_method))
        if self.index_sets is not None:
            sets = tuple(tuple(int(i) for i in s) for s in self.index_sets)
            M = combs[0].M
            for s in sets:
                if len(set(s)) != len(s) or any(not 0 <= i < M for i in s):
                    raise DomainError(f"invalid index set {s}")
            object.__setattr__(self, "index_sets", sets)

    @property
    def T(self):
        return len(self.combiners)

    @property
    def L(self):
        return self.combiners[0].L

    @property
    def M(self):
        return self.combiners[0].M

    @property
    def mode(self):
        return self.combiners[0].mode

    @property
    def bits(self):
        return self.combiners[0].bits

    @property
    def F_c(self):
        return np.vstack([c.entries for c in self.combiners])

    @property
    def F_d(self):
        return scipy.linalg.block_diag(*[c.entries for c in self.combiners])

    @property
    def blocks(self):
        return [c.entries for c in self.combiners]


@dataclass(frozen=True)
class SequentialState:
    """Diagonal of ``Gamma_t`` before training ``step`` is chosen."""

    gamma: np.ndarray
    rho: float
    step: int

    def scores(self):
        return self.gamma**2 / (self.gamma + 1.0 / self.rho)


def _check_L(L, M):
    if not 1 <= L <= M:
        raise DimensionError(f"need 1 <= L <= M, got L={L}, M={M}")


def _check_rho(rho):
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")


def _top(scores, L):
    # Stable sort keeps the lowest index first among equal scores.
    return np.argsort(-scores, kind="stable")[:L]


def selection_mse(lambdas, index_sets, rho):
    """MSE of identity-column selections: ``sum_i lam_i / (1 + rho lam_i c_i)``."""
    lam = np.asarray(lambdas, dtype=float)
    counts = np.zeros(lam.size)
    for s in index_sets:
        counts[list(s)] += 1
    return float(np.sum(lam / (1.0 + rho * lam * counts)))


def rotated_mse(lambdas, P, rho):
    """``tr((Lambda^{-1} + rho P)^{-1})`` evaluated without inverting ``Lambda``."""
    s = np.sqrt(np.clip(np.asarray(lambdas, dtype=float), 0.0, None))
    K = np.eye(s.size) + rho * (s[:, None] * P * s[None, :])
    Q = s[:, None] * np.linalg.solve(K, np.diag(s))
    return float(np.trace(Q).real)


def _from_selection(cov, index_sets):
    U = cov.U
    return tuple(Combiner(U[:, list(s)].conj().T) for s in index_sets)


def design_single_optimal(cov, L):
    """Combiner receiving along the ``L`` dominant eigen-directions of ``R``."""
    _check_L(L, cov.M)
    return Combiner(cov.U[:, :L].conj().T)


def design_block_selection(cov, L, T, rho=None):
    """Training ``t`` uses eigen-block ``tL .. (t+1)L - 1``."""
    _check_L(L, cov.M)
    if T < 1 or T * L > cov.M:
        raise DimensionError(f"block selection needs T*L <= M, got T={T}, L={L}, M={cov.M}")
    sets = [tuple(range(t * L, (t + 1) * L)) for t in range(T)]
    mse = selection_mse(cov.lambdas, sets, rho) if rho is not None else None
    return CombinerSet(
        combiners=_from_selection(cov, sets),
        design_method=DesignMethod.BLOCK_SELECTION,
        index_sets=sets,
        mse_predicted=mse,
    )


def sequential_selection(lambdas, L, T, rho):
    """Greedy step-wise index selection.

    Returns the chosen index sets and the state before each step. Indices
    may repeat across trainings.
    """
    _check_rho(rho)
    gamma = np.clip(np.asarray(lambdas, dtype=float), 0.0, None).copy()
    sets, states = [], []
    for t in range(T):
        state = SequentialState(gamma=gamma.copy(), rho=float(rho), step=t)
        idx = _top(state.scores(), L)
        sets.append(tuple(int(i) for i in idx))
        states.append(state)
        # gamma^{-1} += rho, written so that gamma = 0 stays 0
        gamma[idx] = gamma[idx] / (1.0 + rho * gamma[idx])
    return sets, states


def design_sequential(cov, L, T, rho):
    _check_L(L, cov.M)
    if T < 1:
        raise DomainError("T must be >= 1")
    sets, _ = sequential_selection(cov.lambdas, L, T, rho)
    return CombinerSet(
        combiners=_from_selection(cov, sets),
        design_method=DesignMethod.SEQUENTIAL,
        index_sets=sets,
        mse_predicted=selection_mse(cov.lambdas, sets, rho),
    )


def _alternate_selection(lam, L, sets, rho, epsilon, max_iter):
    T = len(sets)
    counts = np.zeros(lam.size)
    for s in sets:
        counts[list(s)] += 1
    best = (selection_mse(lam, sets, rho), list(sets))
    trajectory = [best[0]]
    prev = best[0]
    converged = False
    n = 0
    for n in range(1, max_iter + 1):
        for j in range(T):
            counts[list(sets[j])] -= 1
            q = lam / (1.0 + rho * lam * counts)
            new = tuple(int(i) for i in _top(q**2 / (q + 1.0 / rho), L))
            counts[list(new)] += 1
            sets[j] = new
        cur = selection_mse(lam, sets, rho)
        trajectory.append(cur)
        if cur < best[0]:
            best = (cur, list(sets))
        if prev == 0 or abs(cur - prev) / prev < epsilon:
            converged = True
            break
        prev = cur
    return best[1], trajectory, n, converged


def _alternate_general(lam, L, V, rho, epsilon, max_iter):
    T = len(V)
    M = lam.size
    s = np.sqrt(lam)

    def P_of(blocks):
        P = np.zeros((M, M), dtype=complex)
        for B in blocks:
            P += B @ B.conj().T
        return P

    cur = rotated_mse(lam, P_of(V), rho)
    best = (cur, list(V))
    trajectory = [cur]
    prev = cur
    converged = False
    n = 0
    for n in range(1, max_iter + 1):
        for j in range(T):
            P = P_of(V[:j] + V[j + 1:])
            K = np.eye(M) + rho * (s[:, None] * P * s[None, :])
            Q = s[:, None] * np.linalg.solve(K, np.diag(s))
            Q = 0.5 * (Q + Q.conj().T)
            pencil = gen_eigh_pencil(Q @ Q, Q + np.eye(M) / rho)
            V[j] = np.linalg.qr(pencil.vectors[:, :L])[0]
        cur = rotated_mse(lam, P_of(V), rho)
        trajectory.append(cur)
        if cur < best[0]:
            best = (cur, list(V))
        if prev == 0 or abs(cur - prev) / prev < epsilon:
            converged = True
            break
        prev = cur
    return best[1], trajectory, n, converged


def random_unitary_init(M, L, T, rng):
    """``T`` random ``M x L`` orthonormal blocks (QR of complex Gaussian matrices)."""
    return [np.linalg.qr(complex_normal(rng, (M, L)))[0] for _ in range(T)]


def design_alternating(cov, L, T, rho, epsilon=1e-8, max_iter=100, init=None, rng=None):
    """Coordinate-wise refinement of all ``T`` trainings.

    ``init`` may be ``None`` (start from the sequential design), a
    :class:`CombinerSet`, ``"random"`` (random orthonormal blocks drawn from
    ``rng``) or a list of ``M x L`` orthonormal blocks in the eigenbasis.
    Selection-type starting points keep the iterates as index selections;
    anything else goes through the general pencil solver.

    Hitting ``max_iter`` is not an error: the best iterate is returned and
    ``truncated`` is set.
    """
    _check_L(L, cov.M)
    _check_rho(rho)
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be >= 1")
    lam = cov.lambdas
    if init is None:
        init = design_sequential(cov, L, T, rho)
    if isinstance(init, str):
        if init != "random":
            raise DomainError(f"unknown init {init!r}")
        if rng is None:
            raise DomainError("random init needs an rng")
        init = random_unitary_init(cov.M, L, T, rng)

    if isinstance(init, CombinerSet):
        if (init.T, init.L, init.M) != (T, L, cov.M):
            raise DimensionError("init dimensions disagree with (T, L, M)")
        if init.index_sets is not None:
            sets, traj, n, conv = _alternate_selection(
                lam, L, list(init.index_sets), rho, epsilon, max_iter
            )
            return CombinerSet(
                combiners=_from_selection(cov, sets),
                design_method=DesignMethod.ALTERNATING,
                index_sets=sets,
                mse_predicted=selection_mse(lam, sets, rho),
                iterations=n,
                truncated=not conv,
                mse_trajectory=tuple(traj),
            )
        if init.mode is not Mode.UNCONSTRAINED:
            raise DomainError("alternating needs an unconstrained starting point")
        blocks = [cov.U.conj().T @ F.conj().T for F in init.blocks]
    else:
        blocks = [np.asarray(B, dtype=complex) for B in init]
        if len(blocks) != T or any(B.shape != (cov.M, L) for B in blocks):
            raise DimensionError("init blocks must be T arrays of shape (M, L)")

    blocks, traj, n, conv = _alternate_general(lam, L, blocks, rho, epsilon, max_iter)
    combs = tuple(Combiner((cov.U @ B).conj().T) for B in blocks)
    return CombinerSet(
        combiners=combs,
        design_method=DesignMethod.ALTERNATING,
        mse_predicted=min(traj),
        iterations=n,
        truncated=not conv,
        mse_trajectory=tuple(traj),
    )


def phase_only_project(c):
    """Keep each entry's phase and set its magnitude to one (zero maps to 1)."""
    if c.mode is not Mode.UNCONSTRAINED:
        raise DomainError("phase projection expects an unconstrained combiner")
    F = c.entries
    out = np.exp(1j * np.angle(F))
    out[np.abs(F) <= ZERO_ENTRY_TOL] = 1.0
    return Combiner(out, Mode.PHASE_ONLY)


def quantize_phases(c, bits):
    """Snap every phase to the nearest multiple of ``2 pi / 2^bits``; ties go to the lower level."""
    if bits < 1:
        raise DomainError(f"bits must be >= 1, got {bits}")
    if c.mode is not Mode.PHASE_ONLY:
        raise DomainError("quantization expects a phase-only combiner")
    return Combiner(quantize_unit_modulus(c.entries, bits), Mode.QUANTIZED, bits=bits)


def quantize_unit_modulus(X, bits):
    """Unit-modulus array whose phases are those of ``X`` snapped to the ``bits`` grid."""
    levels = 2**bits
    step = 2 * np.pi / levels
    phase = np.mod(np.angle(X), 2 * np.pi)
    k = np.mod(np.ceil(phase / step - 0.5), levels)
    return np.exp(1j * step * k)


def dft_random_columns(M, L, rng):
    """``L`` distinct rows of the unit-modulus DFT matrix, chosen at random."""
    _check_L(L, M)
    rows = rng.choice(M, size=L, replace=False)
    return Combiner(dft_matrix(M)[rows], Mode.PHASE_ONLY)


def design_dft_random(M, L, T, rng):
    return CombinerSet(
        combiners=tuple(dft_random_columns(M, L, rng) for _ in range(T)),
        design_method=DesignMethod.DFT_RANDOM,
    )


def fully_digital(M):
    """Reference receiver: one training through ``F = I_M``."""
    return CombinerSet(
        combiners=(Combiner(np.eye(M)),), design_method=DesignMethod.FULLY_DIGITAL
    )


def realize(cs, phase_only=False, bits=0):
    """Apply hardware constraints to a whole set.

    ``bits > 0`` implies phase-only projection followed by quantization.
    Sets that are already phase-only are only quantized.
    """
    if not phase_only and not bits:
        return cs
    combs = cs.combiners
    if cs.mode is Mode.UNCONSTRAINED:
        combs = tuple(phase_only_project(c) for c in combs)
    if bits:
        if cs.mode is Mode.QUANTIZED:
            raise DomainError("set is already quantized")
        combs = tuple(quantize_phases(c, bits) for c in combs)
    return replace(cs, combiners=combs, mse_predicted=None)
