"""Acceptance gate: thirteen end-to-end criteria at their stated tolerances.

Each check returns ``(passed, detail)``; the pytest wrappers record one
``ACnn PASS|FAIL`` line per criterion (echoed in the terminal summary by
``conftest.py``) and then assert. Running this file as a script prints the
same lines without pytest.
"""

from __future__ import annotations

import functools
import itertools
import sys

import numpy as np
import pytest

from hybridce.channel import exp_covariance
from hybridce.combiner import (
    design_alternating,
    design_block_selection,
    design_sequential,
    realize,
)
from hybridce.config import SweepConfig
from hybridce.estimator import (
    analytic_mse,
    analytic_mse_single_optimal,
    fully_digital_reference,
)
from hybridce.numerics import block_grq, gen_eigh_pencil, grq_bounds
from hybridce.rng import complex_normal, stream
from hybridce.sweep import run_mse_sweep, run_se_sweep

M = 64
SNR_GRID = tuple(float(s) for s in range(-20, 21, 5))
SE_GRID = tuple(float(s) for s in range(-10, 21, 5))
TRIALS = 10_000
THREADS = 0

RESULTS: dict[str, str] = {}


def db(x):
    return 10.0 * np.log10(x)


def rho_of(snr_db):
    return 10.0 ** (snr_db / 10.0)


def nmse_db(cs, cov, rho):
    return db(analytic_mse(cov, cs.F_c, cs.F_d, rho) / cov.M)


def fd_db(cov, rho):
    return db(fully_digital_reference(cov, rho) / cov.M)


# --- individual criteria ----------------------------------------------------


def ac01():
    worst, detail = 0.0, ""
    for L in (4, 8, 16):
        cfg = SweepConfig(m=M, l=L, a=0.8, snr_db=SNR_GRID, methods=("single_optimal",), trials=TRIALS, seed=1)
        lam = exp_covariance(M, 0.8).lambdas
        for r in run_mse_sweep(cfg, threads=THREADS):
            closed = db(analytic_mse_single_optimal(lam, L, rho_of(r.snr_db)) / M)
            z = abs(r.nmse_db - closed) / r.std_err_db
            if z > worst:
                worst, detail = z, f"L={L} snr={r.snr_db:g}: |diff|={abs(r.nmse_db - closed):.3f} dB"
    return worst <= 3.0, f"max deviation {worst:.2f} std errors ({detail})"


def ac02():
    cov = exp_covariance(M, 0.8)
    hybrid = db(analytic_mse_single_optimal(cov.lambdas, 16, 1.0) / M)
    gap = hybrid - fd_db(cov, 1.0)
    return abs(gap - 0.5) <= 0.25, f"gap {gap:.3f} dB (target 0.5 +/- 0.25)"


def ac03():
    cov = exp_covariance(M, 0.8)
    gaps = []
    for snr in (s for s in SNR_GRID if s >= 10):
        rho = rho_of(snr)
        gaps.append(nmse_db(design_sequential(cov, 8, 8, rho), cov, rho) - fd_db(cov, rho))
    return max(gaps) <= 1.0, "gaps " + ", ".join(f"{g:.3f}" for g in gaps) + " dB (limit 1)"


def ac04():
    cov = exp_covariance(M, 0.8)
    margins = []
    for snr in (s for s in SNR_GRID if s <= -10):
        rho = rho_of(snr)
        margins.append(fd_db(cov, rho) - nmse_db(design_sequential(cov, 8, 2, rho), cov, rho))
    return min(margins) > 0, "fully-digital minus T=2: " + ", ".join(f"{m:.3f}" for m in margins) + " dB"


def ac05():
    cov = exp_covariance(M, 0.8)
    ok, notes = True, []
    worst_alt = 0.0
    for T in (1, 2, 4, 6, 8):
        gaps = {}
        for snr in SNR_GRID:
            rho = rho_of(snr)
            seq = design_sequential(cov, 8, T, rho)
            blk = design_block_selection(cov, 8, T, rho)
            alt = design_alternating(cov, 8, T, rho)
            s, b, a = (nmse_db(c, cov, rho) for c in (seq, blk, alt))
            gaps[snr] = b - s
            ok &= s <= b + 1e-12 and a <= s + 1e-12
            worst_alt = max(worst_alt, abs(a - s))
        if T >= 2:
            ok &= gaps[-20.0] > gaps[20.0]
        notes.append(f"T={T} gap(-20)={gaps[-20.0]:.3f} gap(+20)={gaps[20.0]:.3f}")
    ok &= worst_alt <= 0.1
    return ok, "; ".join(notes) + f"; max |alt-seq| {worst_alt:.4f} dB"


def _phase_loss(a, T, snr):
    cov = exp_covariance(M, a)
    rho = rho_of(snr)
    cs = design_sequential(cov, 8, T, rho)
    return nmse_db(realize(cs, phase_only=True), cov, rho) - nmse_db(cs, cov, rho)


def ac06():
    losses = [_phase_loss(0.8, 8, s) for s in SNR_GRID]
    hi, lo = losses[-1], losses[0]
    monotone = all(b >= a - 1e-9 for a, b in zip(losses, losses[1:]))
    fig4b = _phase_loss(0.9, 6, 20.0)
    ok = abs(hi - 1.5) <= 0.5 and lo <= 0.2 and monotone and abs(fig4b - 0.7) <= 0.4
    return ok, f"loss(+20)={hi:.3f} loss(-20)={lo:.3f} monotone={monotone} a=0.9,T=6 loss={fig4b:.3f} dB"


def ac07():
    a_grid = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9)
    worst = -np.inf
    for L in (1, 4, 8, 16, 32, 64):
        for snr in SNR_GRID:
            mse = [analytic_mse_single_optimal(exp_covariance(M, a).lambdas, L, rho_of(snr)) for a in a_grid]
            worst = max(worst, max(b - a for a, b in zip(mse, mse[1:])))
    return worst <= 1e-12, f"largest increase along a: {worst:.3e}"


def ac08():
    ok = True
    for a in (0.0, 0.2, 0.4, 0.6, 0.8, 0.9):
        lam = exp_covariance(M, a).lambdas
        for snr in SNR_GRID:
            mse = [analytic_mse_single_optimal(lam, L, rho_of(snr)) for L in range(1, M + 1)]
            ok &= all(b < a_ for a_, b in zip(mse, mse[1:]))
        for L in (1, 4, 8, 16, 64):
            mse = [analytic_mse_single_optimal(lam, L, rho_of(s)) for s in SNR_GRID]
            ok &= all(b < a_ for a_, b in zip(mse, mse[1:]))
    return ok, "strict decrease in L (1..64) and in SNR for every a"


def _direct_mse(R, blocks, rho):
    J = sum(F.conj().T @ np.linalg.inv(F @ F.conj().T) @ F for F in blocks)
    return float(np.trace(np.linalg.inv(np.linalg.inv(R) + rho * J)).real)


def _brute_force(cov, L, T, rho):
    U, best = cov.U, np.inf
    for sets in itertools.combinations_with_replacement(itertools.combinations(range(cov.M), L), T):
        best = min(best, _direct_mse(cov.R, [U[:, list(s)].conj().T for s in sets], rho))
    return best


def ac09():
    cells = matches = 0
    alt_ok, seq_excess = True, 0.0
    for m, L, T, a, rho in itertools.product(range(1, 7), (1, 2), (1, 2), (0.3, 0.5, 0.8), (0.1, 1.0, 10.0)):
        if L > m:
            continue
        cov = exp_covariance(m, a)
        bf = _brute_force(cov, L, T, rho)
        alt = _direct_mse(cov.R, design_alternating(cov, L, T, rho).blocks, rho)
        seq = _direct_mse(cov.R, design_sequential(cov, L, T, rho).blocks, rho)
        cells += 1
        alt_ok &= abs(alt - bf) <= 1e-6
        matches += abs(seq - bf) <= 1e-6
        seq_excess = max(seq_excess, seq / bf - 1.0)
    frac = matches / cells
    ok = alt_ok and frac >= 0.9 and seq_excess <= 0.05
    return ok, f"{cells} cells: alternating exact={alt_ok}, sequential matches {frac:.1%}, worst excess {seq_excess:.2%}"


def ac10():
    rng = stream(10, "acceptance_grq")
    worst_sum, bound_violations = 0.0, 0
    for trial in range(200):
        m = int(rng.integers(1, 7))
        X, Y = complex_normal(rng, (m, m)), complex_normal(rng, (m, m))
        A = X @ X.conj().T - float(rng.uniform(0, 2)) * np.eye(m)
        B = Y @ Y.conj().T + 0.1 * np.eye(m)
        es = gen_eigh_pencil(A, B)
        for T in range(1, m + 1):
            idx = rng.choice(m, size=T, replace=False)
            val = block_grq(es.vectors[:, idx], A, B)
            worst_sum = max(worst_sum, abs(val - es.values[idx].sum()) / max(1.0, np.abs(es.values).sum()))
        if trial < 5:
            T = int(rng.integers(1, m + 1))
            lo, hi = grq_bounds(es.values, T)
            for _ in range(200):
                V, _ = np.linalg.qr(complex_normal(rng, (m, T)))
                v = block_grq(V, A, B)
                tol = 1e-9 * max(1.0, abs(lo), abs(hi))
                bound_violations += not (lo - tol <= v <= hi + tol)
    ok = worst_sum <= 1e-9 and bound_violations == 0
    return ok, f"max subset-sum error {worst_sum:.2e}; bound violations {bound_violations}/1000"


SE_BASE = dict(m=M, l=8, t=8, k=8, a=0.8, trials=TRIALS, seed=2024, methods=("sequential",))


@functools.cache
def se_records(**overrides):
    return run_se_sweep(SweepConfig(**{**SE_BASE, **overrides}), threads=THREADS)


def ac11():
    (true_r,) = se_records(snr_db=(10.0,))
    (est_r,) = se_records(snr_db=(10.0,), n_c=300)
    ratio = est_r.se_bits_per_hz / true_r.se_bits_per_hz
    gap = est_r.nmse_db - true_r.nmse_db
    ok = abs(1.0 - ratio) <= 0.05 and gap <= 0.5
    return ok, (
        f"SE estimated/true R = {est_r.se_bits_per_hz:.3f}/{true_r.se_bits_per_hz:.3f} ({ratio:.4f}); "
        f"NMSE gap {gap:.3f} dB (limit 0.5)"
    )


def ac12():
    common = dict(snr_db=SE_GRID, phase_mode="phase_only", rho_db=10.0, n_c=300)
    se = {b: [r.se_bits_per_hz for r in se_records(quant_bits=b, **common)] for b in (2, 3, 4, 0)}
    ok = all(
        se[2][i] < se[3][i] <= se[4][i] <= se[0][i] for i in range(len(SE_GRID))
    )
    rows = ", ".join(f"{s:g}dB:{se[2][i]:.2f}<{se[3][i]:.2f}<={se[4][i]:.2f}<={se[0][i]:.2f}" for i, s in enumerate(SE_GRID))
    return ok, rows


def ac13():
    recs = se_records(
        model="ray", ray_paths=6, t=6, snr_db=SE_GRID, phase_mode="phase_only",
        quant_bits=3, rho_db=20.0, n_c=1000,
    )
    ratios = {r.snr_db: r.se_bits_per_hz / r.se_perfect_bits_per_hz for r in recs}
    ok = all(ratios[s] >= 0.95 for s in SE_GRID if s <= 10)
    return ok, "estimated/perfect SE: " + ", ".join(f"{s:g}dB:{v:.4f}" for s, v in ratios.items())


CHECKS = {
    "AC01 closed-form accuracy": ac01,
    "AC02 16-chain gap": ac02,
    "AC03 full-DoF convergence": ac03,
    "AC04 low-SNR crossover": ac04,
    "AC05 method ordering": ac05,
    "AC06 phase-only loss": ac06,
    "AC07 correlation monotonicity": ac07,
    "AC08 RF-chain and power monotonicity": ac08,
    "AC09 toy-scale optimality": ac09,
    "AC10 generalized Rayleigh quotient": ac10,
    "AC11 covariance pipeline": ac11,
    "AC12 quantization ordering": ac12,
    "AC13 ray-model training budget": ac13,
}


def run_check(name):
    passed, detail = CHECKS[name]()
    line = f"{name[:4]} {'PASS' if passed else 'FAIL'} {name[5:]}: {detail}"
    RESULTS[name] = line
    print(line)
    return passed, line


@pytest.mark.parametrize("name", list(CHECKS), ids=[n[:4] for n in CHECKS])
def test_acceptance(name):
    passed, line = run_check(name)
    assert passed, line


if __name__ == "__main__":
    failures = sum(not run_check(name)[0] for name in CHECKS)
    sys.exit(1 if failures else 0)
