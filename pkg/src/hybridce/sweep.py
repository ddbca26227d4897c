"""Seeded Monte Carlo sweeps producing CSV records.

Designs and filters are computed once per (method, SNR) on the calling
thread. Trials then run in fixed chunks; every point of a sweep sees the same
channel and noise draws, so differences between rows are paired.
"""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import astuple, dataclass, fields

import numpy as np

from .channel import exp_covariance, ray_covariance
from .combiner import (
    CombinerSet,
    DesignMethod,
    design_alternating,
    design_block_selection,
    design_dft_random,
    design_sequential,
    design_single_optimal,
    fully_digital,
    realize,
)
from .config import SweepConfig
from .covest import CovEstConfig, estimate_covariance
from .errors import ConfigError, HybridCEError
from .estimator import analytic_mse, mismatched_mse, observe_batch, wiener_filter
from .montecarlo import draw, mean_and_stderr, run_chunks, stderr_db, to_db
from .precoding import phased_zf_precoder, sum_spectral_efficiency
from .rng import stream

USER_SECTOR_DEG = 120.0


@dataclass
class SweepRecord:
    method: str
    phase_mode: str
    quant_bits: int
    m: int
    l: int  # noqa: E741
    t: int
    k: int
    a: float | None
    snr_db: float
    trials: int
    nmse_db: float | None = None
    nmse_db_analytic: float | None = None
    std_err_db: float | None = None
    se_bits_per_hz: float | None = None
    se_perfect_bits_per_hz: float | None = None
    iters: int | None = None
    status: str = "ok"
    wall_ms: float | None = None


COLUMNS = tuple(f.name for f in fields(SweepRecord))


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(records, out=None):
    """Write records with a header row to a path, a text stream, or stdout."""
    if out is None or out == "-":
        _write_rows(records, sys.stdout)
        return
    if hasattr(out, "write"):
        _write_rows(records, out)
        return
    with open(out, "w", newline="", encoding="utf-8") as fh:
        _write_rows(records, fh)


def _write_rows(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_cell(v) for v in astuple(r)])


def user_covariance(cfg, user):
    """True covariance of ``user``.

    Exponential-model users share one matrix. Ray-model users are centred at
    ``ray_mean_deg`` plus an offset that spreads the ``k`` users evenly over a
    120 degree sector (no offset for a single user); path angles come from
    stream ``(seed, "ray", user)``.
    """
    if cfg.model == "exp":
        return exp_covariance(cfg.m, cfg.a)
    offset = 0.0 if cfg.k == 1 else USER_SECTOR_DEG * ((user + 0.5) / cfg.k - 0.5)
    return ray_covariance(
        cfg.m,
        cfg.ray_paths,
        np.deg2rad(cfg.ray_spread_deg),
        np.deg2rad(cfg.ray_mean_deg + offset),
        rng_seed=stream(cfg.seed, "ray", user),
    )


def design_combiners(cfg, method, cov, rho, user=0):
    """Combiner set for one method with the configured hardware constraints applied."""
    m = DesignMethod(method)
    L, T = cfg.l, cfg.t
    if m is DesignMethod.FULLY_DIGITAL:
        return fully_digital(cfg.m)
    if m is DesignMethod.SINGLE_OPTIMAL:
        cs = CombinerSet(
            combiners=(design_single_optimal(cov, L),),
            design_method=m,
            index_sets=(tuple(range(L)),),
        )
    elif m is DesignMethod.BLOCK_SELECTION:
        cs = design_block_selection(cov, L, T, rho)
    elif m is DesignMethod.SEQUENTIAL:
        cs = design_sequential(cov, L, T, rho)
    elif m is DesignMethod.ALTERNATING:
        cs = design_alternating(cov, L, T, rho, epsilon=cfg.epsilon, max_iter=cfg.max_iter)
    else:
        cs = design_dft_random(cfg.m, L, T, stream(cfg.seed, "dft_random", user))
    return realize(cs, phase_only=cfg.phase_mode == "phase_only", bits=cfg.quant_bits)


@dataclass
class _UserDesign:
    cs: CombinerSet
    W: np.ndarray
    analytic: float  # per-antenna MSE


@dataclass
class _Point:
    method: str
    snr_db: float
    rho: float  # downlink / grid SNR
    rho_train: float
    users: list | None
    status: str = "ok"
    iters: int | None = None
    t: int | None = None
    seconds: float = 0.0


def _snr_covariances(cfg, covs, rho, users):
    """Covariances the receiver designs with at one SNR: true, or estimated when ``n_c > 0``."""
    if cfg.n_c == 0:
        return covs
    ce = CovEstConfig(M=cfg.m, L=cfg.l, rho=rho, n_c=cfg.n_c)
    return [estimate_covariance(covs[u], ce, cfg.seed, user=u).cov for u in range(users)]


def _train_rho(cfg, snr_db):
    return 10.0 ** ((snr_db if cfg.rho_db is None else cfg.rho_db) / 10.0)


def _build_points(cfg, covs, users):
    points, estimated = [], {}
    for snr in cfg.snr_db:
        rho = 10.0 ** (snr / 10.0)
        rho_t = _train_rho(cfg, snr)
        if rho_t not in estimated:
            estimated[rho_t] = _snr_covariances(cfg, covs, rho_t, users)
        design_covs = estimated[rho_t]
        for method in cfg.methods:
            start = time.perf_counter()
            p = _Point(method=method, snr_db=float(snr), rho=rho, rho_train=rho_t, users=[])
            try:
                for u in range(users):
                    cs = design_combiners(cfg, method, design_covs[u], rho_t, user=u)
                    W = wiener_filter(design_covs[u], cs.F_c, cs.F_d, rho_t)
                    if cfg.n_c == 0:
                        mse = analytic_mse(covs[u], cs.F_c, cs.F_d, rho_t)
                    else:
                        mse = mismatched_mse(covs[u], W, cs.F_c, cs.F_d, rho_t)
                    p.users.append(_UserDesign(cs=cs, W=W, analytic=mse / cfg.m))
                    if cs.iterations is not None:
                        p.iters = max(p.iters or 0, cs.iterations)
                    if cs.truncated:
                        p.status = "truncated"
                p.t = p.users[0].cs.T
            except (HybridCEError, np.linalg.LinAlgError) as exc:
                p.users = None
                p.status = f"failed:{type(exc).__name__}"
            p.seconds = time.perf_counter() - start
            points.append(p)
    return points


def _estimate(ud, G, noise, rho, M):
    T = ud.cs.T
    Y = observe_batch(ud.cs.blocks, G, noise[:, : T * M], rho)
    G_hat = Y @ ud.W.T
    return G_hat, np.sum(np.abs(G - G_hat) ** 2, axis=1) / M


def _record(cfg, p, trials, timing):
    t = p.t if p.t is not None else (1 if p.method in ("single_optimal", "fully_digital") else cfg.t)
    return SweepRecord(
        method=p.method,
        phase_mode=cfg.phase_mode,
        quant_bits=cfg.quant_bits,
        m=cfg.m,
        l=cfg.m if p.method == "fully_digital" else cfg.l,
        t=t,
        k=cfg.k,
        a=cfg.a if cfg.model == "exp" else None,
        snr_db=p.snr_db,
        trials=trials,
        iters=p.iters,
        status=p.status,
        wall_ms=1000.0 * p.seconds if timing else None,
    )


def _fill_nmse(rec, errors, analytic):
    mean, se = mean_and_stderr(errors)
    rec.nmse_db = float(to_db(mean))
    rec.std_err_db = stderr_db(mean, se)
    rec.nmse_db_analytic = float(to_db(analytic))


def _max_T(points):
    return max((ud.cs.T for p in points if p.users for ud in p.users), default=1)


def run_mse_sweep(cfg: SweepConfig, threads=1, timing=False):
    """Empirical and analytic NMSE for every (SNR, method) pair, single user (user 0)."""
    if cfg.rho_db is not None:
        raise ConfigError("rho_db: the MSE sweep trains at the grid SNR; leave rho_db unset", field="rho_db")
    cov = user_covariance(cfg, 0)
    points = _build_points(cfg, [cov], 1)
    live = [p for p in points if p.users]
    M, T_max = cfg.m, _max_T(points)

    def chunk(idx):
        G = draw(cfg.seed, "channel", idx, M, 0) @ cov.sqrt.T
        noise = draw(cfg.seed, "noise", idx, T_max * M, 0)
        errs, secs = [], []
        for p in live:
            start = time.perf_counter()
            errs.append(_estimate(p.users[0], G, noise, p.rho_train, M)[1])
            secs.append(time.perf_counter() - start)
        return errs, secs

    parts = run_chunks(cfg.trials, chunk, threads=threads)
    records = []
    for i, p in enumerate(live):
        p.seconds += sum(part[1][i] for part in parts)
    by_id = {id(p): i for i, p in enumerate(live)}
    for p in points:
        rec = _record(cfg, p, cfg.trials, timing)
        if p.users:
            i = by_id[id(p)]
            errors = np.concatenate([part[0][i] for part in parts])
            _fill_nmse(rec, errors, p.users[0].analytic)
        records.append(rec)
    return records


def run_se_sweep(cfg: SweepConfig, threads=1, timing=False):
    """Downlink sum spectral efficiency with estimated and perfect CSI.

    Each trial draws all ``k`` user channels, estimates them through the
    configured pipeline, builds the substitute hybrid precoder from the
    estimates and evaluates the sum rate on the true channels. Grid SNRs are
    downlink SNRs; training uses ``rho_db`` when set, else the grid SNR.
    """
    if cfg.k > cfg.l:
        raise ConfigError(f"k: number of users ({cfg.k}) must not exceed l ({cfg.l})", field="k")
    K, M, L = cfg.k, cfg.m, cfg.l
    covs = [user_covariance(cfg, u) for u in range(K)]
    points = _build_points(cfg, covs, K)
    live = [p for p in points if p.users]
    T_max = _max_T(points)
    snrs = sorted({p.rho for p in points})

    def chunk(idx):
        G = [draw(cfg.seed, "channel", idx, M, u) @ covs[u].sqrt.T for u in range(K)]
        noise = [draw(cfg.seed, "noise", idx, T_max * M, u) for u in range(K)]
        H = np.stack(G, axis=2)
        genie = phased_zf_precoder(H, L, bits=cfg.quant_bits).composite
        perfect = {rho: sum_spectral_efficiency(H, genie, rho) for rho in snrs}
        out = []
        for p in live:
            start = time.perf_counter()
            est = [_estimate(p.users[u], G[u], noise[u], p.rho_train, M) for u in range(K)]
            H_hat = np.stack([e[0] for e in est], axis=2)
            err = np.mean([e[1] for e in est], axis=0)
            prec = phased_zf_precoder(H_hat, L, bits=cfg.quant_bits)
            se = sum_spectral_efficiency(H, prec, p.rho)
            out.append((err, se, time.perf_counter() - start))
        return out, perfect

    parts = run_chunks(cfg.trials, chunk, threads=threads)
    by_id = {id(p): i for i, p in enumerate(live)}
    records = []
    for p in points:
        p_perfect = np.concatenate([part[1][p.rho] for part in parts])
        rec = _record(cfg, p, cfg.trials, False)
        rec.se_perfect_bits_per_hz = float(np.mean(p_perfect))
        if p.users:
            i = by_id[id(p)]
            errors = np.concatenate([part[0][i][0] for part in parts])
            se = np.concatenate([part[0][i][1] for part in parts])
            p.seconds += sum(part[0][i][2] for part in parts)
            _fill_nmse(rec, errors, float(np.mean([ud.analytic for ud in p.users])))
            rec.se_bits_per_hz = float(np.mean(se))
        if timing:
            rec.wall_ms = 1000.0 * p.seconds
        records.append(rec)
    return records


def design_table(cfg, method, snr_db, user=0):
    """The combiner set a sweep would use for ``method`` at ``snr_db``, for ``user``."""
    rho = _train_rho(cfg, snr_db)
    covs = [user_covariance(cfg, u) for u in range(user + 1)]
    design_cov = _snr_covariances(cfg, covs, rho, user + 1)[user]
    return design_combiners(cfg, method, design_cov, rho, user=user)


def write_design(cs, cfg, method, snr_db, out):
    """Dump a combiner set as ``t,i,j,re,im`` rows after ``#`` metadata lines."""
    lines = [
        f"# method={method}",
        f"# mode={cs.mode.value}",
        f"# bits={cs.bits or 0}",
        f"# m={cs.M} l={cs.L} t={cs.T}",
        f"# snr_db={_cell(float(snr_db))}",
        f"# seed={cfg.seed}",
        "t,i,j,re,im",
    ]
    for t, F in enumerate(cs.blocks):
        for i in range(F.shape[0]):
            for j in range(F.shape[1]):
                z = F[i, j]
                lines.append(f"{t},{i},{j},{_cell(float(z.real))},{_cell(float(z.imag))}")
    text = "\n".join(lines) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    elif hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
