"""Seeded Monte Carlo campaigns over (M, SNR, parameter) grids.

A scenario expands into a list of grid points; every grid point runs an
independent set of trials. Each trial derives its RNG from
(master seed, point index, trial index), so results do not depend on the
number of worker threads, and the reduction order is fixed by trial
index. The orchestrator owns all mutable aggregation state; workers only
return finished TrialRecords.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import cem, ice, metrics, polar
from .cem import CemConfig
from .ice import IceConfig
from .channel import (
    DEFAULT_FFT_POINTS,
    DEFAULT_SYMBOL_RATE,
    draw_truth_params,
    es_n0_to_noise_psd,
    make_ensemble,
    reveal_truth,
)
from .softcombine import EstimateSet, bpsk_channel_llrs, combine
from .txchain import build_frame

# pipeline modes
MODE_SINGLE = "single"        # one satellite, fixed uncompensated offsets
MODE_IDEAL = "ideal"          # genie compensation, combining + decode only
MODE_ICE = "ice"              # coarse search only, loss metric
MODE_ICE_CEM = "ice-cem"      # full two-stage estimator


@dataclass
class ExperimentConfig:
    """One grid point worth of settings plus the sweep axes around it."""

    scenario: str = "custom"
    mode: str = MODE_ICE_CEM
    num_satellites: int = 4
    es_n0_db: float = -3.0
    trials: int = 50
    seed: int = 1234
    # code parameters
    block_length: int = 1024
    info_length: int = 512
    design_snr_db: float = 0.0
    decode_bp_iterations: int = 40
    # channel / truth draw policy (CFO uniform over the NFO range, CPO
    # uniform over (-pi, pi])
    symbol_rate: float = DEFAULT_SYMBOL_RATE
    fft_points: int = DEFAULT_FFT_POINTS
    # MODE_SINGLE only: fixed uncompensated offsets
    fixed_nfo: float = 0.0
    fixed_cpo_rad: float = 0.0
    # estimator stages
    ice: IceConfig = field(default_factory=IceConfig)
    cem: CemConfig = field(default_factory=CemConfig)
    # restart the coarse search while its refined loss stays above the
    # threshold (0 disables restarts)
    ice_restarts: int = 0
    ice_restart_threshold_db: float = 1.0
    # CEM residual range in units of the coarse cell half-width; > 1
    # lets the fine stage recover adjacent-cell coarse outcomes
    cem_range_cells: float = 3.0
    record_loss_trace: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in (MODE_SINGLE, MODE_IDEAL, MODE_ICE, MODE_ICE_CEM):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.num_satellites < 1:
            raise ValueError("num_satellites must be >= 1")


@dataclass
class TrialRecord:
    """Everything a finished trial contributes to the point aggregates."""

    trial: int
    nfo_errors: np.ndarray = None
    cpo_errors: np.ndarray = None
    bit_errors: int = 0
    total_bits: int = 0
    frame_error: int = 0
    snr_loss_db: float = np.nan
    loss_trace: np.ndarray = None
    ice_restarts_used: int = 0
    degenerate: bool = False


def _resolved_cem_config(cfg):
    half = cem.residual_half_width_hz(cfg.symbol_rate, cfg.fft_points,
                                      cfg.ice.quant_bits)
    return replace(cfg.cem, residual_half_width=cfg.cem_range_cells * half)


def _coarse_with_restarts(ensemble, cfg, code, rng, known_symbols):
    coarse = ice.run_ice(ensemble, cfg.ice, code, rng,
                         known_symbols=known_symbols)
    used = 0
    while (used < cfg.ice_restarts
           and coarse.refined_loss_db > cfg.ice_restart_threshold_db):
        used += 1
        retry = ice.run_ice(ensemble, cfg.ice, code, rng,
                            known_symbols=known_symbols)
        if retry.refined_loss_db < coarse.refined_loss_db:
            coarse = retry
        if coarse.refined_loss_db <= cfg.ice_restart_threshold_db:
            break
    return coarse, used


def run_trial(cfg, code, trial_index, point_index=0):
    """One seeded end-to-end trial for the configured pipeline mode."""
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, point_index, trial_index])
    )
    info = rng.integers(0, 2, code.info_length).astype(np.uint8)
    symbols = build_frame(code, info)
    noise_psd = es_n0_to_noise_psd(cfg.es_n0_db)
    rec = TrialRecord(trial=trial_index)

    if cfg.mode == MODE_SINGLE:
        from .channel import SatelliteChannelParams

        ts = 1.0 / cfg.symbol_rate
        params = SatelliteChannelParams(
            cfo_hz=cfg.fixed_nfo / ts,
            cpo_rad=cfg.fixed_cpo_rad,
            noise_psd=noise_psd,
            symbol_time_s=ts,
        )
        ensemble = make_ensemble(symbols, [params], rng)
        llrs = bpsk_channel_llrs(ensemble.frames[0], noise_psd)
        dec = polar.bp_decode(code, llrs, cfg.decode_bp_iterations,
                              min_sum=False)
        errs = int(np.sum(dec.info_hat != info))
        rec.bit_errors, rec.total_bits = errs, len(info)
        rec.frame_error = int(errs > 0)
        return rec

    params = draw_truth_params(cfg.num_satellites, noise_psd, rng,
                               symbol_rate=cfg.symbol_rate,
                               fft_points=cfg.fft_points)
    ensemble = make_ensemble(symbols, params, rng)
    truth_f = np.array([p.cfo_hz for p in params])
    truth_p = np.array([p.cpo_rad for p in params])
    ts = ensemble.symbol_time_s

    if cfg.mode == MODE_IDEAL:
        est = EstimateSet(truth_f, truth_p)
        combined = combine(ensemble, est)
        llrs = bpsk_channel_llrs(combined, noise_psd)
        dec = polar.bp_decode(code, llrs, cfg.decode_bp_iterations,
                              min_sum=False)
        errs = int(np.sum(dec.info_hat != info))
        rec.bit_errors, rec.total_bits = errs, len(info)
        rec.frame_error = int(errs > 0)
        return rec

    known = symbols if cfg.ice.data_aided else None
    coarse, rec.ice_restarts_used = _coarse_with_restarts(
        ensemble, cfg, code, rng, known
    )
    rec.snr_loss_db = coarse.refined_loss_db
    if cfg.record_loss_trace:
        rec.loss_trace = coarse.loss_trace

    if cfg.mode == MODE_ICE:
        est = coarse.estimates
        decoded = None
    else:
        fine = cem.run_cem(ensemble, coarse, code, _resolved_cem_config(cfg))
        est = fine.estimates
        decoded = fine.decoded_info
        errs = int(np.sum(decoded != info))
        rec.bit_errors, rec.total_bits = errs, len(info)
        rec.frame_error = int(errs > 0)

    cpo_hat, decoded = metrics.resolve_global_phase_fold(
        truth_p, est, decoded, code
    )
    if decoded is not None:
        errs = int(np.sum(decoded != info))
        rec.bit_errors = errs
        rec.frame_error = int(errs > 0)
    rec.nfo_errors = (est.cfo_hat_hz - truth_f) * ts
    rec.cpo_errors = metrics.phase_error(truth_p, cpo_hat)
    return rec


@dataclass
class PointResult:
    config: ExperimentConfig
    records: list
    wall_time_s: float

    def aggregate(self):
        """Reduce trial records to the figure-ready row values."""
        cfg = self.config
        rmse_f = metrics.RmseAccumulator()
        rmse_p = metrics.RmseAccumulator()
        ber = metrics.BerAccumulator()
        loss = metrics.MeanAccumulator()
        degenerate = 0
        for r in self.records:
            if r.degenerate:
                degenerate += 1
                continue
            if r.nfo_errors is not None:
                rmse_f.add(r.nfo_errors)
                rmse_p.add(r.cpo_errors)
            if r.total_bits:
                ber.bit_errors += r.bit_errors
                ber.total_bits += r.total_bits
                ber.frame_errors += r.frame_error
                ber.total_frames += 1
            loss.add(r.snr_loss_db)
        snr = 10.0 ** (cfg.es_n0_db / 10.0)
        out = {
            "scenario": cfg.scenario,
            "mode": cfg.mode,
            "m": cfg.num_satellites,
            "es_n0_db": cfg.es_n0_db,
            "quant_bits": cfg.ice.quant_bits,
            "num_candidates": cfg.ice.num_candidates,
            "num_elites": cfg.ice.num_elites,
            "fixed_nfo": cfg.fixed_nfo,
            "fixed_cpo_rad": cfg.fixed_cpo_rad,
            "trials": len(self.records),
            "degenerate": degenerate,
            "rmse_nfo": rmse_f.rmse,
            "rmse_cpo_rad": rmse_p.rmse,
            "crlb_nfo": np.sqrt(metrics.crlb_frequency(
                cfg.block_length, snr, cfg.num_satellites,
                1.0 / cfg.symbol_rate)),
            "crlb_cpo_rad": np.sqrt(metrics.crlb_phase(
                cfg.block_length, snr, cfg.num_satellites)),
            "ber": ber.ber,
            "fer": ber.bler,
            "total_bits": ber.total_bits,
            "mean_snr_loss_db": loss.mean,
            "wall_time_s": self.wall_time_s,
        }
        return out

    def loss_trace_rows(self):
        """Per-iteration mean best-so-far loss rows (convergence figures)."""
        traces = [r.loss_trace for r in self.records
                  if r.loss_trace is not None and len(r.loss_trace)]
        if not traces:
            return []
        depth = max(len(t) for t in traces)
        rows = []
        for it in range(depth):
            vals = [t[min(it, len(t) - 1)] for t in traces]
            rows.append({"iteration": it + 1,
                         "mean_best_loss_db": float(np.mean(vals))})
        return rows


def run_point(cfg, code=None, threads=1, point_index=0):
    """Run all trials of one grid point, in trial-index order."""
    if code is None:
        code = polar.construct_code(cfg.block_length, cfg.info_length,
                                    design_snr_db=cfg.design_snr_db)
    t0 = time.perf_counter()
    if threads <= 1:
        records = [run_trial(cfg, code, t, point_index)
                   for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(
                lambda t: run_trial(cfg, code, t, point_index),
                range(cfg.trials),
            ))
    return PointResult(config=cfg, records=records,
                       wall_time_s=time.perf_counter() - t0)


def run_experiment(configs, threads=1):
    """Run a list of grid-point configs; returns aggregate rows in order."""
    if not configs:
        raise ValueError("no grid points to run")
    code_cache = {}
    rows = []
    for idx, cfg in enumerate(configs):
        key = (cfg.block_length, cfg.info_length, cfg.design_snr_db)
        if key not in code_cache:
            code_cache[key] = polar.construct_code(*key[:2],
                                                   design_snr_db=key[2])
        result = run_point(cfg, code_cache[key], threads, point_index=idx)
        row = result.aggregate()
        if cfg.record_loss_trace:
            for trow in result.loss_trace_rows():
                merged = dict(row)
                merged.update(trow)
                rows.append(merged)
        else:
            rows.append(row)
    return rows
