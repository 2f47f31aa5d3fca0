"""Fine CFO/CPO estimation by cooperative expectation-maximization.

Each iteration decodes the coherently combined frame (E-step) and then
re-estimates every satellite's residual frequency and phase against the
posterior soft symbols (M-step). Residuals are measured relative to the
coarse-stage output, over the narrowed range the coarse grid leaves.
"""

from dataclasses import dataclass, field

import numpy as np

from . import polar
from .channel import DEFAULT_FFT_POINTS
from .softcombine import (
    DegenerateInputError,
    EstimateSet,
    bpsk_channel_llrs,
    compensate,
    llr_to_soft_symbols,
    wrap_phase,
)


def residual_half_width_hz(symbol_rate, fft_points, quant_bits):
    """Half-width of the residual CFO range left after the coarse grid."""
    return symbol_rate / ((1 << (quant_bits + 1)) * fft_points)


@dataclass
class CemConfig:
    max_iterations: int = 5
    grid_points: int = 65              # odd, symmetric around zero
    residual_half_width: float = None  # Hz; set from the coarse stage setup
    bp_iterations: int = 40
    min_sum: bool = False
    approximate_soft: bool = True
    freq_tol_hz: float = None          # default 1e-7 / Ts at runtime
    phase_tol_rad: float = 1e-3

    def __post_init__(self):
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be odd and >= 3")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class FineEstimate:
    estimates: EstimateSet
    decoded_info: np.ndarray
    converged: bool
    residual_trace: np.ndarray   # (iterations, M, 2): f_res, phi_res
    decode_converged: bool = False


def e_step(ensemble, current, code, cfg):
    """Combine under the current estimates, decode, map LLRs to symbols."""
    from .softcombine import combine

    combined = combine(ensemble, current)
    llrs = bpsk_channel_llrs(combined, ensemble.noise_psd)
    dec = polar.bp_decode(code, llrs, cfg.bp_iterations, min_sum=cfg.min_sum)
    zeta = llr_to_soft_symbols(dec.posterior_llrs,
                               approximate=cfg.approximate_soft)
    return zeta, dec


def _correlation(frame, zeta, freqs_hz, symbol_time_s):
    """sum_k r_k zeta_k e^{-j 2 pi k f Ts} for one or many frequencies."""
    k = np.arange(len(frame))
    rz = np.asarray(frame) * np.asarray(zeta)
    phase = np.exp(-2j * np.pi * np.outer(np.atleast_1d(freqs_hz), k)
                   * symbol_time_s)
    return phase @ rz


def m_step_frequency(frame, zeta, cfg, symbol_time_s):
    """Residual CFO maximizing the soft-symbol periodogram.

    Searches the symmetric grid over the residual range and refines the
    peak with three-point parabolic interpolation on the magnitude.
    """
    zeta = np.asarray(zeta, dtype=np.float64)
    if not np.any(zeta):
        raise DegenerateInputError("soft symbols are all zero")
    half = cfg.residual_half_width
    if half is None:
        raise ValueError("residual_half_width is not configured")
    freqs = np.linspace(-half, half, cfg.grid_points)
    mags = np.abs(_correlation(frame, zeta, freqs, symbol_time_s))
    i = int(np.argmax(mags))
    f_hat = freqs[i]
    if 0 < i < len(freqs) - 1:
        y0, y1, y2 = mags[i - 1], mags[i], mags[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            step = freqs[1] - freqs[0]
            # The peak is far wider than one grid step, so the local
            # curvature can be noise-dominated; trust the parabola only
            # within the one-step interval around the grid maximum.
            shift = 0.5 * step * (y0 - y2) / denom
            f_hat = freqs[i] + float(np.clip(shift, -0.5 * step, 0.5 * step))
    return float(np.clip(f_hat, -half, half))


def m_step_phase(frame, zeta, f_res_hz, symbol_time_s):
    """Residual phase: arg of the frequency-compensated correlation."""
    zeta = np.asarray(zeta, dtype=np.float64)
    if not np.any(zeta):
        raise DegenerateInputError("soft symbols are all zero")
    acc = _correlation(frame, zeta, f_res_hz, symbol_time_s)[0]
    if np.abs(acc) == 0.0:
        raise DegenerateInputError("phase accumulator vanished")
    return float(np.angle(acc))


def run_cem(ensemble, coarse, code, cfg):
    """EM refinement loop starting from the coarse estimates.

    Residuals are re-estimated in full each iteration from the
    coarse-compensated frames; converged means successive residual
    changes fell below the configured tolerances for every satellite.
    """
    ts = ensemble.symbol_time_s
    m = ensemble.num_satellites
    freq_tol = cfg.freq_tol_hz if cfg.freq_tol_hz is not None else 1e-7 / ts
    coarse_est = coarse.estimates

    # residual estimation runs on the coarse-compensated frames
    base = np.stack([
        compensate(ensemble.frames[j], coarse_est.cfo_hat_hz[j],
                   coarse_est.cpo_hat_rad[j], ts)
        for j in range(m)
    ])

    f_res = np.zeros(m)
    phi_res = np.zeros(m)
    trace = []
    converged = False
    last_dec = None
    for _ in range(cfg.max_iterations):
        totals = EstimateSet(coarse_est.cfo_hat_hz + f_res,
                             coarse_est.cpo_hat_rad + phi_res)
        try:
            zeta, last_dec = e_step(ensemble, totals, code, cfg)
        except DegenerateInputError:
            break
        if not np.any(zeta):
            break
        new_f = np.empty(m)
        new_phi = np.empty(m)
        try:
            for j in range(m):
                new_f[j] = m_step_frequency(base[j], zeta, cfg, ts)
                new_phi[j] = m_step_phase(base[j], zeta, new_f[j], ts)
        except DegenerateInputError:
            break
        df = np.abs(new_f - f_res)
        dphi = np.abs(wrap_phase(new_phi - phi_res))
        f_res, phi_res = new_f, new_phi
        trace.append(np.stack([f_res, phi_res], axis=1))
        if np.all(df < freq_tol) and np.all(dphi < cfg.phase_tol_rad):
            converged = True
            break

    totals = EstimateSet(coarse_est.cfo_hat_hz + f_res,
                         coarse_est.cpo_hat_rad + phi_res)
    _, final_dec = e_step(ensemble, totals, code, cfg)
    return FineEstimate(
        estimates=totals,
        decoded_info=final_dec.info_hat,
        converged=converged,
        residual_trace=(np.asarray(trace) if trace
                        else np.zeros((0, m, 2))),
        decode_converged=final_dec.converged,
    )
