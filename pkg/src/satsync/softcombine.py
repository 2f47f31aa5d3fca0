"""Compensation, coherent combining, and the code-aided SNR-loss objective.

These are the building blocks between raw received frames and the two
estimation stages: phase/frequency compensation, equal-gain combining,
square-law phase estimation, LLR-to-soft-symbol mapping, and the
combined-SNR loss used as the search objective.
"""

from dataclasses import dataclass

import numpy as np

# piecewise-linear soft-symbol approximation parameters
SOFT_LINEAR_SLOPE = 1.0 / 3.0
SOFT_SATURATION = 3.0

# cap on the estimated combined SNR so degenerate (noiseless) inputs stay
# ordered sensibly in the loss objective
GAMMA_CAP_DB = 20.0


class DegenerateInputError(ValueError):
    """Raised when an estimator's accumulator carries no usable signal."""


@dataclass
class EstimateSet:
    """Per-satellite frequency and phase estimates."""

    cfo_hat_hz: np.ndarray
    cpo_hat_rad: np.ndarray

    def __post_init__(self):
        self.cfo_hat_hz = np.atleast_1d(np.asarray(self.cfo_hat_hz, dtype=np.float64))
        self.cpo_hat_rad = wrap_phase(
            np.atleast_1d(np.asarray(self.cpo_hat_rad, dtype=np.float64))
        )
        if self.cfo_hat_hz.shape != self.cpo_hat_rad.shape:
            raise ValueError("cfo and cpo estimate lengths differ")

    def __len__(self):
        return len(self.cfo_hat_hz)


def wrap_phase(phi):
    """Wrap angles to (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out) if np.ndim(out) else (
        np.pi if out == -np.pi else out
    )


def compensate(frame, f_hat_hz, phi_hat_rad, symbol_time_s):
    """Undo a frequency/phase rotation: out_k = r_k e^{-j(2 pi k f Ts + phi)}."""
    r = np.asarray(frame)
    k = np.arange(r.shape[-1])
    return r * np.exp(-1j * (2.0 * np.pi * k * f_hat_hz * symbol_time_s + phi_hat_rad))


def combine(ensemble, estimates):
    """Equal-gain coherent sum of the compensated per-satellite frames."""
    if len(estimates) != ensemble.num_satellites:
        raise ValueError(
            f"need {ensemble.num_satellites} estimates, got {len(estimates)}"
        )
    out = np.zeros(ensemble.frame_length, dtype=np.complex128)
    for m in range(ensemble.num_satellites):
        out += compensate(ensemble.frames[m], estimates.cfo_hat_hz[m],
                          estimates.cpo_hat_rad[m], ensemble.symbol_time_s)
    return out


def square_law_phase(frame, f_cand_hz, symbol_time_s):
    """BPSK carrier phase from the squared signal, modulo pi.

    phi = 1/2 arg( sum_k r_k^2 e^{-j 4 pi f k Ts} ), in (-pi/2, pi/2].
    """
    r = np.asarray(frame)
    k = np.arange(len(r))
    acc = np.sum(r * r * np.exp(-1j * 4.0 * np.pi * f_cand_hz * k * symbol_time_s))
    if np.abs(acc) == 0.0:
        raise DegenerateInputError("square-law accumulator vanished")
    phi = 0.5 * np.angle(acc)
    if phi <= -np.pi / 2:
        phi += np.pi
    return phi


def llr_to_soft_symbols(posterior_llrs, approximate=True):
    """Posterior symbol expectation from coded-bit LLRs.

    Exact mode: zeta = tanh(L/2). Approximate mode: saturating piecewise
    linear map with slope 1/3 and breakpoints at +-3.
    """
    llr = np.asarray(posterior_llrs, dtype=np.float64)
    if approximate:
        return np.clip(SOFT_LINEAR_SLOPE * llr, -1.0, 1.0)
    return np.tanh(0.5 * llr)


def estimate_snr_ca(combined, zeta):
    """Code-aided combined-SNR estimate (linear) for a BPSK frame.

    With C = sum Re{r zeta*} and P = sum |r|^2:
      gamma = (K - 3/2) C^2 / (K (K P - C^2))
    Raises DegenerateInputError when the denominator is not positive.
    """
    r = np.asarray(combined)
    z = np.asarray(zeta, dtype=np.float64)
    if r.shape != z.shape:
        raise ValueError("combined frame and soft symbols differ in length")
    K = len(r)
    if K < 2:
        raise ValueError("need at least two symbols")
    C = float(np.sum(np.real(r) * z))
    P = float(np.sum(np.abs(r) ** 2))
    denom = K * (K * P - C * C)
    if denom <= 0.0 or C == 0.0:
        raise DegenerateInputError("SNR estimator denominator not positive")
    return (K - 1.5) * C * C / denom


def snr_loss(gamma_hat, snr_single_db, num_satellites):
    """Gap between theoretical combined SNR and the estimated one, in dB.

    gamma_hat is capped at GAMMA_CAP_DB before use so that degenerate
    noiseless estimates keep a sensible ordering.
    """
    if num_satellites < 1:
        raise ValueError("need at least one satellite")
    gamma_db = 10.0 * np.log10(gamma_hat)
    gamma_db = min(gamma_db, GAMMA_CAP_DB)
    return snr_single_db + 10.0 * np.log10(num_satellites) - gamma_db


def bpsk_channel_llrs(combined, noise_psd):
    """Channel LLRs of the coded bits for an equal-gain combined frame.

    The per-satellite amplitude is one, so the combined signal amplitude
    and total noise variance share the satellite count and it cancels:
    L = 4 Re{r} / noise_psd.
    """
    return 4.0 * np.real(np.asarray(combined)) / noise_psd
