"""RMSE/BER accumulation and the estimation variance reference bounds."""

from dataclasses import dataclass, field

import numpy as np

from .softcombine import wrap_phase


def crlb_frequency(K, snr_linear_per_satellite, num_satellites, symbol_time_s):
    """Lower bound on var(f_hat * Ts) for joint data-aided estimation.

    Uses the standard single-tone bound with the coherent-combining SNR
    rho = M * snr. Returned in normalized-frequency (NFO) units squared.
    """
    if K < 3:
        raise ValueError("need K >= 3")
    if snr_linear_per_satellite <= 0:
        raise ValueError("snr must be positive")
    rho = num_satellites * snr_linear_per_satellite
    return 3.0 / (2.0 * np.pi ** 2 * rho * K * (K ** 2 - 1.0))


def crlb_phase(K, snr_linear_per_satellite, num_satellites):
    """Lower bound on var(phi_hat), phase referenced at the frame start."""
    if K < 3:
        raise ValueError("need K >= 3")
    if snr_linear_per_satellite <= 0:
        raise ValueError("snr must be positive")
    rho = num_satellites * snr_linear_per_satellite
    return 2.0 * (2.0 * K - 1.0) / (rho * K * (K + 1.0))


def phase_error(true_rad, est_rad):
    """Minimal-magnitude angular difference est - true, in (-pi, pi]."""
    return wrap_phase(np.asarray(est_rad, dtype=np.float64)
                      - np.asarray(true_rad, dtype=np.float64))


def resolve_global_phase_fold(true_cpo, est, decoded_info, code):
    """Fold out the unobservable all-satellite pi rotation.

    A pi rotation common to every satellite leaves the combined frame and
    the loss objective untouched except for a global BPSK sign flip, so no
    blind estimator can resolve it (the same ambiguity differential
    signaling removes). When the estimates sit closer to the pi-rotated
    truth, rotate them back and flip the decoded word by the codeword
    complement, which differs in the single info bit whose generator row
    is all ones.
    """
    err = phase_error(true_cpo, est.cpo_hat_rad)
    alt = phase_error(true_cpo, est.cpo_hat_rad + np.pi)
    if np.sum(alt ** 2) >= np.sum(err ** 2):
        return est.cpo_hat_rad, decoded_info
    flipped = decoded_info
    if decoded_info is not None and code is not None:
        ones_row = code.block_length - 1
        pos = np.searchsorted(code.info_indices, ones_row)
        if pos < len(code.info_indices) and code.info_indices[pos] == ones_row:
            flipped = decoded_info.copy()
            flipped[pos] ^= 1
    return wrap_phase(est.cpo_hat_rad + np.pi), flipped


@dataclass
class RmseAccumulator:
    """Streaming second-moment accumulator; merge is associative."""

    count: int = 0
    sq_sum: float = 0.0

    def add(self, errors):
        e = np.atleast_1d(np.asarray(errors, dtype=np.float64))
        self.count += e.size
        self.sq_sum += float(np.sum(e ** 2))

    def merge(self, other):
        self.count += other.count
        self.sq_sum += other.sq_sum

    @property
    def rmse(self):
        return float(np.sqrt(self.sq_sum / self.count)) if self.count else np.nan


@dataclass
class BerAccumulator:
    bit_errors: int = 0
    total_bits: int = 0
    frame_errors: int = 0
    total_frames: int = 0

    def add(self, sent_bits, decoded_bits):
        sent = np.asarray(sent_bits)
        got = np.asarray(decoded_bits)
        errs = int(np.sum(sent != got))
        self.bit_errors += errs
        self.total_bits += sent.size
        self.frame_errors += int(errs > 0)
        self.total_frames += 1

    def merge(self, other):
        self.bit_errors += other.bit_errors
        self.total_bits += other.total_bits
        self.frame_errors += other.frame_errors
        self.total_frames += other.total_frames

    @property
    def ber(self):
        return self.bit_errors / self.total_bits if self.total_bits else np.nan

    @property
    def bler(self):
        return self.frame_errors / self.total_frames if self.total_frames else np.nan


@dataclass
class MeanAccumulator:
    count: int = 0
    total: float = 0.0

    def add(self, value):
        if np.isfinite(value):
            self.count += 1
            self.total += float(value)

    def merge(self, other):
        self.count += other.count
        self.total += other.total

    @property
    def mean(self):
        return self.total / self.count if self.count else np.nan
