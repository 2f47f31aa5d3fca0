"""Coarse joint CFO/CPO search by cross-entropy iteration.

Hypotheses are M*(D+1)-bit strings: per satellite, D frequency-grid bits
(LSB first) plus one phase-ambiguity bit that selects between the
square-law phase and its pi-shifted alternative. Candidates are scored by
the code-aided combined-SNR loss and the Bernoulli sampling probabilities
are pulled toward the elite set each iteration.

The grid bits can index cells directly (binary) or through a reflected
Gray code (the default). Gray coding makes every single-bit flip move the
hypothesis to an adjacent frequency cell, so the Bernoulli sampler
explores the neighbourhood of a good cell instead of jumping across the
grid, which speeds up convergence markedly.

When pilot symbols are available the search can also run data-aided:
candidate scoring then correlates against the known symbols instead of a
decoded word, which sharpens the loss landscape around the true cell.
"""

from dataclasses import dataclass, field

import numpy as np

from . import polar
from .channel import DEFAULT_FFT_POINTS, DEFAULT_SYMBOL_RATE
from .softcombine import (
    DegenerateInputError,
    EstimateSet,
    bpsk_channel_llrs,
    estimate_snr_ca,
    llr_to_soft_symbols,
    snr_loss,
    wrap_phase,
)

LOSS_SENTINEL = np.inf


@dataclass
class IceConfig:
    quant_bits: int = 6                 # D, frequency-grid bits per satellite
    num_candidates: int = 120           # N_c
    num_elites: int = 24                # N_e
    max_iterations: int = 10            # N_iter
    smoothing: float = 0.8              # probability-update smoothing weight
    loss_threshold_db: float = None     # early-exit threshold, disabled by default
    fft_points: int = DEFAULT_FFT_POINTS
    symbol_rate: float = DEFAULT_SYMBOL_RATE
    candidate_bp_iterations: int = 15   # reduced decode budget while searching
    final_bp_iterations: int = 40       # budget for re-scoring the winner
    min_sum: bool = True
    bit_coding: str = "gray"            # cell-index encoding: "gray" or "binary"
    data_aided: bool = False            # score against known pilot symbols
    stop_when_collapsed: bool = False   # optional exit once probabilities pin
    collapse_tol: float = 0.02

    def __post_init__(self):
        if self.quant_bits < 1:
            raise ValueError("quant_bits must be >= 1")
        if self.num_elites > self.num_candidates:
            raise ValueError("num_elites must not exceed num_candidates")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError("smoothing must lie in (0, 1]")
        if self.bit_coding not in ("gray", "binary"):
            raise ValueError("bit_coding must be 'gray' or 'binary'")

    @property
    def bits_per_satellite(self):
        return self.quant_bits + 1


@dataclass
class CoarseEstimate:
    estimates: EstimateSet
    best_loss_db: float
    refined_loss_db: float
    iterations_run: int
    loss_trace: np.ndarray      # best-so-far loss after each iteration
    best_bits: np.ndarray


def cfo_grid_hz(cfg):
    """Centers of the 2^D uniform cells tiling the residual CFO range."""
    d = cfg.quant_bits
    v = np.arange(1 << d)
    cell = cfg.symbol_rate / (cfg.fft_points * (1 << d))
    return (v + 0.5 - (1 << (d - 1))) * cell


def decode_cfo_bits(bits_m, cfg):
    """Map D binary grid bits (LSB first) to the corresponding cell-center CFO."""
    bits_m = np.asarray(bits_m, dtype=np.uint8)
    if len(bits_m) != cfg.quant_bits:
        raise ValueError(f"expected {cfg.quant_bits} bits")
    v = int(np.dot(bits_m, 1 << np.arange(cfg.quant_bits)))
    return float(cfo_grid_hz(cfg)[v])


def bits_to_cell_index(bits, coding="gray"):
    """Grid-cell index from LSB-first bit vectors, (..., D) -> (...,).

    Gray decoding is the usual prefix-XOR from the most significant bit
    down; binary is a plain weighted sum.
    """
    bits = np.asarray(bits, dtype=np.int64)
    d = bits.shape[-1]
    weights = 1 << np.arange(d)
    if coding == "binary":
        return bits @ weights
    if coding != "gray":
        raise ValueError("coding must be 'gray' or 'binary'")
    msb_first = bits[..., ::-1]
    binary = np.cumsum(msb_first, axis=-1) % 2
    return binary[..., ::-1] @ weights


def cell_index_to_bits(v, quant_bits, coding="gray"):
    """Inverse of bits_to_cell_index for scalar or array cell indices."""
    v = np.asarray(v, dtype=np.int64)
    if coding == "gray":
        v = v ^ (v >> 1)
    elif coding != "binary":
        raise ValueError("coding must be 'gray' or 'binary'")
    shifts = np.arange(quant_bits)
    return ((v[..., None] >> shifts) & 1).astype(np.uint8)


def sample_candidates(p, num_candidates, rng):
    """Draw independent Bernoulli hypothesis bit-vectors."""
    p = np.asarray(p, dtype=np.float64)
    return (rng.random((num_candidates, len(p))) < p).astype(np.uint8)


def update_probability(p, elites, smoothing):
    """Convex pull of the sampling probabilities toward the elite mean."""
    elites = np.asarray(elites, dtype=np.float64)
    if elites.ndim != 2 or len(elites) == 0:
        raise ValueError("elites must be a non-empty (n, bits) array")
    return (1.0 - smoothing) * np.asarray(p, dtype=np.float64) \
        + smoothing * elites.mean(axis=0)


class IceWorkspace:
    """Per-trial cache for candidate evaluation.

    Precomputes, for every satellite and every grid frequency, the
    frequency-compensated frame and the square-law phase, so scoring a
    candidate reduces to a phased sum of cached rows plus one decode.
    """

    def __init__(self, ensemble, cfg, code):
        self.ensemble = ensemble
        self.cfg = cfg
        self.code = code
        self.grid = cfo_grid_hz(cfg)
        m, K = ensemble.frames.shape
        ts = ensemble.symbol_time_s
        k = np.arange(K)
        # (grid, K) compensation factors
        rot = np.exp(-2j * np.pi * np.outer(self.grid, k) * ts)
        # (M, grid, K) frequency-compensated frames
        self.comp = ensemble.frames[:, None, :] * rot[None, :, :]
        # square-law phases per (satellite, grid frequency)
        sq = ensemble.frames ** 2
        rot2 = rot * rot
        acc = np.einsum("mk,gk->mg", sq, rot2)
        self.sq_phase = 0.5 * np.angle(acc)

    def hypothesis_phases(self, v_idx, amb):
        """Per-satellite candidate phases including the ambiguity offset."""
        m = self.ensemble.num_satellites
        base = self.sq_phase[np.arange(m), v_idx]
        return wrap_phase(base + amb * np.pi)

    def combined_batch(self, candidates):
        """Equal-gain combined frames for a batch of hypotheses, (B, K)."""
        cfg = self.cfg
        d = cfg.quant_bits
        m = self.ensemble.num_satellites
        bits = candidates.reshape(len(candidates), m, d + 1)
        v_idx = bits_to_cell_index(bits[:, :, :d], cfg.bit_coding)  # (B, M)
        amb = bits[:, :, d]                                         # (B, M)
        out = np.zeros((len(candidates), self.ensemble.frame_length),
                       dtype=np.complex128)
        for j in range(m):
            phases = self.sq_phase[j, v_idx[:, j]] + amb[:, j] * np.pi
            out += self.comp[j, v_idx[:, j], :] * np.exp(-1j * phases)[:, None]
        return out

    def candidate_estimates(self, candidate):
        """EstimateSet encoded by one hypothesis bit-vector."""
        cfg = self.cfg
        d = cfg.quant_bits
        m = self.ensemble.num_satellites
        bits = np.asarray(candidate, dtype=np.uint8).reshape(m, d + 1)
        v_idx = bits_to_cell_index(bits[:, :d], cfg.bit_coding)
        freqs = self.grid[v_idx]
        phases = self.hypothesis_phases(v_idx, bits[:, d])
        return EstimateSet(cfo_hat_hz=freqs, cpo_hat_rad=phases)

    def score_batch(self, candidates, bp_iterations, known_symbols=None):
        """Combined-SNR loss of each hypothesis in the batch.

        With known_symbols set, the SNR estimate correlates against those
        pilot symbols instead of a per-candidate decode.
        """
        cfg = self.cfg
        combined = self.combined_batch(candidates)
        snr_single_db = -10.0 * np.log10(self.ensemble.noise_psd)
        m = self.ensemble.num_satellites
        losses = np.empty(len(candidates))
        if known_symbols is None:
            llrs = bpsk_channel_llrs(combined, self.ensemble.noise_psd)
            dec = polar.bp_decode_batch(self.code, llrs, bp_iterations,
                                        min_sum=cfg.min_sum)
            soft = [llr_to_soft_symbols(dec.posterior_llrs[i])
                    for i in range(len(candidates))]
        else:
            pilot = np.asarray(known_symbols, dtype=np.float64)
            soft = [pilot] * len(candidates)
        for i in range(len(candidates)):
            try:
                gamma = estimate_snr_ca(combined[i], soft[i])
                losses[i] = snr_loss(gamma, snr_single_db, m)
            except DegenerateInputError:
                losses[i] = LOSS_SENTINEL
        return losses


def evaluate_candidate(ensemble, candidate, cfg, code, workspace=None,
                       bp_iterations=None, known_symbols=None):
    """Combined-SNR loss of a single hypothesis."""
    ws = workspace or IceWorkspace(ensemble, cfg, code)
    candidate = np.asarray(candidate, dtype=np.uint8)
    expected = ensemble.num_satellites * cfg.bits_per_satellite
    if candidate.shape != (expected,):
        raise ValueError(f"expected {expected} hypothesis bits")
    its = bp_iterations or cfg.candidate_bp_iterations
    return float(ws.score_batch(candidate[None, :], its,
                                known_symbols=known_symbols)[0])


def run_ice(ensemble, cfg, code, rng, known_symbols=None):
    """Cross-entropy coarse search; returns the best hypothesis found.

    Elite selection sorts by (loss, candidate index) so parallel and
    serial evaluation orders agree bit for bit. In data-aided mode the
    caller must supply the transmitted BPSK symbols as known_symbols.
    """
    if cfg.data_aided and known_symbols is None:
        raise ValueError("data_aided search needs known_symbols")
    pilot = known_symbols if cfg.data_aided else None
    ws = IceWorkspace(ensemble, cfg, code)
    nbits = ensemble.num_satellites * cfg.bits_per_satellite
    p = np.full(nbits, 0.5)

    best_loss = np.inf
    best_bits = np.zeros(nbits, dtype=np.uint8)
    trace = []
    iterations = 0
    for _ in range(cfg.max_iterations):
        iterations += 1
        cand = sample_candidates(p, cfg.num_candidates, rng)
        losses = ws.score_batch(cand, cfg.candidate_bp_iterations,
                                known_symbols=pilot)
        order = np.argsort(losses, kind="stable")
        elite = cand[order[: cfg.num_elites]]
        if losses[order[0]] < best_loss:
            best_loss = float(losses[order[0]])
            best_bits = cand[order[0]].copy()
        trace.append(best_loss)
        p = update_probability(p, elite, cfg.smoothing)
        if cfg.loss_threshold_db is not None and best_loss < cfg.loss_threshold_db:
            break
        if cfg.stop_when_collapsed and np.all(
            np.minimum(p, 1.0 - p) < cfg.collapse_tol
        ):
            break

    refined = evaluate_candidate(ensemble, best_bits, cfg, code, workspace=ws,
                                 bp_iterations=cfg.final_bp_iterations,
                                 known_symbols=pilot)
    return CoarseEstimate(
        estimates=ws.candidate_estimates(best_bits),
        best_loss_db=best_loss,
        refined_loss_db=float(refined),
        iterations_run=iterations,
        loss_trace=np.asarray(trace),
        best_bits=best_bits,
    )
