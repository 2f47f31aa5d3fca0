"""Polar code construction, encoding, and belief-propagation decoding.

The decoder exposes posterior LLRs on the coded bits, which the
code-aided synchronization stages consume as soft information.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _bp_kernel as _kernel

LLR_CLAMP = 30.0


@dataclass(frozen=True)
class PolarCode:
    """Immutable code description shared by encoder and decoder."""

    block_length: int
    info_length: int
    frozen_set: frozenset
    design_snr_db: float = 0.0

    @property
    def n_stages(self):
        return int(np.log2(self.block_length))

    @property
    def rate(self):
        return self.info_length / self.block_length

    @property
    def frozen_mask(self):
        """Boolean mask over u-domain indices, True at frozen positions."""
        mask = np.zeros(self.block_length, dtype=bool)
        mask[list(self.frozen_set)] = True
        return mask

    @property
    def info_indices(self):
        """Sorted u-domain indices carrying information bits."""
        return np.flatnonzero(~self.frozen_mask)


@dataclass
class DecodeResult:
    info_hat: np.ndarray
    posterior_llrs: np.ndarray
    iterations_used: int
    converged: bool


def bhattacharyya_reliabilities(block_length, design_snr_db):
    """Bhattacharyya parameter of each synthetic channel (lower = better).

    Starts from the AWGN value exp(-Es/N0) at the design SNR and applies
    the standard polarization recursion z -> (2z - z^2, z^2).
    """
    z = np.array([np.exp(-10.0 ** (design_snr_db / 10.0))], dtype=np.float64)
    while len(z) < block_length:
        upper = 2.0 * z - z * z
        lower = z * z
        z = np.empty(2 * len(lower), dtype=np.float64)
        z[0::2] = upper
        z[1::2] = lower
    return z


def construct_code(block_length, info_length, design_snr_db=0.0):
    """Build a PolarCode, freezing the least reliable synthetic channels."""
    if block_length < 2 or (block_length & (block_length - 1)) != 0:
        raise ValueError(f"block_length must be a power of two, got {block_length}")
    if not 0 < info_length < block_length:
        raise ValueError(
            f"info_length must be in (0, {block_length}), got {info_length}"
        )
    z = bhattacharyya_reliabilities(block_length, design_snr_db)
    # Highest Bhattacharyya parameter = least reliable. Stable sort keeps
    # the construction deterministic under ties.
    order = np.argsort(-z, kind="stable")
    frozen = frozenset(int(i) for i in order[: block_length - info_length])
    return PolarCode(block_length, info_length, frozen, design_snr_db)


def polar_transform(bits):
    """Apply the polarization transform over GF(2).

    Accepts a length-N vector or a (batch, N) array; operates along the
    last axis.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    step = 1
    while step < n:
        for start in range(0, n, 2 * step):
            x[..., start:start + step] ^= x[..., start + step:start + 2 * step]
        step *= 2
    return x


def expand_info(code, u):
    """Place info bits into the u-domain vector, frozen positions zero."""
    u = np.asarray(u, dtype=np.uint8)
    full = np.zeros(u.shape[:-1] + (code.block_length,), dtype=np.uint8)
    full[..., code.info_indices] = u
    return full


def encode(code, u):
    """Encode info bits into a codeword of length block_length."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != code.info_length:
        raise ValueError(
            f"expected {code.info_length} info bits, got {u.shape[-1]}"
        )
    return polar_transform(expand_info(code, u))


@lru_cache(maxsize=8)
def _stage_indices(block_length):
    """Per-stage butterfly index pairs (upper, lower) for the factor graph."""
    n = int(np.log2(block_length))
    pairs = []
    for s in range(n):
        step = 1 << s
        j = np.arange(block_length)
        upper = j[(j & step) == 0]
        pairs.append((upper, upper + step))
    return pairs


def _boxplus_minsum(a, b):
    return MINSUM_SCALE * (np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b)))


def _boxplus_exact(a, b):
    t = np.tanh(0.5 * a) * np.tanh(0.5 * b)
    # keep arctanh finite
    np.clip(t, -0.9999999, 0.9999999, out=t)
    return 2.0 * np.arctanh(t)


def bp_decode(code, channel_llrs, max_iterations=40, min_sum=False):
    """Decode one LLR vector; see bp_decode_batch for the semantics."""
    channel_llrs = np.asarray(channel_llrs, dtype=np.float64)
    if channel_llrs.shape != (code.block_length,):
        raise ValueError(
            f"expected {code.block_length} channel LLRs, got {channel_llrs.shape}"
        )
    if not np.all(np.isfinite(channel_llrs)):
        raise ValueError("channel LLRs must be finite")
    batch = bp_decode_batch(
        code, channel_llrs[None, :], max_iterations=max_iterations, min_sum=min_sum
    )
    return DecodeResult(
        info_hat=batch.info_hat[0],
        posterior_llrs=batch.posterior_llrs[0],
        iterations_used=batch.iterations_used,
        converged=bool(batch.converged[0]),
    )


@dataclass
class BatchDecodeResult:
    info_hat: np.ndarray        # (batch, info_length) uint8
    posterior_llrs: np.ndarray  # (batch, block_length) float
    iterations_used: int
    converged: np.ndarray       # (batch,) bool


MINSUM_SCALE = 0.9375


def bp_decode_batch(code, channel_llrs, max_iterations=40, min_sum=False):
    """Flooding-schedule BP over the polar factor graph, batched over rows.

    Messages are clamped to +-LLR_CLAMP. Decoding stops early once every
    row's hard decisions re-encode consistently. posterior_llrs are the
    coded-bit posteriors (channel LLR plus extrinsic from the graph).

    min_sum=True selects the scaled min-sum approximation (speed option;
    unscaled min-sum loses over 1 dB on this graph, so the conventional
    0.9375 scaling is applied).
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    llr_in = np.asarray(channel_llrs, dtype=np.float32)
    if llr_in.ndim != 2 or llr_in.shape[1] != code.block_length:
        raise ValueError(f"expected (batch, {code.block_length}) LLR array")
    if min_sum and _kernel.HAVE_NUMBA:
        return _bp_decode_batch_fast(code, llr_in, max_iterations)
    nb, N = llr_in.shape
    n = code.n_stages
    boxplus = _boxplus_minsum if min_sum else _boxplus_exact
    pairs = _stage_indices(N)

    np.clip(llr_in, -LLR_CLAMP, LLR_CLAMP, out=llr_in)

    # L[s], R[s]: messages on the layer-s edges, layer 0 = u side,
    # layer n = channel side.
    L = np.zeros((n + 1, nb, N), dtype=np.float32)
    R = np.zeros((n + 1, nb, N), dtype=np.float32)
    L[n] = llr_in
    frozen = code.frozen_mask
    R[0][:, frozen] = LLR_CLAMP

    converged = np.zeros(nb, dtype=bool)
    latched_u = np.zeros((nb, N), dtype=np.uint8)
    latched_post = np.zeros((nb, N), dtype=np.float32)
    iterations_used = max_iterations
    for it in range(max_iterations):
        # right-to-left: update L messages
        for s in range(n - 1, -1, -1):
            ua, ub = pairs[s]
            la, lb = L[s + 1][:, ua], L[s + 1][:, ub]
            ra, rb = R[s][:, ua], R[s][:, ub]
            L[s][:, ua] = boxplus(la, lb + rb)
            L[s][:, ub] = boxplus(la, ra) + lb
        # left-to-right: update R messages
        for s in range(n):
            ua, ub = pairs[s]
            la, lb = L[s + 1][:, ua], L[s + 1][:, ub]
            ra, rb = R[s][:, ua], R[s][:, ub]
            R[s + 1][:, ua] = boxplus(ra, rb + lb)
            R[s + 1][:, ub] = boxplus(ra, la) + rb
        np.clip(L, -LLR_CLAMP, LLR_CLAMP, out=L)
        np.clip(R, -LLR_CLAMP, LLR_CLAMP, out=R)

        u_dec = L[0] + R[0]
        x_dec = llr_in + R[n]
        u_hat = (u_dec < 0).astype(np.uint8)
        u_hat[:, frozen] = 0
        consistent = np.all(polar_transform(u_hat) == (x_dec < 0), axis=1)
        # An exactly-zero decision LLR means the bit is undecided (e.g. the
        # degenerate all-zero input); do not call that convergence.
        decided = np.all(np.abs(u_dec[:, ~frozen]) > 0, axis=1)
        ok = consistent & decided
        # Latch each row at its first consistent state so rows that finish
        # early are not perturbed while stragglers keep iterating.
        fresh = ok & ~converged
        if np.any(fresh):
            latched_u[fresh] = u_hat[fresh]
            latched_post[fresh] = x_dec[fresh]
        converged |= ok
        if np.all(converged):
            iterations_used = it + 1
            break

    u_dec = L[0] + R[0]
    u_hat = (u_dec < 0).astype(np.uint8)
    u_hat[:, frozen] = 0
    x_dec = llr_in + R[n]
    latched_u[~converged] = u_hat[~converged]
    latched_post[~converged] = x_dec[~converged]
    posterior = np.asarray(latched_post, dtype=np.float64)
    np.clip(posterior, -LLR_CLAMP, LLR_CLAMP, out=posterior)
    info_hat = latched_u[:, code.info_indices]
    return BatchDecodeResult(
        info_hat=info_hat,
        posterior_llrs=posterior,
        iterations_used=iterations_used,
        converged=converged,
    )


def _bp_decode_batch_fast(code, llr_in, max_iterations):
    """Numba min-sum path; same contract as bp_decode_batch(min_sum=True)."""
    nb, N = llr_in.shape
    llr_in = np.clip(llr_in, -LLR_CLAMP, LLR_CLAMP)
    frozen = code.frozen_mask.astype(np.uint8)
    post = np.empty((nb, N), dtype=np.float32)
    u_hat = np.empty((nb, N), dtype=np.uint8)
    conv = np.empty(nb, dtype=np.bool_)
    _kernel.bp_minsum_rows(
        np.ascontiguousarray(llr_in, dtype=np.float32), frozen, code.n_stages,
        max_iterations, np.float32(LLR_CLAMP), np.float32(MINSUM_SCALE),
        post, u_hat, conv,
    )
    return BatchDecodeResult(
        info_hat=u_hat[:, code.info_indices],
        posterior_llrs=np.asarray(post, dtype=np.float64),
        iterations_used=max_iterations,
        converged=conv,
    )
