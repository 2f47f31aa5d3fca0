"""Transmit chain: info bits -> polar codeword -> unit-energy BPSK frame."""

import numpy as np

from .polar import encode


def modulate_bpsk(codeword):
    """Map bits to +-1 symbols (bit 0 -> +1, bit 1 -> -1)."""
    x = np.asarray(codeword, dtype=np.uint8)
    return 1.0 - 2.0 * x.astype(np.float64)


def build_frame(code, u):
    """Encode and modulate one frame; length equals the code block length."""
    return modulate_bpsk(encode(code, u))
