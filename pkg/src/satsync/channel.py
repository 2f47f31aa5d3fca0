"""Per-satellite channel: CFO rotation, CPO, and complex AWGN.

The receiver-side ensemble keeps the drawn truth parameters behind a
deliberately awkward accessor so estimator code cannot read them by
accident; metrics code uses reveal_truth().
"""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SYMBOL_RATE = 1000.0   # symbols/s
DEFAULT_FFT_POINTS = 64        # acquisition FFT size fixing the residual range


def nfo_half_range(fft_points=DEFAULT_FFT_POINTS):
    """Half-width of the post-acquisition normalized frequency offset range."""
    return 1.0 / (2.0 * fft_points)


def es_n0_to_noise_psd(es_n0_db):
    """Total complex noise variance for unit-energy symbols."""
    return 10.0 ** (-es_n0_db / 10.0)


@dataclass(frozen=True)
class SatelliteChannelParams:
    cfo_hz: float
    cpo_rad: float
    noise_psd: float
    symbol_time_s: float = 1.0 / DEFAULT_SYMBOL_RATE
    amplitude: float = 1.0

    def __post_init__(self):
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be positive")
        if not -np.pi < self.cpo_rad <= np.pi:
            raise ValueError("cpo_rad must lie in (-pi, pi]")


@dataclass
class ReceivedEnsemble:
    """Frames from all satellites plus receiver-known metadata.

    frames is the (M, K) complex matrix the estimators operate on.
    symbol_time_s and noise_psd are receiver-known quantities; the truth
    CFO/CPO values are private (see reveal_truth).
    """

    frames: np.ndarray
    symbol_time_s: float
    noise_psd: float
    _truth: tuple = field(default=None, repr=False)

    @property
    def num_satellites(self):
        return self.frames.shape[0]

    @property
    def frame_length(self):
        return self.frames.shape[1]


def reveal_truth(ensemble):
    """Return the truth SatelliteChannelParams list (metrics use only)."""
    if ensemble._truth is None:
        raise ValueError("ensemble carries no truth parameters")
    return list(ensemble._truth)


def apply_channel(symbols, params, rng):
    """Rotate a symbol frame by the CFO/CPO and add complex AWGN.

    r_k = A * s_k * exp(j(2*pi*k*cfo*Ts + cpo)) + n_k with n_k circular
    complex Gaussian of total variance noise_psd.
    """
    s = np.asarray(symbols, dtype=np.float64)
    k = np.arange(len(s))
    phase = 2.0 * np.pi * k * params.cfo_hz * params.symbol_time_s + params.cpo_rad
    sigma = np.sqrt(params.noise_psd / 2.0)
    noise = rng.normal(0.0, sigma, len(s)) + 1j * rng.normal(0.0, sigma, len(s))
    return params.amplitude * s * np.exp(1j * phase) + noise


def make_ensemble(symbols, params_list, rng, keep_truth=True):
    """Build the M-satellite ensemble with independent noise per satellite."""
    if not params_list:
        raise ValueError("params_list must be non-empty")
    ts = {p.symbol_time_s for p in params_list}
    n0 = {p.noise_psd for p in params_list}
    if len(ts) != 1 or len(n0) != 1:
        raise ValueError("all satellites must share symbol time and noise level")
    streams = rng.spawn(len(params_list))
    frames = np.stack(
        [apply_channel(symbols, p, g) for p, g in zip(params_list, streams)]
    )
    return ReceivedEnsemble(
        frames=frames,
        symbol_time_s=ts.pop(),
        noise_psd=n0.pop(),
        _truth=tuple(params_list) if keep_truth else None,
    )


def draw_truth_params(m, noise_psd, rng, symbol_rate=DEFAULT_SYMBOL_RATE,
                      fft_points=DEFAULT_FFT_POINTS):
    """Draw per-satellite truth: CFO uniform over the residual acquisition
    range, CPO uniform over (-pi, pi]."""
    ts = 1.0 / symbol_rate
    half = nfo_half_range(fft_points) / ts
    out = []
    for _ in range(m):
        cfo = rng.uniform(-half, half)
        cpo = rng.uniform(-np.pi, np.pi)
        if cpo == -np.pi:
            cpo = np.pi
        out.append(SatelliteChannelParams(cfo_hz=cfo, cpo_rad=cpo,
                                          noise_psd=noise_psd, symbol_time_s=ts))
    return out
