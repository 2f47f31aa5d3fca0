import numpy as np
import pytest

from satsync import channel, softcombine
from satsync.softcombine import (
    DegenerateInputError,
    EstimateSet,
    bpsk_channel_llrs,
    combine,
    compensate,
    estimate_snr_ca,
    llr_to_soft_symbols,
    snr_loss,
    square_law_phase,
    wrap_phase,
)


def test_wrap_phase_range():
    phis = np.linspace(-10, 10, 400)
    w = wrap_phase(phis)
    assert np.all((w > -np.pi) & (w <= np.pi))
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(np.pi) == pytest.approx(np.pi)


def test_compensate_roundtrip():
    rng = np.random.default_rng(0)
    frame = rng.normal(size=32) + 1j * rng.normal(size=32)
    out = compensate(compensate(frame, 3.0, 0.7, 1e-3), -3.0, -0.7, 1e-3)
    np.testing.assert_allclose(out, frame, atol=1e-12)


def test_compensate_phase_only():
    frame = np.ones(8, dtype=complex)
    out = compensate(frame, 0.0, 0.25, 1e-3)
    np.testing.assert_allclose(out, np.exp(-0.25j) * frame, atol=1e-12)


def test_combine_sums_compensated_frames():
    rng = np.random.default_rng(1)
    params = channel.draw_truth_params(2, 1e-12, rng)
    ens = channel.make_ensemble(np.ones(16), params, rng)
    est = EstimateSet([p.cfo_hz for p in params],
                      [p.cpo_rad for p in params])
    out = combine(ens, est)
    np.testing.assert_allclose(out, 2.0 * np.ones(16), atol=1e-4)


def test_combine_length_mismatch():
    rng = np.random.default_rng(2)
    params = channel.draw_truth_params(2, 1.0, rng)
    ens = channel.make_ensemble(np.ones(8), params, rng)
    with pytest.raises(ValueError):
        combine(ens, EstimateSet([0.0], [0.0]))


def test_square_law_phase_noiseless():
    rng = np.random.default_rng(3)
    s = 1.0 - 2.0 * rng.integers(0, 2, 512).astype(np.float64)
    for phi in (-1.2, -0.3, 0.0, 0.8, 1.5):
        frame = s * np.exp(1j * phi)
        got = square_law_phase(frame, 0.0, 1e-3)
        # modulo pi
        assert min(abs(got - phi), abs(abs(got - phi) - np.pi)) < 1e-6


def test_square_law_phase_range_and_degenerate():
    s = np.ones(64)
    got = square_law_phase(s * np.exp(1j * 1.6), 0.0, 1e-3)
    assert -np.pi / 2 < got <= np.pi / 2
    with pytest.raises(DegenerateInputError):
        square_law_phase(np.zeros(8, dtype=complex), 0.0, 1e-3)


def test_llr_to_soft_symbols_modes():
    llrs = np.array([-10.0, -3.0, -1.5, 0.0, 1.5, 3.0, 10.0])
    approx = llr_to_soft_symbols(llrs)
    np.testing.assert_allclose(
        approx, [-1.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.0])
    exact = llr_to_soft_symbols(llrs, approximate=False)
    np.testing.assert_allclose(exact, np.tanh(llrs / 2))


def test_estimate_snr_ca_genie():
    rng = np.random.default_rng(4)
    s = 1.0 - 2.0 * rng.integers(0, 2, 1024).astype(np.float64)
    for snr_db in (-3.0, 0.0, 6.0):
        n0 = 10 ** (-snr_db / 10)
        errs = []
        for _ in range(20):
            noise = np.sqrt(n0 / 2) * (rng.normal(size=1024)
                                       + 1j * rng.normal(size=1024))
            est = estimate_snr_ca(s + noise, s)
            errs.append(10 * np.log10(est) - snr_db)
        assert abs(np.median(errs)) < 0.5


def test_estimate_snr_ca_degenerate():
    s = np.ones(64)
    with pytest.raises(DegenerateInputError):
        estimate_snr_ca(s, np.zeros(64))


def test_snr_loss_cap_and_value():
    # gamma exactly at the ideal combined SNR -> zero loss
    assert snr_loss(4.0, 0.0, 4) == pytest.approx(0.0, abs=1e-9)
    # absurdly large gamma is capped, loss stays finite
    capped = snr_loss(1e12, 0.0, 4)
    assert capped == pytest.approx(10 * np.log10(4) - 20.0, abs=1e-6)


def test_bpsk_channel_llr_scale():
    r = np.array([1.0 + 0.5j, -2.0 - 1.0j])
    np.testing.assert_allclose(bpsk_channel_llrs(r, 0.5),
                               [8.0, -16.0])


def test_estimate_set_validation():
    with pytest.raises(ValueError):
        EstimateSet([0.0, 1.0], [0.0])
    est = EstimateSet([0.0], [7.0])
    assert -np.pi < est.cpo_hat_rad[0] <= np.pi
