import numpy as np
import pytest

from satsync import metrics, polar
from satsync.softcombine import EstimateSet


def test_crlb_frequency_value_and_scalings():
    # K=1024, snr=1, M=4, Ts=1e-3: 3/(2 pi^2 * 4 * 1024 * (1024^2-1))
    want = 3.0 / (2.0 * np.pi ** 2 * 4.0 * 1024.0 * (1024.0 ** 2 - 1.0))
    assert metrics.crlb_frequency(1024, 1.0, 4, 1e-3) == pytest.approx(want)
    # doubling M halves the bound
    assert metrics.crlb_frequency(1024, 1.0, 2, 1e-3) == pytest.approx(2 * want)
    # bound decreases with SNR and K
    assert metrics.crlb_frequency(1024, 2.0, 4, 1e-3) < want
    assert metrics.crlb_frequency(2048, 1.0, 4, 1e-3) < want
    with pytest.raises(ValueError):
        metrics.crlb_frequency(2, 1.0, 4, 1e-3)
    with pytest.raises(ValueError):
        metrics.crlb_frequency(1024, 0.0, 4, 1e-3)


def test_crlb_phase_value_and_asymptote():
    want = 2.0 * (2.0 * 1024.0 - 1.0) / (4.0 * 1024.0 * 1025.0)
    assert metrics.crlb_phase(1024, 1.0, 4) == pytest.approx(want)
    assert metrics.crlb_phase(1024, 1.0, 2) == pytest.approx(2 * want)
    big_k = 1 << 20
    assert metrics.crlb_phase(big_k, 1.0, 1) == pytest.approx(
        4.0 / big_k, rel=1e-2)


def test_phase_error_wraps():
    assert metrics.phase_error(3.0, -3.0) == pytest.approx(2 * np.pi - 6.0)
    np.testing.assert_allclose(
        metrics.phase_error([0.0, np.pi], [0.1, -np.pi + 0.1]),
        [0.1, 0.1], atol=1e-12)


def test_resolve_global_phase_fold_noop_when_close():
    code = polar.construct_code(16, 8, design_snr_db=0.0)
    est = EstimateSet([0.0, 0.0], [0.1, -0.1])
    info = np.zeros(8, dtype=np.uint8)
    cpo, dec = metrics.resolve_global_phase_fold(
        np.array([0.0, 0.0]), est, info, code)
    np.testing.assert_allclose(cpo, [0.1, -0.1])
    assert np.array_equal(dec, info)


def test_resolve_global_phase_fold_flips():
    code = polar.construct_code(16, 8, design_snr_db=0.0)
    est = EstimateSet([0.0, 0.0], [np.pi - 0.05, np.pi + 0.05])
    info = np.zeros(8, dtype=np.uint8)
    truth = np.array([0.0, 0.0])
    cpo, dec = metrics.resolve_global_phase_fold(truth, est, info, code)
    err = metrics.phase_error(truth, cpo)
    assert np.max(np.abs(err)) < 0.1
    # decoded word flipped by the codeword complement: exactly one info
    # bit differs, and it is the all-ones generator row
    flipped = np.flatnonzero(dec != info)
    assert len(flipped) == 1
    assert code.info_indices[flipped[0]] == code.block_length - 1
    # flipping that info bit complements the whole codeword
    a = polar.encode(code, info)
    b = polar.encode(code, dec)
    assert np.all(a ^ b == 1)


def test_rmse_accumulator_merge_associative():
    a, b, c = (metrics.RmseAccumulator() for _ in range(3))
    a.add([1.0, -2.0])
    b.add([3.0])
    c.add([0.5, 0.5, -1.5])
    ab = metrics.RmseAccumulator(a.count, a.sq_sum)
    ab.merge(b)
    ab.merge(c)
    direct = metrics.RmseAccumulator()
    direct.add([1.0, -2.0, 3.0, 0.5, 0.5, -1.5])
    assert ab.count == direct.count
    assert ab.rmse == pytest.approx(direct.rmse)
    empty = metrics.RmseAccumulator()
    assert np.isnan(empty.rmse)


def test_ber_accumulator():
    acc = metrics.BerAccumulator()
    acc.add([0, 1, 1, 0], [0, 1, 0, 0])
    acc.add([1, 1], [1, 1])
    assert acc.bit_errors == 1
    assert acc.total_bits == 6
    assert acc.ber == pytest.approx(1 / 6)
    assert acc.frame_errors == 1
    assert acc.bler == pytest.approx(0.5)
    other = metrics.BerAccumulator()
    other.add([0], [1])
    acc.merge(other)
    assert acc.ber == pytest.approx(2 / 7)


def test_mean_accumulator_skips_nonfinite():
    acc = metrics.MeanAccumulator()
    acc.add(1.0)
    acc.add(np.nan)
    acc.add(np.inf)
    acc.add(3.0)
    assert acc.mean == pytest.approx(2.0)
