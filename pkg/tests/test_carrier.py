import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backscatter_sim import carrier as car
from backscatter_sim import receiver as rcv
from backscatter_sim.iqcore import spectrum

BT = car.preset("bluetooth-like")
ZB = car.preset("zigbee-like")
RECT = dataclasses.replace(BT, gaussian_bt=None)


def test_presets():
    assert BT.modulation_index == pytest.approx(0.5)
    assert BT.symbol_rate == 1e6 and BT.channel_bandwidth == 1e6
    assert list(BT.frequencies) == [-250e3, 250e3]
    assert ZB.M == 4 and ZB.offset_mode and ZB.msk_shaping
    assert ZB.symbol_rate == 1e6
    with pytest.raises(KeyError):
        car.preset("wifi-like")


def test_fsk_config_validation():
    with pytest.raises(ValueError):
        car.FskConfig(alphabet_size=3)
    with pytest.raises(ValueError):
        car.FskConfig(alphabet_size=0)
    # alphabet must fit below Nyquist
    with pytest.raises(ValueError):
        car.FskConfig(deviation=3e6, samples_per_symbol=4)


def test_psk_config_validation():
    with pytest.raises(ValueError):
        car.PskConfig(M=8)


@pytest.mark.parametrize("n,sps,expect", [(0, 8, [0]), (3, 8, [0, 8, 16, 24])])
def test_symbol_boundaries(n, sps, expect):
    cfg = dataclasses.replace(BT, samples_per_symbol=sps)
    assert car.symbol_boundaries(cfg, n).tolist() == expect


@given(n=st.integers(0, 200))
def test_symbol_boundaries_increasing(n):
    for cfg in (BT, ZB):
        b = car.symbol_boundaries(cfg, n)
        assert b.size == n + 1 and np.all(np.diff(b) > 0)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_tag_rate_rule(n):
    assert car.tag_data_rate(BT, n) == 1e6 / n
    assert car.tag_data_rate(ZB, n) == ZB.symbol_rate / n


def test_single_one_bit_peaks_at_plus_deviation():
    buf = car.modulate_fsk([1] * 200, RECT)
    f, _ = spectrum(buf, 10e3).peak()
    assert f == pytest.approx(250e3, abs=10e3)
    buf = car.modulate_fsk([1], RECT)
    assert np.allclose(np.diff(np.unwrap(np.angle(buf.samples))), 2 * np.pi * 250e3 / RECT.sample_rate)


def test_all_zero_bits_single_tone():
    buf = car.modulate_fsk(np.zeros(400, dtype=int), BT)
    step = np.diff(np.unwrap(np.angle(buf.samples)))
    np.testing.assert_allclose(step, -2 * np.pi * 250e3 / BT.sample_rate, atol=1e-9)


def test_measured_modulation_index():
    lo = spectrum(car.modulate_fsk(np.zeros(400, dtype=int), BT), 5e3).peak()[0]
    hi = spectrum(car.modulate_fsk(np.ones(400, dtype=int), BT), 5e3).peak()[0]
    assert (hi - lo) / BT.channel_bandwidth == pytest.approx(0.5, abs=0.02)


def test_fsk_length_and_errors():
    cfg4 = car.FskConfig(alphabet_size=4, deviation=300e3, samples_per_symbol=16)
    assert len(car.modulate_fsk([0, 1, 1, 0], cfg4)) == 2 * 16
    with pytest.raises(ValueError):
        car.modulate_fsk([0, 1, 1], cfg4)
    with pytest.raises(ValueError):
        car.modulate_fsk([], BT)
    with pytest.raises(ValueError):
        car.modulate_fsk([0, 2], BT)


def test_rectangular_instantaneous_frequency():
    bits = [0, 1, 1, 0]
    f = car.instantaneous_frequency(bits, RECT)
    assert f.tolist() == np.repeat([-250e3, 250e3, 250e3, -250e3], 8).tolist()


def test_gaussian_taps_unit_sum():
    taps = car.gaussian_taps(0.5, 8)
    assert taps.sum() == pytest.approx(1.0)
    assert taps.size == 3 * 8 + 1
    assert np.argmax(taps) == taps.size // 2


@pytest.mark.parametrize("n", [2, 4, 8])
def test_gray_map(n):
    cfg = car.FskConfig(alphabet_size=n, deviation=300e3, samples_per_symbol=32)
    ks = np.arange(n)
    bits = car.fsk_bits(ks, cfg)
    assert np.array_equal(car.fsk_symbols(bits, cfg), ks)
    words = bits.reshape(n, -1)
    assert all(np.sum(words[i] != words[i + 1]) == 1 for i in range(n - 1))


def test_gray_table_n4():
    cfg = car.FskConfig(alphabet_size=4, deviation=300e3, samples_per_symbol=16)
    assert car.fsk_symbols([0, 0, 0, 1, 1, 1, 1, 0], cfg).tolist() == [0, 1, 2, 3]


@settings(max_examples=25, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=300))
def test_fsk_continuous_phase(bits):
    buf = car.modulate_fsk(bits, BT)
    d = np.angle(buf.samples[1:] * np.conj(buf.samples[:-1]))
    assert np.max(np.abs(d)) <= 2 * np.pi * BT.frequencies.max() / BT.sample_rate + 1e-9


def test_fsk_alphabet_n4_mixer_maps_upper_to_lower():
    cfg = car.FskConfig(alphabet_size=4, deviation=300e3, samples_per_symbol=32, channel_bandwidth=1.2e6)
    f = cfg.frequencies
    df = cfg.mixer_shift
    assert df == pytest.approx(f[2] - f[0])
    assert f[2] - df == pytest.approx(f[0]) and f[3] - df == pytest.approx(f[1])
    # the other image lands above f_H, outside the alphabet
    assert all(fk + df > f[-1] for fk in f[2:])


def test_qpsk_single_point_non_offset():
    cfg = car.PskConfig(offset_mode=False, msk_shaping=False)
    buf = car.modulate_oqpsk([0, 0], cfg)
    np.testing.assert_allclose(buf.samples, car.qpsk_point(0, cfg))
    assert np.angle(buf.samples[0]) == pytest.approx(np.pi / 4)


def test_qpsk_index_table():
    cfg = car.PskConfig(offset_mode=False, msk_shaping=False)
    table = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}
    for bits, i in table.items():
        z = car.modulate_oqpsk(list(bits), cfg).samples[0]
        assert car.qpsk_index(z) == i


def test_oqpsk_length_and_errors():
    buf = car.modulate_oqpsk(np.zeros(10, dtype=int), ZB)
    assert len(buf) == 5 * ZB.samples_per_symbol + ZB.samples_per_chip
    with pytest.raises(ValueError):
        car.modulate_oqpsk([0, 1, 0], ZB)
    with pytest.raises(ValueError):
        car.modulate_oqpsk([], ZB)


def test_msk_constant_envelope(rng):
    bits = rng.integers(0, 2, 1000)
    buf = car.modulate_oqpsk(bits, ZB)
    env = np.abs(buf.samples[car.oqpsk_warmup_mask(ZB, len(buf))])
    assert env.max() / env.min() <= 1.01


@settings(max_examples=30, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=4, max_size=200).filter(lambda b: len(b) % 2 == 0))
def test_offset_mode_never_flips_both_rails(bits):
    for shaping in (False, True):
        cfg = dataclasses.replace(ZB, msk_shaping=shaping)
        x = car.modulate_oqpsk(bits, cfg).samples
        # a sign change happens where the rail crosses or touches zero
        si, sq = np.sign(np.round(x.real, 12)), np.sign(np.round(x.imag, 12))
        ci = np.flatnonzero(si[1:] != si[:-1])
        cq = np.flatnonzero(sq[1:] != sq[:-1])
        assert not set(ci) & set(cq)
        sps, spc = cfg.samples_per_symbol, cfg.samples_per_chip
        # I moves only around symbol boundaries, Q half a symbol later
        assert all((c + 1) % sps in (0, 1) for c in ci)
        assert all((c + 1 - spc) % sps in (0, 1) for c in cq)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_round_trip_both_families(data):
    cfg = data.draw(st.sampled_from([BT, RECT, ZB, dataclasses.replace(ZB, msk_shaping=False)]))
    k = data.draw(st.integers(1, 150))
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=2 * k, max_size=2 * k)))
    rx = rcv.demodulate(car.modulate(bits, cfg), cfg)
    assert np.array_equal(rx.bits, bits)


def test_round_trip_m4_fsk(rng):
    cfg = car.FskConfig(alphabet_size=4, deviation=300e3, samples_per_symbol=16, gaussian_bt=None)
    bits = rng.integers(0, 2, 400)
    assert np.array_equal(rcv.demodulate(car.modulate(bits, cfg), cfg).bits, bits)


def test_bit_centers():
    assert car.bit_centers(BT, 3).tolist() == [4, 12, 20]
    spc = ZB.samples_per_chip
    assert car.bit_centers(ZB, 4).tolist() == [spc, 2 * spc, 3 * spc, 4 * spc]
