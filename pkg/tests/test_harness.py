import ast
import dataclasses
import math
import time
import warnings

import numpy as np
import pytest

from backscatter_sim import carrier as car
from backscatter_sim import harness as h


def _cfg(preset="bluetooth-like", **kw):
    base = dict(carrier=car.preset(preset), carrier_preset=preset)
    base.update(kw)
    return h.ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(snr_db_list=())
    with pytest.raises(ValueError):
        _cfg(n_list=(0,))
    with pytest.raises(ValueError):
        _cfg(sync="oracle")
    with pytest.raises(ValueError):
        _cfg(sync="preamble", tag_bits_per_trial=8)
    with pytest.raises(ValueError):
        _cfg(trials_per_point=0)


def test_default_profiles():
    assert _cfg().tag.mode == "frequency-shift"
    assert _cfg().tag.delta_f == 500e3
    z = _cfg("zigbee-like").tag
    assert z.mode == "phase-delay" and z.phase_set == (0, 2)
    assert _cfg().tag.start_offset is None


def test_insufficient_warning():
    cfg = _cfg(snr_db_list=(math.inf,), n_list=(4,), trials_per_point=2, tag_bits_per_trial=16)
    assert not cfg.sufficient
    with pytest.warns(h.StatisticalInsufficiencyWarning):
        h.run_sweep(cfg)
    assert _cfg().sufficient


def _aligned(cfg):
    return dataclasses.replace(cfg, tag=dataclasses.replace(cfg.tag, start_offset=0))


@pytest.mark.parametrize("preset", ["bluetooth-like", "zigbee-like"])
@pytest.mark.parametrize("sync", ["genie", "preamble"])
def test_noise_free_aligned_trials_exact(preset, sync):
    cfg = _aligned(_cfg(preset, sync=sync))
    for n in (1, 2, 4, 8, 16):
        for i in range(5):
            r = h.run_trial(cfg, math.inf, n, i)
            assert r.synced and r.errors == 0 and r.start_offset == 0


@pytest.mark.parametrize("preset", ["bluetooth-like", "zigbee-like"])
def test_noise_free_random_offset_exact_from_n4(preset):
    cfg = _cfg(preset, sync="preamble")
    for n in (4, 8, 16):
        for i in range(10):
            r = h.run_trial(cfg, math.inf, n, i)
            assert r.synced and r.errors == 0
            assert 0 <= r.start_offset < n * cfg.carrier.samples_per_symbol


def test_unaligned_single_symbol_tag_bits_suffer_bad_symbols():
    # a mixed fraction p of a symbol flips it only when 0.5 p > 1 - p, so
    # N = 1 with a random sub-symbol start is not error-free even without noise
    cfg = _cfg()
    errors = sum(h.run_trial(cfg, math.inf, 1, i).errors for i in range(20))
    assert errors > 0
    assert sum(h.run_trial(_cfg("zigbee-like"), math.inf, 1, i).errors for i in range(20)) == 0


def test_trial_determinism():
    cfg = _cfg()
    a, b = h.run_trial(cfg, -4.0, 8, 3), h.run_trial(cfg, -4.0, 8, 3)
    assert np.array_equal(a.sent, b.sent) and np.array_equal(a.decoded, b.decoded)
    assert a.start_offset == b.start_offset
    c = h.run_trial(cfg, -4.0, 8, 4)
    assert not np.array_equal(a.sent, c.sent)


def test_trial_stages():
    r = h.run_trial(_cfg("zigbee-like"), 2.0, 4, 0, keep_stages=True)
    assert {"carrier", "tagged", "received", "carrier_bits", "tag_bits", "demod_bits"} <= set(r.stages)
    assert len(r.stages["carrier"]) == len(r.stages["received"])


def test_trial_error_context():
    cfg = _cfg(tag=dataclasses.replace(_cfg().tag, start_offset=10**7))
    with pytest.raises(h.TrialError, match="N=4 index=0"):
        h.run_trial(cfg, 0.0, 4, 0)


def test_very_low_snr_is_a_coin_flip():
    cfg = _cfg()
    bers = [h.run_trial(cfg, -30.0, 8, i).errors / 64 for i in range(20)]
    assert all(abs(b - 0.5) <= 0.2 for b in bers)
    assert np.mean(bers) == pytest.approx(0.5, abs=0.1)


def test_snr_key_distinct():
    keys = [h.snr_key(s) for s in (-14, -13.999, 0, 0.001, 4, math.inf, -math.inf)]
    assert len(set(keys)) == len(keys) and min(keys) >= 0


def test_wilson_oracle():
    # closed form from the score interval for 10 / 100 at z = 1.96
    lo, hi = h.wilson_interval(10, 100)
    assert lo == pytest.approx(0.05522914, abs=1e-6)
    assert hi == pytest.approx(0.17436566, abs=1e-6)
    assert h.wilson_halfwidth(0, 1000) > 0


def test_sweep_infinite_snr_all_zero():
    cfg = _cfg("zigbee-like", snr_db_list=(math.inf,), n_list=(1, 4), trials_per_point=20)
    pts = h.run_sweep(cfg)
    assert [p.ber for p in pts] == [0.0, 0.0]
    assert all(p.tag_bits_total == 20 * 64 for p in pts)


def test_sweep_serial_parallel_identical(tmp_path):
    cfg = _cfg(snr_db_list=(-6.0, 0.0), n_list=(4, 8), trials_per_point=20, tag_bits_per_trial=64)
    a = h.run_sweep(dataclasses.replace(cfg, output_path=str(tmp_path / "a.csv")), workers=1)
    b = h.run_sweep(dataclasses.replace(cfg, output_path=str(tmp_path / "b.csv")), workers=3)
    assert a == b
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_round_trip(tmp_path):
    cfg = _cfg(snr_db_list=(math.inf, -2.5), n_list=(4,), trials_per_point=16)
    pts = h.run_sweep(cfg)
    path = h.write_csv(pts, tmp_path / "sub" / "r.csv")
    assert path.read_text().splitlines()[0] == ",".join(h.CSV_COLUMNS)
    back = h.read_csv(path)
    assert back == pts
    for p in back:
        assert p.ber == p.bit_errors / p.tag_bits_total and 0 <= p.ber <= 1


@pytest.mark.parametrize("preset", ["bluetooth-like", "zigbee-like"])
def test_ber_non_increasing_in_snr(preset):
    cfg = _cfg(preset, snr_db_list=(-14.0, -10.0, -6.0, -2.0, 2.0), n_list=(4, 8), trials_per_point=40)
    pts = h.run_sweep(cfg)
    for n in cfg.n_list:
        curve = [p for p in pts if p.n == n]
        for a, b in zip(curve, curve[1:]):
            slack = a.wilson_95_halfwidth + b.wilson_95_halfwidth
            assert b.ber <= a.ber + slack


def test_plot_script(tmp_path):
    pts = [
        h.BerPoint(float(s), n, 10, 640, e, e / 640, h.wilson_halfwidth(e, 640))
        for n in (4, 8)
        for s, e in zip((-8, -4, 0, 4, math.inf), (300, 150, 40, 3, 0))
    ]
    csv_path, script = h.emit_plot_script(pts, tmp_path / "fig.py")
    assert csv_path.read_text() == h.points_to_csv(pts)
    src = script.read_text()
    tree = ast.parse(src)
    series = next(
        n.value for n in tree.body if isinstance(n, ast.Assign) and n.targets[0].id == "SERIES"
    )
    assert len(series.keys) == 2
    for tup in series.values:
        assert all(len(lst.elts) == 5 for lst in tup.elts)
    assert "set_yscale(\"log\")" in src
    ns = {"__file__": str(script)}
    exec(compile(src.replace("import matplotlib.pyplot as plt", "plt = None"), "fig", "exec"), ns)
    assert sorted(ns["SERIES"]) == [4, 8]
    assert ns["SERIES"][4][0][-1] == math.inf

    # regenerated from the CSV: byte-identical
    again = tmp_path / "again"
    again.mkdir()
    _, script2 = h.emit_plot_script(h.read_csv(csv_path), again / "fig.py")
    assert script2.read_bytes() == script.read_bytes()


def test_plot_script_empty(tmp_path):
    with pytest.raises(ValueError):
        h.emit_plot_script([], tmp_path / "fig.py")
    assert list(tmp_path.iterdir()) == []


def test_rate_table():
    assert _cfg(n_list=(4, 8, 16)).__class__ is h.ExperimentConfig
    assert h.rate_table(_cfg(n_list=(4, 8, 16))) == {4: 250e3, 8: 125e3, 16: 62.5e3}


def test_runtime_linear_in_trials():
    def timed(trials):
        cfg = _cfg(snr_db_list=(-4.0,), n_list=(8,), trials_per_point=trials)
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                h.run_sweep(cfg)
            best = min(best, time.perf_counter() - t0)
        return best

    t1, t2 = timed(40), timed(160)
    assert t2 / t1 == pytest.approx(4.0, rel=0.3)
