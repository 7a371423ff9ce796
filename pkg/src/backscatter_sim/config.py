"""YAML experiment configs.

Schema (every section optional; unknown keys are errors)::

    carrier:
      preset: bluetooth-like | zigbee-like
      overrides: {<FskConfig/PskConfig field>: value, ...}
    tag:
      mode: frequency-shift | phase-delay
      n: 8                    # N for single trials
      delta_f_hz: auto        # auto = f_{n/2} - f_0 of the carrier
      phase_set: [0, 180]     # degrees, multiples of 90
      start_offset: random    # or a sample count
      gamma_on: [1.0, 0.0]    # [re, im]
      gamma_off: [1.0, 0.0]
    channel:
      snr_db: inf             # single trials only; sweeps use sweep.snr_db
      leak_gain: 0.0
      seed: 0
    receiver:
      band_limit: false
      sync: genie | preamble
    sweep:
      snr_db: [-14, -12, ..., 4]
      n: [4, 8, 16]
      trials_per_point: 200
      tag_bits_per_trial: 64
      workers: 1
    output: results.csv
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Any

import yaml

from . import carrier as car
from .carrier import FskConfig
from .harness import ExperimentConfig, default_profile
from .tag import TagProfile

_SECTIONS = {
    "carrier": {"preset", "overrides"},
    "tag": {"mode", "n", "delta_f_hz", "phase_set", "start_offset", "gamma_on", "gamma_off"},
    "channel": {"snr_db", "leak_gain", "seed"},
    "receiver": {"band_limit", "sync"},
    "sweep": {"snr_db", "n", "trials_per_point", "tag_bits_per_trial", "workers"},
    "output": None,
}


class ConfigError(ValueError):
    pass


def parse_snr(value) -> float:
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"snr_db must be a number or 'inf', got {value!r}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"snr_db must be a number or 'inf', got {value!r}")


def _complex(value, key: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{key} must be [re, im], got {value!r}")


def _check_keys(doc: dict, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclasses.dataclass(frozen=True)
class LoadedConfig:
    experiment: ExperimentConfig
    snr_db: float
    n: int


def load(path) -> LoadedConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return from_dict(doc)


def from_dict(doc: dict) -> LoadedConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(doc, set(_SECTIONS), "top level")
    for name, keys in _SECTIONS.items():
        if keys is not None and name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            _check_keys(doc[name], keys, name)
    try:
        return _build(doc)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(doc: dict) -> LoadedConfig:
    c = doc.get("carrier", {})
    preset_name = c.get("preset", "bluetooth-like")
    ccfg = car.preset(preset_name)
    overrides: dict[str, Any] = dict(c.get("overrides") or {})
    if overrides:
        fields = {f.name for f in dataclasses.fields(ccfg)}
        bad = set(overrides) - fields
        if bad:
            raise ConfigError(f"unknown carrier override(s): {', '.join(sorted(bad))}")
        ccfg = dataclasses.replace(ccfg, **overrides)

    t = doc.get("tag", {})
    base = default_profile(ccfg)
    mode = t.get("mode", base.mode)
    delta_f = t.get("delta_f_hz", "auto")
    if delta_f == "auto":
        delta_f = ccfg.mixer_shift if isinstance(ccfg, FskConfig) else 0.0
    degrees = t.get("phase_set", [0, 180])
    if any(float(d) % 90 for d in degrees):
        raise ConfigError(f"phase_set entries must be multiples of 90 degrees, got {degrees}")
    steps = tuple(int(float(d) // 90) % 4 for d in degrees)
    offset = t.get("start_offset", "random")
    if offset == "random":
        offset = None
    elif not isinstance(offset, int) or isinstance(offset, bool):
        raise ConfigError(f"start_offset must be 'random' or an integer, got {offset!r}")
    n_single = int(t.get("n", base.n))
    profile = TagProfile(
        mode=mode,
        n=n_single,
        delta_f=float(delta_f),
        phase_set=steps,
        start_offset=offset,
        gamma_on=_complex(t.get("gamma_on", 1.0), "gamma_on"),
        gamma_off=_complex(t.get("gamma_off", 1.0), "gamma_off"),
    )

    ch = doc.get("channel", {})
    seed = ch.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    rx = doc.get("receiver", {})
    sw = doc.get("sweep", {})
    snrs = tuple(parse_snr(s) for s in sw.get("snr_db", list(range(-14, 5, 2))))
    ns = tuple(int(n) for n in sw.get("n", [4, 8, 16]))

    output = doc.get("output")
    if output is not None:
        output = str(output)

    exp = ExperimentConfig(
        carrier=ccfg,
        carrier_preset=preset_name,
        tag=profile,
        leak_gain=float(ch.get("leak_gain", 0.0)),
        snr_db_list=snrs,
        n_list=ns,
        trials_per_point=int(sw.get("trials_per_point", 200)),
        tag_bits_per_trial=int(sw.get("tag_bits_per_trial", 64)),
        seed=seed,
        output_path=output,
        sync=rx.get("sync", "genie"),
        workers=int(sw.get("workers", 1)),
        band_limit=bool(rx.get("band_limit", False)),
    )
    return LoadedConfig(exp, parse_snr(ch.get("snr_db", "inf")), n_single)
