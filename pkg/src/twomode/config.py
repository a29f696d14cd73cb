"""Configuration ingestion for the command line tools.

Parameter files are flat INI: sections with key = value pairs.  Keys
mirror the library field names; frequencies are entered in Hz (the
``*_hz`` suffix) and converted to angular units exactly once, here.
Unknown sections or keys abort with ConfigError so typos cannot pass
silently.  A previously written run manifest (JSON, already in internal
units) can be loaded in place of an INI file to reproduce a run.
"""

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .detection import DetectionModel
from .errors import ConfigError, TwoModeError
from .fullmodel import FullModelParams
from .params import DEFAULT_CALIBRATION, PumpCalibration, SystemParams, pump_map
from .slowflow import NoiseConfig

TWO_PI = 2.0 * math.pi

# schema: section -> key -> (pytype, default); defaults of None mean the
# key must be present if its section is used by the subcommand
_F = float
_I = int
_B = bool
SCHEMA = {
    "device": {
        "omega1_hz": (_F, 47030.7),
        "omega2_hz": (_F, 1867195.4),
        "gamma1_hz": (_F, 0.48),
        "gamma2_hz": (_F, 36.2),
        "g11": (_F, 1.91e22),
        "g22": (_F, 7.38e25),
        "g12": (_F, 8.41e22),
        "g21": (_F, 1.26e25),
    },
    "calibration": {
        "kappa_f": (_F, DEFAULT_CALIBRATION.kappa_f),
        "mass_scale_kg": (_F, DEFAULT_CALIBRATION.mass_scale),
    },
    "drive": {
        "current_a": (_F, 379e-6),
        "delta_f_hz": (_F, 1000.0),
        "theta_f_rad": (_F, 0.0),
    },
    "noise": {
        "d1": (_F, 0.0),
        "d2": (_F, 0.0),
        "seed": (_I, 0),
    },
    "detection": {
        "tau_lockin_s": (_F, 1.0e-3),
        "sample_period_s": (_F, 4.4e-3),
        "sigma_det1_m": (_F, 0.0),
        "sigma_det2_m": (_F, 0.0),
    },
    "controller": {
        "t_wait_s": (_F, 0.3),
        "t_measure_s": (_F, 4.4e-3),
        "target_mode": (_I, 2),
        "theta_limit_deg": (_F, 20.0),
        "clamp": (_B, False),
        "n_cycles": (_I, 1000),
        "det_seed": (_I, 1),
    },
    "integration": {
        "dt_s": (_F, 0.0),          # 0 -> automatic step choice
        "t_end_s": (_F, 1.0),
        "record_stride": (_I, 1),
        "n_members": (_I, 1),
    },
    "fullmodel": {
        "mass1_kg": (_F, 1.0),
        "mass2_kg": (_F, 0.3),
        "omega1_hz": (_F, 1.0),
        "omega2_hz": (_F, 20.7),
        "gamma1": (_F, 0.01),
        "gamma2": (_F, 0.2),
        "duff1": (_F, 0.02),
        "duff2": (_F, 0.04),
        "coupling": (_F, 0.1),
        "f_drive": (_F, 3.921),
        "delta_f_hz": (_F, 0.02),
        "theta_f_rad": (_F, 0.0),
    },
}

_HZ_KEYS = {"omega1_hz", "omega2_hz", "gamma1_hz", "gamma2_hz",
            "delta_f_hz"}


def _convert(section, key, value):
    """Raw string/number to internal units; Hz keys become rad/s."""
    typ = SCHEMA[section][key][0]
    try:
        if typ is _B:
            if isinstance(value, bool):
                out = value
            elif str(value).strip().lower() in ("1", "true", "yes", "on"):
                out = True
            elif str(value).strip().lower() in ("0", "false", "no", "off"):
                out = False
            else:
                raise ValueError(value)
        else:
            out = typ(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"[{section}] {key}: cannot parse {value!r} as {typ.__name__}")
    if typ is _F and key in _HZ_KEYS:
        out *= TWO_PI
    return out


def _internal_name(key):
    for suffix in ("_hz", "_rad", "_s", "_a", "_m", "_kg", "_deg"):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


def load_raw(path) -> dict:
    """Read an INI file (or JSON manifest) into {section: {key: value}}.

    INI values are converted to internal units; JSON manifests are taken
    verbatim (they were written already converted).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"parameter file not found: {path}")
    if path.suffix == ".json":
        with open(path) as fh:
            doc = json.load(fh)
        raw = doc.get("resolved", doc)
        _check_schema_names(raw)
        return raw

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        out[section] = {}
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}] of {path}")
            out[section][_internal_name(key)] = _convert(section, key, value)
    return out


def _check_schema_names(raw):
    internal = {
        sec: {_internal_name(k) for k in keys} for sec, keys in SCHEMA.items()
    }
    for section, keys in raw.items():
        if section not in internal:
            raise ConfigError(f"unknown section [{section}] in manifest")
        for key in keys:
            if key not in internal[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}] of manifest")


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings on top of file values.

    Values are interpreted exactly like file values (Hz keys converted).
    """
    out = {sec: dict(kv) for sec, kv in raw.items()}
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override {item!r} must look like section.key=value")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override target '{target}'")
        out.setdefault(section, {})[_internal_name(key)] = _convert(
            section, key, value)
    return out


def _section(raw, name):
    """Section values with defaults filled, in internal units."""
    vals = {}
    for key, (typ, default) in SCHEMA[name].items():
        internal = _internal_name(key)
        if name in raw and internal in raw[name]:
            vals[internal] = raw[name][internal]
        else:
            d = default
            if typ is _F and key in _HZ_KEYS:
                d = default * TWO_PI
            vals[internal] = d
    return vals


@dataclass(frozen=True)
class RunSetup:
    """Everything a subcommand needs, in internal units."""

    params: SystemParams
    calibration: PumpCalibration
    current: float
    noise: NoiseConfig
    detection: DetectionModel
    controller: dict
    integration: dict
    fullmodel: FullModelParams
    fullmodel_drive: dict
    resolved: dict


def resolve(raw: dict) -> RunSetup:
    """Build library objects from a raw configuration dict."""
    dev = _section(raw, "device")
    cal_v = _section(raw, "calibration")
    drv = _section(raw, "drive")
    noi = _section(raw, "noise")
    det_v = _section(raw, "detection")
    ctl = _section(raw, "controller")
    itg = _section(raw, "integration")
    fm = _section(raw, "fullmodel")

    try:
        cal = PumpCalibration(kappa_f=cal_v["kappa_f"],
                              mass_scale=cal_v["mass_scale"])
        template = SystemParams(
            omega1=dev["omega1"], omega2=dev["omega2"],
            gamma1_damp=dev["gamma1"], gamma2_damp=dev["gamma2"],
            g11=dev["g11"], g22=dev["g22"], g12=dev["g12"], g21=dev["g21"],
            f1=0.0, f2=0.0, delta_f=drv["delta_f"],
            theta_f=drv["theta_f"])
        params = pump_map(drv["current"], cal, template)
        noise = NoiseConfig(d1=noi["d1"], d2=noi["d2"], seed=noi["seed"])
        detection = DetectionModel(
            tau_lockin=det_v["tau_lockin"],
            sample_period=det_v["sample_period"],
            sigma_det1=det_v["sigma_det1"], sigma_det2=det_v["sigma_det2"])
        fullmodel = FullModelParams(
            m1=fm["mass1"], m2=fm["mass2"],
            omega1=fm["omega1"], omega2=fm["omega2"],
            gamma1_damp=fm["gamma1"], gamma2_damp=fm["gamma2"],
            duff1=fm["duff1"], duff2=fm["duff2"],
            coupling=fm["coupling"], f_drive=fm["f_drive"])
    except ConfigError:
        raise
    except TwoModeError as exc:
        # a value that no library object will accept is a config mistake
        raise ConfigError(f"invalid parameter combination: {exc}") from exc
    ctl = dict(ctl)
    ctl["theta_limit"] = math.radians(ctl.pop("theta_limit"))

    resolved = {
        "device": dev, "calibration": cal_v, "drive": drv, "noise": noi,
        "detection": det_v, "controller": _section(raw, "controller"),
        "integration": itg, "fullmodel": fm,
    }
    return RunSetup(
        params=params, calibration=cal, current=drv["current"],
        noise=noise, detection=detection, controller=ctl, integration=itg,
        fullmodel=fullmodel,
        fullmodel_drive={
            "omega_f": fm["omega1"] + fm["omega2"] + fm["delta_f"],
            "theta_f": fm["theta_f"],
        },
        resolved=resolved)
