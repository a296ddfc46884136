"""File formats: versioned JSON output, spectrum CSV and key=value run config."""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import NVParams
from .inverse import HyperfineMode
from .lineshape import Spectrum

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# JSON


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = f"{x:.17g}"
    if "." not in s and "e" not in s and "inf" not in s:
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def dumps(obj, compact: bool = False, _level: int = 0) -> str:
    """JSON with floats fixed at 17 significant digits (byte-stable output)."""
    obj = _plain(obj)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [(json.dumps(str(k)), dumps(v, compact, _level + 1)) for k, v in obj.items()]
        if not items:
            return "{}"
        if compact:
            return "{" + ",".join(f"{k}:{v}" for k, v in items) + "}"
        pad = "  " * (_level + 1)
        body = ",\n".join(f"{pad}{k}: {v}" for k, v in items)
        return "{\n" + body + "\n" + "  " * _level + "}"
    if isinstance(obj, (list, tuple)):
        vals = [dumps(v, compact, _level + 1) for v in obj]
        if not vals:
            return "[]"
        if compact or all(not isinstance(_plain(v), (dict, list, tuple)) for v in obj):
            return "[" + ("," if compact else ", ").join(vals) + "]"
        pad = "  " * (_level + 1)
        return "[\n" + ",\n".join(pad + v for v in vals) + "\n" + "  " * _level + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def envelope(kind: str, payload: dict) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": kind, **payload}


def params_dict(params: NVParams) -> dict:
    return {
        "d_mhz": params.d_mhz,
        "e_mhz": params.e_mhz,
        "gamma_mhz_per_mt": params.gamma_mhz_per_mt,
        "sigma_d_mhz": params.sigma_d,
        "sigma_e_mhz": params.sigma_e,
    }


# --------------------------------------------------------------------------
# spectrum CSV


def read_spectrum_csv(path) -> tuple[Spectrum, dict]:
    """Read ``frequency_mhz,signal[,sigma]``; ``# key = value`` comments become metadata."""
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    header = None
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if header is None:
                header = next(csv.reader([line]))
                continue
            rows.append(next(csv.reader([line])))
    cols = [h.strip() for h in (header or [])]
    if cols[:2] != ["frequency_mhz", "signal"] or len(cols) > 3 or (len(cols) == 3 and cols[2] != "sigma"):
        raise ValueError(f"{path}: header must be frequency_mhz,signal[,sigma], got {cols}")
    data = np.array(rows, dtype=float).reshape(-1, len(cols))
    sigma = data[:, 2] if len(cols) == 3 else None
    return Spectrum(data[:, 0], data[:, 1], sigma), meta


def write_spectrum_csv(path, spec: Spectrum, meta: dict | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        has_sigma = spec.sigma is not None
        w.writerow(["frequency_mhz", "signal"] + (["sigma"] if has_sigma else []))
        for i in range(spec.freqs_mhz.size):
            row = [_fmt_float(spec.freqs_mhz[i]), _fmt_float(spec.signal[i])]
            if has_sigma:
                row.append(_fmt_float(spec.sigma[i]))
            w.writerow(row)


def write_table_csv(fh, columns: list[str], rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in r])


# --------------------------------------------------------------------------
# run configuration


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Settings shared by all subcommands.

    Defaults: D = 2870 MHz, E = 0, gamma = 28.032 MHz/mT, no hyperfine
    structure, inverse-variance weighting on, symmetry images off.
    """

    params: NVParams = field(default_factory=NVParams)
    hyperfine: HyperfineMode = HyperfineMode.NONE
    weighted: bool = True
    symmetry_output: bool = False
    units: dict = field(
        default_factory=lambda: {"frequency": "MHz", "field": "mT", "gamma": "MHz/mT"}
    )

    _PARAM_KEYS = {
        "d_mhz": "d_mhz",
        "e_mhz": "e_mhz",
        "gamma_mhz_per_mt": "gamma_mhz_per_mt",
        "sigma_d_mhz": "sigma_d",
        "sigma_e_mhz": "sigma_e",
        "sigma_gamma_mhz_per_mt": "sigma_gamma",
    }

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        cp.read_string(text)
        values: dict[str, str] = {}
        for sec in cp.sections():
            values.update(cp[sec])
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        kw = {}
        extra = {}
        for key, raw in values.items():
            if key in cls._PARAM_KEYS:
                kw[cls._PARAM_KEYS[key]] = float(raw)
            elif key == "hyperfine":
                extra["hyperfine"] = HyperfineMode(str(raw).strip().lower())
            elif key in ("weighting", "weighted"):
                extra["weighted"] = _bool(str(raw))
            elif key in ("symmetry_output", "symmetry"):
                extra["symmetry_output"] = _bool(str(raw))
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(params=NVParams(**kw), **extra)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **kw) -> "RunConfig":
        p = self.params
        fields = {
            "d_mhz": p.d_mhz,
            "e_mhz": p.e_mhz,
            "gamma_mhz_per_mt": p.gamma_mhz_per_mt,
            "sigma_d": p.sigma_d,
            "sigma_e": p.sigma_e,
            "sigma_gamma": p.sigma_gamma,
        }
        fields.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig(NVParams(**fields), self.hyperfine, self.weighted, self.symmetry_output)

    def to_dict(self) -> dict:
        return {
            "params": params_dict(self.params),
            "hyperfine": self.hyperfine.value,
            "weighted": self.weighted,
            "symmetry_output": self.symmetry_output,
            "units": self.units,
        }

