"""INI run configuration: sections per module, strict keys, resolved echo.

Example::

    [data]
    preset = gmm5

    [sampling]
    sampler = prototypes

    [pipeline]
    iterations = 2000
    seed = 3
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .data import Dataset, generate_gaussian_mixture, load_fixture
from .pipeline import ConfigError, RunConfig

# section -> {ini key: RunConfig field}
SECTIONS = {
    "sampling": {"n_l": "n_l", "sampler": "sampler", "ps_init": "ps_init"},
    "ot_align": {"lambda": "lam", "max_iters": "sinkhorn_iters", "tol": "sinkhorn_tol"},
    "ctt": {"N_b": "N_b", "N_t": "N_t", "pam_restarts": "pam_restarts"},
    "learner": {
        "hidden": "hidden",
        "embed": "embed",
        "lr": "lr",
        "momentum": "momentum",
        "tau": "tau",
        "B": "B",
        "weak_sigma": "weak_sigma",
        "strong_sigma": "strong_sigma",
        "strong_dropout": "strong_dropout",
    },
    "pipeline": {"iterations": "iterations", "seed": "seed"},
    "ablation": {
        "N_miss": "n_miss",
        "noise_ratio": "noise_ratio",
        "fixed_Dl": "fixed_dl",
        "mapping": "mapping",
    },
}

PRESETS = {
    # the 5-class benchmark: n = 2000, d = 16, separation 8
    "gmm5": dict(k=5, per_class=400, d=16, separation=8.0, seed=0),
}


@dataclass
class DataConfig:
    preset: str | None = "gmm5"
    path: str | None = None
    k: int | None = None
    per_class: int | None = None
    d: int | None = None
    separation: float | None = None
    seed: int | None = None

    def load(self, base: Path | None = None) -> Dataset:
        if self.path is not None:
            p = Path(self.path)
            if base is not None and not p.is_absolute():
                p = base / p
            return load_fixture(p, k=self.k)
        params = dict(PRESETS[self.preset]) if self.preset else {}
        for key in ("k", "per_class", "d", "separation", "seed"):
            if getattr(self, key) is not None:
                params[key] = getattr(self, key)
        missing = [key for key in ("k", "per_class", "d", "separation") if key not in params]
        if missing:
            raise ConfigError(f"data.{missing[0]}", "required when no preset is given")
        ds = generate_gaussian_mixture(**params)
        ds.name = self.preset or "gaussian_mixture"
        return ds


_DATA_TYPES = {"preset": str, "path": str, "k": int, "per_class": int, "d": int, "separation": float, "seed": int}


def _field_types() -> dict:
    defaults = RunConfig()
    out = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(defaults, f.name)
        out[f.name] = int if v is None else type(v)
    return out


def _convert(raw: str, typ, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {typ.__name__}") from None


def parse(text: str) -> tuple[RunConfig, DataConfig]:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep N_b / N_t case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    types = _field_types()
    values = {}
    data = DataConfig()
    for section in cp.sections():
        if section == "data":
            given = dict(cp.items(section))
            if "path" in given and "preset" not in given:
                data.preset = None
            for key, raw in given.items():
                if key not in _DATA_TYPES:
                    raise ConfigError(f"data.{key}", "unknown key")
                val = _convert(raw, _DATA_TYPES[key], f"data.{key}")
                if key == "preset" and val.lower() in ("", "none"):
                    val = None
                elif key == "preset" and val not in PRESETS:
                    raise ConfigError("data.preset", f"unknown preset {val!r}; known: {sorted(PRESETS)}")
                setattr(data, key, val)
            continue
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        for key, raw in cp.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            name = SECTIONS[section][key]
            values[name] = _convert(raw, types[name], f"{section}.{key}")
    return RunConfig(**values), data


def load(path: str | Path) -> tuple[RunConfig, DataConfig]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {p}: {exc.strerror}") from None
    return parse(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(cfg: RunConfig, data: DataConfig) -> str:
    """Resolved config with every value the run used, re-parseable by ``parse``."""
    lines = ["[data]"]
    for key in _DATA_TYPES:
        v = getattr(data, key)
        if v is not None:
            lines.append(f"{key} = {_fmt(v)}")
    if data.preset is None:
        lines.append("preset = none")
    for section, keys in SECTIONS.items():
        lines.append("")
        lines.append(f"[{section}]")
        for key, name in keys.items():
            lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"
