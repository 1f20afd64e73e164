"""Experiment configuration: defaults, TOML files, presets, flag overrides."""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .decoding import DecodeParams
from .retrieval import BM25Params, RM3Params

__all__ = ["Config", "PRESETS", "ConfigError", "load_config", "load_preset"]

PRESETS = ("bm25", "bm25-rm3", "bm25-d2q", "bm25-d2q-rm3")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    # BM25
    k1: float = 0.9
    b: float = 0.4
    # RM3
    rm3: bool = False
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5
    # expansion
    expand: bool = False
    num_queries: int = 10
    seed: int = 0
    # decoding / count model
    method: str = "topk"
    topk: int = 10
    max_len: int = 32
    mix: float = 0.7
    alpha: float = 0.1
    # retrieval depth and analysis
    depth: int = 1000
    stopwords: str = ""

    @property
    def bm25(self) -> BM25Params:
        return BM25Params(self.k1, self.b)

    @property
    def rm3_params(self) -> RM3Params | None:
        if not self.rm3:
            return None
        return RM3Params(self.fb_docs, self.fb_terms, self.orig_weight)

    @property
    def decode(self) -> DecodeParams:
        return DecodeParams(self.method, self.topk, self.max_len)

    def validate(self) -> "Config":
        try:
            self.bm25
            RM3Params(self.fb_docs, self.fb_terms, self.orig_weight)
            self.decode
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.num_queries < 0 or self.depth < 1:
            raise ConfigError("num_queries must be >= 0 and depth >= 1")
        return self

    def override(self, values: Mapping[str, Any]) -> "Config":
        """Apply non-``None`` values; unknown keys are an error."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None:
                continue
            changes[key] = _coerce(known[key].type, value, key)
        return replace(self, **changes).validate()

    def to_toml(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, str):
                s = '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
            else:
                s = repr(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def echo(self, directory: str | Path) -> Path:
        """Write the effective configuration next to an output file."""
        path = Path(directory) / "effective-config.toml"
        path.write_text(self.to_toml(), encoding="utf-8")
        return path


def _coerce(type_name: str, value: Any, key: str) -> Any:
    try:
        if type_name == "bool":
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if type_name == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if type_name == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {value!r} for {key} ({type_name})") from None


def _flatten(data: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in data.items():
        if isinstance(v, Mapping):
            out.update(_flatten(v))
        else:
            out[k] = v
    return out


def load_config(path: str | Path | None = None, base: Config | None = None) -> Config:
    """Read a TOML file (flat keys; tables are flattened) over ``base``."""
    cfg = base or Config()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg.override(_flatten(data))


def load_preset(name: str, base: Config | None = None) -> Config:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("expando").joinpath(f"presets/{name}.toml").read_text("utf-8")
    return (base or Config()).override(tomllib.loads(text))
