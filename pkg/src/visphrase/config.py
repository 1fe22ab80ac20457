"""Pipeline configuration: an INI file with sections, validated up front.

Relative input paths resolve against the config file's directory; outputs
go under ``[run] output_dir``. ``section.key=value`` overrides (from the
command line) are applied before validation and before hashing.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

DEFAULTS = {
    "run": {"seed": "", "output_dir": "out"},
    "data": {"word_format": "word2vec"},
    "projection": {
        "method": "ridge",
        "lambda": "auto",
        "lambda_grid": "",
        "folds": "5",
        "power": "auto",
        "power_grid": "",
        "holdout": "0.2",
        "leave_one_out": "none",
        "model": "proj.json",
    },
    "decomposition": {"lambda": "auto-gcv", "lambda_grid": "", "cap": "100", "model": "dec.json"},
    "annotate": {
        "mode": "dir",
        "pos": "ADJ",
        "k": "100",
        "adj_top": "",
        "noun_top": "",
        "sp_threshold": "20",
        "output": "annotations.tsv",
    },
    "evaluate": {
        "ks": "1,5,10,20,50,100",
        "auc": "false",
        "concreteness": "false",
        "concreteness_top_n": "5",
        "mean_rank": "",
        "output": "report",
    },
    "represent": {
        "scope": "image",
        "target_dim": "100",
        "target_dim_grid": "",
        "reg": "auto",
        "reg_grid": "0.0001,0.001,0.01,0.1",
        "epochs": "50",
        "normalize": "false",
        "output": "attribute_vectors.tsv",
    },
}


class ConfigError(Exception):
    """Invalid or incomplete configuration (exit code 2)."""


@dataclass
class PipelineConfig:
    parser: configparser.ConfigParser
    base_dir: Path
    source: str

    def get(self, section: str, key: str) -> str:
        try:
            return self.parser.get(section, key).strip()
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise ConfigError(f"missing [{section}] {key}") from None

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key) and self.parser.get(section, key).strip() != ""

    def get_int(self, section: str, key: str) -> int:
        value = self.get(section, key)
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}") from None

    def get_float(self, section: str, key: str) -> float:
        value = self.get(section, key)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {value!r}") from None

    def get_bool(self, section: str, key: str) -> bool:
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a boolean") from None

    def get_floats(self, section: str, key: str) -> list[float]:
        value = self.get(section, key)
        try:
            return [float(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a comma-separated list of numbers") from None

    def get_ints(self, section: str, key: str) -> list[int]:
        value = self.get(section, key)
        try:
            return [int(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a comma-separated list of integers") from None

    def get_list(self, section: str, key: str) -> list[str]:
        return [x.strip() for x in self.get(section, key).split(",") if x.strip()]

    @property
    def seed(self) -> int:
        return self.get_int("run", "seed")

    @property
    def output_dir(self) -> Path:
        return self.base_dir / self.get("run", "output_dir")

    def input_path(self, key: str) -> Path:
        """Path of a ``[data]`` input, which must exist."""
        path = self.base_dir / self.get("data", key)
        if not path.is_file():
            raise ConfigError(f"[data] {key}: file not found: {path}")
        return path

    def output_path(self, section: str, key: str = "output") -> Path:
        return self.output_dir / self.get(section, key)

    def config_hash(self) -> str:
        """SHA-256 over the sorted, override-applied key/value pairs."""
        h = hashlib.sha256()
        for section in sorted(self.parser.sections()):
            for key, value in sorted(self.parser.items(section)):
                h.update(f"[{section}]{key}={value.strip()}\n".encode("utf-8"))
        return h.hexdigest()


def load_config(path, overrides: Sequence[str] = ()) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.read_dict(DEFAULTS)
    try:
        text = path.read_text(encoding="utf-8")
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.partition(".")
        if not sep or not dot or not section or not option:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    cfg = PipelineConfig(parser, path.resolve().parent, str(path))
    validate_common(cfg)
    return cfg


def parse_k(value: str) -> int | None:
    """``"all"`` means the whole candidate pool (returned as None)."""
    if value == "all":
        return None
    try:
        k = int(value)
    except ValueError:
        raise ConfigError(f"[annotate] k must be a positive integer or 'all', got {value!r}") from None
    if k < 1:
        raise ConfigError("[annotate] k must be positive")
    return k


def validate_common(cfg: PipelineConfig) -> None:
    if not cfg.has("run", "seed"):
        raise ConfigError("[run] seed must be set")
    cfg.seed
    ks = cfg.get_ints("evaluate", "ks")
    if not ks or any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ConfigError(f"[evaluate] ks must be strictly increasing positive integers, got {ks}")
    if cfg.get("projection", "method") not in ("ridge", "ncca"):
        raise ConfigError("[projection] method must be 'ridge' or 'ncca'")
    if cfg.get("annotate", "mode") not in ("dir", "dec", "lm", "sp", "vlm"):
        raise ConfigError("[annotate] mode must be one of dir, dec, lm, sp, vlm")
    if cfg.get("annotate", "pos") not in ("ADJ", "NOUN"):
        raise ConfigError("[annotate] pos must be ADJ or NOUN")
    if cfg.get("represent", "scope") not in ("image", "global"):
        raise ConfigError("[represent] scope must be 'image' or 'global'")
    parse_k(cfg.get("annotate", "k"))
    for section, key in (("decomposition", "cap"), ("represent", "epochs"), ("projection", "folds")):
        if cfg.get_int(section, key) < 1:
            raise ConfigError(f"[{section}] {key} must be positive")
    for section, key in (("projection", "lambda_grid"), ("projection", "power_grid"), ("decomposition", "lambda_grid")):
        if cfg.has(section, key):
            cfg.get_floats(section, key)
    for key, value in cfg.parser.items("data"):
        if key != "word_format" and value.strip():
            cfg.input_path(key)
    if cfg.get("data", "word_format") not in ("word2vec", "tsv"):
        raise ConfigError("[data] word_format must be 'word2vec' or 'tsv'")
    if not cfg.get_floats("represent", "reg_grid"):
        raise ConfigError("[represent] reg_grid must not be empty")
