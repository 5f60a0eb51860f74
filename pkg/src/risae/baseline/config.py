"""Flat, versioned experiment configuration.

A config file holds one ``key = value`` pair per line, with ``#`` comments
and no sections, for example::

    version = 1
    kind = ae_perfect
    seed = 7
    N = 16
    eb_n0_db = -20, -18, -16, -14, -12

Values are parsed according to the field's type: integers, floats,
``true``/``false``, bare strings and comma-separated number lists. Every
key is listed in :data:`FIELDS`; unknown keys, section headers and
out-of-range values are rejected before anything is computed.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

from ..autoencoder import TrainConfig
from ..nn.optim import TrainSchedule

CONFIG_VERSION = 1
KINDS = ("ae_perfect", "ae_estimated", "baseline_mc", "ris_pretrain")


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    kind: str = "ae_perfect"
    seed: int = 0
    out: str = "runs"
    # autoencoder
    k: int = 1
    n: int = 1
    N: int = 16
    train_symbols: int = 1_280_000
    val_fraction: float = 0.2
    test_symbols: int = 3_200_000
    batch_train: int = 128
    batch_test: int = 64
    train_eb_n0_db: float = 16.0
    block_len: int = 8
    kernel_size: int = 1
    lr: float = 1e-3
    rx_input: str = "equalized"
    csi_features: str = "effective"
    phase_selector: str = "learned"
    train_with_estimates: bool = False
    dtype: str = "float64"
    max_epochs: int = 150
    early_stop_patience: int = 100
    lr_plateau_patience: int = 50
    lr_factor: float = 0.1
    # RIS pre-training
    ris_checkpoint: str = ""
    ris_dataset_size: int = 200_000
    ris_test_size: int = 5000
    ris_max_epochs: int = 1000
    ris_early_stop_patience: int = 20
    ris_lr_plateau_patience: int = 10
    ris_lr_factor: float = 0.33
    ris_dtype: str = "float64"
    # evaluation
    eb_n0_db: list = field(default_factory=lambda: [-20.0, -18.0, -16.0, -14.0, -12.0, -10.0])
    csi_mode: str = "perfect"
    pilot_eb_n0_db: float = math.nan
    # Monte-Carlo baseline
    scheme: str = "bpsk"
    phase_source: str = "closed_form"
    channel: str = "rayleigh"
    min_errors: int = 200
    max_bits: int = 10 ** 8

    def validate(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}; this build reads version {CONFIG_VERSION}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.csi_mode not in ("perfect", "estimated"):
            raise ConfigError("csi_mode must be 'perfect' or 'estimated'")
        if self.scheme not in ("bpsk", "qpsk", "qam16"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.phase_source not in ("closed_form", "learned", "none"):
            raise ConfigError(f"unknown phase_source {self.phase_source!r}")
        if self.channel not in ("rayleigh", "awgn"):
            raise ConfigError(f"unknown channel {self.channel!r}")
        if self.min_errors < 1 or self.max_bits < 1:
            raise ConfigError("min_errors and max_bits must be positive")
        if self.ris_dataset_size < 2 or self.ris_test_size < 1:
            raise ConfigError("RIS dataset and test sizes must be positive")
        if self.ris_dtype not in ("float64", "float32"):
            raise ConfigError(f"ris_dtype must be float64 or float32, got {self.ris_dtype!r}")
        if not self.eb_n0_db:
            raise ConfigError("eb_n0_db needs at least one point")
        if any(not math.isfinite(e) for e in self.eb_n0_db):
            raise ConfigError("eb_n0_db points must be finite")
        if len(set(self.eb_n0_db)) != len(self.eb_n0_db):
            raise ConfigError("eb_n0_db points must be distinct")
        try:
            self.train_config()
            self.ris_schedule()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def train_config(self):
        return TrainConfig(
            k=self.k, n=self.n, N=self.N,
            train_symbols=self.train_symbols, val_fraction=self.val_fraction,
            test_symbols=self.test_symbols, batch_train=self.batch_train, batch_test=self.batch_test,
            train_eb_n0_db=self.train_eb_n0_db, block_len=self.block_len, kernel_size=self.kernel_size,
            lr=self.lr, rx_input=self.rx_input, csi_features=self.csi_features,
            phase_selector=self.phase_selector, train_with_estimates=self.train_with_estimates,
            dtype=self.dtype,
            schedule=TrainSchedule(
                max_epochs=self.max_epochs, early_stop_patience=self.early_stop_patience,
                lr_plateau_patience=self.lr_plateau_patience, lr_factor=self.lr_factor,
            ),
        )

    def ris_schedule(self):
        return TrainSchedule(
            max_epochs=self.ris_max_epochs, early_stop_patience=self.ris_early_stop_patience,
            lr_plateau_patience=self.ris_lr_plateau_patience, lr_factor=self.ris_lr_factor,
        )

    @property
    def pilot_level(self):
        """Pilot Eb/N0 in dB, or ``None`` when pilots follow the data level."""
        return None if math.isnan(self.pilot_eb_n0_db) else self.pilot_eb_n0_db

    def to_dict(self):
        d = asdict(self)
        d["pilot_eb_n0_db"] = self.pilot_level
        return d


FIELDS = {f.name: f for f in fields(ExperimentConfig)}

# desk-scale preset: small enough for a laptop, same structure as the full run
DESK_SCALE = {
    "train_symbols": 100_000,
    "test_symbols": 200_000,
    "max_epochs": 30,
    "ris_dataset_size": 20_000,
    "ris_max_epochs": 200,
    "ris_dtype": "float32",
    "min_errors": 200,
    "max_bits": 10 ** 7,
}


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_text(name, text, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE | _FALSE:
                return low in _TRUE
            raise ValueError
        if isinstance(default, int):
            return int(text.replace("_", ""))
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            text = text.strip("[]")
            return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {type(default).__name__}") from None
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    return text


def _coerce(name, value):
    f = FIELDS[name]
    default = f.default if f.default is not MISSING else f.default_factory()
    if isinstance(value, str) and not isinstance(default, str):
        return _parse_text(name, value, default)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return _parse_text(name, value, default)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{name} must be a list of numbers")
        return [float(v) for v in value]
    raise ConfigError(f"unsupported field {name}")


def parse_config_text(text):
    """Flat ``key -> raw string`` mapping of a config file's contents."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, default_section="__defaults__",
    )
    parser.optionxform = str  # keys are case sensitive (N vs n)
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from None
    extra = [s for s in parser.sections() if s != "config"]
    if extra:
        raise ConfigError(f"section headers are not allowed; the config is flat (found [{extra[0]}])")
    return dict(parser["config"])


def from_mapping(values, desk_scale=False):
    """Build and validate a config from flat ``key -> value`` pairs."""
    unknown = sorted(set(values) - set(FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = dict(DESK_SCALE) if desk_scale else {}
    for name, value in values.items():
        kwargs[name] = _coerce(name, value)
    return ExperimentConfig(**kwargs).validate()


def load_config(path=None, desk_scale=False, **overrides):
    """Read a config file (or start from defaults) and apply ``overrides``.

    Explicit file values win over the desk-scale preset; ``overrides`` win
    over both.
    """
    values = {}
    if path is not None:
        try:
            values = parse_config_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return from_mapping(values, desk_scale)


def dump_config(cfg):
    """Render ``cfg`` in the flat file format (round-trips through :func:`load_config`)."""
    lines = [f"# risae experiment config, format version {CONFIG_VERSION}"]
    for name, value in asdict(cfg).items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif isinstance(value, list):
            text = ", ".join(repr(float(v)) for v in value)
        else:
            text = str(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
