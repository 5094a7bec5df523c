"""Experiment configuration and its flat ``key = value`` text format.

Example::

    # four nodes on a ring, wireless links
    topology = 0-1, 1-2, 2-3, 3-0
    link_profile = wireless
    snr_db = 36
    snr_spread_db = 0
    iterations = 60

``topology`` takes either a preset name (``3conn``, ``4conn-ring``,
``5conn``, ``full``) or an explicit edge list. List-valued keys take
comma-separated numbers.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .clock import DEFAULT_BIAS_RANGE, DEFAULT_DRIFT_DIFFUSION
from .consensus import PRESET_TOPOLOGIES, TopologyGraph
from .estimation import DEFAULT_GUARD, DEFAULT_LUT_GRID, DETECTION_THRESHOLD_DB

# per-link SNR (mean, half-width) in dB for each physical setup
LINK_PROFILES = {"cabled": (33.0, 3.0), "wireless": (32.0, 4.0)}
CABLE_DELAY = 15e-9  # s per cabled link
NODE_SPACING = 3.0  # m between neighbouring nodes on the bench
MEASUREMENT_MODELS = ("signal", "exact")
SWEEP_AXES = ("", "snr_db", "tone_separation")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    name: str = "custom"
    n_nodes: int = 4
    topology: str = "4conn-ring"
    link_profile: str = "wireless"
    snr_db: float | None = None
    snr_spread_db: float | None = None
    tone_separation: float = 40e6
    pulse_duration: float = 10e-6
    rise_fall: float = 5e-9
    sample_rate: float = 200e6
    carrier_freq: float = 1.9e9
    resync_period: float = 0.5
    epoch_duration: float = 0.2
    iterations: int = 100
    trials: int = 10
    seed: int = 0
    bias_range: float = DEFAULT_BIAS_RANGE
    drift_diffusion: float = DEFAULT_DRIFT_DIFFUSION
    jitter_std: float = 0.0
    freq_offset_ppb: float = 0.0
    link_delay: float | None = None
    node_spacing: float = NODE_SPACING
    measurement: str = "signal"
    consensus: bool = True
    sync_stop_iteration: int | None = None
    guard_samples: int = DEFAULT_GUARD
    lut_grid: int = DEFAULT_LUT_GRID
    detection_threshold_db: float = DETECTION_THRESHOLD_DB
    convergence_threshold: float = 10e-12
    settle_iteration: int = 40
    sweep_axis: str = ""
    sweep_values: list[float] = field(default_factory=list)
    description: str = ""

    @property
    def link_snr_mean(self) -> float:
        return LINK_PROFILES[self.link_profile][0] if self.snr_db is None else self.snr_db

    @property
    def link_snr_spread(self) -> float:
        if self.snr_spread_db is None:
            return LINK_PROFILES[self.link_profile][1]
        return self.snr_spread_db

    def graph(self) -> TopologyGraph:
        return parse_topology(self.topology, self.n_nodes)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ExperimentConfig":
        positive = (
            "tone_separation", "pulse_duration", "sample_rate", "carrier_freq",
            "resync_period", "epoch_duration", "convergence_threshold",
        )
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be positive")
        for key in ("iterations", "trials", "n_nodes"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be at least 1")
        for key in ("rise_fall", "bias_range", "drift_diffusion", "jitter_std", "node_spacing"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be non-negative")
        if self.tone_separation >= self.sample_rate:
            raise ConfigError("tone_separation", "tones must lie inside the sampled band")
        if self.pulse_duration <= 2 * self.rise_fall:
            raise ConfigError("pulse_duration", "must exceed twice rise_fall")
        if self.link_profile not in LINK_PROFILES:
            raise ConfigError("link_profile", f"expected one of {sorted(LINK_PROFILES)}")
        if self.measurement not in MEASUREMENT_MODELS:
            raise ConfigError("measurement", f"expected one of {MEASUREMENT_MODELS}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError("sweep_axis", f"expected one of {SWEEP_AXES[1:]} or empty")
        if self.sweep_axis and not self.sweep_values:
            raise ConfigError("sweep_values", "a sweep axis needs at least one value")
        if self.sweep_axis == "tone_separation" and max(self.sweep_values) >= self.sample_rate:
            raise ConfigError("sweep_values", "tone separation beyond the sampled band")
        if self.link_snr_spread < 0:
            raise ConfigError("snr_spread_db", "must be non-negative")
        if self.link_delay is not None and self.link_delay < 0:
            raise ConfigError("link_delay", "must be non-negative")
        if self.lut_grid < 16:
            raise ConfigError("lut_grid", "must be at least 16")
        if self.guard_samples < 16:
            raise ConfigError("guard_samples", "must be at least 16")
        try:
            g = self.graph()
        except ValueError as exc:
            raise ConfigError("topology", str(exc)) from None
        if not g.edges:
            raise ConfigError("topology", "graph has no edges")
        # the receive guard must absorb worst-case initial misalignment
        worst = 2 * self.bias_range + self._max_delay_estimate()
        if worst * self.sample_rate > 0.9 * self.guard_samples:
            raise ConfigError(
                "bias_range", f"initial misalignment exceeds the {self.guard_samples}-sample receive guard"
            )
        return self

    def _max_delay_estimate(self) -> float:
        if self.link_delay is not None:
            return self.link_delay
        if self.link_profile == "cabled":
            return CABLE_DELAY
        return 2 * self.node_spacing * self.n_nodes / 299_792_458.0


_EDGE_RE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


def parse_topology(text: str, n: int) -> TopologyGraph:
    """Preset name or comma-separated ``i-j`` edge list."""
    text = text.strip()
    if text in PRESET_TOPOLOGIES or text in ("full", "ring"):
        return TopologyGraph.preset(text, n)
    edges = []
    for item in text.split(","):
        m = _EDGE_RE.match(item)
        if not m:
            raise ValueError(f"cannot parse edge {item.strip()!r}")
        edges.append((int(m.group(1)), int(m.group(2))))
    return TopologyGraph(n, tuple(edges))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(convert):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none", "null") else convert(text)

    return parse


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


_PARSERS = {
    int: _int,
    float: float,
    str: str.strip,
    bool: _parse_bool,
    "float | None": _optional(float),
    "int | None": _optional(_int),
    "list[float]": _float_list,
}


def _parser_for(f: dataclasses.Field):
    annotation = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", f.type)
    simple = {"int": int, "float": float, "str": str, "bool": bool}
    return _PARSERS[simple.get(annotation, annotation)]


CONFIG_KEYS = {f.name: f for f in fields(ExperimentConfig)}


def apply_overrides(cfg: ExperimentConfig, pairs: dict[str, str]) -> ExperimentConfig:
    """Return ``cfg`` with string-valued settings parsed and applied."""
    changes: dict[str, Any] = {}
    for key, raw in pairs.items():
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown configuration key")
        try:
            changes[key] = _parser_for(CONFIG_KEYS[key])(raw)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {raw!r} ({exc})") from None
    return cfg.replace(**changes)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    return apply_overrides(base or ExperimentConfig(), dict(parser["run"]))


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base)


def format_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config_text` (round-trips every key)."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, list):
            text = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
