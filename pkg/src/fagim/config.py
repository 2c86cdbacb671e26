"""Simulation configuration: a flat YAML mapping with CLI-style overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import yaml

from .channel import CorrelationMatrix, build_correlation_matrix
from .detectors import DEFAULT_DAMPING, DEFAULT_INIT, DEFAULT_MAX_ITER, DEFAULT_ML_CAP, DEFAULT_TOL, SAMP_INITS
from .errors import ConfigError
from .geometry import FluidAntennaGeometry, GroupingPlan
from .modem import Constellation, FagimScheme, FaimScheme

MODES = ("fagim", "faim")
DETECTORS = ("ml", "mmse", "samp")
DECISIONS = ("marginal", "linear")
# total transmit energy per channel use is G; per_symbol fixes Es/N0 per active port
SNR_CONVENTIONS = ("total_tx_energy", "per_symbol")


@dataclass(frozen=True)
class SimulationConfig:
    wavelength: float = 1.0
    W1: float = 2.0
    W2: float = 4.0
    N1: int = 2
    N2: int = 4
    G1: int = 1
    G2: int = 2
    mode: str = "fagim"
    constellation: str = "bpsk"
    N_r: int = 8
    detectors: tuple[str, ...] = ("ml",)
    damping: float = DEFAULT_DAMPING
    T_max: int = DEFAULT_MAX_ITER
    eps_th: float = DEFAULT_TOL
    decision: str = "marginal"
    init: str = DEFAULT_INIT
    ml_max_candidates: int = DEFAULT_ML_CAP
    snr_db: tuple[float, ...] = ()
    snr_convention: str = "total_tx_energy"
    min_bit_errors: int = 200
    max_frames: int = 10_000_000
    block_size: int = 4096
    seed: int = 0

    def __post_init__(self):
        _coerce(self)
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        unknown = [d for d in self.detectors if d not in DETECTORS]
        if unknown:
            raise ConfigError(f"unknown detectors {unknown}; choose from {DETECTORS}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("detectors must not repeat")
        if "samp" in self.detectors and self.mode != "fagim":
            raise ConfigError("S-AMP needs the one-port-per-group structure of fagim mode")
        if self.N_r < 1:
            raise ConfigError("N_r must be >= 1")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if self.T_max < 1:
            raise ConfigError("T_max must be >= 1")
        if self.eps_th < 0:
            raise ConfigError("eps_th must be >= 0")
        if self.decision not in DECISIONS:
            raise ConfigError(f"decision must be one of {DECISIONS}")
        if self.init not in SAMP_INITS:
            raise ConfigError(f"init must be one of {SAMP_INITS}")
        if self.snr_convention not in SNR_CONVENTIONS:
            raise ConfigError(f"snr_convention must be one of {SNR_CONVENTIONS}")
        if any(math.isnan(s) or s == -math.inf for s in self.snr_db):
            raise ConfigError("snr_db values must be numbers (+inf is allowed as a noiseless sentinel)")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("snr_db must be strictly increasing")
        if self.min_bit_errors < 1 or self.max_frames < 1 or self.block_size < 1:
            raise ConfigError("min_bit_errors, max_frames and block_size must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        # build the scheme eagerly so geometry/grouping errors surface here
        _ = self.scheme

    @cached_property
    def geometry(self) -> FluidAntennaGeometry:
        return FluidAntennaGeometry(self.N1, self.N2, self.W1, self.W2, self.wavelength)

    @cached_property
    def plan(self) -> GroupingPlan:
        return GroupingPlan(self.geometry, self.G1, self.G2)

    @cached_property
    def scheme(self) -> FagimScheme | FaimScheme:
        try:
            constellation = Constellation.from_name(self.constellation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.mode == "fagim":
            return FagimScheme(self.plan, constellation)
        return FaimScheme(self.geometry, self.plan.G, constellation)

    @cached_property
    def correlation(self) -> CorrelationMatrix:
        return build_correlation_matrix(self.scheme.positions, self.wavelength)

    def detector_options(self, name: str) -> dict:
        if name == "samp":
            return dict(damping=self.damping, max_iter=self.T_max, tol=self.eps_th,
                        decision=self.decision, init=self.init)
        if name == "ml":
            return dict(max_candidates=self.ml_max_candidates)
        return {}

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @property
    def digest(self) -> str:
        return config_digest(self)

    def replace(self, **changes) -> "SimulationConfig":
        return SimulationConfig(**{**self.to_dict(), **changes})


_FIELDS = {f.name: f for f in dataclasses.fields(SimulationConfig)}


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


def _coerce(cfg: SimulationConfig) -> None:
    """Normalize field types in place (frozen dataclass, so via object.__setattr__)."""
    for name, f in _FIELDS.items():
        value = getattr(cfg, name)
        try:
            if name == "detectors":
                value = (value,) if isinstance(value, str) else tuple(str(v).lower() for v in value)
            elif name == "snr_db":
                if isinstance(value, (int, float, str)):
                    value = [value]
                value = tuple(float(v) for v in value)
            elif f.type == "int":
                if isinstance(value, bool) or float(value) != int(float(value)):
                    raise ValueError
                value = int(float(value))
            elif f.type == "float":
                value = float(value)
            elif f.type == "str":
                value = str(value).lower() if name in ("mode", "constellation", "decision", "init") else str(value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for {name}: {getattr(cfg, name)!r}") from None
        object.__setattr__(cfg, name, value)


def config_digest(cfg: SimulationConfig) -> str:
    """Short sha256 of the canonical JSON form of the configuration."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as YAML (``snr_db=[0, 2, 4]``)."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        return key, yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override {text!r}: {exc}") from exc


def config_from_mapping(data: dict, overrides: dict | None = None) -> SimulationConfig:
    merged = {**(data or {}), **(overrides or {})}
    unknown = sorted(set(merged) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return SimulationConfig(**merged)


def load_config(path: str | Path, overrides: dict | None = None) -> SimulationConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a flat key: value mapping")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; nested keys: {nested}")
    return config_from_mapping(data, overrides)
