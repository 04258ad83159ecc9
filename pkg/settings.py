"""
Flat `key = value` configuration files, validated with pydantic.

`#` starts a comment and blank lines are skipped. Unknown keys are rejected.
The QDS_CONFIG environment variable names the default file.
"""
import logging
import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from channel_model import ChannelParams, PulseConfig
from errors import ConfigError
from security import SecurityParams

logger = logging.getLogger(__name__)

CONFIG_ENV = "QDS_CONFIG"
INTEGER_KEYS = {"n_pulses", "k_test", "seed"}


class QDSConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # source (illustrative; the optimizer searches these)
    mu: float = Field(0.45, gt=0, le=1)
    nu: float = Field(0.1, gt=0, le=1)
    p_mu: float = Field(0.6, gt=0, lt=1)
    p_z_tx: float = Field(0.85, gt=0, lt=1)
    p_z_rx: float = Field(0.85, gt=0, lt=1)
    n_pulses: int = Field(2 * 10**12, ge=1)

    # device and link
    distance_km: float = Field(0.0, ge=0)
    clock_hz: float = Field(50e6, gt=0)
    fiber_loss_db_per_km: float = Field(0.175, ge=0)
    rx_loss_db: float = Field(1.53, ge=0)
    det_efficiency: float = Field(0.65, ge=0, le=1)
    dark_count_rate_hz: float = Field(20.0, ge=0)
    gate_window_s: float = Field(2e-9, ge=0)
    misalignment: float = Field(0.003, ge=0, le=1)
    duty_cycle: float = Field(0.86, gt=0, le=1)

    # security
    eps_pe: float = Field(1e-5, gt=0, le=1)
    alpha: float = Field(1e-5, gt=0, le=1)
    eps: float = Field(1e-10, gt=0, le=1)
    target_psec: float = Field(2e-4, gt=0)
    k_test: Optional[int] = Field(None, ge=1)
    k_fraction: float = Field(0.05, gt=0, lt=1)
    seed: int = 0

    @model_validator(mode="after")
    def _decoy_below_signal(self):
        if not self.nu < self.mu:
            raise ValueError(f"nu={self.nu} must be below mu={self.mu}")
        return self

    def pulse_config(self, **update):
        values = {name: getattr(self, name) for name in ("mu", "nu", "p_mu", "p_z_tx", "p_z_rx", "n_pulses")}
        return PulseConfig(**{**values, **update})

    def channel(self, distance_km=None):
        values = {name: getattr(self, name) for name in ChannelParams.model_fields}
        if distance_km is not None:
            values["distance_km"] = float(distance_km)
        return ChannelParams(**values)

    def security(self):
        return SecurityParams(**{name: getattr(self, name) for name in SecurityParams.model_fields})


def _convert(key, raw, source):
    try:
        return int(float(raw)) if key in INTEGER_KEYS else float(raw)
    except ValueError:
        raise ConfigError(f"{source}: {key} = {raw!r} is not a number") from None


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
        if key not in QDSConfig.model_fields:
            raise ConfigError(f"{source}:{lineno}: unknown key {key}")
        values[key] = _convert(key, raw, source)
    try:
        return QDSConfig(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(f"{source}: {key}: {first['msg']}") from None


def load_config(path=None):
    """Read a config file; falls back to $QDS_CONFIG, then to the built-in defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        logger.info("no config file given; using built-in defaults")
        return QDSConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    logger.debug("loading config from %s", path)
    return parse_config_text(path.read_text(), source=str(path))
