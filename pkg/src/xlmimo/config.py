"""System configuration and the flat key-value config file format.

File format: UTF-8, one ``key = value`` per line, ``#`` starts a comment,
lists are comma-separated. Every SystemConfig field is settable by the key
of the same name; CLI flags override file values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .model import ConfigError


MEDIAN_VR_FRACTION = 0.10


def default_vr_length_scale(mu_l: float,
                            median_fraction: float = MEDIAN_VR_FRACTION) -> float:
    """Scale turning the raw lognormal draw into a fraction of the array.

    median(lognormal) = exp(mu_l), so the scale makes the median visibility
    region cover `median_fraction` of the array. The default fraction is
    calibrated so the detector's sub-array count study behaves as expected:
    with much longer regions, large sub-arrays fire overconfident early
    cancellations and fall measurably behind mid-sized ones.
    """
    return median_fraction / math.exp(mu_l)


@dataclass(frozen=True)
class SystemConfig:
    """Immutable parameter set shared by the channel model, receivers and
    the Monte Carlo harness.

    Defaults follow the full-array reference scenario (uniform linear array,
    QPSK, 5 sub-arrays); see configs/default.cfg.
    """

    M: int = 300                      # base-station antennas
    K: int = 40                       # single-antenna users
    B: int = 5                        # sub-arrays (one LPU each)
    delta: float = math.pi / 10       # angular spread (radians)
    snr_db: tuple = (-10.0, -5.0, 0.0, 5.0)
    J: int = 2                        # inner mean-field iterations per visit
    T: int = 10                       # outer sweeps over the LPU chain
    gamma_thr: float = 1e3            # likelihood-ratio threshold for SIC
    mu_l: float = 0.7                 # lognormal parameter of the VR length
    sigma2_l: float = 0.2             # lognormal parameter of the VR length
    antenna_spacing: float = 0.5      # element spacing in wavelengths
    vr_length_scale: float = default_vr_length_scale(0.7)
    seed: int = 0
    cov_refresh: int = 50             # trials between covariance redraws
    vr_length_mode: str = "log"       # "log": (mu_l, sigma2_l) parametrize the
                                      # underlying normal; "linear": they are
                                      # mean/variance of the length itself
    schedule: str = "sequential"      # LPU update order: sequential | flooding
    lambda_init: str = "estimate"     # noise-precision start: estimate | true
    j_central: int = 0                # central VMP iterations (0 -> J*T)
    readout_lpu: int = 1              # 1-indexed LPU whose decisions are scored
    bound_noise: str = "shared"       # single-user bound noise: shared | fresh

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.B < 1:
            raise ConfigError("M, K and B must be positive")
        if self.M % self.B != 0:
            raise ConfigError(f"B={self.B} must divide M={self.M}")
        if self.J < 1 or self.T < 1:
            raise ConfigError("J and T must be at least 1")
        if not self.gamma_thr > 1:
            raise ConfigError("gamma_thr must exceed 1")
        if not 0 < self.delta <= math.pi / 2:
            raise ConfigError("delta must lie in (0, pi/2]")
        if self.cov_refresh < 1:
            raise ConfigError("cov_refresh must be at least 1")
        if self.schedule not in ("sequential", "flooding"):
            raise ConfigError(f"unknown schedule '{self.schedule}'")
        if self.lambda_init not in ("estimate", "true"):
            raise ConfigError(f"unknown lambda_init '{self.lambda_init}'")
        if self.vr_length_mode not in ("log", "linear"):
            raise ConfigError(f"unknown vr_length_mode '{self.vr_length_mode}'")
        if self.bound_noise not in ("shared", "fresh"):
            raise ConfigError(f"unknown bound_noise '{self.bound_noise}'")
        if not 1 <= self.readout_lpu <= self.B:
            raise ConfigError("readout_lpu must lie in 1..B")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))

    @property
    def block_size(self) -> int:
        return self.M // self.B

    @property
    def central_iterations(self) -> int:
        return self.j_central if self.j_central > 0 else self.J * self.T


_INT_KEYS = {"M", "K", "B", "J", "T", "seed", "cov_refresh", "j_central",
             "readout_lpu"}
_FLOAT_KEYS = {"delta", "gamma_thr", "mu_l", "sigma2_l", "antenna_spacing",
               "vr_length_scale"}
_STR_KEYS = {"schedule", "lambda_init", "vr_length_mode", "bound_noise"}
_LIST_KEYS = {"snr_db"}


def _parse_value(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)  # accepts "inf" for gamma_thr
        if key in _LIST_KEYS:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key in _STR_KEYS:
            return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for '{key}': {raw!r}") from exc
    raise ConfigError(f"line {lineno}: unknown config key '{key}'")


def parse_config_text(text: str, base: SystemConfig | None = None) -> SystemConfig:
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        overrides[key] = _parse_value(key, raw, lineno)
    cfg = base if base is not None else SystemConfig()
    try:
        return replace(cfg, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: SystemConfig | None = None) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def format_config(cfg: SystemConfig) -> str:
    """Serialize a config in the same key-value format parse accepts."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _LIST_KEYS:
            value = ",".join(repr(v) for v in value)  # repr round-trips exactly
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def write_config(cfg: SystemConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(cfg))


def config_keys() -> list:
    """All accepted config keys (also the CLI override flags)."""
    return [f.name for f in fields(SystemConfig)]
