"""Modem configuration and the flat ``key = value`` config-file format."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

TAIL_BITS = 4


def alias_limit(M: int, rolloff: float) -> float:
    """Largest |offset| in rad/sample at rate M/T before the spectrum aliases."""
    return math.pi / 2 - math.pi * (1 + rolloff) / M


@dataclass(frozen=True)
class ModemConfig:
    # sampling
    M: int = 4
    I: int = 4
    rolloff: float = 0.4
    tx_span: int = 25
    mf_len: int = 97
    # burst layout, in QPSK symbols
    Lp: int = 500
    Ld: int = 10_000
    Lo: int = 12
    L_isi: int = 3
    # channel
    delta_ppm: float = 25.0
    clock_sign: int = 1
    omega3: float = 0.15 * math.pi
    theta0: float | None = None  # None: uniform per frame
    alpha: float | None = None  # fraction of T; None: uniform per frame
    N0: float = 10 ** (-0.15)
    guard_max: int = 400  # leading silence, Ts samples, drawn per frame
    # tracking loops
    rho_c: float = 0.98
    rho_t: float = 0.995
    # ML frequency search
    ml_L1: int = 100
    ml_B1: int = 800
    ml_B2: int = 200
    ml_half_width: float = 0.2
    ml_omega_s: float = 4e-5
    # detection
    search_window: int = 2048
    detect_threshold: float = 0.0
    # turbo code
    turbo_iterations: int = 8
    interleaver_seed: int = 1
    sigma2_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.M < 2:
            problems.append("M must be >= 2")
        if self.I < 1:
            problems.append("I must be >= 1")
        if (self.M * self.I) % 2:
            problems.append("M*I must be even (quadrature sampled MI/2 after in-phase)")
        if not 0 < self.rolloff <= 1:
            problems.append("rolloff must lie in (0, 1]")
        if self.tx_span < 2 or self.mf_len < 2:
            problems.append("filter spans must be >= 2 taps")
        if self.L_isi < 1:
            problems.append("L_isi must be >= 1")
        if self.Lp <= 2 * self.L_isi:
            problems.append("Lp must exceed 2*L_isi")
        if self.Ld <= TAIL_BITS:
            problems.append(f"Ld must exceed the {TAIL_BITS} tail symbols")
        if self.Lo < 0:
            problems.append("Lo must be >= 0")
        if self.clock_sign not in (-1, 1):
            problems.append("clock_sign must be +1 or -1")
        if self.delta_ppm < 0:
            problems.append("delta_ppm must be >= 0")
        if abs(self.omega3) > alias_limit(self.M, self.rolloff) + 1e-12:
            problems.append(
                f"|omega3| = {abs(self.omega3):.6g} exceeds alias limit "
                f"{alias_limit(self.M, self.rolloff):.6g}"
            )
        if self.alpha is not None and not 0 <= self.alpha < 1:
            problems.append("alpha must lie in [0, 1) (fraction of T)")
        if self.N0 < 0:
            problems.append("N0 must be >= 0")
        if self.guard_max < 0:
            problems.append("guard_max must be >= 0")
        for name in ("rho_c", "rho_t"):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (0, 1)")
        if self.ml_L1 < 2 or self.ml_L1 > self.Lp - self.L_isi + 1:
            problems.append("ml_L1 must lie in [2, Lp - L_isi + 1]")
        if self.ml_B1 < 2 or self.ml_B2 < 2 or self.ml_half_width <= 0:
            problems.append("ML grid needs B1, B2 >= 2 and half_width > 0")
        elif not math.isclose(self.ml_resolution, self.ml_omega_s, rel_tol=1e-6):
            problems.append(
                f"ml_omega_s={self.ml_omega_s} inconsistent with the two-step grid "
                f"resolution {self.ml_resolution:.6g}"
            )
        if self.search_window < 1:
            problems.append("search_window must be >= 1")
        if self.turbo_iterations < 1:
            problems.append("turbo_iterations must be >= 1")
        if self.sigma2_floor <= 0:
            problems.append("sigma2_floor must be > 0")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def MI(self) -> int:
        return self.M * self.I

    @property
    def L(self) -> int:
        return self.Lp + self.Ld + self.Lo

    @property
    def info_bits(self) -> int:
        return self.Ld - TAIL_BITS

    @property
    def epsilon(self) -> float:
        """Receive sample-period error in units of Ts (Ts' = Ts (1 + epsilon))."""
        return -self.clock_sign * 2 * self.delta_ppm * 1e-6

    @property
    def ml_step2_half_width(self) -> float:
        return 8 * (2 * self.ml_half_width / self.ml_B1)

    @property
    def ml_resolution(self) -> float:
        return 2 * self.ml_step2_half_width / self.ml_B2

    def replace(self, **changes) -> "ModemConfig":
        return dataclasses.replace(self, **changes)

    def with_ebno(self, ebno_db: float) -> "ModemConfig":
        return self.replace(N0=ebno_to_n0(ebno_db))


def ebno_to_n0(ebno_db: float, symbol_energy: float = 2.0) -> float:
    """Invert Eb/N0 = 10 log10(|S_k|^2 / (2 N0))."""
    return symbol_energy / (2 * 10 ** (ebno_db / 10))


def n0_to_ebno(N0: float, symbol_energy: float = 2.0) -> float:
    return 10 * math.log10(symbol_energy / (2 * N0))


_FIELDS = {f.name: f for f in fields(ModemConfig)}


def _coerce(name: str, raw: Any) -> Any:
    f = _FIELDS[name]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if "None" in kind and text.lower() in ("none", "random", ""):
        return None
    try:
        if kind.startswith("int"):
            return int(text)
        return _parse_float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def _parse_float(text: str) -> float:
    """Plain floats plus ``a*pi``, ``pi*a``, ``pi/a`` and ``pi`` for angles."""
    t = text.replace(" ", "").lower()
    if "pi" not in t:
        return float(t)
    if t in ("pi", "+pi", "-pi"):
        return -math.pi if t.startswith("-") else math.pi
    if t.endswith("*pi"):
        return float(t[:-3]) * math.pi
    if t.startswith("pi*"):
        return math.pi * float(t[3:])
    if t.startswith("pi/"):
        return math.pi / float(t[3:])
    raise ValueError(text)


def make_config(base: ModemConfig | None = None, **overrides) -> ModemConfig:
    base = base or ModemConfig()
    unknown = sorted(set(overrides) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return base.replace(**{k: _coerce(k, v) for k, v in overrides.items()})


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def load_config(path: str | Path, **overrides) -> ModemConfig:
    values = parse_config_text(Path(path).read_text())
    values.update(overrides)
    return make_config(**values)


def dump_config(cfg: ModemConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        lines.append(f"{name} = {'random' if value is None else value}")
    return "\n".join(lines) + "\n"


def paper_config(Lp: int = 500, **overrides: Mapping) -> ModemConfig:
    """Simulation parameters used for the published results (rho_c depends on Lp)."""
    rho_c = {250: 0.97, 500: 0.98}.get(Lp, 0.98)
    return make_config(ModemConfig(Lp=Lp, rho_c=rho_c), **overrides)
