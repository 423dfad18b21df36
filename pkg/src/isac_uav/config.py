"""Scenario configuration: defaults, INI-style parsing and writing.

The file format is a plain ``configparser`` document.  Every key is
optional; anything omitted takes its default.  Angles are written in
degrees and converted to radians on parse.  Grids accept comma lists and
inclusive integer ranges such as ``0..20``.  Maneuver schedules are comma
lists of ``start-end:turn`` entries, e.g. ``0-10:straight, 10-16:left``.

Example::

    [target]
    speed = 25
    schedule = 5-11:left

    [monte_carlo]
    trials = 200
    seed = 3
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DomainError
from .iff_protocol import STAGES, TimingBudget
from .kinematics import Maneuver, MotionProfile


@dataclass(frozen=True)
class ScenarioConfig:
    # observer (UAV A) and target motion; angles in radians
    observer_speed: float = 25.0
    observer_acceleration: float = 5.0
    observer_angular_speed: float = math.radians(150.0)
    observer_heading: float = math.radians(5.0)
    observer_initial_speed: float = 15.0
    observer_schedule: tuple[Maneuver, ...] = ()
    target_speed: float = 25.0
    target_acceleration: float = 5.0
    target_angular_speed: float = math.radians(150.0)
    target_heading: float = math.radians(5.0)
    target_initial_speed: float = 15.0
    target_schedule: tuple[Maneuver, ...] = ()
    separation: float = 500.0
    bearing: float = math.radians(30.0)

    dt: float = 0.8
    k_max: int = 30
    k_eval: int = 20
    measurement_var: tuple[float, float] = (10.0, 0.01)
    process_var: tuple[float, ...] = (10.0, 10.0, 1.0, 1.0, 0.1, 0.1)
    truth_noise: bool = True
    init: str = "measurement"  # measurement | truth
    init_velocity_var: float = 625.0
    init_acceleration_var: float = 1.0
    joseph: bool = False
    literal_observation: bool = False

    dr_com_grid: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)

    timing: TimingBudget = field(default_factory=TimingBudget)
    t5_grid: tuple[float, ...] = tuple(float(v) for v in range(21))
    t7_grid: tuple[float, ...] = (0.0, 5.0, 10.0, 20.0)
    timeout_ms: float | None = None
    interactions: int = 20
    allegiance: str = "friend"
    credential: str = "ALPHA-7"
    expected_credential: str = "ALPHA-7"

    trials: int = 500
    seed: int = 2024
    workers: int = 1

    def __post_init__(self):
        validate(self)

    @property
    def observer_profile(self) -> MotionProfile:
        return MotionProfile(
            self.observer_speed,
            self.observer_acceleration,
            self.observer_angular_speed,
            self.observer_heading,
            self.observer_schedule,
        )

    @property
    def target_profile(self) -> MotionProfile:
        return MotionProfile(
            self.target_speed,
            self.target_acceleration,
            self.target_angular_speed,
            self.target_heading,
            self.target_schedule,
        )

    @property
    def measurement_cov(self) -> np.ndarray:
        return np.diag(self.measurement_var)

    @property
    def process_cov(self) -> np.ndarray:
        return np.diag(self.process_var)

    def with_dr_com(self, dr_com: float) -> "ScenarioConfig":
        """Copy with the communication-location range variance set to ``dr_com``."""
        return replace(self, process_var=(dr_com, dr_com) + tuple(self.process_var[2:]))


def validate(cfg: ScenarioConfig) -> None:
    def require(ok, key, message):
        if not ok:
            raise ConfigError(message, field=key)

    for who in ("observer", "target"):
        try:
            getattr(cfg, f"{who}_profile")
        except DomainError as exc:
            msg = str(exc)
            key = next(
                (k for k in ("angular_speed", "acceleration", "speed", "initial_heading") if msg.startswith(k)),
                "schedule",
            )
            key = {"angular_speed": "angular_speed_deg", "initial_heading": "heading_deg"}.get(key, key)
            raise ConfigError(msg, field=f"{who}.{key}") from None
        v0 = getattr(cfg, f"{who}_initial_speed")
        require(math.isfinite(v0) and v0 >= 0, f"{who}.initial_speed", "must be >= 0")
    require(math.isfinite(cfg.separation) and cfg.separation > 0, "geometry.separation", "must be > 0")
    require(math.isfinite(cfg.bearing), "geometry.bearing_deg", "must be finite")
    require(math.isfinite(cfg.dt) and cfg.dt > 0, "filter.dt", "must be > 0")
    require(cfg.k_max >= 1, "filter.k_max", "must be >= 1")
    require(1 <= cfg.k_eval <= cfg.k_max, "filter.k_eval", "must lie in 1..k_max")
    require(len(cfg.measurement_var) == 2, "filter.measurement_var", "needs 2 entries")
    require(len(cfg.process_var) == 6, "filter.process_var", "needs 6 entries")
    for key, values in (("filter.measurement_var", cfg.measurement_var), ("filter.process_var", cfg.process_var)):
        require(all(math.isfinite(v) and v >= 0 for v in values), key, "variances must be >= 0")
    require(cfg.init in ("measurement", "truth"), "filter.init", "must be 'measurement' or 'truth'")
    require(cfg.init_velocity_var >= 0, "filter.init_velocity_var", "must be >= 0")
    require(cfg.init_acceleration_var >= 0, "filter.init_acceleration_var", "must be >= 0")
    require(len(cfg.dr_com_grid) > 0, "sweep.dr_com_grid", "must be non-empty")
    require(all(v >= 0 for v in cfg.dr_com_grid), "sweep.dr_com_grid", "variances must be >= 0")
    require(len(cfg.t5_grid) > 0, "iff.t5_grid", "must be non-empty")
    require(len(cfg.t7_grid) > 0, "iff.t7_grid", "must be non-empty")
    require(all(v >= 0 for v in cfg.t5_grid + cfg.t7_grid), "iff", "grid times must be >= 0")
    require(cfg.timeout_ms is None or cfg.timeout_ms >= 0, "iff.timeout_ms", "must be >= 0")
    require(cfg.interactions >= 1, "iff.interactions", "must be >= 1")
    require(cfg.allegiance in ("friend", "foe", "unresponsive"), "encounter.allegiance", "unknown allegiance")
    require(cfg.trials >= 1, "monte_carlo.trials", "must be >= 1")
    require(cfg.seed >= 0, "monte_carlo.seed", "must be >= 0")
    require(cfg.workers >= 1, "monte_carlo.workers", "must be >= 1")


# --- text format -----------------------------------------------------------


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_list(values) -> str:
    return ", ".join(_fmt_float(v) for v in values)


def _parse_list(text: str) -> tuple[float, ...]:
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty range {part!r}")
            out.extend(float(v) for v in range(lo_i, hi_i + 1))
        else:
            out.append(float(part))
    return tuple(out)


def _parse_schedule(text: str) -> tuple[Maneuver, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        span, _, turn = part.partition(":")
        start, _, end = span.partition("-")
        out.append(Maneuver(int(start), int(end), turn.strip() or "straight"))
    return tuple(out)


def _fmt_schedule(schedule) -> str:
    return ", ".join(f"{m.start}-{m.end}:{m.turn}" for m in schedule)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


# (section, key) -> (attribute, parse, format)
_deg = (lambda s: math.radians(float(s)), lambda v: _fmt_float(math.degrees(v)))
_float = (float, _fmt_float)
_int = (int, str)
_list = (_parse_list, _fmt_list)
_str = (str.strip, str)
_bool = (_parse_bool, lambda v: "true" if v else "false")

_SCHEMA: dict[tuple[str, str], tuple] = {}
for _who in ("observer", "target"):
    _SCHEMA.update(
        {
            (_who, "speed"): (f"{_who}_speed", *_float),
            (_who, "acceleration"): (f"{_who}_acceleration", *_float),
            (_who, "angular_speed_deg"): (f"{_who}_angular_speed", *_deg),
            (_who, "heading_deg"): (f"{_who}_heading", *_deg),
            (_who, "initial_speed"): (f"{_who}_initial_speed", *_float),
            (_who, "schedule"): (f"{_who}_schedule", _parse_schedule, _fmt_schedule),
        }
    )
_SCHEMA.update(
    {
        ("geometry", "separation"): ("separation", *_float),
        ("geometry", "bearing_deg"): ("bearing", *_deg),
        ("filter", "dt"): ("dt", *_float),
        ("filter", "k_max"): ("k_max", *_int),
        ("filter", "k_eval"): ("k_eval", *_int),
        ("filter", "measurement_var"): ("measurement_var", *_list),
        ("filter", "process_var"): ("process_var", *_list),
        ("filter", "truth_noise"): ("truth_noise", *_bool),
        ("filter", "init"): ("init", *_str),
        ("filter", "init_velocity_var"): ("init_velocity_var", *_float),
        ("filter", "init_acceleration_var"): ("init_acceleration_var", *_float),
        ("filter", "joseph"): ("joseph", *_bool),
        ("filter", "literal_observation"): ("literal_observation", *_bool),
        ("sweep", "dr_com_grid"): ("dr_com_grid", *_list),
        ("iff", "t5_grid"): ("t5_grid", *_list),
        ("iff", "t7_grid"): ("t7_grid", *_list),
        ("iff", "timeout_ms"): ("timeout_ms", _parse_optional_float, lambda v: "auto" if v is None else _fmt_float(v)),
        ("iff", "interactions"): ("interactions", *_int),
        ("encounter", "allegiance"): ("allegiance", *_str),
        ("encounter", "credential"): ("credential", *_str),
        ("encounter", "expected_credential"): ("expected_credential", *_str),
        ("monte_carlo", "trials"): ("trials", *_int),
        ("monte_carlo", "seed"): ("seed", *_int),
        ("monte_carlo", "workers"): ("workers", *_int),
    }
)
_SECTIONS = ("observer", "target", "geometry", "filter", "sweep", "iff", "encounter", "monte_carlo")


def parse_config_text(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(
        interpolation=None, default_section="__unused__", inline_comment_prefixes=(";",)
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    values: dict = {}
    timing: dict[str, float] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError("unknown section", field=section)
        for key, raw in parser.items(section):
            name = f"{section}.{key}"
            try:
                if section == "iff" and key in STAGES:
                    timing[key] = float(raw)
                    continue
                if (section, key) not in _SCHEMA:
                    raise ConfigError("unknown key", field=name)
                attr, parse, _ = _SCHEMA[(section, key)]
                values[attr] = parse(raw)
            except ConfigError:
                raise
            except (ValueError, DomainError) as exc:
                raise ConfigError(f"bad value {raw!r}: {exc}", field=name) from None

    if timing:
        try:
            values["timing"] = TimingBudget(**timing)
        except ValueError as exc:
            raise ConfigError(str(exc), field="iff") from None
    return ScenarioConfig(**values)


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file; omitted keys take defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text)


def format_config(cfg: ScenarioConfig) -> str:
    sections: dict[str, list[str]] = {s: [] for s in _SECTIONS}
    for (section, key), (attr, _, fmt) in _SCHEMA.items():
        sections[section].append(f"{key} = {fmt(getattr(cfg, attr))}")
    for stage in STAGES:
        sections["iff"].append(f"{stage} = {_fmt_float(getattr(cfg.timing, stage))}")
    blocks = [f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()]
    return "\n\n".join(blocks) + "\n"


def write_config(cfg: ScenarioConfig, path) -> Path:
    path = Path(path)
    path.write_text(format_config(cfg))
    return path


def config_fields() -> list[str]:
    return [f.name for f in fields(ScenarioConfig)]
