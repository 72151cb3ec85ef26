"""Scenario files.

A scenario is plain text split into ``[section]`` blocks. Most sections hold
``key = value`` lines; ``[history]`` also accepts bare trip lines
(comma-separated segment ids) and ``file = <path>`` references resolved
relative to the scenario. ``#`` starts a comment. Example::

    [segments]
    A = 500
    B = 800

    [pollution]
    A = 9

    [history]
    A, B

    [controller]
    schedule = 0:0.9, 180:0.3

    [run]
    duration = 480
    budget_wh = 50
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .controller import CooperationGain, parse_profile
from .cyclist import AfterStopTarget, CyclistParams, SteadyTarget, calibrate, wheel_power
from .errors import DanglingSegmentError, EbikeSimError, ScenarioError
from .powertrain import DEFAULT_DEAD_ZONE_W, DEFAULT_FILTER_ALPHA, DEFAULT_WINDOW, Drivetrain
from .routes import TripHistory, make_route, parse_history

SECTIONS = (
    "segments",
    "pollution",
    "energy",
    "history",
    "cyclist",
    "drivetrain",
    "controller",
    "run",
    "calibration",
)
DEFAULT_SEGMENT = "road"

MODES = ("integral", "bifurcation")
SETPOINT_SOURCES = ("schedule", "optimizer")
FILTERS = ("none", "consensus", "tracking")
_METER_KEYS = ("filter_alpha", "window", "dead_zone")


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = "integral"
    gamma: float = 0.05
    y_max: float = 100.0
    y_init: float = 0.0
    setpoint: str = "schedule"
    filter: str = "none"
    alpha: float = 0.9
    schedule: tuple = ((0.0, 1.0),)
    m_min: float = 0.0
    profile: CooperationGain = field(default_factory=CooperationGain.default)
    bifurcation_dt: float = 0.001
    p_m_init: float = 0.1


@dataclass(frozen=True)
class MeterConfig:
    filter_alpha: float = DEFAULT_FILTER_ALPHA
    window: int = DEFAULT_WINDOW
    dead_zone: float = DEFAULT_DEAD_ZONE_W


@dataclass(frozen=True)
class Scenario:
    segments: dict  # id -> length in metres, in file order
    route: tuple
    pollution: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)  # Wh at full assistance, overrides
    history: TripHistory = field(default_factory=TripHistory)
    cyclist: CyclistParams = field(default_factory=CyclistParams)
    drivetrain: Drivetrain = field(default_factory=Drivetrain)
    meter: MeterConfig = field(default_factory=MeterConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    budget_wh: float = 500.0
    tick: float = 0.1
    duration: float = 60.0
    speed_schedule: tuple = ()  # (start_time, km/h); empty means target speed
    initial: str = "rest"
    seed: int = 0
    calibration: tuple = ()

    def __post_init__(self):
        validate(self)

    def expected_energy(self, segment: str) -> float:
        """Expected battery energy (Wh) to fully assist ``segment``."""
        if segment in self.energy:
            return self.energy[segment]
        speed = self.cyclist.target_speed
        length = self.segments[segment]
        if speed <= 0 or not math.isfinite(length):
            return math.inf
        seconds = length / (speed / 3.6)
        watts = wheel_power(self.cyclist, speed) / self.drivetrain.motor_efficiency
        return watts * seconds / 3600.0

    @property
    def n_ticks(self) -> int:
        return math.ceil(round(self.duration / self.tick, 9))


def validate(sc: Scenario):
    if not sc.tick > 0:
        raise ScenarioError("tick must be > 0")
    if not sc.duration > 0:
        raise ScenarioError("duration must be > 0")
    if sc.budget_wh < 0:
        raise ScenarioError("budget_wh must be >= 0")
    if not sc.segments:
        raise ScenarioError("scenario has no segments")
    for seg, length in sc.segments.items():
        if not length > 0:
            raise ScenarioError(f"segment {seg!r} length must be > 0")
    for label, ids in (
        ("pollution", sc.pollution),
        ("energy", sc.energy),
        ("route", sc.route),
        ("history", sorted(sc.history.segments())),
    ):
        for seg in ids:
            if seg not in sc.segments:
                raise DanglingSegmentError(f"{label} references unknown segment {seg!r}")
    if not sc.route:
        raise ScenarioError("route is empty")
    for seg, d in sc.pollution.items():
        if d < 0:
            raise ScenarioError(f"pollution for {seg!r} must be >= 0")
    for seg, e in sc.energy.items():
        if not e > 0:
            raise ScenarioError(f"expected energy for {seg!r} must be > 0")

    c = sc.controller
    if c.mode not in MODES:
        raise ScenarioError(f"controller mode must be one of {MODES}")
    if c.setpoint not in SETPOINT_SOURCES:
        raise ScenarioError(f"setpoint must be one of {SETPOINT_SOURCES}")
    if c.filter not in FILTERS:
        raise ScenarioError(f"filter must be one of {FILTERS}")
    if not 0 < c.alpha < 1:
        raise ScenarioError("alpha must be in (0, 1)")
    if not c.gamma > 0 or not c.y_max > 0 or not 0 <= c.y_init <= c.y_max:
        raise ScenarioError("need gamma > 0, y_max > 0 and 0 <= y_init <= y_max")
    if not 0 <= c.m_min <= 1:
        raise ScenarioError("m_min must be in [0, 1]")
    _check_schedule(c.schedule, "schedule", lo=0.0, hi=1.0)
    if sc.speed_schedule:
        _check_schedule(sc.speed_schedule, "speed", lo=0.0, hi=math.inf)
    if c.mode == "bifurcation":
        ratio = sc.tick / c.bifurcation_dt
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
            raise ScenarioError("tick must be an integer multiple of bifurcation_dt")
        if c.bifurcation_dt >= 2.0 / (3.0 * c.profile.f_max):
            raise ScenarioError(
                f"bifurcation_dt violates the stability bound 2/(3 f_max) = "
                f"{2.0 / (3.0 * c.profile.f_max):.6g}"
            )
    if c.setpoint == "optimizer":
        for seg in sc.segments:
            if not math.isfinite(sc.expected_energy(seg)):
                raise ScenarioError(
                    f"optimizer setpoint needs a finite expected energy for segment {seg!r}"
                )
    if sc.initial not in ("rest", "steady"):
        raise ScenarioError("initial must be 'rest' or 'steady'")


def _check_schedule(schedule, name, lo, hi):
    if not schedule:
        raise ScenarioError(f"{name} schedule is empty")
    times = [t for t, _ in schedule]
    if times[0] != 0:
        raise ScenarioError(f"{name} schedule must start at t=0")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ScenarioError(f"{name} schedule times must be strictly increasing")
    for _, v in schedule:
        if not lo <= v <= hi:
            raise ScenarioError(f"{name} schedule value {v} outside [{lo}, {hi}]")


# -- parsing -----------------------------------------------------------------


def parse_sections(lines, path=None) -> dict:
    """Split text into {section: [(key or None, value, lineno), ...]}."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if text.startswith("["):
            if not text.endswith("]"):
                raise ScenarioError(f"malformed section header {text!r}", path, lineno)
            current = text[1:-1].strip().lower()
            if current not in SECTIONS:
                raise ScenarioError(f"unknown section [{current}]", path, lineno)
            if current in sections:
                raise ScenarioError(f"duplicate section [{current}]", path, lineno)
            sections[current] = []
            continue
        if current is None:
            raise ScenarioError("content before the first [section]", path, lineno)
        key, sep, value = text.partition("=")
        if sep:
            sections[current].append((key.strip(), value.strip(), lineno))
        else:
            sections[current].append((None, text, lineno))
    return sections


def parse_schedule(text: str) -> tuple:
    """``"0:0.9, 180:0.3"`` -> ((0.0, 0.9), (180.0, 0.3))."""
    out = []
    for item in text.split(","):
        t, sep, v = item.partition(":")
        if not sep:
            raise ValueError(f"schedule entry {item.strip()!r} is not time:value")
        out.append((float(t), float(v)))
    return tuple(out)


def _number(value, path, lineno, key):
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(f"field {key!r}: expected a number, got {value!r}", path, lineno) from None


def _keyed(entries, section, path):
    out = {}
    for key, value, lineno in entries:
        if key is None:
            raise ScenarioError(f"[{section}] expects key = value lines", path, lineno)
        if key in out:
            raise ScenarioError(f"[{section}] duplicate key {key!r}", path, lineno)
        out[key] = (value, lineno)
    return out


def _apply_fields(obj, entries, section, path, converters=None):
    """Override dataclass fields of ``obj`` from key = value entries."""
    converters = converters or {}
    names = {f.name: f for f in fields(obj)}
    updates = {}
    for raw_key, (value, lineno) in _keyed(entries, section, path).items():
        key = raw_key.lower()
        if key not in names:
            raise ScenarioError(f"[{section}] unknown field {key!r}", path, lineno)
        try:
            if key in converters:
                updates[key] = converters[key](value)
            elif isinstance(getattr(obj, key), str):
                updates[key] = value.lower()
            elif isinstance(getattr(obj, key), int) and not isinstance(getattr(obj, key), bool):
                updates[key] = int(value)
            else:
                updates[key] = float(value)
        except (ValueError, EbikeSimError) as exc:
            raise ScenarioError(f"[{section}] field {key!r}: {exc}", path, lineno) from None
    try:
        return replace(obj, **updates)
    except (ValueError, EbikeSimError) as exc:
        first = min((ln for _, ln in _keyed(entries, section, path).values()), default=None)
        raise ScenarioError(f"[{section}] {exc}", path, first) from None


def _parse_calibration(entries, path):
    targets = []
    for key, value, lineno in entries:
        key = (key or "").lower()
        try:
            nums = [float(x) for x in value.split(",")]
        except ValueError:
            raise ScenarioError(f"calibration target {value!r} is not numeric", path, lineno) from None
        if key == "steady" and len(nums) == 4:
            targets.append(SteadyTarget(*nums))
        elif key == "after_stop" and len(nums) == 5:
            targets.append(AfterStopTarget(*nums))
        else:
            raise ScenarioError(
                "calibration lines are 'steady = speed, m*, low, high' or "
                "'after_stop = speed, m*, seconds, low, high'",
                path,
                lineno,
            )
    return tuple(targets)


def parse_scenario(text: str, path=None, base_dir=None) -> Scenario:
    sections = parse_sections(text.splitlines(), path)
    base_dir = Path(base_dir) if base_dir is not None else Path(".")

    segments = {}
    for key, (value, lineno) in _keyed(sections.get("segments", []), "segments", path).items():
        segments[key] = _number(value, path, lineno, key)
    if not segments:
        segments = {DEFAULT_SEGMENT: math.inf}

    def seg_map(name):
        out = {}
        entries = sections.get(name, [])
        for key, (value, lineno) in _keyed(entries, name, path).items():
            if key not in segments:
                raise DanglingSegmentError(f"[{name}] unknown segment {key!r}", path, lineno)
            out[key] = _number(value, path, lineno, key)
        return out

    pollution = seg_map("pollution")
    energy = seg_map("energy")

    trips = []
    for key, value, lineno in sections.get("history", []):
        if key is not None and key.lower() == "file":
            hist_path = base_dir / value
            try:
                with open(hist_path, encoding="utf-8") as fh:
                    trips.extend(parse_history(fh).counts.items())
            except OSError as exc:
                raise ScenarioError(f"cannot read history file: {exc}", path, lineno) from None
            except ValueError as exc:
                raise ScenarioError(f"history file {hist_path}: {exc}", path, lineno) from None
        elif key is None:
            try:
                trips.append((make_route(s.strip() for s in value.split(",")), 1))
            except ValueError as exc:
                raise ScenarioError(f"history trip: {exc}", path, lineno) from None
        else:
            raise ScenarioError(f"[history] unknown field {key!r}", path, lineno)
    counts: dict = {}
    for route, n in trips:
        counts[route] = counts.get(route, 0) + n
    history = TripHistory(counts)

    cyclist = _apply_fields(CyclistParams(), sections.get("cyclist", []), "cyclist", path)
    dt_entries = sections.get("drivetrain", [])
    is_meter = [e[0] is not None and e[0].lower() in _METER_KEYS for e in dt_entries]
    drivetrain = _apply_fields(
        Drivetrain(), [e for e, m in zip(dt_entries, is_meter) if not m], "drivetrain", path
    )
    meter = _apply_fields(
        MeterConfig(), [e for e, m in zip(dt_entries, is_meter) if m], "drivetrain", path
    )
    controller = _apply_fields(
        ControllerConfig(),
        sections.get("controller", []),
        "controller",
        path,
        converters={"schedule": parse_schedule, "profile": parse_profile},
    )

    run = _keyed(sections.get("run", []), "run", path)
    run_kwargs = {}
    route = tuple(segments)
    for raw_key, (value, lineno) in run.items():
        key = raw_key.lower()
        try:
            if key == "route":
                route = make_route(s.strip() for s in value.split(","))
                for seg in route:
                    if seg not in segments:
                        raise DanglingSegmentError(
                            f"[run] route references unknown segment {seg!r}", path, lineno
                        )
            elif key == "speed":
                run_kwargs["speed_schedule"] = parse_schedule(value)
            elif key in ("tick", "duration", "budget_wh"):
                run_kwargs[key] = float(value)
            elif key == "seed":
                run_kwargs["seed"] = int(value)
            elif key == "initial":
                run_kwargs["initial"] = value.lower()
            else:
                raise ScenarioError(f"[run] unknown field {key!r}", path, lineno)
        except ValueError as exc:
            raise ScenarioError(f"[run] field {key!r}: {exc}", path, lineno) from None

    calibration = _parse_calibration(sections.get("calibration", []), path)
    if calibration:
        try:
            cyclist = calibrate(cyclist, calibration)
        except EbikeSimError as exc:
            raise ScenarioError(f"calibration failed: {exc}", path) from None

    if "duration" not in run_kwargs:
        total = sum(segments[s] for s in route)
        speed = cyclist.target_speed / 3.6
        if not math.isfinite(total) or speed <= 0:
            raise ScenarioError("[run] duration is required when the route length is unbounded", path)
        run_kwargs["duration"] = total / speed

    try:
        return Scenario(
            segments=segments,
            route=route,
            pollution=pollution,
            energy=energy,
            history=history,
            cyclist=cyclist,
            drivetrain=drivetrain,
            meter=meter,
            controller=controller,
            calibration=calibration,
            **run_kwargs,
        )
    except ScenarioError as exc:
        if exc.path is None and path is not None:
            cls = type(exc)
            raise cls(str(exc), path) from None
        raise


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", path) from None
    return parse_scenario(text, path=path, base_dir=path.parent)
