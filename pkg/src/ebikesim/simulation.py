"""Discrete-time closed loop: rider, powertrain, controller and optimizer.

Each tick:

1. the motor applies the command left by the previous tick, capped by the
   remaining battery budget;
2. the rider supplies the rest of the wheel power (behaviour-dependent);
3. the power meter filters, averages and computes the human share ``m``;
4. the setpoint generator and the motor controller update;
5. the rider's physiology advances;
6. the budget is debited by P_M_in * tick;
7. crossing the end of a segment triggers a replan for the new segment.

``budget_wh`` in a record is the energy left at the *start* of that tick, so
a record whose budget is 0 always has Y = 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import controller as ctl
from .cyclist import CyclistState, pedal_effort, physiology_step, wheel_power
from .energy import AssistPlan, SegmentEstimate, solve_assist_plan
from .errors import NoHistoryError
from .powertrain import PowerMeter, motor_input_power, output_powers
from .routes import segment_probabilities
from .scenario import Scenario

TELEMETRY_COLUMNS = (
    "t",
    "segment",
    "speed_kmh",
    "Y",
    "m",
    "m_star",
    "p_h_out_w",
    "p_m_out_w",
    "ventilation_lpm",
    "heart_rate_bpm",
    "budget_wh",
    "x_s",
)


@dataclass(frozen=True)
class TelemetryRecord:
    t: float
    segment: str
    speed_kmh: float
    Y: float
    m: float
    m_star: float
    p_h_out_w: float
    p_m_out_w: float
    ventilation_lpm: float
    heart_rate_bpm: float
    budget_wh: float
    x_s: float | None


@dataclass(frozen=True)
class Replan:
    tick: int
    segment: str
    plan: AssistPlan
    fallback: bool = False


@dataclass
class SimulationResult:
    records: list
    replans: list = field(default_factory=list)
    energy_used_wh: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def plan_for_segment(scenario: Scenario, current: str, traversed: set, budget: float) -> Replan:
    """Assistance plan computed on entering ``current``.

    Candidates are segments on recorded routes through ``current`` that have
    not been ridden in this trip. Without history for ``current`` every
    untraversed segment of the graph gets the same fraction.
    """
    try:
        probs = segment_probabilities(scenario.history, current)
    except NoHistoryError:
        candidates = [s for s in scenario.segments if s not in traversed]
        total = sum(scenario.expected_energy(s) for s in candidates)
        x = 1.0 if total <= budget else budget / total
        fractions = {s: x for s in candidates}
        spent = x * total
        objective = sum(
            x * scenario.expected_energy(s) * scenario.pollution.get(s, 0.0) for s in candidates
        )
        return Replan(-1, current, AssistPlan(fractions, objective, spent), fallback=True)
    estimates = [
        SegmentEstimate(s, min(1.0, p), scenario.expected_energy(s), scenario.pollution.get(s, 0.0))
        for s, p in sorted(probs.items())
        if s not in traversed
    ]
    return Replan(-1, current, solve_assist_plan(estimates, budget))


def run_simulation(scenario: Scenario, seed: int | None = None) -> SimulationResult:
    sc = scenario
    cfg = sc.controller
    dtn = sc.drivetrain
    seed = sc.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    tick = sc.tick

    meter = PowerMeter(sc.meter.filter_alpha, sc.meter.window, sc.meter.dead_zone)
    y_init = cfg.y_init
    speed_schedule = sc.speed_schedule or ((0.0, sc.cyclist.target_speed),)
    if sc.initial == "steady":
        # whole loop at equilibrium for the first setpoint
        m0 = max(cfg.m_min, cfg.schedule[0][1])
        p_w = wheel_power(sc.cyclist, speed_schedule[0][1])
        p_h0 = m0 * p_w
        rider = CyclistState.steady(sc.cyclist, p_h0)
        if cfg.mode == "integral":
            y_init = min(cfg.y_max, dtn.y_for_output(p_w - p_h0))
            meter.prime(p_w - p_h0, p_h0)
    else:
        rider = CyclistState.at_rest(sc.cyclist)

    tracking = ctl.TrackingState(y_init, cfg.gamma, cfg.y_max)
    if cfg.mode == "bifurcation":
        bif = ctl.BifurcationState(cfg.p_m_init, cfg.bifurcation_dt, cfg.profile)
        substeps = int(round(tick / cfg.bifurcation_dt))
    consensus = ctl.ConsensusState(cfg.schedule[0][1], cfg.alpha)

    budget = float(sc.budget_wh)
    used_wh = 0.0
    energy_per_y = dtn.voltage * dtn.current_gain * tick / 3600.0  # Wh per unit Y per tick

    route = sc.route
    seg_idx = 0
    dist_in_seg = 0.0
    traversed: set = set()
    replans = []
    plan = None
    if cfg.setpoint == "optimizer":
        rp = plan_for_segment(sc, route[0], traversed, budget)
        replans.append(_at_tick(rp, 0))
        plan = rp.plan

    y_cmd = tracking.y
    records = []
    for k in range(sc.n_ticks):
        t = k * tick
        segment = route[seg_idx]
        speed_kmh = ctl.schedule_value(speed_schedule, t)
        speed_mps = speed_kmh / 3.6
        budget_start = budget

        # 1. motor command, capped so this tick never overdraws the battery
        if budget <= 0.0:
            y = 0.0
        else:
            y = min(y_cmd, budget / energy_per_y)
        motor = dtn.motor_sample(y)
        p_m_in = motor_input_power(motor)
        p_m_out_cmd = motor.efficiency * p_m_in

        # 2. rider
        p_req = wheel_power(sc.cyclist, speed_kmh)
        p_h_target = pedal_effort(sc.cyclist, rider, p_req, p_m_out_cmd, rng)
        crank = dtn.crank_sample(p_h_target, speed_mps)
        if crank.speed > 0:
            p_m_out, p_h_out = output_powers(motor, crank)
        else:
            p_m_out, p_h_out = p_m_out_cmd, 0.0

        # 3. power shares
        shares = meter.update(p_m_out, p_h_out)

        # 4. setpoint, then motor controller
        x_active = None
        if cfg.setpoint == "optimizer":
            x_active = plan.fractions.get(segment, 0.0)
            reference = 1.0 - x_active
        else:
            reference = ctl.schedule_value(cfg.schedule, t)
        if cfg.filter == "consensus":
            consensus = ctl.consensus_step(consensus)
            m_star = consensus.m_star
        elif cfg.filter == "tracking":
            consensus = ctl.consensus_tracking_step(consensus, reference)
            m_star = consensus.m_star
        else:
            m_star = reference
        m_star = min(1.0, max(cfg.m_min, m_star))

        if cfg.mode == "integral":
            tracking = ctl.tracking_step(tracking, shares.m, m_star)
            y_cmd = tracking.y
        else:
            bif = ctl.bifurcation_advance(bif, shares.p_h_filtered, substeps)
            y_cmd = min(cfg.y_max, dtn.y_for_output(bif.p_m_out))

        # 5. physiology
        rider = physiology_step(sc.cyclist, rider, p_h_out, tick)

        # 6. energy ledger
        if y > 0.0:
            draw = p_m_in * tick / 3600.0
            if y == budget / energy_per_y or draw >= budget:
                draw = budget
            budget -= draw
            used_wh += draw

        records.append(
            TelemetryRecord(
                t=t,
                segment=segment,
                speed_kmh=speed_kmh,
                Y=y,
                m=shares.m,
                m_star=m_star,
                p_h_out_w=p_h_out,
                p_m_out_w=p_m_out,
                ventilation_lpm=rider.ventilation,
                heart_rate_bpm=rider.heart_rate,
                budget_wh=budget_start,
                x_s=x_active,
            )
        )

        # 7. segment boundaries
        dist_in_seg += speed_mps * tick
        # tolerance so a boundary hit exactly in real arithmetic is not missed by rounding
        while seg_idx < len(route) - 1 and dist_in_seg >= sc.segments[route[seg_idx]] - 1e-9:
            dist_in_seg -= sc.segments[route[seg_idx]]
            traversed.add(route[seg_idx])
            seg_idx += 1
            if cfg.setpoint == "optimizer":
                rp = plan_for_segment(sc, route[seg_idx], traversed, budget)
                replans.append(_at_tick(rp, k + 1))
                plan = rp.plan

    return SimulationResult(records, replans, used_wh)


def _at_tick(rp: Replan, k: int) -> Replan:
    return Replan(k, rp.segment, rp.plan, rp.fallback)


# -- telemetry files -----------------------------------------------------------


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def telemetry_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TELEMETRY_COLUMNS)
    for r in records:
        writer.writerow([_cell(getattr(r, c)) for c in TELEMETRY_COLUMNS])
    return buf.getvalue()


def telemetry_json(records) -> str:
    return json.dumps([asdict(r) for r in records], separators=(",", ":")) + "\n"


def write_telemetry(records, path, fmt: str = "csv") -> Path:
    path = Path(path)
    text = telemetry_csv(records) if fmt == "csv" else telemetry_json(records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_telemetry(path) -> list:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return [TelemetryRecord(**row) for row in json.loads(text)]
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TELEMETRY_COLUMNS:
        raise ValueError(f"{path}: telemetry header does not match {','.join(TELEMETRY_COLUMNS)}")
    out = []
    for row in reader:
        kwargs = {}
        for f in fields(TelemetryRecord):
            v = row[f.name]
            if f.name == "segment":
                kwargs[f.name] = v
            elif f.name == "x_s":
                kwargs[f.name] = float(v) if v != "" else None
            else:
                kwargs[f.name] = float(v)
        out.append(TelemetryRecord(**kwargs))
    return out


# -- summaries -----------------------------------------------------------------


def summarize(records) -> dict:
    """Headline numbers for a run.

    ``energy_used_wh`` is read off the budget column (first minus last row),
    so it excludes the draw of the final tick.
    """
    if not records:
        raise ValueError("no telemetry records")
    by_level: dict = {}
    for r in records:
        by_level.setdefault(round(r.m_star, 6), []).append(r.ventilation_lpm)
    means = {level: math.fsum(v) / len(v) for level, v in sorted(by_level.items())}
    if len(means) >= 2:
        hi = means[max(means)]
        lo = means[min(means)]
        reduction = 100.0 * (hi - lo) / hi
    else:
        reduction = 0.0
    rmse = math.sqrt(math.fsum((r.m - r.m_star) ** 2 for r in records) / len(records))
    first, last = records[0].budget_wh, records[-1].budget_wh
    energy = first - last if math.isfinite(first) else 0.0
    return {
        "mean_ventilation_by_setpoint": {f"{k:g}": v for k, v in means.items()},
        "ventilation_reduction_pct": reduction,
        "tracking_rmse": rmse,
        "energy_used_wh": energy,
    }
