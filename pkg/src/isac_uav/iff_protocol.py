"""IFF exchange timing for the separated and ISAC pipelines.

Closed forms live next to a small discrete-event engine that replays the
same exchange on an integer-microsecond clock.  The engine never consults
the closed forms, so the two serve as checks on each other.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path

STAGES = ("t1", "t2", "t3", "t4", "t5", "t6", "t7")
STAGE_LABELS = {
    "t1": "send sensing/ISAC signal",
    "t2": "receive echoes",
    "t3": "detect unknown node",
    "t4": "send interrogation",
    "t5": "decode interrogation",
    "t6": "receive decoded response",
    "t7": "implement IFF verdict",
}
VARIANTS = ("separated", "isac")
INTERROGATOR = "interrogator"
TRANSPONDER = "transponder"


def ms_to_us(ms: float) -> int:
    return int(round(ms * 1000.0))


@dataclass(frozen=True)
class TimingBudget:
    """Durations of the seven exchange stages, in milliseconds.

    Durations are quantised to whole microseconds, the resolution of the
    event clock.
    """

    t1: float = 0.0
    t2: float = 0.0
    t3: float = 10.0
    t4: float = 0.0
    t5: float = 10.0
    t6: float = 0.0
    t7: float = 0.0

    def __post_init__(self):
        for name in STAGES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    def to_us(self) -> dict[str, int]:
        return {name: ms_to_us(getattr(self, name)) for name in STAGES}


@dataclass(frozen=True)
class IffNode:
    node_id: str
    allegiance: str = "friend"  # friend | foe | unresponsive
    credential: str = ""
    decode_ms: float | None = None  # overrides budget t5
    reply_ms: float | None = None  # overrides budget t6

    def __post_init__(self):
        if self.allegiance not in ("friend", "foe", "unresponsive"):
            raise ValueError(f"unknown allegiance {self.allegiance!r}")

    @property
    def responds(self) -> bool:
        return self.allegiance != "unresponsive"


@dataclass(frozen=True)
class TraceEvent:
    label: str
    actor: str
    start_us: int
    end_us: int


@dataclass(frozen=True)
class ExchangeTrace:
    variant: str
    events: tuple[TraceEvent, ...]
    verdict: str  # friend | foe | no-response
    makespan_us: int
    location_payload: object = None

    @property
    def makespan(self) -> float:
        """Makespan in milliseconds."""
        return self.makespan_us / 1000.0

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["event", "actor", "start_us", "end_us"])
            for ev in self.events:
                writer.writerow([ev.label, ev.actor, ev.start_us, ev.end_us])
        return path


def _separated_us(b: TimingBudget) -> int:
    return sum(b.to_us().values())


def _isac_us(b: TimingBudget) -> int:
    t = b.to_us()
    return t["t1"] + max(t["t2"] + t["t3"], t["t5"]) + t["t6"] + t["t7"]


def separated_iff_time(b: TimingBudget) -> float:
    """Serial pipeline: every stage back to back (ms)."""
    return _separated_us(b) / 1000.0


def isac_iff_time(b: TimingBudget) -> float:
    """ISAC pipeline: echo handling overlaps transponder decoding (ms)."""
    return _isac_us(b) / 1000.0


def reduction_ratio_from_totals(separated_us: int, isac_us: int) -> float:
    if separated_us <= 0:
        raise ValueError("separated IFF time is zero; reduction ratio undefined")
    return (separated_us - isac_us) / separated_us


def time_reduction_ratio(b: TimingBudget) -> float:
    """Fraction of the serial IFF time saved by the ISAC pipeline."""
    return reduction_ratio_from_totals(_separated_us(b), _isac_us(b))


def simplified_reduction_ratio(t3: float, t5: float, t7: float) -> float:
    """Reduction ratio with all transmission stages taken as zero."""
    return time_reduction_ratio(TimingBudget(t3=t3, t5=t5, t7=t7))


def sweep_reduction(t3, t5_grid, t7_grid) -> list[tuple[float, float, float]]:
    """Rows ``(t5, t7, rho_t)`` over the grid product, sorted by ``(t7, t5)``."""
    t5_grid, t7_grid = list(t5_grid), list(t7_grid)
    if not t5_grid or not t7_grid:
        raise ValueError("sweep grids must be non-empty")
    rows = [
        (t5, t7, simplified_reduction_ratio(t3, t5, t7))
        for t7 in sorted(t7_grid)
        for t5 in sorted(t5_grid)
    ]
    return rows


def total_identification_time(b: TimingBudget, interactions: int) -> dict[str, float]:
    """Cumulative IFF time over repeated interactions, both pipelines (ms)."""
    if interactions < 1:
        raise ValueError(f"interactions must be >= 1, got {interactions}")
    return {
        "isac": interactions * _isac_us(b) / 1000.0,
        "separated": interactions * _separated_us(b) / 1000.0,
    }


# --- discrete-event engine -------------------------------------------------


@dataclass
class _Task:
    name: str
    actor: str
    duration_us: int
    deps: tuple[str, ...] = ()
    label: str | None = None
    waiting: set = field(default_factory=set)


class EventEngine:
    """Runs a dependency graph of timed tasks on an integer clock.

    A task starts when all of its dependencies have finished and its actor
    is idle.  Ties are broken by insertion order, so runs are deterministic.
    """

    def __init__(self):
        self._tasks: dict[str, _Task] = {}
        self._order: list[str] = []

    def add(self, name, actor, duration_us, deps=(), label=None):
        if name in self._tasks:
            raise ValueError(f"duplicate task {name!r}")
        if duration_us < 0:
            raise ValueError(f"negative duration for {name!r}")
        self._tasks[name] = _Task(name, actor, int(duration_us), tuple(deps), label or name)
        self._order.append(name)
        return name

    def run(self) -> list[TraceEvent]:
        for task in self._tasks.values():
            missing = [d for d in task.deps if d not in self._tasks]
            if missing:
                raise ValueError(f"task {task.name!r} depends on unknown {missing}")
            task.waiting = set(task.deps)
        dependents: dict[str, list[str]] = {n: [] for n in self._order}
        for name in self._order:
            for dep in self._tasks[name].deps:
                dependents[dep].append(name)

        rank = {name: i for i, name in enumerate(self._order)}
        ready = [name for name in self._order if not self._tasks[name].waiting]
        busy_until: dict[str, int] = {}
        finish: list[tuple[int, int, str]] = []  # (time, rank, name)
        events: list[TraceEvent] = []
        now = 0
        done = 0

        def dispatch():
            still_ready = []
            for name in sorted(ready, key=rank.__getitem__):
                task = self._tasks[name]
                if busy_until.get(task.actor, 0) > now:
                    still_ready.append(name)
                    continue
                end = now + task.duration_us
                busy_until[task.actor] = end
                events.append(TraceEvent(task.label, task.actor, now, end))
                heapq.heappush(finish, (end, rank[name], name))
            ready[:] = still_ready

        dispatch()
        while finish:
            now, _, name = heapq.heappop(finish)
            completed = [name]
            # release everything finishing at the same instant before dispatching
            while finish and finish[0][0] == now:
                completed.append(heapq.heappop(finish)[2])
            for name in completed:
                done += 1
                for child in dependents[name]:
                    waiting = self._tasks[child].waiting
                    waiting.discard(name)
                    if not waiting:
                        ready.append(child)
            dispatch()
        if done != len(self._tasks):
            raise RuntimeError("task graph has a cycle; exchange cannot complete")
        events.sort(key=lambda e: (e.start_us, e.end_us, e.actor))
        return events


def default_timeout_ms(b: TimingBudget) -> float:
    return 2.0 * (b.t5 + b.t6)


def simulate_exchange(
    variant: str,
    b: TimingBudget,
    interrogator: IffNode,
    responder: IffNode,
    timeout_ms: float | None = None,
    location_payload=None,
) -> ExchangeTrace:
    """Replay one IFF exchange on the event engine.

    ``interrogator.credential`` is the code the interrogator expects.  A
    responder that never answers is declared ``no-response`` once the
    timeout (measured from the moment the interrogation reaches it) expires.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if interrogator.node_id == responder.node_id:
        raise ValueError(f"node ids must be unique, both are {responder.node_id!r}")
    t = b.to_us()
    if responder.decode_ms is not None:
        t["t5"] = ms_to_us(responder.decode_ms)
    if responder.reply_ms is not None:
        t["t6"] = ms_to_us(responder.reply_ms)
    if timeout_ms is None:
        timeout_ms = default_timeout_ms(b)
    timeout_us = ms_to_us(timeout_ms)

    eng = EventEngine()
    eng.add("t1", INTERROGATOR, t["t1"])
    eng.add("t2", INTERROGATOR, t["t2"], deps=["t1"])
    eng.add("t3", INTERROGATOR, t["t3"], deps=["t2"])
    if variant == "separated":
        eng.add("t4", INTERROGATOR, t["t4"], deps=["t3"])
        query_arrived = "t4"
        sensing_done = "t4"
    else:
        # the interrogation rides on the ISAC emission itself
        query_arrived = "t1"
        sensing_done = "t3"

    if responder.responds:
        eng.add("t5", TRANSPONDER, t["t5"], deps=[query_arrived])
        eng.add("t6", INTERROGATOR, t["t6"], deps=[sensing_done, "t5"])
        eng.add("t7", INTERROGATOR, t["t7"], deps=["t6"])
        verdict = "friend" if responder.credential == interrogator.credential else "foe"
        payload = location_payload
    else:
        # pure waiting: occupies no actor
        eng.add("timeout", "clock", timeout_us, deps=[query_arrived], label="timeout")
        eng.add("t7", INTERROGATOR, t["t7"], deps=[sensing_done, "timeout"])
        verdict = "no-response"
        payload = None

    events = [e for e in eng.run() if e.label in STAGES]
    makespan = max(e.end_us for e in events)
    return ExchangeTrace(variant, tuple(events), verdict, makespan, payload)
