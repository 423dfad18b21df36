"""Monte Carlo orchestration and the fig6, fig7, fig8 and encounter experiments.

Every experiment is a pure function of its :class:`ScenarioConfig`: trial
``i`` draws from ``default_rng([seed, i])`` whatever the worker count, and
aggregation happens in trial order after all workers return.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, format_config
from .exceptions import DomainError, ExperimentError, FilterDivergenceError
from .fusion import (
    TrialRecord,
    run_fusion_trial,
    sample_variance,
    scenario_truth,
    sensing_improvement_ratio,
)
from .iff_protocol import (
    IffNode,
    TimingBudget,
    reduction_ratio_from_totals,
    simulate_exchange,
    sweep_reduction,
)

log = logging.getLogger(__name__)

FIG6_COLUMNS = ("k", "dr_rad", "dr_ekf")
FIG7_COLUMNS = ("dr_com", "rho_s")
FIG8_COLUMNS = ("t5_ms", "t7_ms", "rho_t_closed", "rho_t_des")
TRACE_COLUMNS = ("event", "actor", "start_us", "end_us")
MAX_DIVERGENCE_RATE = 0.01
BOOTSTRAP_SAMPLES = 2000


@dataclass
class ExperimentReport:
    name: str
    params: dict
    csv_paths: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    duration_s: float = 0.0
    failed: bool = False


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _run_chunk(args):
    cfg, k_max, indices = args
    truth = scenario_truth(cfg, k_max)
    out = []
    for i in indices:
        try:
            out.append(run_fusion_trial(cfg, k_max, trial_rng(cfg.seed, i), truth))
        except (FilterDivergenceError, DomainError) as exc:
            log.warning("trial %d diverged: %s", i, exc)
            out.append(None)
    return out


def run_trials(cfg: ScenarioConfig, k_max: int | None = None, workers: int | None = None):
    """All Monte Carlo trials of ``cfg`` in index order.

    Diverged trials come back as ``None``.
    """
    k_max = cfg.k_max if k_max is None else k_max
    workers = cfg.workers if workers is None else workers
    indices = list(range(cfg.trials))
    if workers <= 1 or cfg.trials < 2:
        return _run_chunk((cfg, k_max, indices))
    chunks = [indices[w::workers] for w in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, k_max, c) for c in chunks]))
    results: list[TrialRecord | None] = [None] * cfg.trials
    for chunk, part in zip(chunks, parts):
        for i, rec in zip(chunk, part):
            results[i] = rec
    return results


@dataclass(frozen=True, eq=False)
class ErrorCurves:
    """Across-trial range-error variances per step, from the surviving trials."""

    radar: np.ndarray  # (n_trials, k_max) range errors
    fused: np.ndarray
    diverged: int

    @classmethod
    def from_records(cls, records) -> "ErrorCurves":
        ok = [r for r in records if r is not None]
        if len(ok) < 2:
            raise ExperimentError("fewer than two trials survived")
        return cls(
            np.array([r.radar_range_error for r in ok]),
            np.array([r.fused_range_error for r in ok]),
            len(records) - len(ok),
        )

    @property
    def divergence_rate(self) -> float:
        return self.diverged / (self.diverged + len(self.radar))

    def dr_rad(self, k: int) -> float:
        return sample_variance(self.radar[:, k - 1])

    def dr_ekf(self, k: int) -> float:
        return sample_variance(self.fused[:, k - 1])

    def rho_s(self, k: int) -> float:
        """NaN when the radar error has no spread (noise-free runs)."""
        dr_rad = self.dr_rad(k)
        if dr_rad == 0.0:
            return math.nan
        return sensing_improvement_ratio(dr_rad, self.dr_ekf(k))

    def rho_s_interval(self, k: int, seed: int, level: float = 0.95) -> tuple[float, float]:
        """Percentile bootstrap interval over trials for the improvement ratio."""
        if self.dr_rad(k) == 0.0:
            return math.nan, math.nan
        rng = np.random.default_rng([seed, 0xB007])
        rad, fused = self.radar[:, k - 1], self.fused[:, k - 1]
        n = len(rad)
        idx = rng.integers(0, n, size=(BOOTSTRAP_SAMPLES, n))
        v_rad = np.var(rad[idx], axis=1, ddof=1)
        v_ekf = np.var(fused[idx], axis=1, ddof=1)
        ratios = 1.0 - v_ekf / v_rad
        alpha = (1.0 - level) / 2.0
        lo, hi = np.quantile(ratios, [alpha, 1.0 - alpha])
        return float(lo), float(hi)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def write_csv(path: Path, columns, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _params(cfg: ScenarioConfig) -> dict:
    return {k: v for k, v in asdict(cfg).items() if not isinstance(v, (dict, list))}


def convergence_step(curve) -> int:
    """First step whose value is within 5% of the final one."""
    final = curve[-1]
    for k, value in enumerate(curve, start=1):
        if abs(value - final) <= 0.05 * abs(final):
            return k
    return len(curve)


def run_fig6(cfg: ScenarioConfig, out_dir) -> ExperimentReport:
    """Range-error variance of raw radar and of the fused track against step k."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = ErrorCurves.from_records(run_trials(cfg))
    ks = range(1, cfg.k_max + 1)
    rows = [(k, curves.dr_rad(k), curves.dr_ekf(k)) for k in ks]
    path = write_csv(out_dir / "fig6.csv", FIG6_COLUMNS, rows)
    k = cfg.k_eval
    lo, hi = curves.rho_s_interval(k, cfg.seed)
    summary = {
        "k_eval": k,
        "dr_rad_at_k_eval": curves.dr_rad(k),
        "dr_ekf_at_k_eval": curves.dr_ekf(k),
        "rho_s_at_k_eval": curves.rho_s(k),
        "rho_s_ci95_low": lo,
        "rho_s_ci95_high": hi,
        "convergence_step": convergence_step([r[2] for r in rows]),
        "divergence_rate": curves.divergence_rate,
    }
    return ExperimentReport(
        "fig6",
        _params(cfg),
        [path],
        summary,
        time.perf_counter() - t0,
        failed=curves.divergence_rate > MAX_DIVERGENCE_RATE,
    )


def run_fig7(cfg: ScenarioConfig, out_dir) -> ExperimentReport:
    """Improvement ratio at step ``k_eval`` across the communication-variance grid."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = cfg.k_eval
    dr_rad_nominal = cfg.measurement_var[0]
    grid = sorted(set(cfg.dr_com_grid))
    by_com: dict[float, ErrorCurves] = {}
    for dr_com in sorted(set(grid) | {dr_rad_nominal}):
        by_com[dr_com] = ErrorCurves.from_records(run_trials(cfg.with_dr_com(dr_com), k_max=k))
    rows = [(dr_com, by_com[dr_com].rho_s(k)) for dr_com in grid]
    path = write_csv(out_dir / "fig7.csv", FIG7_COLUMNS, rows)
    at_equal = by_com[dr_rad_nominal]
    lo, hi = at_equal.rho_s_interval(k, cfg.seed)
    worst = max(c.divergence_rate for c in by_com.values())
    summary = {
        "k_eval": k,
        "dr_com_equal_dr_rad": dr_rad_nominal,
        "rho_s_at_equal": at_equal.rho_s(k),
        "rho_s_ci95_low": lo,
        "rho_s_ci95_high": hi,
        "max_monotonicity_violation": max_rise([r[1] for r in rows]),
        "divergence_rate": worst,
    }
    return ExperimentReport(
        "fig7", _params(cfg), [path], summary, time.perf_counter() - t0,
        failed=worst > MAX_DIVERGENCE_RATE,
    )


def max_rise(values) -> float:
    """Largest increase between a value and any later one (0 if non-increasing)."""
    worst, running_min = 0.0, math.inf
    for v in values:
        worst = max(worst, v - running_min)
        running_min = min(running_min, v)
    return worst


def _des_ratio(budget: TimingBudget) -> float:
    node = IffNode("A", credential="probe")
    peer = IffNode("B", credential="probe")
    sep = simulate_exchange("separated", budget, node, peer)
    isac = simulate_exchange("isac", budget, node, peer)
    return reduction_ratio_from_totals(sep.makespan_us, isac.makespan_us)


def run_fig8(cfg: ScenarioConfig, out_dir) -> ExperimentReport:
    """Reduction-ratio surface over (t5, t7), closed form next to the event engine."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t3 = cfg.timing.t3
    rows = []
    for t5, t7, closed in sweep_reduction(t3, cfg.t5_grid, cfg.t7_grid):
        des = _des_ratio(TimingBudget(t1=0, t2=0, t3=t3, t4=0, t5=t5, t6=0, t7=t7))
        if des != closed:
            raise ExperimentError(f"closed form {closed!r} != event engine {des!r} at t5={t5}, t7={t7}")
        rows.append((t5, t7, closed, des))
    path = write_csv(out_dir / "fig8.csv", FIG8_COLUMNS, rows)
    argmax = {}
    for t7 in sorted(set(cfg.t7_grid)):
        sub = [r for r in rows if r[1] == t7]
        argmax[t7] = max(sub, key=lambda r: r[2])[0]
    summary = {
        "t3_ms": t3,
        "peak_rho_t": max(r[2] for r in rows),
        "argmax_t5_by_t7": ";".join(f"{_fmt(t7)}:{_fmt(t5)}" for t7, t5 in argmax.items()),
        "rows": len(rows),
    }
    return ExperimentReport("fig8", _params(cfg), [path], summary, time.perf_counter() - t0)


def run_full_encounter(cfg: ScenarioConfig, out_dir) -> ExperimentReport:
    """Detection, IFF exchange under both pipelines, then repeated-interaction tracking."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    interrogator = IffNode("uav-A", "friend", cfg.expected_credential)
    responder = IffNode("node-B", cfg.allegiance, cfg.credential)

    # sensing does not depend on allegiance
    rng = trial_rng(cfg.seed, 0)
    poses, nominal = scenario_truth(cfg, cfg.interactions)
    record = run_fusion_trial(cfg, cfg.interactions, rng, (poses, nominal))
    payload = tuple(float(v) for v in nominal[0].to_array()[:2])

    traces = {}
    paths = []
    for variant in ("separated", "isac"):
        trace = simulate_exchange(variant, cfg.timing, interrogator, responder, cfg.timeout_ms, payload)
        traces[variant] = trace
        paths.append(trace.to_csv(out_dir / f"encounter_{variant}.csv"))
    sep, isac = traces["separated"], traces["isac"]
    if sep.verdict != isac.verdict:
        raise ExperimentError("pipelines disagree on the verdict")
    rho_t = reduction_ratio_from_totals(sep.makespan_us, isac.makespan_us)
    summary = {
        "verdict": isac.verdict,
        "iff_time_separated_ms": sep.makespan,
        "iff_time_isac_ms": isac.makespan,
        "interactions": cfg.interactions,
        "total_time_separated_ms": cfg.interactions * sep.makespan_us / 1000.0,
        "total_time_isac_ms": cfg.interactions * isac.makespan_us / 1000.0,
        "rho_t": rho_t,
        "final_fused_position_error_m": float(record.fused_position_error[-1]),
        "final_radar_position_error_m": float(record.radar_position_error[-1]),
    }
    return ExperimentReport("encounter", _params(cfg), paths, summary, time.perf_counter() - t0)


EXPERIMENTS = {
    "fig6": run_fig6,
    "fig7": run_fig7,
    "fig8": run_fig8,
    "encounter": run_full_encounter,
}


def write_summary(reports, out_dir, cfg: ScenarioConfig | None = None) -> Path:
    """Key/value summary of one or more reports."""
    out_dir = Path(out_dir)
    lines = []
    for rep in reports:
        lines.append(f"{rep.name}.status = {'failed' if rep.failed else 'ok'}")
        for key, value in rep.summary.items():
            lines.append(f"{rep.name}.{key} = {_fmt(value)}")
        lines.append(f"{rep.name}.csv = {','.join(p.name for p in rep.csv_paths)}")
        lines.append(f"{rep.name}.duration_s = {rep.duration_s:.3f}")
    path = out_dir / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    if cfg is not None:
        (out_dir / "config_used.ini").write_text(format_config(cfg))
    return path


def run_experiments(names, cfg: ScenarioConfig, out_dir) -> list[ExperimentReport]:
    reports = []
    for name in names:
        log.info("running %s", name)
        reports.append(EXPERIMENTS[name](cfg, out_dir))
    write_summary(reports, out_dir, cfg)
    return reports
