import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from isac_uav import cli
from isac_uav.config import ScenarioConfig, write_config
from isac_uav.exceptions import ExperimentError
from isac_uav.harness import (
    FIG6_COLUMNS,
    FIG7_COLUMNS,
    FIG8_COLUMNS,
    TRACE_COLUMNS,
    ErrorCurves,
    convergence_step,
    max_rise,
    run_experiments,
    run_fig6,
    run_fig7,
    run_fig8,
    run_full_encounter,
    run_trials,
)

SMALL = ScenarioConfig(trials=20, k_max=12, k_eval=10, dr_com_grid=(1.0, 10.0, 100.0), t5_grid=(0, 5, 10, 15), t7_grid=(0, 10))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_golden_headers(tmp_path):
    reports = run_experiments(["fig6", "fig7", "fig8", "encounter"], SMALL, tmp_path)
    assert read_csv(tmp_path / "fig6.csv")[0] == list(FIG6_COLUMNS) == ["k", "dr_rad", "dr_ekf"]
    assert read_csv(tmp_path / "fig7.csv")[0] == list(FIG7_COLUMNS) == ["dr_com", "rho_s"]
    assert read_csv(tmp_path / "fig8.csv")[0] == list(FIG8_COLUMNS) == ["t5_ms", "t7_ms", "rho_t_closed", "rho_t_des"]
    for variant in ("separated", "isac"):
        assert read_csv(tmp_path / f"encounter_{variant}.csv")[0] == list(TRACE_COLUMNS)
    for rep in reports:
        for p in rep.csv_paths:
            assert p.exists() and p.stat().st_size > 0
    summary = (tmp_path / "summary.txt").read_text()
    assert "fig7.rho_s_ci95_low" in summary and "fig6.status = ok" in summary
    assert (tmp_path / "config_used.ini").exists()


def test_fig6_rows_and_summary(tmp_path):
    rep = run_fig6(SMALL, tmp_path)
    rows = read_csv(rep.csv_paths[0])[1:]
    assert [int(r[0]) for r in rows] == list(range(1, 13))
    s = rep.summary
    assert s["rho_s_ci95_low"] <= s["rho_s_at_k_eval"] <= s["rho_s_ci95_high"]
    assert 1 <= s["convergence_step"] <= 12
    assert not rep.failed


def test_same_seed_same_bytes(tmp_path):
    for name in ("a", "b"):
        run_experiments(["fig6", "fig7", "fig8", "encounter"], SMALL, tmp_path / name)
    for f in ("fig6.csv", "fig7.csv", "fig8.csv", "encounter_isac.csv", "encounter_separated.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_other_seed_differs(tmp_path):
    run_fig6(SMALL, tmp_path / "a")
    run_fig6(ScenarioConfig(**{**SMALL.__dict__, "seed": 1}), tmp_path / "b")
    assert (tmp_path / "a" / "fig6.csv").read_bytes() != (tmp_path / "b" / "fig6.csv").read_bytes()


def test_worker_count_does_not_matter():
    cfg = ScenarioConfig(trials=9, k_max=8, k_eval=8)
    one = run_trials(cfg, workers=1)
    two = run_trials(cfg, workers=2)
    for a, b in zip(one, two):
        assert np.array_equal(a.fused_range_error, b.fused_range_error)
        assert np.array_equal(a.radar_range_error, b.radar_range_error)


def test_zero_noise_gives_zero_columns(tmp_path):
    cfg = ScenarioConfig(measurement_var=(0.0, 0.0), process_var=(0.0,) * 6, trials=5)
    rep = run_fig6(cfg, tmp_path)
    rows = read_csv(rep.csv_paths[0])[1:]
    assert all(float(r[1]) == 0.0 and float(r[2]) == 0.0 for r in rows)
    assert math.isnan(rep.summary["rho_s_at_k_eval"])


def test_fig7_includes_equal_point_and_small_dr_com_wins(tmp_path):
    cfg = ScenarioConfig(trials=200, k_max=20, dr_com_grid=(0.01, 100.0))
    rep = run_fig7(cfg, tmp_path)
    rows = {float(r[0]): float(r[1]) for r in read_csv(rep.csv_paths[0])[1:]}
    assert set(rows) == {0.01, 100.0}
    assert rows[0.01] > rows[100.0]
    assert rep.summary["dr_com_equal_dr_rad"] == 10.0


def test_fig8_surface(tmp_path):
    rep = run_fig8(ScenarioConfig(), tmp_path)
    rows = [tuple(map(float, r)) for r in read_csv(rep.csv_paths[0])[1:]]
    assert len(rows) == 21 * 4
    assert all(r[2] == r[3] for r in rows)
    assert (10.0, 0.0, 0.5, 0.5) in rows
    assert all(r[2] == 0.0 for r in rows if r[0] == 0.0)
    assert rep.summary["peak_rho_t"] == 0.5
    assert rep.summary["argmax_t5_by_t7"] == "0:10;5:10;10:10;20:10"


def test_fig8_mismatch_is_hard_failure(tmp_path, monkeypatch):
    from isac_uav import harness

    monkeypatch.setattr(harness, "_des_ratio", lambda b: -1.0)
    with pytest.raises(ExperimentError):
        run_fig8(ScenarioConfig(), tmp_path)


@pytest.mark.parametrize(
    "allegiance, credential, verdict",
    [("friend", "ALPHA-7", "friend"), ("foe", "ZULU-0", "foe"), ("friend", "ZULU-0", "foe"), ("unresponsive", "", "no-response")],
)
def test_encounter_verdicts(tmp_path, allegiance, credential, verdict):
    cfg = ScenarioConfig(allegiance=allegiance, credential=credential)
    s = run_full_encounter(cfg, tmp_path).summary
    assert s["verdict"] == verdict
    assert math.isfinite(s["final_fused_position_error_m"])


def test_encounter_friend_defaults(tmp_path):
    s = run_full_encounter(ScenarioConfig(), tmp_path).summary
    assert (s["iff_time_separated_ms"], s["iff_time_isac_ms"]) == (20.0, 10.0)
    assert (s["total_time_separated_ms"], s["total_time_isac_ms"]) == (400.0, 200.0)
    assert s["total_time_isac_ms"] == pytest.approx(s["total_time_separated_ms"] * (1 - s["rho_t"]))


def test_tracking_independent_of_allegiance(tmp_path):
    a = run_full_encounter(ScenarioConfig(), tmp_path / "a").summary
    b = run_full_encounter(ScenarioConfig(allegiance="foe", credential="X"), tmp_path / "b").summary
    assert a["final_fused_position_error_m"] == b["final_fused_position_error_m"]


def test_divergence_is_flagged(tmp_path, monkeypatch):
    from isac_uav import harness
    from isac_uav.exceptions import FilterDivergenceError

    real = harness.run_fusion_trial

    def flaky(cfg, k_max, rng, truth=None):
        if rng.integers(0, 10) == 0:
            raise FilterDivergenceError("boom", step=1)
        return real(cfg, k_max, rng, truth)

    monkeypatch.setattr(harness, "run_fusion_trial", flaky)
    rep = run_fig6(ScenarioConfig(trials=60, k_max=5, k_eval=5), tmp_path)
    assert rep.summary["divergence_rate"] > 0.01
    assert rep.failed


def test_helpers():
    assert max_rise([5, 4, 4, 3]) == 0.0
    assert max_rise([5, 3, 4, 1]) == 1.0
    assert convergence_step([10, 5, 2.02, 2.0]) == 3
    with pytest.raises(ExperimentError):
        ErrorCurves.from_records([None, None])


# --- CLI --------------------------------------------------------------------


def test_cli_success_and_out_flag(tmp_path, capsys):
    code = cli.main(["fig8", "--out", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "fig8.csv").exists()
    assert "fig8: ok" in capsys.readouterr().out


def test_cli_env_var_and_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["fig8"]) == 0
    assert (tmp_path / "env" / "fig8.csv").exists()
    assert cli.main(["fig8", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "fig8.csv").exists()


def test_cli_flags_override_config(tmp_path):
    path = write_config(ScenarioConfig(trials=7, seed=3), tmp_path / "c.ini")
    args = cli.build_parser().parse_args(["fig6", "--config", str(path), "--trials", "4"])
    cfg = cli.resolve_config(args)
    assert (cfg.trials, cfg.seed) == (4, 3)


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[monte_carlo]\ntrials = 0\n")
    assert cli.main(["fig6", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "monte_carlo.trials" in capsys.readouterr().err
    assert cli.main(["fig6", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_CONFIG
    assert cli.main(["fig6", "--trials", "0"]) == cli.EXIT_CONFIG


def test_cli_experiment_failure_exit_code(tmp_path, monkeypatch):
    from isac_uav import harness

    monkeypatch.setattr(harness, "_des_ratio", lambda b: -1.0)
    assert cli.main(["fig8", "--out", str(tmp_path)]) == cli.EXIT_FAILED


def test_cli_bad_usage_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["fig9"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "isac_uav", "encounter", "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "verdict = friend" in (tmp_path / "summary.txt").read_text()
