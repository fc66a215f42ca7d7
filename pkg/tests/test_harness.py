import json

import numpy as np
import pytest

from blockprior import optimal_weight
from blockprior.cli import main
from blockprior.errors import ConfigError
from blockprior.harness import (CurveTable, ExperimentConfig, SweepResult,
                                crossing_half, default_flat_threshold, emit,
                                load_sweep_csv, run_bounds_table,
                                run_phase_transition, run_sensitivity_table,
                                run_weights_table)

TINY_SWEEP = {
    "mode": "transition-curve",
    "n": 80, "q": 8,
    "rho": [0.5, 0.5], "alpha": [0.5, 0.25],
    "m_grid": [20, 50, 80],
    "trials": 4, "seed": 3,
}


def test_config_rejects_unknown_keys_and_bad_grids():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "heatmap", "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "nope"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "heatmap", "n": 40, "q": 4,
                                    "s_grid": [1], "m_grid": [0]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "heatmap", "n": 40, "q": 4,
                                    "s_grid": [9], "m_grid": [10]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "transition-curve", "n": 40, "q": 4,
                                    "m_grid": [10]})  # no partition


def test_infeasible_accuracy_rejected_before_any_trial():
    cfg = dict(TINY_SWEEP)
    cfg["alpha"] = [0.5, 0.3]  # 0.3 * 4 blocks is fractional
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(cfg)


def test_optional_set_count_field_is_validated():
    ok = dict(TINY_SWEEP, L=2)
    assert ExperimentConfig.from_dict(ok).partition().L == 2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(TINY_SWEEP, L=3))


def test_sweep_full_and_hopeless_cells():
    cfg = ExperimentConfig.from_dict({
        "mode": "transition-curve", "n": 40, "q": 4,
        "rho": [0.5, 0.5], "alpha": [0.5, 0.5],
        "m_grid": [1, 40], "trials": 3, "seed": 11,
    })
    res = run_phase_transition(cfg)
    assert np.all(res.rates[:, -1] == 1.0)  # m = n: square invertible system
    assert np.all(res.rates[:, 0] == 0.0)   # m = 1 with s >= 1
    assert res.successes.shape == (2, 2)


def test_sweep_deterministic_bytes(tmp_path):
    cfg1 = ExperimentConfig.from_dict(dict(TINY_SWEEP))
    cfg2 = ExperimentConfig.from_dict(dict(TINY_SWEEP))
    a = emit(run_phase_transition(cfg1), "csv")
    b = emit(run_phase_transition(cfg2), "csv")
    assert a == b
    assert emit(run_phase_transition(cfg1), "svg") == emit(run_phase_transition(cfg2), "svg")


def test_sweep_csv_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(dict(TINY_SWEEP))
    res = run_phase_transition(cfg)
    path = tmp_path / "sweep.csv"
    emit(res, "csv", str(path))
    cols = load_sweep_csv(str(path))
    assert cols["program"] == ["unit"] * 3 + ["optimal"] * 3
    assert np.array_equal(cols["m"], np.tile(res.m_grid, 2))
    assert np.array_equal(cols["successes"].reshape(2, 3), res.successes)
    for ri in range(2):
        pred = res.predicted[ri]
        assert np.all(cols["predicted_m"].reshape(2, 3)[ri] == pred[0])
        assert np.all(cols["predicted_low_m"].reshape(2, 3)[ri] == pred[1])
    rates = cols["success_rate"].reshape(2, 3)
    assert np.array_equal(rates, res.successes / res.trials)


def test_empty_sweep_emits_header_only():
    res = SweepResult(mode="heatmap", row_name="s", row_labels=(), m_grid=(),
                      trials=1, successes=np.zeros((0, 0), dtype=int),
                      predicted=(), meta={})
    text = emit(res, "csv")
    assert text == ("s,m,trials,successes,success_rate,"
                    "predicted_m,predicted_low_m,predicted_high_m\n")


def test_heatmap_svg_black_to_white_cells():
    res = SweepResult(mode="heatmap", row_name="s", row_labels=(1,),
                      m_grid=(5, 10), trials=4,
                      successes=np.array([[0, 4]]),
                      predicted=((7.0, 6.0, 7.0),), meta={})
    svg = emit(res, "svg")
    assert 'fill="#000000"' in svg  # 0% success
    assert 'fill="#ffffff"' in svg  # 100% success


def test_heatmap_mode_runs_and_overlays_bound():
    cfg = ExperimentConfig.from_dict({
        "mode": "heatmap", "n": 40, "q": 10,
        "s_grid": [0, 2, 8], "m_grid": [5, 20, 40],
        "trials": 2, "seed": 5,
    })
    res = run_phase_transition(cfg)
    # s = 0: zero signal is always recovered
    assert np.all(res.rates[0] == 1.0)
    # predictions come from the bound evaluation, monotone in s
    preds = [p[0] for p in res.predicted]
    assert preds[0] == 0.0 and preds[1] < preds[2]
    svg = emit(res, "svg")
    assert svg.count("<rect") >= 9


def test_explicit_weight_program():
    cfg = ExperimentConfig.from_dict(dict(TINY_SWEEP, m_grid=[80],
                                          programs=[[1.0, 0.5]], trials=2))
    res = run_phase_transition(cfg)
    assert res.row_labels == ("omega=1,0.5",)
    assert res.rates.shape == (1, 1)
    assert res.predicted[0][0] > 0


def test_crossing_interpolation():
    m50, lo, hi = crossing_half((10, 20, 30), (0.0, 0.25, 0.75), trials=1000)
    assert m50 == pytest.approx(25.0)
    assert lo is not None and hi is not None and lo < m50 < hi
    never = crossing_half((10, 20), (0.0, 0.1), trials=10)
    assert never[0] is None


def test_weights_table_values_and_errors():
    table = run_weights_table([0.0, 0.5, 1.0], [2, 10])
    assert (0, 0) in table.errors and (0, 1) in table.errors
    assert np.isnan(table.values[0, 0])
    assert table.values[2, 0] == 0.0 and table.values[2, 1] == 0.0
    assert table.values[1, 0] == pytest.approx(optimal_weight(0.5, 2))
    # monotone decreasing columns on a grid
    t2 = run_weights_table(np.linspace(0.05, 1.0, 20), [10])
    col = t2.values[:, 0]
    assert all(a > b for a, b in zip(col, col[1:]))
    csv = emit(table, "csv")
    assert csv.splitlines()[0] == "alpha,k,weight,error"
    assert "no finite weight" in csv


def test_weights_table_ties_to_reference_ratio():
    table = run_weights_table([9 / 10, 5 / 58], [10])
    ratio = table.values[0, 0] / table.values[1, 0]
    assert ratio == pytest.approx(0.100671, abs=5e-5)


def test_sensitivity_table_columns_and_flags():
    table = run_sensitivity_table([0.02, 0.05, 0.3, 0.8], [2, 10, 30])
    assert table.k_list == (2, 10, 30)
    # steep region ordering: smaller alpha more sensitive
    for j in range(3):
        assert table.values[0, j] > table.values[1, j] > table.values[2, j]
    # flat region flagged beyond ~0.1, steep region not
    assert np.all(table.flat[2:, :])
    assert not table.flat[0, :].any()
    for k in (2, 10, 30):
        assert table.flat_threshold[k] == pytest.approx(default_flat_threshold(k))
    csv = emit(table, "csv")
    assert csv.splitlines()[0] == "alpha,k,sensitivity,flat,flat_threshold,error"
    svg = emit(table, "svg")
    assert "k=30" in svg


def test_sensitivity_table_finite_difference_spot_check():
    table = run_sensitivity_table([0.4], [10])
    d = 1e-4
    fd = abs(optimal_weight(0.4 + d, 10) - optimal_weight(0.4 - d, 10)) / (2 * d)
    assert table.values[0, 0] == pytest.approx(fd, rel=0.01)


def test_bounds_table_runs():
    cfg = ExperimentConfig.from_dict({
        "mode": "bounds-table", "n": 200, "q": 20,
        "s_grid": list(range(0, 21, 4)),
    })
    table = run_bounds_table(cfg)
    assert table.m_hat[0] == 0.0
    assert table.m_hat[-1] == pytest.approx(10.0)
    assert all(b >= a for a, b in zip(table.m_hat, table.m_hat[1:]))
    csv = emit(table, "csv")
    assert csv.splitlines()[0] == "s,sigma,m_hat,t_star,predicted_m,predicted_low_m"
    assert emit(table, "svg").startswith("<svg")


# --- CLI ------------------------------------------------------------------

def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_cli_sweep_writes_csv(tmp_path):
    cfg = _write(tmp_path, "cfg.json", TINY_SWEEP)
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    assert out.read_text().startswith("program,m,trials")


def test_cli_bounds_weights_sensitivity(tmp_path):
    cfg = _write(tmp_path, "b.json", {"mode": "bounds-table", "n": 100, "q": 10,
                                      "s_grid": [0, 5, 10]})
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 4
    wout = tmp_path / "weights.svg"
    assert main(["weights", "--out", str(wout), "--format", "svg"]) == 0
    assert wout.read_text().startswith("<svg")
    sout = tmp_path / "sens.csv"
    assert main(["sensitivity", "--out", str(sout)]) == 0
    assert sout.read_text().startswith("alpha,k,sensitivity")


def test_cli_recover_reports_success(tmp_path, capsys):
    cfg = _write(tmp_path, "r.json", {
        "mode": "transition-curve", "n": 40, "q": 4,
        "rho": [0.5, 0.5], "alpha": [0.5, 0.5],
        "m_grid": [38], "trials": 1, "seed": 2,
    })
    assert main(["recover", "--config", cfg]) == 0
    captured = capsys.readouterr().out
    assert "success=True" in captured
    assert "certified=True" in captured


def test_cli_config_error_is_exit_2(tmp_path, capsys):
    bad = _write(tmp_path, "bad.json", {"mode": "heatmap"})
    assert main(["sweep", "--config", bad]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2
    notjson = tmp_path / "notjson.json"
    notjson.write_text("{")
    assert main(["sweep", "--config", str(notjson)]) == 2
    assert main(["sweep"]) == 2  # sweep requires --config


def test_cli_numerical_failure_is_exit_3(tmp_path, monkeypatch, capsys):
    from blockprior.errors import NumericalError
    import blockprior.cli as cli_mod

    def boom(cfg):
        raise NumericalError("injected")

    monkeypatch.setattr(cli_mod, "run_phase_transition", boom)
    cfg = _write(tmp_path, "cfg.json", TINY_SWEEP)
    assert main(["sweep", "--config", cfg]) == 3


def test_cli_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "cfg.json", TINY_SWEEP)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    c = tmp_path / "c.csv"
    assert main(["sweep", "--config", cfg, "--out", str(a)]) == 0
    assert main(["sweep", "--config", cfg, "--seed", "3", "--out", str(b)]) == 0
    assert main(["sweep", "--config", cfg, "--seed", "99", "--out", str(c)]) == 0
    assert a.read_text() == b.read_text()  # config seed is already 3
    assert a.read_text() != c.read_text()
