import json
import math

import pytest

from tmperc import harness
from tmperc.harness import ConfigError


def base_config(**overrides):
    raw = {
        "name": "unit",
        "master_seed": 11,
        "graph": {"template": {"kind": "single"}, "n": 1000, "p": 0.01},
        "thresholds": {"zeta": {"2": 0.5, "3": 0.5}},
        "sweep": {"axis": "zeta_fraction", "threshold": 3, "complement": 2, "values": [0.5]},
        "graphs": 1,
        "trials": 1,
    }
    raw.update(overrides)
    return raw


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ConfigError):
        harness.load_config(base_config(bogus_key=1))
    with pytest.raises(ConfigError):
        harness.load_config(
            base_config(graph={"template": {"kind": "single"}, "n": 10, "p": 0.1, "pp": 2})
        )
    with pytest.raises(ConfigError):
        harness.load_config(
            base_config(sweep={"axis": "zeta_fraction", "values": [0.5], "oops": 1})
        )
    with pytest.raises(ConfigError):
        harness.load_config(
            base_config(intervention={"variant": "bolster_a", "mystery": True})
        )


def test_config_requires_exactly_one_graph_parameterization():
    with pytest.raises(ConfigError):
        harness.load_config(
            base_config(graph={"template": {"kind": "single"}, "n": 10, "p": 0.1, "near_degree": 5})
        )
    with pytest.raises(ConfigError):
        harness.load_config(base_config(graph={"template": {"kind": "single"}, "n": 10}))


def test_degree_shorthand_matches_paper_parameterization():
    config = harness.load_config(
        base_config(
            graph={
                "template": {"kind": "ring", "k": 10, "reach": 1},
                "n": 10000,
                "near_degree": 5.0,
                "far_degree": 5.0,
            }
        )
    )
    params = harness.params_from_config(config)
    assert params.p == pytest.approx(50 / (3 * 10000))
    assert params.q == pytest.approx(50 / (7 * 10000))
    k20 = harness.load_config(
        base_config(
            graph={
                "template": {"kind": "ring", "k": 20, "reach": 1},
                "n": 10000,
                "near_degree": 5.0,
                "far_degree": 5.0,
            }
        )
    )
    params20 = harness.params_from_config(k20)
    assert params20.p == pytest.approx(100 / (3 * 10000))
    assert params20.q == pytest.approx(100 / (17 * 10000))


def test_config_hash_changes_with_any_field():
    baseline = harness.load_config(base_config())
    assert harness.config_hash(baseline) == harness.config_hash(harness.load_config(base_config()))
    changed = [
        base_config(master_seed=12),
        base_config(trials=2),
        base_config(epsilon=0.2),
        base_config(graph={"template": {"kind": "single"}, "n": 1001, "p": 0.01}),
        base_config(thresholds={"zeta": {"2": 1.0}}),
    ]
    hashes = {harness.config_hash(harness.load_config(c)) for c in changed}
    hashes.add(harness.config_hash(baseline))
    assert len(hashes) == len(changed) + 1


def test_emit_roundtrip_and_empty_table(tmp_path):
    config = harness.load_config(base_config())
    table = harness.run_dichotomy(config)
    base = str(tmp_path / "rows")
    paths = harness.emit(table, base)
    assert len(paths) == 2
    back = harness.read_table(base + ".csv")
    assert back.config_hash == table.config_hash
    assert back.columns == table.columns
    assert len(back.rows) == len(table.rows)
    for mine, theirs in zip(table.rows, back.rows):
        for column in table.columns:
            value = mine.get(column)
            if isinstance(value, float) and math.isnan(value):
                continue
            assert theirs[column] == value
    empty = harness.ResultTable("empty", "cafe", ["a", "b"], [])
    harness.emit(empty, str(tmp_path / "empty"))
    with open(tmp_path / "empty.csv") as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_hash=cafe")
    assert lines[1] == "a,b"
    assert len(lines) == 2


def test_rerun_is_byte_identical(tmp_path):
    config = harness.load_config(base_config(trials=2, graphs=2))
    first = harness.run_dichotomy(config)
    second = harness.run_dichotomy(config)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    harness.emit(first, a)
    harness.emit(second, b)
    assert open(a + ".csv", "rb").read() == open(b + ".csv", "rb").read()
    assert open(a + ".jsonl", "rb").read() == open(b + ".jsonl", "rb").read()


def test_parallel_equals_serial():
    config = harness.load_config(base_config(trials=2, graphs=2, sweep={
        "axis": "zeta_fraction", "threshold": 3, "complement": 2, "values": [0.0, 1.0]}))
    serial = harness.run_dichotomy(config, jobs=1)
    parallel = harness.run_dichotomy(config, jobs=2)
    assert serial.rows == parallel.rows


def test_single_point_single_trial_row_count():
    config = harness.load_config(base_config(seed_factors=[1.1]))
    table = harness.run_dichotomy(config)
    assert len(table.rows) == 1
    row = table.rows[0]
    assert row["seed_factor"] == 1.1
    assert row["verdict"] in ("spread", "halted")


def test_dichotomy_rejects_intervention_config():
    config = harness.load_config(base_config(intervention={"variant": "bolster_a"}))
    with pytest.raises(ConfigError):
        harness.run_dichotomy(config)


def test_intervention_requires_alpha_axis():
    config = harness.load_config(base_config(intervention={"variant": "bolster_a"}))
    with pytest.raises(ConfigError):
        harness.run_intervention(config)


def test_intervention_rows_and_no_trigger(tmp_path):
    n = 4000
    config = harness.load_config(
        {
            "name": "iv-unit",
            "master_seed": 3,
            "graph": {"template": {"kind": "single"}, "n": n, "p": 7 / n},
            "thresholds": {"zeta": {"2": 1.0}},
            "sweep": {"axis": "alpha", "values": [0.0, 1.0]},
            "graphs": 2,
            "trials": 1,
            "intervention": {
                "variant": "diminish",
                "lambda": 0.1,
                "baseline_seed_factor": 1.6,
                "compute_boundary": False,
            },
        }
    )
    table = harness.run_intervention(config)
    triggered_rows = [r for r in table.rows if r["triggered"]]
    assert triggered_rows
    for row in triggered_rows:
        assert row["predicted"] in ("predicted-halt", "predicted-spread", "uncertain-band")
        assert row["actual"] in ("spread", "halted")
        assert row["i_cur"] > row["i_prev"]
    # subcritical baseline: one graph with a hopeless seed count
    low = harness.load_config(
        {
            "name": "iv-low",
            "master_seed": 3,
            "graph": {"template": {"kind": "single"}, "n": n, "p": 7 / n},
            "thresholds": {"zeta": {"2": 1.0}},
            "sweep": {"axis": "alpha", "values": [0.5]},
            "graphs": 1,
            "trials": 1,
            "intervention": {
                "variant": "diminish",
                "lambda": 0.5,
                "baseline_seed_count": 3,
                "compute_boundary": False,
            },
        }
    )
    rows = harness.run_intervention(low).rows
    assert len(rows) == 1
    assert rows[0]["predicted"] == "no-trigger"
    assert not rows[0]["triggered"]


def test_analytic_summary_shape():
    config = harness.load_config(
        base_config(sweep={"axis": "zeta_fraction", "threshold": 3, "complement": 2,
                           "values": [0.0, 0.5, 1.0]})
    )
    rows = harness.analytic_summary(config)
    assert [row["value"] for row in rows] == [0.0, 0.5, 1.0]
    assert all(row["phi_critical"] > 0 for row in rows)
    # weaker thresholds (all twos) percolate easier
    assert rows[0]["phi_critical"] <= rows[2]["phi_critical"]


def test_coinflip_sweep_path():
    n = 2000
    config = harness.load_config(
        {
            "name": "coin-unit",
            "master_seed": 5,
            "graph": {"template": {"kind": "single"}, "n": n, "p": 10 / n},
            "thresholds": {"coinflip": {"s": 1, "z": 0.5, "r_max": 20}},
            "sweep": {"axis": "coin_z", "values": [1.0]},
            "graphs": 1,
            "trials": 2,
        }
    )
    table = harness.run_dichotomy(config)
    assert len(table.rows) == 4  # two factors, two trials
    dist = harness.distribution_at(config, 1.0)
    assert dist.zeta[1] == 1.0  # z = 1 collapses to threshold s + 1


def test_cli_analytic_and_validate(tmp_path, capsys):
    from tmperc.cli import main

    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base_config()))
    assert main(["analytic", "-c", str(path)]) == 0
    out = capsys.readouterr().out
    assert "phi_critical" in out
    assert main(["dichotomy", "-c", str(path), "--out", str(tmp_path / "rows")]) == 0
    assert (tmp_path / "rows.csv").exists()
