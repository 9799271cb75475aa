import json
import unittest
from pathlib import Path

import pytest

from cli.artifacts import (
    METRICS_FILE,
    PARTITION_FILE,
    TABLE_FILE,
    TRACE_FILE,
    read_metrics,
    read_trace,
    validate_artifacts,
)
from cli.commands import (
    EXIT_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    cmd_reproduce_table1,
    cmd_reproduce_table2,
    cmd_run,
    cmd_validate,
)
from cli.config_file import load_run_spec
from main import build_parser, main
from models.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
DEMO = CONFIGS / "demo_quadratic.yaml"

SMALL_GRID = """
dataset:
  kind: synthetic-classification
  samples: 120
  features: 4
partition:
  scheme: stratified
  clients: 2
objective:
  kind: logistic-l1
engine:
  criterion: B4
  vmax: 1
solver:
  kind: bcpg
  step: 0.5
run:
  seeds: [0, 1]
"""


class TestLoadRunSpec(unittest.TestCase):
    def test_shipped_configs_validate(self):
        for path in sorted(CONFIGS.glob("*.yaml")):
            with self.subTest(config=path.name):
                load_run_spec(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_run_spec("does/not/exist.yaml")

    def test_override_names_offending_field(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_spec(DEMO, ["engine.eps_pri=-1"])
        self.assertIn("engine.eps_pri", str(ctx.exception))

    def test_every_error_reported(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_spec(DEMO, ["engine.eps_pri=-1", "engine.eps_dual=0"])
        self.assertIn("2 configuration error(s)", str(ctx.exception))

    def test_overrides_are_typed(self):
        spec = load_run_spec(DEMO, ["engine.eps_pri=1e-6", "run.seeds=[1, 2]"])
        self.assertEqual(spec.engine.eps_pri, 1e-6)
        self.assertEqual(spec.run.seeds, [1, 2])

    def test_malformed_override(self):
        with self.assertRaises(ConfigError):
            load_run_spec(DEMO, ["engine.eps_pri"])

    def test_defaults_without_file(self):
        spec = load_run_spec(None, ["partition.clients=4"])
        self.assertEqual(spec.partition.clients, 4)


def test_environment_interpolation(tmp_path, monkeypatch):
    monkeypatch.setenv("DALD_TEST_CLIENTS", "5")
    path = tmp_path / "run.yaml"
    path.write_text("partition:\n  clients: ${DALD_TEST_CLIENTS}\n")
    assert load_run_spec(path).partition.clients == 5


def test_non_mapping_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_run_spec(path)


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert cmd_run(str(DEMO), [], out, tmp_path) == EXIT_OK

    records = read_metrics(out / METRICS_FILE)
    assert len(records) == 1 and records[0].status == "optimal"
    trace = read_trace(out / TRACE_FILE)
    assert len(trace) == records[0].sweeps
    assert (out / PARTITION_FILE).read_text().startswith("index,client_id")
    assert "dald-cc seed=0: status=optimal" in capsys.readouterr().out
    assert validate_artifacts(out).ok


def test_run_out_of_budget_exits_with_two(tmp_path):
    assert cmd_run(str(DEMO), ["run.budget=3"], tmp_path, tmp_path) == EXIT_NOT_CONVERGED
    assert read_metrics(tmp_path / METRICS_FILE)[0].status == "budget"


def test_run_seed_override(tmp_path):
    cmd_run(str(DEMO), ["run.budget=2"], tmp_path, tmp_path, seed=9)
    assert [r.seed for r in read_metrics(tmp_path / METRICS_FILE)] == [9]


def test_validate_reports_corrupt_files(tmp_path, capsys):
    (tmp_path / METRICS_FILE).write_text(json.dumps([{"algorithm": "dald-cc"}]))
    assert cmd_validate(tmp_path) == EXIT_ERROR
    assert "invalid  metrics.json" in capsys.readouterr().out


def test_validate_empty_directory(tmp_path):
    assert cmd_validate(tmp_path) == EXIT_ERROR


def test_table1_needs_data(tmp_path):
    with pytest.raises(ConfigError):
        cmd_reproduce_table1(tmp_path / "out", tmp_path / "missing")
    with pytest.raises(ConfigError, match="none of the regression datasets"):
        cmd_reproduce_table1(tmp_path / "out", tmp_path)


def test_table2_needs_mnist_files(tmp_path):
    with pytest.raises(ConfigError, match="MNIST"):
        cmd_reproduce_table2(str(CONFIGS / "table2_mnist.yaml"), [], tmp_path, tmp_path, [10], [0.0], [10])


def test_table2_small_grid(tmp_path):
    config = tmp_path / "grid.yaml"
    config.write_text(SMALL_GRID)
    out = tmp_path / "out"
    assert cmd_reproduce_table2(str(config), [], out, tmp_path, [2], [0.0, 1e-3], [5]) == EXIT_OK
    lines = (out / TABLE_FILE).read_text().splitlines()
    assert lines[0] == "algorithm,n,lambda,iters,mean_acc,std_acc_permyriad"
    assert len(lines) == 1 + 6
    assert len(read_metrics(out / METRICS_FILE)) == 12
    assert validate_artifacts(out).ok


class TestMain(unittest.TestCase):
    def test_parser_defaults(self):
        args = build_parser().parse_args(["reproduce-table2"])
        self.assertEqual((args.n, args.lambdas, args.budget), ("10,50", "0,1e-4,1e-3,1e-2", "1000"))

    def test_repeated_set(self):
        args = build_parser().parse_args(["run", "--set", "a.b=1", "--set", "c.d=2"])
        self.assertEqual(args.overrides, ["a.b=1", "c.d=2"])


def test_main_config_error_exits_with_one(tmp_path, capsys):
    code = main(["run", "--config", str(DEMO), "--set", "engine.eps_pri=-1", "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_ERROR
    assert "engine.eps_pri" in capsys.readouterr().err


def test_main_run_then_validate(tmp_path):
    out = str(tmp_path / "demo")
    assert main(["run", "--config", str(DEMO), "--out", out, "--data-dir", str(tmp_path), "--quiet"]) == EXIT_OK
    assert main(["validate", "--out", out, "--quiet"]) == EXIT_OK


def test_main_table1_without_data(tmp_path):
    args = ["reproduce-table1", "--data-dir", str(tmp_path / "none"), "--out", str(tmp_path), "--quiet"]
    assert main(args) == EXIT_ERROR
