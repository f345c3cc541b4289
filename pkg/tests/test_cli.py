import json

import pandas as pd
import pytest

from rtl.cli import build_parser, run_cli

TINY_SCENARIO = {
    "name": "cli",
    "family": "Additive",
    "regime": "Heterogeneous",
    "d": 1,
    "q": 2,
    "r_true": 2,
    "K": 2,
    "n_k": 40,
    "n0": 30,
    "n0_val": 10,
    "n_test": 100,
    "r_working": 2,
    "net": {"depth": 1, "width": 4},
    "train": {"epochs": 5, "lr": 0.05, "patience": 5},
    "knot_grid": [0, 1],
    "replications": 1,
    "methods": ["Oracle", "Pool"],
    "seed": 3,
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(TINY_SCENARIO))
    return path


@pytest.fixture
def simulated(tmp_path, scenario_file):
    out = tmp_path / "data"
    assert run_cli(["simulate", "--scenario", str(scenario_file), "--out", str(out)]) == 0
    return out


def test_unknown_subcommand():
    assert run_cli(["frobnicate"]) == 2


def test_missing_subcommand():
    assert run_cli([]) == 2


def test_parser_lists_every_subcommand():
    parser = build_parser()
    for command in ("simulate", "fit", "infer", "benchmark", "coverage", "align-demo", "split", "sweep",
                    "compare"):
        assert parser.parse_args(_minimal_args(command)).command == command


def _minimal_args(command):
    required = {
        "simulate": ["--scenario", "s.json", "--out", "o"],
        "fit": ["--sources", "a.csv", "--target", "t.csv", "--roles", "r.json", "--net", "n.json", "--out", "f.json"],
        "infer": ["--fit", "f.json", "--out", "ci.csv"],
        "benchmark": ["--scenario", "s.json", "--out", "o"],
        "coverage": ["--scenario", "s.json", "--out", "o"],
        "align-demo": ["--out", "o"],
        "split": ["--data", "d.csv", "--roles", "r.json", "--out", "o"],
        "sweep": ["--scenario", "s.json", "--n-k", "10,20", "--r-working", "1", "--out", "o"],
        "compare": ["--sources", "a.csv", "--target", "t.csv", "--roles", "r.json", "--out", "o"],
    }
    return [command] + required[command]


def test_simulate_writes_domains(simulated):
    names = {p.name for p in simulated.iterdir()}
    assert {"target.csv", "source1.csv", "source2.csv", "target-val.csv", "roles.json", "design.json"} <= names
    design = json.loads((simulated / "design.json").read_text())
    assert design["design"]["family"] == "Additive"
    assert len(design["coefficients"]["betas"]) == 3
    assert len(pd.read_csv(simulated / "target.csv")) == 30


@pytest.fixture
def fitted(tmp_path, simulated):
    net = tmp_path / "net.json"
    net.write_text(json.dumps({"output_dim": 2, "depth": 1, "width": 4, "seed": 1}))
    train = tmp_path / "train.json"
    train.write_text(json.dumps({"epochs": 5, "lr": 0.05, "patience": 5}))
    fit_path = tmp_path / "fit" / "fit.json"

    code = run_cli([
        "fit",
        "--sources", f"{simulated / 'source1.csv'},{simulated / 'source2.csv'}",
        "--target", str(simulated / "target.csv"),
        "--roles", str(simulated / "roles.json"),
        "--net", str(net),
        "--train", str(train),
        "--out", str(fit_path),
    ])
    assert code == 0
    return fit_path


def test_fit_then_infer(tmp_path, fitted):
    document = json.loads(fitted.read_text())
    assert (fitted.parent / "fit.rep.json").exists()
    assert document["source_fit"]["rep"] == "fit.rep.json"
    assert len(document["target_fit"]["beta0"]) == 1

    ci_path = tmp_path / "ci.csv"
    assert run_cli(["infer", "--fit", str(fitted), "--alpha", "2", "--out", str(ci_path)]) == 0
    table = pd.read_csv(ci_path)
    assert list(table["name"]) == ["x1", "alpha'beta"]
    assert (table["lower"] <= table["upper"]).all()
    assert table["estimate"][1] == pytest.approx(2 * table["estimate"][0])


def test_infer_zero_alpha_is_config_error(tmp_path, fitted):
    ci_path = tmp_path / "ci.csv"
    assert run_cli(["infer", "--fit", str(fitted), "--alpha", "0", "--out", str(ci_path)]) == 2
    assert not ci_path.exists()


def test_infer_alpha_length_is_data_error(tmp_path, fitted):
    assert run_cli(["infer", "--fit", str(fitted), "--alpha", "1,1", "--out", str(tmp_path / "ci.csv")]) == 3


def test_infer_missing_document(tmp_path):
    assert run_cli(["infer", "--fit", str(tmp_path / "absent.json"), "--out", str(tmp_path / "ci.csv")]) == 2


def test_benchmark_writes_report(tmp_path, scenario_file):
    out = tmp_path / "bench"
    assert run_cli(["benchmark", "--scenario", str(scenario_file), "--out", str(out), "--workers", "1"]) == 0
    rows = pd.read_csv(out / "rows.csv")
    assert list(rows["method"]) == ["Oracle", "Pool"]
    assert (out / "aggregates.json").exists()


def test_bad_scenario_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**TINY_SCENARIO, "replications": 0}))
    assert run_cli(["benchmark", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2


def test_unparseable_config(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("a: 1\n  b: 2\n")
    assert run_cli(["benchmark", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2


def test_split(tmp_path):
    data = tmp_path / "houses.csv"
    data.write_text("price,rooms,area\n" + "".join(f"{i},{i % 3},{i * 10}\n" for i in range(10)))
    roles = tmp_path / "roles.json"
    roles.write_text(json.dumps({"y": "price", "x": ["rooms"], "z": ["area"]}))
    out = tmp_path / "parts"
    assert run_cli(["split", "--data", str(data), "--roles", str(roles), "--out", str(out), "--seed", "4"]) == 0
    sizes = {name: len(pd.read_csv(out / f"houses-{name}.csv")) for name in ("train", "val", "test")}
    assert sizes == {"train": 3, "val": 4, "test": 3}


def test_split_missing_column_is_data_error(tmp_path):
    data = tmp_path / "houses.csv"
    data.write_text("price,rooms\n1,2\n2,3\n3,4\n")
    roles = tmp_path / "roles.json"
    roles.write_text(json.dumps({"y": "price", "x": ["rooms"], "z": ["area"]}))
    assert run_cli(["split", "--data", str(data), "--roles", str(roles), "--out", str(tmp_path / "o")]) == 3


def test_split_bad_fractions(tmp_path):
    data = tmp_path / "houses.csv"
    data.write_text("price,rooms,area\n1,2,3\n2,3,4\n3,4,5\n")
    roles = tmp_path / "roles.json"
    roles.write_text(json.dumps({"y": "price", "x": ["rooms"], "z": ["area"]}))
    code = run_cli(["split", "--data", str(data), "--roles", str(roles), "--out", str(tmp_path / "o"),
                    "--train-fraction", "0.9"])
    assert code == 2


def test_align_demo_uses_uniform_points(tmp_path):
    net = tmp_path / "net.json"
    net.write_text(json.dumps({"depth": 1, "width": 8, "seed": 2}))
    train = tmp_path / "train.json"
    train.write_text(json.dumps({"epochs": 3, "lr": 0.05, "patience": 3}))
    out = tmp_path / "align"
    code = run_cli(["align-demo", "--out", str(out), "--rows", "40", "--net", str(net), "--train", str(train),
                    "--seed", "1"])
    assert code == 0
    table = pd.read_csv(out / "align.csv")
    points = table[["z1", "z2"]].to_numpy()
    assert (abs(points) <= 1).all()
    # off-diagonal points, not just z1 == z2
    assert (abs(points[:, 0] - points[:, 1]) > 0.1).any()
    assert len(json.loads((out / "align.json").read_text())["component_errors"]) == 2
