import json

import numpy as np
import pytest

from ncerg.errors import ConfigInvalid
from ncerg.experiments import SUITES, estimate_constant, load_config, resolve, run_suite
from ncerg.experiments.cli import czdemo_text, main
from ncerg.experiments.generators import trial_rng
from ncerg.experiments.report import checks_csv, load, merge, write
from ncerg.experiments.runner import dumps, schema, strip_timing


@pytest.mark.parametrize("bad", [
    {"instances": 0},
    {"instances": "many"},
    {"shapes": [{"blocks": [2, 2], "weights": [1.0]}]},
    {"window": [5, 3]},
    {"no_such_key": 1},
])
def test_invalid_config_rejected(bad):
    with pytest.raises(ConfigInvalid):
        load_config(bad)


def test_config_from_string_and_file(tmp_path):
    assert load_config('{"instances": 3}') == {"instances": 3}
    path = tmp_path / "c.json"
    path.write_text('{"seed": 4}')
    assert load_config(str(path)) == {"seed": 4}
    with pytest.raises(ConfigInvalid):
        load_config("{not json")


def test_resolve_overrides():
    cfg = resolve("cz", {"instances": 5}, seed=9)
    assert cfg["instances"] == 5 and cfg["seed"] == 9 and cfg["suite"] == "cz"
    with pytest.raises(ConfigInvalid):
        resolve("nope")
    with pytest.raises(ConfigInvalid):
        resolve("cz", {"suite": "bmo"})


def test_schema_is_package_data():
    assert schema()["type"] == "object"


def test_trial_streams_independent():
    a = trial_rng(0, "cz", 0).random(4)
    assert not np.allclose(a, trial_rng(0, "cz", 1).random(4))
    assert not np.allclose(a, trial_rng(0, "bmo", 0).random(4))
    assert not np.allclose(a, trial_rng(1, "cz", 0).random(4))
    np.testing.assert_array_equal(a, trial_rng(0, "cz", 0).random(4))


def test_prefix_stability():
    """Trial i does not depend on how many trials run."""
    short = run_suite("cuculescu", {"instances": 3}, seed=2)
    long = run_suite("cuculescu", {"instances": 6}, seed=2)
    for c3, c6 in zip(short["checks"], long["checks"]):
        assert c6["values"][:3] == c3["values"]


def test_run_deterministic():
    a = run_suite("cz", {"instances": 6}, seed=5)
    b = run_suite("cz", {"instances": 6}, seed=5)
    assert dumps(strip_timing(a)) == dumps(strip_timing(b))
    assert a["pass"]


def test_parallel_matches_serial(monkeypatch):
    serial = run_suite("cuculescu", {"instances": 6}, seed=1)
    monkeypatch.setenv("NCERG_THREADS", "3")
    parallel = run_suite("cuculescu", {"instances": 6}, seed=1)
    assert dumps(strip_timing(serial)) == dumps(strip_timing(parallel))


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["suite", "list"]) == 0
    assert set(capsys.readouterr().out.split()) == set(SUITES)
    assert main(["suite", "run", "khintchine", "--config", '{"instances": 4}', "--out", str(tmp_path),
                 "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and (tmp_path / "khintchine-seed3.json").exists()
    assert main(["suite", "run", "unknown", "--out", str(tmp_path)]) == 2
    assert main(["suite", "run", "cz", "--config", '{"instances": -1}', "--out", str(tmp_path)]) == 2


def test_cli_unknown_tolerance_is_config_error(tmp_path):
    cfg = json.dumps({"instances": 4, "tolerances": {"cz": 1.0}})
    assert main(["suite", "run", "cz", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


def test_cli_fail_and_internal_exit(tmp_path, monkeypatch):
    from ncerg.experiments import runner
    real = runner.run_suite

    def failing(*a, **kw):
        rep = real(*a, **kw)
        rep["checks"][0]["pass"] = False
        rep["pass"] = False
        return rep

    monkeypatch.setattr(runner, "run_suite", failing)
    args = ["suite", "run", "cuculescu", "--config", '{"instances": 2}', "--out", str(tmp_path)]
    assert main(args) == 1

    def broken(*a, **kw):
        raise RuntimeError("boom")

    monkeypatch.setattr(runner, "run_suite", broken)
    assert main(args) == 3


def test_czdemo(capsys):
    text = czdemo_text()
    assert "m_lambda" in text and "FAIL" not in text
    assert main(["czdemo", "--scalar"]) == 0
    assert capsys.readouterr().out == text


def test_report_merge(tmp_path):
    a = run_suite("cuculescu", {"instances": 3}, seed=0)
    b = run_suite("cz", {"instances": 2}, seed=0)
    once = merge([a, b])
    assert merge([a, b, a, b]) == once
    assert merge([b, a]) == once
    paths = write(once, str(tmp_path), "json")
    reloaded = load(paths[0])
    again = write(merge(reloaded), str(tmp_path / "again"), "json")
    assert open(paths[0]).read() == open(again[0]).read()
    rows = checks_csv(once).strip().splitlines()[1:]
    assert len(rows) == sum(len(c["values"]) for r in once["reports"] for c in r["checks"])
    assert len(rows) == sum(c["instances"] for r in once["reports"] for c in r["checks"])
    csv_paths = write(once, str(tmp_path / "csv"), "csv")
    assert any(p.endswith("checks.csv") for p in csv_paths)


def test_cli_report(tmp_path):
    for name in ("cuculescu", "khintchine"):
        assert main(["suite", "run", name, "--config", '{"instances": 2}', "--out", str(tmp_path), "--quiet"]) == 0
    files = sorted(str(p) for p in tmp_path.glob("*.json"))
    assert main(["report", "--merge", *files, "--out", str(tmp_path / "m"), "--format", "csv"]) == 0
    assert (tmp_path / "m" / "plot_data.csv").exists()


def test_estimate_small():
    cfg = {"p": [2.0], "classes": ["identity", "unitary"],
           "options": {"L": 2, "operators": 2, "vectors": 1, "sequences": 2}}
    rep = estimate_constant(cfg, seed=0)
    assert rep["pass"] and len(rep["table"]) == 4
    for row in rep["table"]:
        if row["class"] == "identity":
            assert row["max_ratio"] <= 1e-12 and row["plateau_ratio"] == 1.0
        else:
            assert 0 < row["max_ratio"] <= 25 * 2 ** 0.5
    assert estimate_constant(cfg, seed=0)["table"] == rep["table"]
