"""Serialization invariants and the in-process CLI contract."""
import json

import numpy as np
import pytest

from ctqw import cli, records
from ctqw.errors import InconsistencyError, ValidationError


# ---------------------------------------------------------------------------
# float and JSON formatting


def test_format_float_17_digits():
    assert records.format_float(1.0 / 3.0) == "0.33333333333333331"
    assert records.format_float(2.0) == "2.0"
    assert records.format_float(-0.5) == "-0.5"
    assert records.format_float(2.0**100) == "1.2676506002282294e+30"


def test_format_float_rejects_non_finite():
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ValidationError):
            records.format_float(bad)


def test_format_float_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-12, 12, 200):
        assert float(records.format_float(float(x))) == float(x)


def test_canonical_json_sorted_and_round_trip():
    obj = {"b": [1, 2.5, True, None], "a": {"z": "s", "y": 0.1}}
    text = records.canonical_json(obj)
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"b": [1, 2.5, True, None], "a": {"z": "s", "y": 0.1}}
    # identical input, identical bytes
    assert records.canonical_json(obj) == text


def test_canonical_json_numpy_coercion():
    obj = {"v": np.float64(0.5), "n": np.int64(3), "b": np.bool_(True), "arr": np.array([1.0, 2.0])}
    loaded = json.loads(records.canonical_json(obj))
    assert loaded == {"v": 0.5, "n": 3, "b": True, "arr": [1.0, 2.0]}


def test_canonical_json_rejects_non_string_keys():
    with pytest.raises(ValidationError):
        records.canonical_json({1: "x"})


# ---------------------------------------------------------------------------
# CSV rendering


def test_render_csv_layout():
    text = records.render_csv(
        ["a", "b", "c"],
        [{"a": 1, "b": True, "c": None}, {"a": 0.25, "b": False, "c": "ok"}],
        comment="demo",
    )
    lines = text.splitlines()
    assert lines[0] == "# demo"
    assert lines[1] == "a,b,c"
    assert lines[2] == "1,true,"
    assert lines[3] == "0.25,false,ok"


def test_render_csv_rejects_breaking_cells():
    for bad in ("x,y", 'quo"te', "new\nline"):
        with pytest.raises(ValidationError):
            records.render_csv(["a"], [{"a": bad}])
    with pytest.raises(ValidationError):
        records.render_csv(["a"], [], comment="two\nlines")


def test_experiment_record_round_trip():
    rec = records.ExperimentRecord(
        kind="demo",
        config={"n": [8]},
        seed=5,
        rows=({"x": 1.5, "ok": True},),
        summary={"all": True},
    )
    back = records.record_from_json(rec.to_json())
    assert back.kind == "demo" and back.seed == 5
    assert back.rows == ({"x": 1.5, "ok": True},)
    assert back.wall_clock_s is None
    with pytest.raises(ValidationError):
        records.record_from_json('{"kind": "demo"}')


# ---------------------------------------------------------------------------
# CLI: gluedtrees


def write_cfg(path, payload) -> str:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_cli_gluedtrees_small(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "g.json", {"n": [8], "seed": 9, "mc_runs": 40})
    rc = cli.main(["gluedtrees", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "certified" in out
    data = json.loads((tmp_path / "gluedtrees.json").read_text())
    assert data["kind"] == "gluedtrees"
    assert data["seed"] == 9
    assert data["summary"]["all_hold"] is True
    assert data["rows"][0]["n"] == 8
    csv_lines = (tmp_path / "gluedtrees.csv").read_text().splitlines()
    assert csv_lines[0].startswith("#")
    assert csv_lines[1].split(",") == cli.GLUEDTREES_COLUMNS
    assert len(csv_lines) == 3

    # rerun into a second directory: byte-identical artifacts
    other = tmp_path / "again"
    rc = cli.main(["gluedtrees", "--config", cfg, "--out", str(other)])
    assert rc == 0
    assert (other / "gluedtrees.json").read_bytes() == (tmp_path / "gluedtrees.json").read_bytes()
    assert (other / "gluedtrees.csv").read_bytes() == (tmp_path / "gluedtrees.csv").read_bytes()


def test_cli_gluedtrees_rejects_bad_size(tmp_path):
    cfg = write_cfg(tmp_path / "g.json", {"n": [3], "seed": 1})
    assert cli.main(["gluedtrees", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_cli_missing_config(tmp_path):
    assert cli.main(["gluedtrees", "--config", str(tmp_path / "nope.json")]) == 3


def test_cli_bad_json_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert cli.main(["gluedtrees", "--config", str(bad)]) == 3


# ---------------------------------------------------------------------------
# CLI: search


def test_cli_search_small(tmp_path):
    cfg = write_cfg(
        tmp_path / "s.json",
        {"families": ["complete"], "N": [6], "epsilons": [0.1, 0.2], "shots": 2000, "seed": 4},
    )
    rc = cli.main(["search", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    data = json.loads((tmp_path / "search.json").read_text())
    assert data["summary"]["all_floor_holds"] is True
    assert [row["epsilon"] for row in data["rows"]] == [0.2, 0.1]
    fits = data["summary"]["total_time_fits"]
    assert fits[0]["slope"] > 0

    other = tmp_path / "again"
    assert cli.main(["search", "--config", cfg, "--out", str(other)]) == 0
    assert (other / "search.json").read_bytes() == (tmp_path / "search.json").read_bytes()


def test_cli_search_chain_file(tmp_path):
    chain_file = tmp_path / "chain.json"
    chain_file.write_text(
        json.dumps(
            {
                "n": 3,
                "format": "weighted-graph",
                "data": [[0, 1, 1.0], [1, 2, 1.0], [0, 2, 1.0], [0, 0, 1.0]],
                "marked": 1,
            }
        ),
        encoding="utf-8",
    )
    cfg = write_cfg(
        tmp_path / "s.json", {"chains": [str(chain_file)], "epsilons": [0.1], "shots": 500, "seed": 2}
    )
    assert cli.main(["search", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_cli_search_irreversible_chain_file(tmp_path):
    chain_file = tmp_path / "bad.json"
    chain_file.write_text(
        json.dumps(
            {
                "n": 3,
                "format": "dense",
                "data": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
                "marked": 0,
            }
        ),
        encoding="utf-8",
    )
    cfg = write_cfg(tmp_path / "s.json", {"chains": [str(chain_file)], "epsilons": [0.1], "seed": 2})
    assert cli.main(["search", "--config", cfg, "--out", str(tmp_path)]) == 3


# ---------------------------------------------------------------------------
# CLI: bounds


def test_cli_bounds_small(tmp_path):
    cfg = write_cfg(tmp_path / "b.json", {"instances": 12, "seed": 3})
    rc = cli.main(["bounds", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    data = json.loads((tmp_path / "bounds.json").read_text())
    assert data["summary"]["all_hold"] is True
    assert set(data["summary"]["min_slack"]) == {"mixing", "eigenspace", "subset", "residual"}
    assert all(v >= -1e-9 for v in data["summary"]["min_slack"].values())
    assert data["summary"]["comparison_all_ok"] is True


def test_cli_bounds_fault_injection(tmp_path):
    cfg = write_cfg(tmp_path / "b.json", {"instances": 3, "seed": 3, "inject_fault": True})
    rc = cli.main(["bounds", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    data = json.loads((tmp_path / "bounds.json").read_text())
    assert data["summary"]["fault_injected"] is True
    assert data["summary"]["all_hold"] is False
    # files are still written on the failure path
    assert (tmp_path / "bounds.csv").exists()


def test_cli_bounds_jobs_parallel_identical(tmp_path):
    cfg = write_cfg(tmp_path / "b.json", {"instances": 6, "seed": 12})
    one = tmp_path / "one"
    two = tmp_path / "two"
    assert cli.main(["bounds", "--config", cfg, "--out", str(one), "--jobs", "1"]) == 0
    assert cli.main(["bounds", "--config", cfg, "--out", str(two), "--jobs", "2"]) == 0
    assert (one / "bounds.json").read_bytes() == (two / "bounds.json").read_bytes()
    assert (one / "bounds.csv").read_bytes() == (two / "bounds.csv").read_bytes()


# ---------------------------------------------------------------------------
# CLI: shared plumbing


def test_cli_env_out_overrides_flag(tmp_path, monkeypatch):
    env_dir = tmp_path / "envdir"
    monkeypatch.setenv("CTQW_OUT", str(env_dir))
    cfg = write_cfg(tmp_path / "b.json", {"instances": 2, "seed": 1})
    assert cli.main(["bounds", "--config", cfg, "--out", str(tmp_path / "flagdir")]) == 0
    assert (env_dir / "bounds.json").exists()
    assert not (tmp_path / "flagdir" / "bounds.json").exists()


def test_cli_seed_flag_overrides_config(tmp_path):
    cfg = write_cfg(tmp_path / "b.json", {"instances": 2, "seed": 1})
    assert cli.main(["bounds", "--config", cfg, "--out", str(tmp_path), "--seed", "77"]) == 0
    data = json.loads((tmp_path / "bounds.json").read_text())
    assert data["seed"] == 77


def test_cli_seed_required(tmp_path):
    cfg = write_cfg(tmp_path / "b.json", {"instances": 2})
    assert cli.main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_cli_inconsistency_exit_code(tmp_path, monkeypatch):
    def boom(args):
        raise InconsistencyError("synthetic")

    monkeypatch.setattr(cli, "_cmd_bounds", boom)
    cfg = write_cfg(tmp_path / "b.json", {"instances": 2, "seed": 1})
    assert cli.main(["bounds", "--config", cfg]) == 4
