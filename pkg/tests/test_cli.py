import json
import math
from pathlib import Path

import pytest

from branchpath import __version__
from branchpath.cli import PARAMS, SUBCOMMANDS, RunConfig, defaults, main, run
from branchpath.complex_core import complex_to_description, dump_complex
from branchpath.errors import ConfigError
from branchpath.templates import merge_split, toy_collapsed

ROOT = Path(__file__).resolve().parents[1]
MERGE_SPLIT = str(ROOT / "data" / "merge_split.json")
MERGE_SPLIT_W = str(ROOT / "data" / "merge_split_weighted.json")

# small, quick arguments for every subcommand
QUICK = {
    "check": ["--input", MERGE_SPLIT_W],
    "nullspace": ["--input", MERGE_SPLIT, "--basis"],
    "count": ["--input", MERGE_SPLIT],
    "paths": ["--input", MERGE_SPLIT, "--list"],
    "propagate": ["--model", "harmonic_oscillator", "--omega", "0.5", "--k", "0.3", "--n-samples", "5000"],
    "toy01": ["--exact"],
    "collapse": ["--weights", "0.3,0.7"],
    "born": ["--n", "3000"],
    "deficit": ["--volumes", "2..5"],
    "nonlinearity": ["--u-points", "11"],
}


def invoke(tmp_path, argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--output", str(out)])
    return code, out.read_text() if out.exists() else None


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_every_subcommand_runs(tmp_path, sub):
    code, text = invoke(tmp_path, [sub, *QUICK[sub]])
    assert code == 0
    report = json.loads(text)
    assert set(report) == {"config", "seed", "version", "result"}
    assert report["version"] == __version__
    assert report["config"]["subcommand"] == sub
    assert text.endswith("}\n")


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_config_echo_round_trips(tmp_path, sub):
    _, text = invoke(tmp_path, [sub, *QUICK[sub], "--seed", "7"])
    echoed = json.loads(text)["config"]
    cfg = RunConfig.from_dict(echoed)
    assert cfg.to_dict() == echoed
    assert run(cfg)[1] == text


@pytest.mark.parametrize("sub", ["born", "collapse", "propagate"])
def test_byte_identical_reruns(tmp_path, sub):
    texts = {invoke(tmp_path, [sub, *QUICK[sub], "--seed", "3", "--threads", str(t)], f"o{t}")[1]
             for t in (1, 2, 8)}
    assert len(texts) == 1


def test_seed_changes_sampled_output(tmp_path):
    a = invoke(tmp_path, ["born", "--n", "2000", "--seed", "1"], "a")[1]
    b = invoke(tmp_path, ["born", "--n", "2000", "--seed", "2"], "b")[1]
    assert a != b


class TestResults:
    def test_check_weighted_passes(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["check", "--input", MERGE_SPLIT_W])[1])["result"]
        assert r["status"] == "PASS" and r["conservation"] == "PASS"
        assert r["residual"] == [0, 0, 0]

    def test_check_unweighted_gives_witness(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["check", "--input", MERGE_SPLIT])[1])["result"]
        assert r["feasible"] and r["dimension"] == 2
        assert set(r["witness"]) == {"w1", "w2", "w3", "w4", "w5", "w6"}

    def test_nullspace(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["nullspace", "--input", MERGE_SPLIT])[1])["result"]
        assert (r["rank"], r["nullity"]) == (3, 3)

    def test_count(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["count", "--input", MERGE_SPLIT])[1])["result"]
        assert r["count"] == 4 and r["entropy_nats"] == pytest.approx(math.log(4))

    def test_paths_incidence(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["paths", "--input", MERGE_SPLIT])[1])["result"]
        assert r["count"] == 4
        assert r["A"] == [[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1], [1, 0, 1, 0], [0, 1, 0, 1]]

    def test_toy01_defaults(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["toy01", "--exact"])[1])["result"]
        assert r["s_A"] == pytest.approx(6 * math.log(2))
        assert r["threshold"] == 4.0

    def test_collapse_outcome_is_one_indexed(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["collapse", "--weights", "1,0"])[1])["result"]
        assert r["outcome"] == 1

    def test_born_rows(self, tmp_path):
        r = json.loads(invoke(tmp_path, ["born", "--n", "3000"])[1])["result"]
        assert [row["outcome"] for row in r["rows"]] == [1, 2]
        assert sum(row["count"] for row in r["rows"]) + r["unresolved"] == 3000

    def test_infinite_hbar_serialized(self, tmp_path):
        text = invoke(tmp_path, ["propagate", "--hbar", "inf", "--n-samples", "100"])[1]
        report = json.loads(text)
        assert report["config"]["parameters"]["hbar"] == "inf"
        assert RunConfig.from_dict(report["config"]).parameters["hbar"] == math.inf


class TestCsv:
    def test_meta_line_and_table(self, tmp_path):
        code, text = invoke(tmp_path, ["paths", "--input", MERGE_SPLIT, "--format", "csv"])
        assert code == 0
        first, header, *rows = text.splitlines()
        meta = json.loads(first[2:])
        assert meta["config"]["format"] == "csv" and meta["summary"]["count"] == 4
        assert header == "simplex,p1,p2,p3,p4"
        assert rows[0] == "w1,1,1,0,0"

    def test_scalar_results_fall_back_to_json(self, tmp_path):
        _, text = invoke(tmp_path, ["count", "--input", MERGE_SPLIT, "--format", "csv"])
        assert json.loads(text)["result"]["count"] == 4

    def test_deficit_csv(self, tmp_path):
        _, text = invoke(tmp_path, ["deficit", "--volumes", "2..4", "--format", "csv"])
        lines = text.splitlines()
        assert lines[1].startswith("V,") and len(lines) == 5


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        assert main(["born", "--p", "0.5,0.6", "--n", "10"]) == 2
        assert main(["count"]) == 2
        assert main(["collapse", "--seed", "-1"]) == 2

    def test_no_subcommand(self, capsys):
        assert main([]) == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["count", "--input", str(tmp_path / "missing.json")]) == 3

    def test_malformed_file(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        d = complex_to_description(merge_split())
        d["vertices"][0]["t"] = "zero"
        p.write_text(json.dumps(d))
        assert main(["nullspace", "--input", str(p)]) == 3

    def test_budget(self, tmp_path, capsys):
        p = tmp_path / "toy.json"
        dump_complex(toy_collapsed(6), p)
        assert main(["count", "--input", str(p), "--w-T", "30", "--budget", "50"]) == 4

    def test_infeasible(self, tmp_path, capsys):
        assert main(["check", "--input", MERGE_SPLIT, "--w-T", "1"]) == 5
        out = tmp_path / "o.json"
        assert main(["check", "--input", MERGE_SPLIT_W, "--weights", "1,1,2,1,1,1", "--output", str(out)]) == 5
        assert json.loads(out.read_text())["result"]["status"] == "FAIL"

    def test_zero_microstates(self, capsys):
        assert main(["count", "--input", MERGE_SPLIT, "--w-T", "1"]) == 5


class TestDefaults:
    def test_committed_file_is_current(self, capsys):
        assert main(["--dump-defaults"]) == 0
        dumped = json.loads(capsys.readouterr().out)
        assert dumped == json.loads((ROOT / "defaults.json").read_text())

    def test_every_parameter_listed(self):
        d = defaults()
        for sub, params in PARAMS.items():
            assert set(d[sub]) == {p.name for p in params}

    def test_help_mentions_defaults(self, capsys):
        with pytest.raises(SystemExit):
            main(["propagate", "--help"])
        out = capsys.readouterr().out
        assert "--hbar" in out and "(default: 1.0)" in out

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError):
            RunConfig("born", {"nope": 1})

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
        assert __version__ in capsys.readouterr().out
