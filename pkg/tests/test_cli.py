import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from eivlab.cli import EXIT_AXIOM, EXIT_INPUT, EXIT_OK, main

DESIGNS = Path(__file__).resolve().parent.parent / "designs"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


class TestEvaluate:
    def test_discrete_simplex(self, capsys):
        code, out, err = run(["evaluate", DESIGNS / "discrete_abc.json", "--exact"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert abs(doc["value"] - math.log(3)) < 1e-12 and doc["exact"]
        assert "value =" in err

    def test_quiet_and_out(self, tmp_path, capsys):
        target = tmp_path / "r.json"
        code, out, err = run(["evaluate", DESIGNS / "trivial_abc.json", "--quiet", "--out", target], capsys)
        assert code == EXIT_OK and out == "" and err == ""
        assert json.loads(target.read_text())["value"] == 0.0

    def test_compiled_battery_under_seeded_prior(self, tmp_path, capsys):
        code, out, _ = run(["compile-batch", DESIGNS / "battery_a.json"], capsys)
        assert code == EXIT_OK and len(json.loads(out)["menu"]) == 8
        design = tmp_path / "a.json"
        design.write_text(out)
        argv = ["evaluate", design, "--prior", DESIGNS / "prior_uniform.json", "--samples", "20000", "--quiet"]
        doc = json.loads(run(argv, capsys)[1])
        # the prior file enables the exact path for three outcomes
        assert doc["exact"] and doc["value"] == pytest.approx(math.log(6), abs=1e-12)

    def test_monte_carlo_needs_seed(self, tmp_path, capsys):
        prior = write(tmp_path / "p.json", {"kind": "uniform", "l": 4})
        design = write(tmp_path / "d.json", {"menu": [[1, 0, 0, 0], [0, 1, 0, 0]]})
        code, _, err = run(["evaluate", design, "--prior", prior], capsys)
        assert code == EXIT_INPUT and "seed" in err
        code, out, _ = run(["evaluate", design, "--prior", prior, "--seed", "3", "--samples", "5000"], capsys)
        assert code == EXIT_OK and json.loads(out)["std_error"] > 0

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        prior = write(tmp_path / "p.json", {"kind": "uniform", "l": 4, "seed": 8})
        design = write(tmp_path / "d.json", {"menu": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0.5, 0.5]]})
        argv = ["evaluate", design, "--prior", prior, "--samples", "10000", "--quiet"]
        first = run(argv, capsys)[1]
        assert run(argv, capsys)[1] == first

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["evaluate", tmp_path / "none.json"], capsys)
        assert code == EXIT_INPUT and "cannot read" in err

    def test_bad_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code, _, err = run(["evaluate", bad], capsys)
        assert code == EXIT_INPUT and "invalid JSON" in err

    def test_exact_on_four_outcomes(self, tmp_path, capsys):
        prior = write(tmp_path / "p.json", {"kind": "uniform", "l": 4, "seed": 1})
        design = write(tmp_path / "d.json", {"menu": [[1, 0, 0, 0], [0, 1, 0, 0]]})
        code, _, _ = run(["evaluate", design, "--prior", prior, "--exact"], capsys)
        assert code == EXIT_INPUT


class TestRank:
    def test_ties_broken_by_name(self, tmp_path, capsys):
        for name in ("b.json", "a.json"):
            shutil.copy(DESIGNS / "discrete_abc.json", tmp_path / name)
        shutil.copy(DESIGNS / "trivial_abc.json", tmp_path / "c.json")
        code, out, _ = run(["rank", tmp_path], capsys)
        assert code == EXIT_OK
        rows = out.strip().splitlines()
        assert rows[0] == "rank,file,value,std_error"
        assert [r.split(",")[1] for r in rows[1:]] == ["a.json", "b.json", "c.json"]

    def test_empty_directory(self, tmp_path, capsys):
        code, out, _ = run(["rank", tmp_path], capsys)
        assert code == EXIT_OK and out == "rank,file,value,std_error\n"

    def test_equivalent_batteries_tie(self, tmp_path, capsys):
        for name in ("battery_a.json", "battery_b.json"):
            code, out, _ = run(["compile-batch", DESIGNS / name], capsys)
            (tmp_path / name).write_text(out)
        code, out, _ = run(["rank", tmp_path], capsys)
        values = [float(r.split(",")[2]) for r in out.strip().splitlines()[1:]]
        assert abs(values[0] - values[1]) < 1e-9
        assert values[0] == pytest.approx(math.log(6), abs=1e-12)

    def test_not_a_directory(self, capsys):
        code, _, _ = run(["rank", DESIGNS / "discrete_abc.json"], capsys)
        assert code == EXIT_INPUT


class TestCompile:
    def test_adaptive(self, capsys):
        code, out, _ = run(["compile-adaptive", DESIGNS / "adaptive_two_stage.json"], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK and len(doc["partition"]) == 4

    def test_game(self, capsys):
        code, out, _ = run(["compile-game", DESIGNS / "game_in_out.json"], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK and [a["weight"] for a in doc["atoms"]] == [0.5, 0.5]
        assert "strategies" in doc["atoms"][0]["experiment"]

    def test_realize(self, capsys):
        code, out, _ = run(["realize-partition", DESIGNS / "target_six_cells.json"], capsys)
        assert code == EXIT_OK and len(json.loads(out)["partition"]) == 6

    def test_batch_needs_menus(self, tmp_path, capsys):
        code, _, _ = run(["compile-batch", write(tmp_path / "x.json", {"menus": []})], capsys)
        assert code == EXIT_INPUT


class TestAxioms:
    def test_entropy_subset(self, capsys):
        code, out, err = run(["axioms", "--checks", "monotonicity,belief_consistency", "--trials", "5"], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK
        assert [r["verdict"] for r in doc["reports"]] == ["pass", "pass"]
        assert "monotonicity" in err

    def test_strict_failure_exit_code(self, capsys):
        argv = ["axioms", "--functional", "negated-entropy", "--checks", "monotonicity", "--trials", "5", "--strict"]
        code, out, _ = run(argv, capsys)
        assert code == EXIT_AXIOM
        assert json.loads(out)["reports"][0]["minimal_witness"] is not None

    def test_unknown_check(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["axioms", "--checks", "bogus"])
        assert info.value.code == 2


class TestPlot:
    def test_svg(self, tmp_path, capsys):
        code, out, _ = run(["plot", DESIGNS / "discrete_abc.json", "--title", "a<b"], capsys)
        assert code == EXIT_OK
        assert out.startswith("<svg") and out.rstrip().endswith("</svg>")
        assert "a&lt;b" in out and "0.333" in out

    def test_four_outcomes_rejected(self, tmp_path, capsys):
        design = write(tmp_path / "d.json", {"menu": [[1, 0, 0, 0], [0, 1, 0, 0]]})
        prior = write(tmp_path / "p.json", {"kind": "uniform", "l": 4, "seed": 1})
        code, _, _ = run(["plot", design, "--prior", prior], capsys)
        assert code == EXIT_INPUT


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "eivlab", "evaluate", str(DESIGNS / "discrete_abc.json"), "--quiet"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["value"] == pytest.approx(math.log(3))
