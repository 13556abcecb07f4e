import json

import numpy as np
import pytest

from baseselect import SelectionProblem, SyntheticWorldConfig, generate_synthetic_world
from baseselect.cli import main
from baseselect.errors import ParseError
from baseselect.io import (
    RunReport,
    parse_embeddings_csv,
    parse_id_list,
    parse_matrix_csv,
    parse_samples_csv,
    write_embeddings_csv,
    write_matrix_csv,
)
from instances import matrix_from


def write(path, text):
    path.write_text(text)
    return path


class TestEmbeddingsCsv:
    def test_basic(self, tmp_path):
        table = parse_embeddings_csv(write(tmp_path / "e.csv", "id,v1,v2\na,1,0\nb,0,1\n"))
        assert table.ids == ("a", "b") and table.dim == 2

    def test_duplicate_names_id(self, tmp_path):
        with pytest.raises(ParseError, match="'a'") as exc:
            parse_embeddings_csv(write(tmp_path / "e.csv", "id,v1\na,1\nb,2\na,3\n"))
        assert exc.value.line == 4

    def test_empty(self, tmp_path):
        with pytest.raises(ParseError, match="no data rows"):
            parse_embeddings_csv(write(tmp_path / "e.csv", ""))
        with pytest.raises(ParseError, match="no data rows"):
            parse_embeddings_csv(write(tmp_path / "h.csv", "id,v1\n"))

    def test_wrong_arity(self, tmp_path):
        with pytest.raises(ParseError, match="expected 3 fields") as exc:
            parse_embeddings_csv(write(tmp_path / "e.csv", "id,v1,v2\na,1,0\nb,0\n"))
        assert exc.value.line == 3 and str(exc.value).endswith(":3: expected 3 fields, got 2")

    def test_non_numeric(self, tmp_path):
        with pytest.raises(ParseError, match="'x'") as exc:
            parse_embeddings_csv(write(tmp_path / "e.csv", "id,v1\na,x\n"))
        assert exc.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="does not exist"):
            parse_embeddings_csv(tmp_path / "nope.csv")

    def test_round_trip_is_exact(self, tmp_path):
        base, _ = generate_synthetic_world(SyntheticWorldConfig(seed=5))
        write_embeddings_csv(base, tmp_path / "b.csv")
        back = parse_embeddings_csv(tmp_path / "b.csv")
        assert back.ids == base.ids
        np.testing.assert_array_equal(back.vectors, base.vectors)


class TestMatrixCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        mat = matrix_from(rng.uniform(-1, 1, (5, 3)))
        write_matrix_csv(mat, tmp_path / "m.csv")
        back = parse_matrix_csv(tmp_path / "m.csv")
        assert back.base_ids == mat.base_ids and back.novel_ids == mat.novel_ids
        np.testing.assert_array_equal(back.values, mat.values)

    def test_sorted_on_read(self, tmp_path):
        back = parse_matrix_csv(write(tmp_path / "m.csv", "id,y,x\nb,0.1,0.2\na,0.3,0.4\n"))
        assert back.base_ids == ("a", "b") and back.novel_ids == ("x", "y")
        np.testing.assert_array_equal(back.values, [[0.4, 0.3], [0.2, 0.1]])

    def test_duplicate_row(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate"):
            parse_matrix_csv(write(tmp_path / "m.csv", "id,n\na,0.1\na,0.2\n"))


class TestSmallParsers:
    def test_samples(self, tmp_path):
        rows = parse_samples_csv(write(tmp_path / "s.csv", "acc,x1,x2\n0.5,0.7,0.2\n"))
        assert rows == [(0.5, 0.7, 0.2)]

    def test_samples_header(self, tmp_path):
        with pytest.raises(ParseError, match="header"):
            parse_samples_csv(write(tmp_path / "s.csv", "a,b,c\n1,2,3\n"))

    def test_id_list(self, tmp_path):
        assert parse_id_list(None) is None
        assert parse_id_list("a, b,,c") == ("a", "b", "c")
        assert parse_id_list("@" + str(write(tmp_path / "ids.txt", "x\n\ny\n"))) == ("x", "y")


@pytest.fixture
def matrix_file(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "sims.csv"
    write_matrix_csv(matrix_from(rng.uniform(0, 1, (10, 3))), path)
    return path


@pytest.fixture
def world(tmp_path):
    out = tmp_path / "world"
    assert main(["simgen", "--clusters", "4", "--classes-per-cluster", "10", "--novel-classes", "5",
                 "--seed", "2", "--out", str(out)]) == 0
    return out


def run(argv, capsys):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCli:
    def test_simgen(self, world):
        assert len(parse_embeddings_csv(world / "base.csv").ids) == 40
        assert len(parse_embeddings_csv(world / "novel.csv").ids) == 5

    def test_select_writes_report(self, matrix_file, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run(["select", "--matrix", matrix_file, "--m", 3, "--k", 2,
                               "--algorithm", "greedy-target", "--out", out], capsys)
        assert code == 0
        report = RunReport.read(out / "report.json")
        assert report.result.algorithm == "greedy-target"
        assert (out / "chosen.csv").read_text().splitlines()[0] == "id"
        assert json.loads(stdout)["result"]["chosen"] == list(report.result.chosen)

    def test_report_round_trip(self, matrix_file, tmp_path, capsys):
        out = tmp_path / "run"
        run(["select", "--matrix", matrix_file, "--m", 4, "--k", 2, "--lambda", 0.3,
             "--algorithm", "continuous-double", "--steps", 20, "--out", out], capsys)
        report = RunReport.read(out / "report.json")
        assert RunReport.from_json(report.to_json()) == report
        prob = SelectionProblem(parse_matrix_csv(matrix_file), m=report.problem["m"], k=report.problem["k"],
                                lam=report.problem["lam"])
        assert prob.value_of(prob.indices(report.result.chosen)) == pytest.approx(report.result.objective,
                                                                                   abs=1e-12)

    def test_deterministic_chosen_csv(self, world, tmp_path, capsys):
        texts = []
        for name in ("a", "b"):
            run(["select", "--embeddings", world / "base.csv", "--novel-embeddings", world / "novel.csv",
                 "--m", 5, "--lambda", 0.2, "--algorithm", "random-greedy", "--seed", 7,
                 "--out", tmp_path / name], capsys)
            texts.append((tmp_path / name / "chosen.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_auto_small_budget_with_diversity(self, tmp_path, capsys):
        base, novel = generate_synthetic_world(SyntheticWorldConfig(clusters=4, classes_per_cluster=100,
                                                                    novel_classes=3, seed=1))
        write_embeddings_csv(base, tmp_path / "base.csv")
        write_embeddings_csv(novel, tmp_path / "novel.csv")
        code, stdout, _ = run(["select", "--auto", "--embeddings", tmp_path / "base.csv",
                               "--novel-embeddings", tmp_path / "novel.csv",
                               "--m", 20, "--lambda", 0.2], capsys)
        assert code == 0
        report = json.loads(stdout)
        assert report["result"]["algorithm"] == "random-greedy"
        assert "algorithm_choice" in report["diagnostics"]

    def test_oracle_dominates_select(self, matrix_file, tmp_path, capsys):
        _, oracle, _ = run(["oracle", "--matrix", matrix_file, "--m", 3, "--k", 2], capsys)
        for alg in ("greedy-target", "random-greedy", "domsim", "random"):
            _, sel, _ = run(["select", "--matrix", matrix_file, "--m", 3, "--k", 2, "--algorithm", alg], capsys)
            assert json.loads(sel)["result"]["objective"] <= json.loads(oracle)["result"]["objective"] + 1e-12

    def test_regress_noiseless(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        lines = ["acc,x1,x2"]
        for _ in range(12):
            x1, x2 = (float(v) for v in rng.random(2))
            lines.append(f"{2 * x1 - x2 + 0.5!r},{x1!r},{x2!r}")
        data = write(tmp_path / "s.csv", "\n".join(lines) + "\n")
        code, _, _ = run(["regress", "--data", data, "--out", tmp_path], capsys)
        fit = json.loads((tmp_path / "regression.json").read_text())
        assert code == 0 and fit["r_squared"] == pytest.approx(1.0, abs=1e-10)

    def test_verify(self, matrix_file, tmp_path, capsys):
        code, stdout, _ = run(["verify", "--matrix", matrix_file, "--m", 2, "--k", 2, "--trials", 300], capsys)
        assert code == 0 and json.loads(stdout)["ok"] is True

    def test_certify(self, matrix_file, tmp_path, capsys):
        code, _, _ = run(["certify", "--matrix", matrix_file, "--m", 4, "--algorithm", "greedy-target",
                          "--out", tmp_path], capsys)
        cert = json.loads((tmp_path / "certificate.json").read_text())["certificate"]
        assert code == 0 and cert["satisfied"] is True

    def test_bench(self, world, tmp_path, capsys):
        code, stdout, _ = run(["bench", "--embeddings", world / "base.csv", "--novel-embeddings",
                               world / "novel.csv", "--m-values", "2,4", "--algorithms",
                               "greedy-target,random,kmedoids", "--seeds", 2, "--out", tmp_path], capsys)
        assert code == 0
        rows = (tmp_path / "bench.csv").read_text().splitlines()
        assert rows[0].startswith("m,k,lambda,algorithm,seed,objective")
        assert len(rows) == 1 + 2 * (1 + 2 + 2)

    def test_domain_error_exit_one(self, matrix_file, capsys):
        code, _, err = run(["select", "--matrix", matrix_file, "--m", 3, "--lambda", 0.2,
                            "--algorithm", "greedy-novel"], capsys)
        assert code == 1 and "lambda" in err

    def test_parse_error_exit_one(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.csv", "id,v1\na,1\na,2\n")
        code, _, err = run(["select", "--embeddings", bad, "--novel", "a", "--m", 1], capsys)
        assert code == 1 and "duplicate" in err

    @pytest.mark.parametrize("argv", [["frobnicate"], ["select", "--bogus"], ["select", "--matrix", "x"], []])
    def test_usage_error_exit_two(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == 2 and "usage" in err
