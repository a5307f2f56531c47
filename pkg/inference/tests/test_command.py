import io
import json

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

# zero mean, 1/n covariance [[2, 1], [1, 1]]
TWO_BY_TWO = "a,b\n2,1\n0,1\n0,-1\n-2,-1\n"

THREE_VARIABLES = (
    "condition,a,b,c\n"
    "x,1,2,0\nx,2,0,1\nx,0,1,3\nx,3,1,1\nx,2,3,2\n"
    "y,1,0,1\ny,0,2,2\ny,2,2,0\ny,1,3,1\ny,3,1,2\n"
)


def run(*args):
    out, err = io.StringIO(), io.StringIO()
    call_command("ggm", *args, stdout=out, stderr=err)
    return out.getvalue(), err.getvalue()


def read_frame(text):
    return pd.read_csv(io.StringIO(text), dtype={"source": str, "target": str})


def reported_auc(err):
    [line] = [line for line in err.splitlines() if line.startswith("AUC=")]
    return float(line.removeprefix("AUC="))


@pytest.fixture
def two_by_two_csv(write_csv):
    return str(write_csv("data.csv", TWO_BY_TWO))


class TestModelCommands:
    def test_ggcem_edge(self, two_by_two_csv):
        out, _ = run(
            "ggcem", two_by_two_csv, "--center", "none", "--rho", "1e-8", "--orientation", "sensing"
        )
        frame = read_frame(out)
        assert list(frame.columns) == ["source", "target", "weight", "sign_violation"]
        [row] = frame.itertuples(index=False)
        assert (row.source, row.target) == ("b", "a")
        assert row.weight == pytest.approx(1.5, abs=1e-6)

    def test_default_orientation_is_sending(self, two_by_two_csv):
        out, _ = run("ggcem", two_by_two_csv, "--center", "none", "--rho", "1e-8")
        [row] = read_frame(out).itertuples(index=False)
        assert (row.source, row.target) == ("a", "b")

    @pytest.mark.parametrize("kind", ["ggim", "ggim-bounded", "ggcem-ext"])
    def test_json_output(self, two_by_two_csv, kind):
        out, _ = run(kind, two_by_two_csv, "--format", "json", "--rho", "0.01")
        data = json.loads(out)
        assert data["names"] == ["a", "b"]
        assert data["summary"]["model"] == kind

    def test_extended_reports_support_agreement(self, two_by_two_csv):
        out, _ = run("ggcem-ext", two_by_two_csv, "--format", "json", "--rho", "1e-8")
        assert 0.0 <= json.loads(out)["summary"]["support_agreement"] <= 1.0

    def test_bounded_reports_bound(self, write_csv):
        path = write_csv("diag.csv", "a,b\n1,1\n-1,1\n1,-1\n-1,-1\n")
        _, err = run("ggim-bounded", str(path), "--rho", "0.01")
        assert "alpha=2" in err
        assert ": True" in err

    def test_rho_path_table(self, two_by_two_csv):
        out, _ = run("ggcem", two_by_two_csv, "--center", "none", "--rho-path", "10:1e-8:2log")
        frame = pd.read_csv(io.StringIO(out))
        assert list(frame.columns) == ["rho", "edges", "residual", "converged"]
        assert frame["edges"].tolist() == [0, 1]

    def test_target_edges(self, two_by_two_csv):
        out, err = run("ggcem", two_by_two_csv, "--center", "none", "--target-edges", "1")
        assert "edges=1" in err
        assert len(read_frame(out)) == 1

    def test_output_file(self, two_by_two_csv, tmp_path):
        target = tmp_path / "edges.dot"
        out, _ = run("ggcem", two_by_two_csv, "--format", "dot", "--output", str(target))
        assert out == ""
        assert target.read_text(encoding="utf-8").startswith("digraph G {")

    def test_condition_filter(self, write_csv):
        path = write_csv("data.csv", "condition,a,b\nx,1,2\nx,2,1\ny,1,1\ny,3,0\ny,0,2\n")
        out, _ = run("ggim", str(path), "--condition", "y", "--format", "json")
        assert json.loads(out)["names"] == ["a", "b"]


class TestExitCodes:
    def test_ragged_input(self, write_csv):
        path = write_csv("bad.csv", "a,b\n1,2\n3\n")
        with pytest.raises(CommandError) as info:
            run("ggim", str(path))
        assert info.value.returncode == 2

    def test_unknown_condition(self, two_by_two_csv):
        with pytest.raises(CommandError) as info:
            run("ggim", two_by_two_csv, "--condition", "nope")
        assert info.value.returncode == 2

    def test_singular_covariance(self, write_csv):
        path = write_csv("copy.csv", "a,b\n1,1\n2,2\n4,4\n")
        with pytest.raises(CommandError) as info:
            run("ggcem", str(path))
        assert info.value.returncode == 3

    def test_missing_gold(self, write_csv, two_by_two_csv):
        gold = write_csv("gold.csv", "from,to\na,zz\n")
        with pytest.raises(CommandError) as info:
            run("hybrid", two_by_two_csv, "--gold", str(gold))
        assert info.value.returncode == 2


class TestHybrid:
    def test_scores_and_auc(self, write_csv):
        data = write_csv("data.csv", THREE_VARIABLES)
        gold = write_csv("gold.csv", "from,to\na,b\n")
        out, err = run("hybrid", str(data), "--rho", "0.01", "--gold", str(gold), "--format", "json")
        data = json.loads(out)
        assert data["kind"] == "score"
        assert data["names"] == ["a", "b", "c"]
        assert "AUC=" in err

    def test_auc_does_not_depend_on_orientation(self, write_csv):
        data = write_csv("data.csv", THREE_VARIABLES)
        gold = write_csv("gold.csv", "from,to\na,b\nb,c\n")
        aucs = {}
        for orientation in ("sending", "sensing"):
            _, err = run(
                "hybrid", str(data), "--rho", "0.01", "--gold", str(gold), "--orientation", orientation
            )
            aucs[orientation] = reported_auc(err)
        assert aucs["sensing"] == pytest.approx(aucs["sending"], abs=1e-12)

    def test_sensing_export_scored_by_roc(self, write_csv):
        data = write_csv("data.csv", THREE_VARIABLES)
        gold = write_csv("gold.csv", "from,to\na,b\nb,c\n")
        scores, err = run(
            "hybrid", str(data), "--rho", "0.01", "--gold", str(gold),
            "--orientation", "sensing", "--edge-tol", "0",
        )
        score_file = write_csv("scores.csv", scores)
        _, roc_err = run(
            "roc", str(score_file), "--gold", str(gold), "--data", str(data),
            "--orientation", "sensing",
        )
        assert reported_auc(roc_err) == pytest.approx(reported_auc(err), abs=1e-9)


class TestRoc:
    def test_sensing_file(self, write_csv):
        scores = write_csv("scores.csv", "source,target,weight\nb,a,0.9\na,b,0.1\n")
        gold = write_csv("gold.csv", "from,to\na,b\n")
        _, err = run("roc", str(scores), "--gold", str(gold), "--orientation", "sensing")
        assert "AUC=1" in err

    def test_points(self, write_csv):
        scores = write_csv("scores.csv", "source,target,weight\na,b,0.9\nb,a,0.1\n")
        gold = write_csv("gold.csv", "from,to\na,b\n")
        out, err = run("roc", str(scores), "--gold", str(gold))
        assert out.splitlines()[0] == "fpr,tpr,threshold"
        assert "AUC=1" in err

    def test_json(self, write_csv):
        scores = write_csv("scores.csv", "source,target,weight\na,b,0.1\nb,a,0.9\n")
        gold = write_csv("gold.csv", "from,to\na,b\n")
        out, _ = run("roc", str(scores), "--gold", str(gold), "--format", "json")
        assert json.loads(out)["auc"] == 0.0


class TestSimulate:
    @pytest.fixture
    def laplacian_csv(self, write_csv):
        return str(write_csv("laplacian.csv", "x,y\n1,0\n-0.5,1\n"))

    def test_rows_and_seed(self, laplacian_csv):
        arguments = ("simulate", laplacian_csv, "--n", "50", "--seed", "3", "--burn-in", "10")
        first, _ = run(*arguments)
        second, _ = run(*arguments)
        frame = pd.read_csv(io.StringIO(first))
        assert list(frame.columns) == ["x", "y"]
        assert len(frame) == 50
        assert first == second

    def test_condition_column(self, laplacian_csv):
        out, _ = run("simulate", laplacian_csv, "--n", "5", "--condition", "wt", "--burn-in", "1")
        frame = pd.read_csv(io.StringIO(out))
        assert list(frame.columns) == ["condition", "x", "y"]
        assert set(frame["condition"]) == {"wt"}

    def test_unstable(self, write_csv):
        path = write_csv("laplacian.csv", "x,y\n-1,0\n0,1\n")
        with pytest.raises(CommandError) as info:
            run("simulate", str(path))
        assert info.value.returncode == 3

    def test_not_square(self, write_csv):
        path = write_csv("laplacian.csv", "x,y\n1,0\n")
        with pytest.raises(CommandError) as info:
            run("simulate", str(path))
        assert info.value.returncode == 2
