import json

import numpy as np
import pytest

from taskcascade.cli import main
from taskcascade.distances import DistanceParams, compute_distance_matrix, load_distance_matrix
from taskcascade.tasks import load_collection


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture
def gen_config(tmp_path):
    return write_json(tmp_path / "gen.json", {
        "num_tasks": 4, "dim": 3, "n_train": 12, "n_test": 6,
        "num_clusters": 2, "tau_between": 1.0, "tau_within": 0.2,
        "noise_sigma": 0.1, "seed": 5,
    })


@pytest.fixture
def run_config(tmp_path):
    return write_json(tmp_path / "run.json", {
        "method": "mst", "metric_name": "gradient", "budget": 40, "num_seeds": 2,
        "seed": 9,
        "synthetic": {"num_tasks": 4, "dim": 3, "n_train": 12, "n_test": 6,
                      "num_clusters": 2, "tau_between": 1.0, "tau_within": 0.2,
                      "noise_sigma": 0.1},
    })


def tree_bytes(out):
    return {p.name: p.read_bytes() for p in out.iterdir() if p.name != "run_manifest.json"}


class TestGen:
    def test_success_and_outputs_exist(self, gen_config, tmp_path):
        out = tmp_path / "col"
        assert main(["gen", gen_config, "--out", str(out)]) == 0
        assert (out / "manifest.json").is_file()
        assert (out / "ground_truth.json").is_file()
        collection = load_collection(out)
        assert len(collection) == 4
        manifest = json.loads((out / "run_manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (out / name).is_file(), name

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["gen", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_invalid_config_exits_2(self, tmp_path):
        cfg = write_json(tmp_path / "bad.json", {"num_tasks": 0, "dim": 3})
        assert main(["gen", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_same_seed_byte_identical(self, gen_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["gen", gen_config, "--out", str(a)]) == 0
        assert main(["gen", gen_config, "--out", str(b)]) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_seed_flag_overrides_config(self, gen_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["gen", gen_config, "--out", str(a)])
        main(["gen", gen_config, "--out", str(b), "--seed", "123"])
        assert tree_bytes(a) != tree_bytes(b)


class TestDist:
    def test_single_task_matrix(self, tmp_path):
        cfg = write_json(tmp_path / "g.json", {"num_tasks": 1, "dim": 2,
                                               "n_train": 6, "n_test": 2, "seed": 1})
        col = tmp_path / "col"
        main(["gen", cfg, "--out", str(col)])
        out = tmp_path / "d.csv"
        assert main(["dist", str(col), "--metric", "target", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "task0"
        assert lines[1] == "0.0"

    def test_unknown_metric_exits_2_listing_names(self, gen_config, tmp_path, capsys):
        col = tmp_path / "col"
        main(["gen", gen_config, "--out", str(col)])
        code = main(["dist", str(col), "--metric", "bogus", "--out", str(tmp_path / "d.csv")])
        assert code == 2
        assert "gradient" in capsys.readouterr().err

    def test_reload_equals_in_memory(self, gen_config, tmp_path):
        col_dir = tmp_path / "col"
        main(["gen", gen_config, "--out", str(col_dir)])
        out = tmp_path / "d.csv"
        assert main(["dist", str(col_dir), "--metric", "model", "--out", str(out)]) == 0
        collection = load_collection(col_dir)
        expected = compute_distance_matrix(collection, "model", DistanceParams())
        loaded = load_distance_matrix(out, "model")
        assert np.array_equal(loaded.values, expected.values)

    def test_works_without_test_csvs(self, gen_config, tmp_path):
        # distance and tree phases must never touch test splits
        col = tmp_path / "col"
        main(["gen", gen_config, "--out", str(col)])
        with_test = tmp_path / "with.csv"
        main(["dist", str(col), "--metric", "gradient", "--out", str(with_test)])
        for p in col.glob("*_test.csv"):
            p.unlink()
        without_test = tmp_path / "without.csv"
        assert main(["dist", str(col), "--metric", "gradient",
                     "--out", str(without_test)]) == 0
        assert with_test.read_bytes() == without_test.read_bytes()


class TestTree:
    def make_matrix(self, gen_config, tmp_path, metric="gradient"):
        col = tmp_path / "col"
        main(["gen", gen_config, "--out", str(col)])
        dist = tmp_path / "d.csv"
        main(["dist", str(col), "--metric", metric, "--out", str(dist)])
        return dist

    @pytest.mark.parametrize("method", ["mst", "star", "random"])
    def test_methods_write_valid_trees(self, gen_config, tmp_path, method):
        dist = self.make_matrix(gen_config, tmp_path)
        out = tmp_path / f"{method}.csv"
        assert main(["tree", str(dist), "--method", method, "--out", str(out),
                     "--seed", "3"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# root=")
        assert lines[1] == "parent,child,edge_length"
        assert len(lines) == 2 + 3  # T-1 edges for T=4

    def test_works_without_test_csvs(self, gen_config, tmp_path):
        dist = self.make_matrix(gen_config, tmp_path)
        for p in (tmp_path / "col").glob("*_test.csv"):
            p.unlink()
        dist2 = tmp_path / "d2.csv"
        main(["dist", str(tmp_path / "col"), "--metric", "gradient", "--out", str(dist2)])
        out = tmp_path / "t.csv"
        assert main(["tree", str(dist2), "--method", "mst", "--out", str(out)]) == 0


class TestRun:
    def test_report_files_written(self, run_config, tmp_path):
        out = tmp_path / "run"
        assert main(["run", run_config, "--out", str(out), "--jobs", "1"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["num_seeds"] == 2
        assert len(report["per_seed_mean_rmse"]) == 2
        assert (out / report["per_task_csv"]).is_file()
        assert (out / report["tree_csv"]).is_file()
        header = (out / "per_task.csv").read_text().splitlines()[0]
        assert header == "seed,task_id,test_rmse,budget,depth"
        manifest = json.loads((out / "run_manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (out / name).is_file()

    def test_byte_identical_reruns_any_jobs(self, run_config, tmp_path):
        outs = []
        for name, jobs in (("r1", "1"), ("r2", "1"), ("r4", "2")):
            out = tmp_path / name
            assert main(["run", run_config, "--out", str(out), "--jobs", jobs]) == 0
            outs.append(tree_bytes(out))
        assert outs[0] == outs[1] == outs[2]

    def test_individual_has_no_tree_file(self, tmp_path):
        cfg = write_json(tmp_path / "run.json", {
            "method": "individual", "budget": 20, "num_seeds": 1, "seed": 2,
            "synthetic": {"num_tasks": 3, "dim": 2, "n_train": 8, "n_test": 4},
        })
        out = tmp_path / "run"
        assert main(["run", cfg, "--out", str(out), "--jobs", "1"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["tree_csv"] is None
        assert not (out / "tree.csv").exists()

    def test_total_steps_equals_budget_times_seeds(self, run_config, tmp_path):
        out = tmp_path / "run"
        main(["run", run_config, "--out", str(out), "--jobs", "1"])
        report = json.loads((out / "report.json").read_text())
        assert report["total_steps"] == 40 * 2

    def test_bad_config_exits_2(self, tmp_path):
        cfg = write_json(tmp_path / "bad.json", {"method": "mst", "budget": 10})
        assert main(["run", cfg, "--out", str(tmp_path / "o"), "--jobs", "1"]) == 2


class TestVerify:
    def test_noiseless_default_passes(self, tmp_path):
        cfg = write_json(tmp_path / "v.json", {
            "mode": "noiseless", "num_chains": 5, "length": 3, "dim": 4,
            "n": 16, "budget_per_node": 6, "spacing": 2.0, "seed": 4,
        })
        out = tmp_path / "verify.json"
        assert main(["verify", cfg, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc) == 5
        assert all(entry["satisfied"] for entry in doc)
        assert all(entry["empirical"] <= entry["bound"] + 1e-9 for entry in doc)

    def test_noisy_mode_exits_zero(self, tmp_path):
        cfg = write_json(tmp_path / "v.json", {
            "mode": "noisy", "num_chains": 2, "length": 2, "dim": 3, "n": 12,
            "budget_per_node": 5, "spacing": 1.0, "noise_sigma": 0.4,
            "noise_draws": 40, "seed": 6,
        })
        assert main(["verify", cfg, "--out", str(tmp_path / "out.json")]) == 0

    def test_malformed_config_exits_2(self, tmp_path):
        bad = tmp_path / "v.json"
        bad.write_text("{not json")
        assert main(["verify", str(bad), "--out", str(tmp_path / "o.json")]) == 2

    def test_unknown_mode_exits_2(self, tmp_path):
        cfg = write_json(tmp_path / "v.json", {"mode": "psychic", "length": 2})
        assert main(["verify", cfg, "--out", str(tmp_path / "o.json")]) == 2


class TestBench:
    def test_row_count_and_header(self, tmp_path):
        cfg = write_json(tmp_path / "b.json", {
            "methods": ["individual", "star"], "budgets": [30], "num_seeds": 2,
            "seed": 8,
            "synthetic": {"num_tasks": 3, "dim": 2, "n_train": 10, "n_test": 5},
        })
        out = tmp_path / "bench"
        assert main(["bench", cfg, "--out", str(out), "--jobs", "1"]) == 0
        lines = (out / "bench.csv").read_text().splitlines()
        assert lines[0] == "method,metric,B,seed,mean_rmse"
        assert len(lines) == 1 + 4  # 2 methods x 1 budget x 2 seeds

    def test_aggregate_matches_recomputation(self, tmp_path):
        from taskcascade.cascade import ExperimentConfig, run_experiment
        from taskcascade.tasks import SyntheticConfig

        synth = {"num_tasks": 3, "dim": 2, "n_train": 10, "n_test": 5,
                 "tau_within": 0.3, "noise_sigma": 0.1}
        cfg = write_json(tmp_path / "b.json", {
            "methods": ["mst"], "metrics": ["target"], "budgets": [25],
            "num_seeds": 3, "seed": 12, "synthetic": synth,
        })
        out = tmp_path / "bench"
        assert main(["bench", cfg, "--out", str(out), "--jobs", "1"]) == 0
        rows = (out / "bench.csv").read_text().splitlines()[1:]
        values = [float(r.split(",")[4]) for r in rows]

        report = run_experiment(ExperimentConfig(
            method="mst", metric_name="target", budget=25, num_seeds=3, seed=12,
            synthetic=SyntheticConfig(**synth),
        ))
        assert values == report.per_seed_mean_rmse
        assert np.mean(values) == pytest.approx(report.mean_rmse)

    def test_missing_methods_exits_2(self, tmp_path):
        cfg = write_json(tmp_path / "b.json", {"budgets": [10]})
        assert main(["bench", cfg, "--out", str(tmp_path / "o"), "--jobs", "1"]) == 2

    def test_rerun_byte_identical(self, tmp_path):
        cfg = write_json(tmp_path / "b.json", {
            "methods": ["star"], "budgets": [20, 30], "num_seeds": 2, "seed": 21,
            "synthetic": {"num_tasks": 3, "dim": 2, "n_train": 8, "n_test": 4},
        })
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["bench", cfg, "--out", str(a), "--jobs", "1"]) == 0
        assert main(["bench", cfg, "--out", str(b), "--jobs", "2"]) == 0
        assert (a / "bench.csv").read_bytes() == (b / "bench.csv").read_bytes()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
