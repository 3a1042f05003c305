import dataclasses

import numpy as np
import pytest

from taskcascade.budget import BudgetAllocation, uniform_default
from taskcascade.cascade import (
    ExperimentConfig,
    run_cascade,
    run_experiment,
    run_individual,
    run_method,
)
from taskcascade.errors import ConfigError
from taskcascade.graph import depths, root_tree, star_tree
from taskcascade.linmodel import contraction_rate, lambda_max
from taskcascade.tasks import SyntheticConfig, TaskCollection, TaskDataset
from taskcascade.theory import PathSpec, path_bound

from conftest import make_collection


def noiseless_task(rng, theta, n=32, n_test=16, task_id="t"):
    d = len(theta)
    X = rng.standard_normal((n, d))
    Xt = rng.standard_normal((n_test, d))
    return TaskDataset(task_id, X, X @ theta, Xt, Xt @ theta)


def chain_tree(T):
    return root_tree([(i, i + 1) for i in range(T - 1)], 0)


class TestRunCascade:
    def test_single_noiseless_task_converges(self, rng):
        theta = rng.standard_normal(4)
        collection = TaskCollection([noiseless_task(rng, theta, task_id="task0")], 4)
        tree = star_tree(1, 0)
        result = run_cascade(collection, tree, BudgetAllocation({0: 300}, 300))
        assert result.test_rmse[0] < 1e-6

    def test_zero_budget_child_inherits_exactly(self, rng):
        theta = rng.standard_normal(3)
        t0 = noiseless_task(rng, theta, task_id="task0")
        t1 = TaskDataset("task1", t0.X_train, t0.y_train, t0.X_test, t0.y_test)
        collection = TaskCollection([t0, t1], 3)
        result = run_cascade(collection, chain_tree(2),
                             BudgetAllocation({0: 25, 1: 0}, 25))
        assert np.array_equal(result.params[0], result.params[1])

    def test_three_task_chain_within_theory_bound(self):
        rng = np.random.default_rng(41)
        base = rng.standard_normal(5)
        direction = rng.standard_normal(5)
        direction /= np.linalg.norm(direction)
        thetas = [base + i * 0.8 * direction for i in range(3)]
        tasks = [noiseless_task(rng, th, task_id=f"task{i}")
                 for i, th in enumerate(thetas)]
        collection = TaskCollection(tasks, 5)
        budgets = BudgetAllocation({0: 12, 1: 7, 2: 9}, 28)
        result = run_cascade(collection, chain_tree(3), budgets)

        rhos = [contraction_rate(t.X_train, 1.0 / lambda_max(t.X_train))
                for t in tasks]
        spec = PathSpec(
            rhos=rhos[1:],
            budgets=[7, 9],
            deltas=[float(np.linalg.norm(thetas[i] - thetas[i - 1])) for i in (1, 2)],
            init_error=float(np.linalg.norm(result.params[0] - thetas[0])),
        )
        leaf_error = np.linalg.norm(result.params[2] - thetas[2])
        assert leaf_error <= path_bound(spec) + 1e-6

    def test_total_steps_audited(self, rng):
        collection = make_collection(rng, T=5, n=20, d=3)
        tree = star_tree(5, 1)
        budgets = uniform_default(tree, 73)
        result = run_cascade(collection, tree, budgets)
        assert result.steps_executed == 73

    def test_schedule_independence(self, rng):
        collection = make_collection(rng, T=6, n=20, d=3)
        tree = root_tree([(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)], 0)
        budgets = uniform_default(tree, 60)
        bfs = run_cascade(collection, tree, budgets)
        dfs_order = [0, 2, 5, 1, 4, 3]
        dfs = run_cascade(collection, tree, budgets, order=dfs_order)
        for v in range(6):
            assert np.array_equal(bfs.params[v], dfs.params[v])

    def test_invalid_order_rejected(self, rng):
        collection = make_collection(rng, T=3, n=12, d=3)
        tree = chain_tree(3)
        budgets = uniform_default(tree, 30)
        with pytest.raises(ConfigError):
            run_cascade(collection, tree, budgets, order=[2, 1, 0])

    def test_test_data_never_influences_training(self, rng):
        collection = make_collection(rng, T=4, n=20, d=3)
        swapped = TaskCollection(
            [
                TaskDataset(t.id, t.X_train, t.y_train,
                            rng.standard_normal((9, 3)), rng.standard_normal(9))
                for t in collection
            ],
            3,
        )
        tree = star_tree(4, 0)
        budgets = uniform_default(tree, 40)
        a = run_cascade(collection, tree, budgets)
        b = run_cascade(swapped, tree, budgets)
        for v in range(4):
            assert np.array_equal(a.params[v], b.params[v])


class TestRunIndividual:
    def test_uniform_budget_split(self, rng):
        collection = make_collection(rng, T=4, n=16, d=3)
        budgets = BudgetAllocation({i: 5 for i in range(4)}, 20)
        result = run_individual(collection, budgets)
        assert result.tree is None
        assert result.steps_executed == 20

    def test_noiseless_convergence(self, rng):
        thetas = [rng.standard_normal(3) for _ in range(3)]
        tasks = [noiseless_task(rng, th, n=40, task_id=f"task{i}")
                 for i, th in enumerate(thetas)]
        collection = TaskCollection(tasks, 3)
        budgets = BudgetAllocation({i: 200 for i in range(3)}, 600)
        result = run_individual(collection, budgets)
        assert all(v < 1e-6 for v in result.test_rmse.values())

    def test_matches_manual_gradient_descent(self, rng):
        collection = make_collection(rng, T=5, n=18, d=4)
        budgets = BudgetAllocation({i: 11 for i in range(5)}, 55)
        result = run_individual(collection, budgets)
        for i, task in enumerate(collection):
            eta = 1.0 / lambda_max(task.X_train)
            theta = np.zeros(4)
            for _ in range(11):
                theta = theta - eta * (task.X_train.T @ (task.X_train @ theta - task.y_train))
            assert np.array_equal(result.params[i], theta)


class TestRunMethod:
    def test_star_is_depth_one(self, rng):
        collection = make_collection(rng, T=5, n=16, d=3)
        # data_path is a placeholder: run_method takes the collection directly
        config = ExperimentConfig(method="star", budget=50, data_path="x")
        result = run_method(config, collection)
        assert max(depths(result.tree).values()) <= 1

    def test_mst_identical_tasks_leaf_matches_root(self, rng):
        base = noiseless_task(rng, rng.standard_normal(3), n=60, task_id="task0")
        tasks = [TaskDataset(f"task{i}", base.X_train, base.y_train,
                             base.X_test, base.y_test) for i in range(4)]
        collection = TaskCollection(tasks, 3)
        config = ExperimentConfig(method="mst", metric_name="gradient", budget=400,
                                  data_path="x")
        result = run_method(config, collection)
        root = result.tree.root
        leaves = [v for v in range(4) if v not in set(result.tree.parent.values())]
        for leaf in leaves:
            assert abs(result.test_rmse[leaf] - result.test_rmse[root]) < 1e-6

    def test_random_tree_deterministic_given_seed(self, rng):
        collection = make_collection(rng, T=6, n=16, d=3)
        config = ExperimentConfig(method="random_tree", budget=60, data_path="x",
                                  seed=99)
        a = run_method(config, collection)
        b = run_method(config, collection)
        assert a.tree.parent == b.tree.parent
        assert a.test_rmse == b.test_rmse

    def test_mst_requires_metric(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(method="mst", budget=10, data_path="x").validate()

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(method="magic", budget=10, data_path="x").validate()

    def test_metric_recorded_on_result(self, rng):
        collection = make_collection(rng, T=3, n=16, d=3)
        config = ExperimentConfig(method="star", budget=30, data_path="x")
        assert run_method(config, collection).metric_name == "gradient"
        config = ExperimentConfig(method="individual", budget=30, data_path="x")
        assert run_method(config, collection).metric_name == "none"

    def test_gaussian_init_changes_underfit_params_deterministically(self, rng):
        collection = make_collection(rng, T=3, n=16, d=3)
        zeros = ExperimentConfig(method="star", budget=3, data_path="x", seed=4)
        gauss = dataclasses.replace(zeros, gaussian_init=True)
        a = run_method(zeros, collection)
        b = run_method(gauss, collection)
        c = run_method(gauss, collection)
        assert not np.array_equal(a.params[0], b.params[0])
        for v in range(3):
            assert np.array_equal(b.params[v], c.params[v])


class TestRunExperiment:
    def synthetic(self, **overrides):
        base = dict(num_tasks=5, dim=4, n_train=24, n_test=12, num_clusters=1,
                    tau_between=0.0, tau_within=0.5, noise_sigma=0.1, seed=0)
        base.update(overrides)
        return SyntheticConfig(**base)

    def test_single_seed_mean_equals_run_mean(self):
        config = ExperimentConfig(method="star", budget=50, num_seeds=1,
                                  synthetic=self.synthetic(), seed=5)
        report = run_experiment(config)
        assert report.mean_rmse == report.results[0].mean_test_rmse()
        assert report.std_rmse == 0.0

    def test_degenerate_regime_all_methods_near_zero(self):
        synth = self.synthetic(tau_within=0.0, noise_sigma=0.0)
        for method, metric in [("individual", None), ("star", None),
                               ("random_tree", None), ("mst", "target")]:
            config = ExperimentConfig(method=method, metric_name=metric, budget=600,
                                      num_seeds=2, synthetic=synth, seed=3)
            report = run_experiment(config)
            assert report.mean_rmse < 1e-4, method

    def test_replicates_differ_but_rerun_is_identical(self):
        config = ExperimentConfig(method="mst", metric_name="gradient", budget=60,
                                  num_seeds=3, synthetic=self.synthetic(), seed=11)
        a = run_experiment(config)
        b = run_experiment(config)
        assert a.per_seed_mean_rmse == b.per_seed_mean_rmse
        assert len(set(a.per_seed_mean_rmse)) == 3

    def test_parallel_jobs_identical_output(self):
        config = ExperimentConfig(method="star", budget=50, num_seeds=4,
                                  synthetic=self.synthetic(), seed=13)
        serial = run_experiment(config, jobs=1)
        parallel = run_experiment(config, jobs=3)
        assert serial.per_seed_mean_rmse == parallel.per_seed_mean_rmse

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(method="star", budget=50))  # no data
        with pytest.raises(ConfigError):
            ExperimentConfig(method="star", budget=50, num_seeds=0,
                             synthetic=self.synthetic()).validate()
