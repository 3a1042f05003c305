"""Cascade execution, baselines, and multi-seed experiment aggregation.

A cascade walks a rooted tree in topological order, initializing every task
from its parent's refined parameters and refining it for its allocated
budget with a per-task step size of 1/lambda_max. Baselines reuse the same
refinement loop: ``individual`` trains every task from scratch, ``star`` and
``random_tree`` cascade over trivial or uninformed trees rooted at the
medoid of the distance matrix.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .budget import AllocationScheme, BudgetAllocation, allocate, split_uniform
from .distances import DistanceParams, METRIC_NAMES, compute_distance_matrix
from .errors import ConfigError, ShapeMismatchError, TaskCascadeError
from .graph import (
    RootedTree,
    depths,
    medoid,
    mst,
    random_spanning_tree,
    root_tree,
    save_tree,
    star_tree,
    topological_order,
)
from .linmodel import lambda_max, refine, rmse
from .seeding import derive_seed, substream
from .tasks import SyntheticConfig, TaskCollection, generate_synthetic, load_collection

METHODS = ("individual", "star", "random_tree", "mst")
DEFAULT_MEDOID_METRIC = "gradient"


@dataclass
class CascadeResult:
    """Refined parameters and evaluation metrics of one run."""

    params: dict[int, np.ndarray]
    test_rmse: dict[int, float]
    train_rmse: dict[int, float]
    tree: RootedTree | None  # None marks the no-transfer baseline
    budgets: BudgetAllocation
    metric_name: str
    seed: int
    wall_time: float
    task_ids: list[str] = field(default_factory=list)
    steps_executed: int = 0

    def mean_test_rmse(self) -> float:
        return float(np.mean(list(self.test_rmse.values())))


@dataclass
class ExperimentConfig:
    """Protocol knobs of a multi-seed experiment."""

    method: str
    budget: int
    metric_name: str | None = None
    scheme: AllocationScheme = field(default_factory=AllocationScheme)
    num_seeds: int = 1
    synthetic: SyntheticConfig | None = None
    data_path: str | None = None
    seed: int = 0
    distance_params: DistanceParams = field(default_factory=DistanceParams)
    gaussian_init: bool = False

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; valid: {METHODS}")
        if self.method == "mst" and self.metric_name is None:
            raise ConfigError("method 'mst' requires metric_name")
        if self.metric_name is not None and self.metric_name not in METRIC_NAMES:
            raise ConfigError(
                f"unknown metric {self.metric_name!r}; valid: {sorted(METRIC_NAMES)}"
            )
        if self.budget < 1:
            raise ConfigError("budget must be positive")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be positive")
        if (self.synthetic is None) == (self.data_path is None):
            raise ConfigError("exactly one of synthetic or data_path must be set")
        if self.synthetic is not None:
            self.synthetic.validate()


def _evaluate(
    collection: TaskCollection, params: dict[int, np.ndarray]
) -> tuple[dict[int, float], dict[int, float]]:
    test_rmse, train_rmse = {}, {}
    for i, task in enumerate(collection):
        if task.n_test == 0:
            raise ShapeMismatchError(f"task {task.id!r} has no test split to evaluate")
        test_rmse[i] = rmse(params[i], task.X_test, task.y_test)
        train_rmse[i] = rmse(params[i], task.X_train, task.y_train)
    return test_rmse, train_rmse


def _check_budgets(collection: TaskCollection, budgets: BudgetAllocation) -> None:
    if set(budgets.per_task) != set(range(len(collection))):
        raise ConfigError("budget allocation does not cover the collection")


def _valid_order(tree: RootedTree, order: list[int]) -> bool:
    position = {v: k for k, v in enumerate(order)}
    if len(position) != tree.size or tree.root not in position:
        return False
    return all(position[tree.parent[v]] < position[v] for v in tree.parent)


def run_cascade(
    collection: TaskCollection,
    tree: RootedTree,
    budgets: BudgetAllocation,
    theta_init: np.ndarray | None = None,
    order: list[int] | None = None,
) -> CascadeResult:
    """Execute one cascade over ``tree`` with the given budgets.

    The root's dummy parent is ``theta_init`` (zeros by default). ``order``
    may supply any topological order of the tree; results are identical for
    all of them since a task depends only on its parent's final parameters.
    """
    _check_budgets(collection, budgets)
    if order is None:
        order = topological_order(tree)
    elif not _valid_order(tree, order):
        raise ConfigError("order is not a topological order of the tree")
    if theta_init is None:
        theta_init = np.zeros(collection.dim)

    start = time.perf_counter()
    params: dict[int, np.ndarray] = {}
    steps = 0
    for v in order:
        parent_theta = params[tree.parent[v]] if v != tree.root else theta_init
        task = collection[v]
        b = budgets.per_task[v]
        eta = 1.0 / lambda_max(task.X_train)
        try:
            params[v] = refine(parent_theta, task.X_train, task.y_train, b, eta)
        except TaskCascadeError as exc:
            raise type(exc)(f"task {task.id!r}: {exc}") from exc
        steps += b
    test_rmse, train_rmse = _evaluate(collection, params)
    return CascadeResult(
        params=params,
        test_rmse=test_rmse,
        train_rmse=train_rmse,
        tree=tree,
        budgets=budgets,
        metric_name="",
        seed=0,
        wall_time=time.perf_counter() - start,
        task_ids=collection.ids,
        steps_executed=steps,
    )


def run_individual(
    collection: TaskCollection,
    budgets: BudgetAllocation,
    theta_init: np.ndarray | None = None,
) -> CascadeResult:
    """No-transfer baseline: every task refined from scratch on its own budget."""
    _check_budgets(collection, budgets)
    if theta_init is None:
        theta_init = np.zeros(collection.dim)
    start = time.perf_counter()
    params: dict[int, np.ndarray] = {}
    steps = 0
    for i, task in enumerate(collection):
        b = budgets.per_task[i]
        eta = 1.0 / lambda_max(task.X_train)
        try:
            params[i] = refine(theta_init, task.X_train, task.y_train, b, eta)
        except TaskCascadeError as exc:
            raise type(exc)(f"task {task.id!r}: {exc}") from exc
        steps += b
    test_rmse, train_rmse = _evaluate(collection, params)
    return CascadeResult(
        params=params,
        test_rmse=test_rmse,
        train_rmse=train_rmse,
        tree=None,
        budgets=budgets,
        metric_name="none",
        seed=0,
        wall_time=time.perf_counter() - start,
        task_ids=collection.ids,
        steps_executed=steps,
    )


def run_method(
    config: ExperimentConfig,
    collection: TaskCollection,
    seed: int | None = None,
) -> CascadeResult:
    """Dispatch one run of the configured method on a concrete collection.

    Distances (hence trees and the medoid root) are computed from training
    splits only.
    """
    config.validate()
    seed = config.seed if seed is None else seed
    T = len(collection)
    theta_init = None
    if config.gaussian_init:
        theta_init = substream(seed, "init").standard_normal(collection.dim)

    if config.method == "individual":
        budgets = BudgetAllocation(
            dict(enumerate(split_uniform(T, config.budget))), config.budget
        )
        result = run_individual(collection, budgets, theta_init)
        result.seed = seed
        return result

    metric = config.metric_name or DEFAULT_MEDOID_METRIC
    dist_params = replace(config.distance_params, seed=derive_seed(seed, "dist"))
    matrix = compute_distance_matrix(collection, metric, dist_params)
    root = medoid(matrix)
    if config.method == "star":
        tree = star_tree(T, root, matrix)
    elif config.method == "random_tree":
        edges = random_spanning_tree(T, substream(seed, "tree"))
        tree = root_tree(edges, root, matrix)
    else:
        tree = root_tree(mst(matrix), root, matrix)
    budgets = allocate(tree, config.budget, config.scheme)
    result = run_cascade(collection, tree, budgets, theta_init)
    result.metric_name = metric
    result.seed = seed
    return result


def _run_replicate(args: tuple[ExperimentConfig, int]) -> CascadeResult:
    config, r = args
    rep_seed = derive_seed(config.seed, "replicate", r)
    if config.synthetic is not None:
        collection, _ = generate_synthetic(replace(config.synthetic, seed=rep_seed))
    else:
        collection = load_collection(config.data_path)
    return run_method(config, collection, seed=rep_seed)


@dataclass
class ExperimentReport:
    """Per-seed and aggregate results of a multi-seed experiment."""

    config: ExperimentConfig
    results: list[CascadeResult]
    per_seed_mean_rmse: list[float]
    mean_rmse: float
    std_rmse: float
    wall_time: float


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run the method over ``num_seeds`` replicates and aggregate test RMSE.

    Replicates are independent: each derives its own seed, regenerates the
    synthetic data (a data path is loaded as-is), and runs the method. With
    ``jobs > 1`` replicates run in a process pool; the output is identical
    for any jobs value.
    """
    config.validate()
    start = time.perf_counter()
    work = [(config, r) for r in range(config.num_seeds)]
    if jobs == 1 or config.num_seeds == 1:
        results = [_run_replicate(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_replicate, work))
    per_seed = [res.mean_test_rmse() for res in results]
    mean = float(np.mean(per_seed))
    std = float(np.std(per_seed, ddof=1)) if len(per_seed) > 1 else 0.0
    return ExperimentReport(
        config=config,
        results=results,
        per_seed_mean_rmse=per_seed,
        mean_rmse=mean,
        std_rmse=std,
        wall_time=time.perf_counter() - start,
    )


def write_run_report(report: ExperimentReport, out_dir) -> dict:
    """Write report.json, per_task.csv, and tree.csv into ``out_dir``.

    Everything written here is deterministic for a fixed config and seed;
    wall-clock timing belongs to the run manifest, not the report.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_task_csv = out / "per_task.csv"
    with per_task_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "task_id", "test_rmse", "budget", "depth"])
        for r, res in enumerate(report.results):
            node_depth = depths(res.tree) if res.tree is not None else {}
            for i, task_id in enumerate(res.task_ids):
                writer.writerow(
                    [
                        r,
                        task_id,
                        repr(res.test_rmse[i]),
                        res.budgets.per_task[i],
                        node_depth.get(i, 0),
                    ]
                )

    tree_csv = None
    first = report.results[0]
    if first.tree is not None:
        tree_csv = "tree.csv"
        save_tree(first.tree, out / tree_csv, ids=first.task_ids)

    doc = {
        "config": asdict(report.config),
        "num_seeds": report.config.num_seeds,
        "per_seed_mean_rmse": report.per_seed_mean_rmse,
        "mean_rmse": report.mean_rmse,
        "std_rmse": report.std_rmse,
        "per_task_csv": per_task_csv.name,
        "tree_csv": tree_csv,
        "total_steps": sum(res.steps_executed for res in report.results),
    }
    with (out / "report.json").open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc
