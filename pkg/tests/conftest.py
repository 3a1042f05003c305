import numpy as np
import pytest

from taskcascade.tasks import TaskCollection, TaskDataset


def make_task(rng, n=24, d=4, task_id="t", n_test=8, sigma=0.1):
    theta = rng.standard_normal(d)
    X_train = rng.standard_normal((n, d))
    y_train = X_train @ theta + sigma * rng.standard_normal(n)
    X_test = rng.standard_normal((n_test, d))
    y_test = X_test @ theta + sigma * rng.standard_normal(n_test)
    return TaskDataset(task_id, X_train, y_train, X_test, y_test)


def make_collection(rng, T=6, n=24, d=4, sigma=0.1):
    tasks = [make_task(rng, n=n, d=d, task_id=f"task{i}", sigma=sigma) for i in range(T)]
    return TaskCollection(tasks, d)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
