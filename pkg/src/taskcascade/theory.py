"""Error-propagation bounds along cascade paths, and empirical verification.

The central quantity is the attenuation factor P(i:m), the product of
rho_j^b_j over all refinements downstream of edge i. The noiseless path
bound discounts the initial error by P(1:m) and every edge length by its
own suffix product; the noisy bound adds a per-node noise term scaled by
the design's noise-to-parameter operator norm. The cascade-versus-direct
comparison evaluates the closed-form condition under which the cascaded
bound is tighter than one discounted long transfer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .budget import BudgetAllocation
from .cascade import run_cascade
from .errors import ConfigError
from .graph import RootedTree
from .linmodel import contraction_rate, lambda_max
from .seeding import substream
from .tasks import TaskCollection, TaskDataset


@dataclass
class PathSpec:
    """Per-edge contraction rates, budgets and lengths along one path."""

    rhos: list[float]
    budgets: list[int]
    deltas: list[float]
    init_error: float = 0.0

    def __post_init__(self):
        m = len(self.rhos)
        if not (len(self.budgets) == len(self.deltas) == m):
            raise ConfigError("rhos, budgets and deltas must have equal lengths")
        if any(not 0.0 <= r < 1.0 for r in self.rhos):
            raise ConfigError("contraction rates must lie in [0, 1)")
        if any(b < 0 for b in self.budgets):
            raise ConfigError("budgets must be nonnegative")
        if any(d < 0 or not np.isfinite(d) for d in self.deltas):
            raise ConfigError("edge lengths must be finite and nonnegative")
        if self.init_error < 0 or not np.isfinite(self.init_error):
            raise ConfigError("init_error must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.rhos)


@dataclass
class NoisySpec:
    """A path plus per-node noise scales and design operator norms."""

    path: PathSpec
    sigmas: list[float]
    a_frob: list[float]

    def __post_init__(self):
        m = len(self.path)
        if not (len(self.sigmas) == len(self.a_frob) == m):
            raise ConfigError("sigmas and a_frob must match the path length")
        if any(s < 0 for s in self.sigmas) or any(a < 0 for a in self.a_frob):
            raise ConfigError("sigmas and a_frob must be nonnegative")


def _suffix_products(spec: PathSpec) -> np.ndarray:
    """sfx[k] = prod over edges j >= k of rho_j^b_j, with sfx[m] = 1."""
    m = len(spec)
    sfx = np.ones(m + 1)
    for j in range(m - 1, -1, -1):
        sfx[j] = sfx[j + 1] * spec.rhos[j] ** spec.budgets[j]
    return sfx


def path_bound(spec: PathSpec) -> float:
    """Noiseless worst-case error at the end of a path.

    Discounts the initial error by the full attenuation product and each
    edge length by the product of all downstream contractions.
    """
    sfx = _suffix_products(spec)
    bound = sfx[0] * spec.init_error
    for k, delta in enumerate(spec.deltas):
        bound += sfx[k] * delta
    return float(bound)


def noisy_path_bound(spec: NoisySpec) -> float:
    """Expected-error bound with per-node observation noise.

    Reduces to :func:`path_bound` exactly when all sigmas are zero.
    """
    sfx = _suffix_products(spec.path)
    bound = path_bound(spec.path)
    for k in range(len(spec.path)):
        rho_pow = spec.path.rhos[k] ** spec.path.budgets[k]
        bound += sfx[k + 1] * spec.sigmas[k] * (1.0 + rho_pow) * spec.a_frob[k]
    return float(bound)


def cascade_vs_direct(
    delta_max: float,
    rho_max: float,
    length: int,
    budget: int,
    direct_distance: float,
) -> tuple[float, float, bool]:
    """Worst-case cascaded bound, direct-transfer bound, and tightness test.

    For a length-m path with uniform per-node budget b starting from an
    exact source, the cascaded bound sums edge terms rho^((m-i+1) b) *
    delta_max while the direct bound is rho^b times the source-target
    distance. The returned boolean evaluates
    delta_max * (1 - rho^(m b)) < direct_distance * (1 - rho^b), which is
    exactly when the cascaded bound is the tighter of the two.
    """
    if not 0.0 < rho_max < 1.0:
        raise ConfigError("rho_max must lie in (0, 1)")
    if length < 1 or budget < 1:
        raise ConfigError("length and budget must be positive")
    if delta_max < 0 or direct_distance < 0:
        raise ConfigError("distances must be nonnegative")
    m, b = length, budget
    cascade_bound = delta_max * sum(rho_max ** ((m - i + 1) * b) for i in range(1, m + 1))
    direct_bound = rho_max**b * direct_distance
    tighter = delta_max * (1.0 - rho_max ** (m * b)) < direct_distance * (1.0 - rho_max**b)
    return float(cascade_bound), float(direct_bound), bool(tighter)


@dataclass
class ChainConfig:
    """A synthetic chain of linear tasks with equally spaced optima."""

    length: int  # number of edges; the chain has length + 1 tasks
    dim: int = 5
    n: int = 32
    budget_per_node: int = 5
    root_budget: int | None = None  # defaults to budget_per_node
    spacing: float = 1.0  # total root-to-leaf distance in parameter space
    noise_sigma: float = 0.0
    noise_draws: int = 200
    seed: int = 0

    def validate(self) -> None:
        if self.length < 1:
            raise ConfigError("chain needs at least one edge")
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.n < self.dim:
            raise ConfigError("need n >= dim for a positive-definite design")
        if self.budget_per_node < 0 or (self.root_budget or 0) < 0:
            raise ConfigError("budgets must be nonnegative")
        if self.spacing < 0 or self.noise_sigma < 0:
            raise ConfigError("spacing and noise_sigma must be nonnegative")
        if self.noise_draws < 1:
            raise ConfigError("noise_draws must be positive")


@dataclass
class BoundCheck:
    """Outcome of checking one chain against its theoretical bound."""

    config: ChainConfig
    empirical: float
    bound: float
    satisfied: bool
    mode: str
    mc_stderr: float = 0.0
    tolerance: float = 1e-9


@dataclass
class _Chain:
    designs: list[np.ndarray]
    probes: list[np.ndarray]
    thetas: list[np.ndarray]
    rhos: list[float]
    a_frob: list[float]


def _build_chain(config: ChainConfig) -> _Chain:
    rng = substream(config.seed, "chain")
    theta0 = rng.standard_normal(config.dim)
    direction = rng.standard_normal(config.dim)
    direction /= np.linalg.norm(direction)
    m = config.length
    thetas = [theta0 + (i / m) * config.spacing * direction for i in range(m + 1)]
    designs = [rng.standard_normal((config.n, config.dim)) for _ in range(m + 1)]
    probes = [rng.standard_normal((4, config.dim)) for _ in range(m + 1)]
    rhos, a_frob = [], []
    for X in designs:
        eta = 1.0 / lambda_max(X)
        rhos.append(contraction_rate(X, eta))
        A = np.linalg.solve(X.T @ X, X.T)
        a_frob.append(float(np.linalg.norm(A, ord="fro")))
    return _Chain(designs, probes, thetas, rhos, a_frob)


def _chain_collection(chain: _Chain, noises: list[np.ndarray] | None) -> TaskCollection:
    tasks = []
    for i, (X, P, theta) in enumerate(zip(chain.designs, chain.probes, chain.thetas)):
        y = X @ theta
        if noises is not None:
            y = y + noises[i]
        tasks.append(TaskDataset(f"task{i}", X, y, P, P @ theta))
    return TaskCollection(tasks, chain.designs[0].shape[1])


def _chain_tree(chain: _Chain) -> RootedTree:
    m = len(chain.designs) - 1
    parent = {i: i - 1 for i in range(1, m + 1)}
    lengths = {
        i: float(np.linalg.norm(chain.thetas[i] - chain.thetas[i - 1]))
        for i in range(1, m + 1)
    }
    return RootedTree(0, parent, lengths)


def verify_bounds(config: ChainConfig) -> BoundCheck:
    """Run a cascade along a synthetic chain and compare against the bound.

    Noiseless mode refines the root from zeros and checks the leaf error
    against the noiseless path bound. Noisy mode pins the root at its true
    optimum with zero budget (so the bound's initial term vanishes exactly),
    averages the leaf error over repeated noise draws, and checks the
    Monte-Carlo mean against the expected-error bound plus two standard
    errors.
    """
    config.validate()
    chain = _build_chain(config)
    m = config.length
    tree = _chain_tree(chain)
    deltas = [tree.edge_length[i] for i in range(1, m + 1)]
    budgets_list = [config.budget_per_node] * (m + 1)

    if config.noise_sigma == 0.0:
        root_b = (
            config.root_budget if config.root_budget is not None else config.budget_per_node
        )
        budgets_list[0] = root_b
        budgets = BudgetAllocation(dict(enumerate(budgets_list)), sum(budgets_list))
        result = run_cascade(_chain_collection(chain, None), tree, budgets)
        init_error = float(np.linalg.norm(result.params[0] - chain.thetas[0]))
        spec = PathSpec(
            rhos=chain.rhos[1:],
            budgets=budgets_list[1:],
            deltas=deltas,
            init_error=init_error,
        )
        bound = path_bound(spec)
        empirical = float(np.linalg.norm(result.params[m] - chain.thetas[m]))
        tol = 1e-9
        return BoundCheck(
            config=config,
            empirical=empirical,
            bound=bound,
            satisfied=empirical <= bound + tol,
            mode="noiseless",
            tolerance=tol,
        )

    # noisy mode: root pinned at its optimum, expectations over noise draws
    budgets_list[0] = 0
    budgets = BudgetAllocation(dict(enumerate(budgets_list)), sum(budgets_list))
    noise_rng = substream(config.seed, "noise")
    errors = []
    for _ in range(config.noise_draws):
        noises = [
            config.noise_sigma * noise_rng.standard_normal(config.n)
            for _ in range(m + 1)
        ]
        noises[0][:] = 0.0  # the root is exact; noise there is never consumed
        collection = _chain_collection(chain, noises)
        result = run_cascade(collection, tree, budgets, theta_init=chain.thetas[0])
        errors.append(float(np.linalg.norm(result.params[m] - chain.thetas[m])))
    errors_arr = np.asarray(errors)
    mc_mean = float(errors_arr.mean())
    mc_stderr = (
        float(errors_arr.std(ddof=1) / np.sqrt(len(errors_arr)))
        if len(errors_arr) > 1
        else 0.0
    )
    spec = NoisySpec(
        path=PathSpec(
            rhos=chain.rhos[1:],
            budgets=budgets_list[1:],
            deltas=deltas,
            init_error=0.0,
        ),
        sigmas=[config.noise_sigma] * m,
        a_frob=chain.a_frob[1:],
    )
    bound = noisy_path_bound(spec)
    return BoundCheck(
        config=config,
        empirical=mc_mean,
        bound=bound,
        satisfied=mc_mean <= bound + 2.0 * mc_stderr,
        mode="noisy",
        mc_stderr=mc_stderr,
        tolerance=0.0,
    )
