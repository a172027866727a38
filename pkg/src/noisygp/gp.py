"""Canonical tree-based GP for symbolic regression."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_generator, check_population_params, check_training_data
from .expr import EvalContext, ExprTree, eval_tree, grow, ramped_half_and_half
from .metrics import FitnessScorer, nrmse
from .records import RunRecord, config_hash

__all__ = [
    "GpConfig",
    "GpIndividual",
    "GPRegressor",
    "tournament_select",
    "tournament_winners",
    "subtree_crossover",
    "subtree_mutation",
    "run_gp",
]


@dataclass(frozen=True)
class GpConfig:
    pop_size: int = 1000
    generations: int = 2000
    tournament_size: int = 10
    p_crossover: float = 0.9
    p_mutation: float = 0.1
    init_max_depth: int = 6
    evolution_max_depth: int = 17
    elitism: int = 1

    def __post_init__(self):
        if not np.isclose(self.p_crossover + self.p_mutation, 1.0):
            raise ValueError("p_crossover + p_mutation must equal 1")
        if self.tournament_size > self.pop_size:
            raise ValueError("tournament_size cannot exceed pop_size")


@dataclass(frozen=True, eq=False)
class GpIndividual:
    tree: ExprTree
    train_semantics: np.ndarray
    fitness: float


def tournament_winners(fitness, k: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Indices of ``size`` independent tournament winners.

    Each tournament draws ``k`` contestants uniformly with replacement; the
    lowest fitness wins and ties are split uniformly at random.
    """
    fitness = np.asarray(fitness)
    if fitness.size == 0:
        raise ValueError("empty population")
    if k < 1:
        raise ValueError("tournament size must be >= 1")
    picks = rng.integers(fitness.size, size=(size, k))
    f = fitness[picks]
    keys = rng.random((size, k))
    keys[f != f.min(axis=1, keepdims=True)] = np.inf
    return picks[np.arange(size), keys.argmin(axis=1)]


def tournament_select(fitness, k: int, rng: np.random.Generator) -> int:
    """Index of a single tournament winner; see :func:`tournament_winners`."""
    return int(tournament_winners(fitness, k, rng, 1)[0])


def subtree_crossover(p1: ExprTree, p2: ExprTree, rng: np.random.Generator, max_depth=None) -> ExprTree:
    """Swap a uniformly chosen subtree of ``p1`` for one of ``p2``.

    An offspring deeper than ``max_depth`` is discarded and ``p1`` returned.
    """
    i = int(rng.integers(len(p1)))
    j = int(rng.integers(len(p2)))
    child = p1.replace(i, p2.subtree(j))
    if max_depth is not None and child.depth > max_depth:
        return p1
    return child


def subtree_mutation(
    p: ExprTree, rng: np.random.Generator, n_features: int, grow_depth: int = 6, max_depth=None
) -> ExprTree:
    """Replace a uniformly chosen subtree of ``p`` by a fresh grow tree."""
    i = int(rng.integers(len(p)))
    child = p.replace(i, grow(grow_depth, n_features, rng))
    if max_depth is not None and child.depth > max_depth:
        return p
    return child


class GPRegressor(RegressorMixin, BaseEstimator):
    """Symbolic regressor evolved by canonical GP.

    Each offspring comes from exactly one operator: subtree crossover of two
    tournament winners with probability ``p_crossover``, otherwise subtree
    mutation of one winner. The best ``elitism`` individuals are copied
    unchanged. Fitness is training NRMSE.

    Parameters
    ----------
    pop_size : int, default=1000
    generations : int, default=2000
    tournament_size : int, default=10
    p_crossover : float, default=0.9
    init_max_depth : int, default=6
        Depth bound for ramped half-and-half initialisation and for the
        subtrees grown by mutation.
    max_depth : int, default=17
        Offspring deeper than this are replaced by their first parent.
    elitism : int, default=1
    random_state : int, Generator or None

    Attributes
    ----------
    best_tree_ : ExprTree
    best_fitness_ : float
    fitness_trace_ : ndarray of shape (generations + 1,)
        Best training fitness after initialisation and after every generation.
    population_ : list of GpIndividual
    """

    def __init__(
        self,
        pop_size=1000,
        generations=2000,
        tournament_size=10,
        p_crossover=0.9,
        init_max_depth=6,
        max_depth=17,
        elitism=1,
        random_state=None,
    ):
        self.pop_size = pop_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.init_max_depth = init_max_depth
        self.max_depth = max_depth
        self.elitism = elitism
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_training_data(X, y)
        check_population_params(self)
        if not 0.0 <= self.p_crossover <= 1.0:
            raise ValueError("p_crossover must lie in [0, 1]")
        rng = as_generator(self.random_state)
        ctx = EvalContext(X)
        d = X.shape[1]
        score = FitnessScorer(y)

        def make(tree):
            sem = eval_tree(tree, ctx)
            return GpIndividual(tree, sem, score(sem))

        pop = [make(t) for t in ramped_half_and_half(self.pop_size, self.init_max_depth, d, rng)]
        fitness = np.array([ind.fitness for ind in pop])
        trace = [fitness.min()]

        for _ in range(self.generations):
            order = np.argsort(fitness, kind="stable")
            offspring = [pop[i] for i in order[: self.elitism]]
            # enough winners for every slot to be a crossover
            winners = iter(tournament_winners(fitness, self.tournament_size, rng, 2 * self.pop_size).tolist())
            while len(offspring) < self.pop_size:
                if rng.random() < self.p_crossover:
                    a = pop[next(winners)]
                    b = pop[next(winners)]
                    child = subtree_crossover(a.tree, b.tree, rng, self.max_depth)
                    parent = a
                else:
                    parent = pop[next(winners)]
                    child = subtree_mutation(parent.tree, rng, d, self.init_max_depth, self.max_depth)
                offspring.append(parent if child is parent.tree else make(child))
            pop = offspring
            fitness = np.array([ind.fitness for ind in pop])
            trace.append(fitness.min())

        best = int(np.argmin(fitness))
        self.population_ = pop
        self.best_tree_ = pop[best].tree
        self.best_fitness_ = float(fitness[best])
        self.fitness_trace_ = np.array(trace)
        self.n_features_in_ = d
        return self

    def predict(self, X):
        check_is_fitted(self, "best_tree_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fit on {self.n_features_in_}")
        return eval_tree(self.best_tree_, EvalContext(X))


def run_gp(config: GpConfig, train, test, seed: int, rep_index: int = 0) -> RunRecord:
    """Fit one GP run on ``train`` and score its best individual on ``test``."""
    if train.n == 0 or test.n == 0:
        raise ValueError("empty dataset")
    if train.name != test.name:
        raise ValueError(f"train ({train.name}) and test ({test.name}) come from different benchmarks")
    est = GPRegressor(
        pop_size=config.pop_size,
        generations=config.generations,
        tournament_size=config.tournament_size,
        p_crossover=config.p_crossover,
        init_max_depth=config.init_max_depth,
        max_depth=config.evolution_max_depth,
        elitism=config.elitism,
        random_state=seed,
    )
    start = time.perf_counter()
    est.fit(train.inputs, train.targets)
    pred = est.predict(test.inputs)
    test_err = nrmse(test.targets, pred) if np.all(np.isfinite(pred)) else float("inf")
    return RunRecord(
        method="GP",
        dataset=train.name,
        noise_level=train.noise_level,
        sample_id=train.sample_id,
        rep_index=rep_index,
        seed=int(seed),
        final_train_nrmse=est.best_fitness_,
        final_test_nrmse=float(test_err),
        wall_time_s=time.perf_counter() - start,
        config_hash=config_hash("GP", config),
        trace=tuple(est.fitness_trace_.tolist()),
    )


def gp_config_from_dict(params: dict) -> GpConfig:
    known = set(asdict(GpConfig()))
    return GpConfig(**{k: v for k, v in params.items() if k in known})
