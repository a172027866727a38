"""Geometric semantic GP over a DAG of cached semantics.

An individual is a :class:`GsgpNode` that records how it was formed
(initial tree, crossover of two parents, or mutation of one) together with
its output vectors on the training inputs and, optionally, on a held-out
evaluation set. Offspring semantics are computed from the parents' cached
vectors, so the cost of an operator never depends on the size of the
symbolic expression it implicitly builds.

Random trees inside the operators come from a :class:`TreeStream` and are
rebuilt on demand from their stream offset; once a node leaves the
population its vectors are dropped and only the offset and parent links
remain. :meth:`GSGPRegressor.predict`
replays the DAG on new inputs.
"""

from __future__ import annotations

import itertools
import json
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_generator, check_eval_set, check_population_params, check_training_data
from .expr import EvalContext, ExprTree, draws_per_tree, eval_tree, grow, ramped_half_and_half
from .gp import tournament_winners
from .metrics import FitnessScorer
from .records import RunRecord, config_hash

__all__ = [
    "GsgpConfig",
    "GsgpNode",
    "TreeStream",
    "GSGPRegressor",
    "DegenerateStepWarning",
    "crossover_semantics",
    "mutation_semantics",
    "initial_node",
    "gsx",
    "gsm",
    "compute_ms",
    "evaluate_dag",
    "dag_nodes",
    "dump_dag",
    "run_gsgp",
]

_SEED_BOUND = 2**63
_serial = itertools.count()


class DegenerateStepWarning(UserWarning):
    """Training targets have zero spread, so the mutation step is zero."""


@dataclass(frozen=True)
class GsgpConfig:
    pop_size: int = 1000
    generations: int = 2000
    tournament_size: int = 10
    p_gsx: float = 0.5
    p_gsm: float = 0.5
    ms_fraction: float = 0.1
    random_tree_depth: int = 6
    init_max_depth: int = 6
    bound_mutation_trees: bool = True
    elitism: int = 1

    def __post_init__(self):
        if not np.isclose(self.p_gsx + self.p_gsm, 1.0):
            raise ValueError("p_gsx + p_gsm must equal 1")
        if not self.ms_fraction > 0:
            raise ValueError("ms_fraction must be positive")
        if self.tournament_size > self.pop_size:
            raise ValueError("tournament_size cannot exceed pop_size")


class TreeStream:
    """Source of operator random trees that can be replayed by position.

    Every tree consumes a fixed block of uniforms, so a node only needs the
    stream and its offset to rebuild its trees later.
    """

    __slots__ = ("seed", "position", "_gen")

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.position = 0
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def draw(self, count: int, depth: int, d: int):
        """``(offset, trees)`` for ``count`` fresh grow trees."""
        offset = self.position
        trees = tuple(grow(depth, d, self._gen) for _ in range(count))
        self.position += count * draws_per_tree(depth)
        return offset, trees

    def replay(self, offset: int, count: int, depth: int, d: int) -> tuple:
        bitgen = np.random.PCG64(self.seed)
        bitgen.advance(offset)
        gen = np.random.Generator(bitgen)
        return tuple(grow(depth, d, gen) for _ in range(count))


def _as_stream(rng):
    if isinstance(rng, TreeStream):
        return rng
    return TreeStream(int(as_generator(rng).integers(_SEED_BOUND)))


class GsgpNode:
    """One individual in the semantics DAG.

    ``kind`` is ``"initial"``, ``"crossover"`` or ``"mutation"``. Crossover
    nodes keep the logistic weights ``r_train``/``r_test``; mutation nodes
    keep the two random-function outputs in ``tr_train``/``tr_test`` and the
    step ``ms``. All vectors are dropped by :meth:`release`.
    """

    __slots__ = (
        "serial", "kind", "parents", "tree", "stream", "offset", "trees", "depth", "bounded", "ms",
        "train", "test", "r_train", "r_test", "tr_train", "tr_test", "fitness",
    )

    def __init__(self, kind, parents=(), tree=None, stream=None, offset=None, trees=None, depth=None,
                 bounded=False, ms=None):
        self.serial = next(_serial)
        self.kind = kind
        self.parents = parents
        self.tree = tree
        self.stream = stream
        self.offset = offset
        self.trees = trees
        self.depth = depth
        self.bounded = bounded
        self.ms = ms
        self.train = self.test = None
        self.r_train = self.r_test = None
        self.tr_train = self.tr_test = None
        self.fitness = None

    def __repr__(self):
        return f"GsgpNode({self.kind}, serial={self.serial}, fitness={self.fitness})"

    def random_trees(self, d: int) -> tuple:
        """Random trees used by this node's operator, replayed from the stream if needed."""
        if self.kind == "initial":
            return ()
        if self.trees is not None:
            return self.trees
        count = 1 if self.kind == "crossover" else 2
        return self.stream.replay(self.offset, count, self.depth, d)

    @property
    def cached(self) -> bool:
        return self.train is not None

    def release(self) -> None:
        self.train = self.test = None
        self.r_train = self.r_test = None
        self.tr_train = self.tr_test = None

    def cache_nbytes(self) -> int:
        total = 0
        for arr in (self.train, self.test, self.r_train, self.r_test):
            if arr is not None:
                total += arr.nbytes
        for pair in (self.tr_train, self.tr_test):
            if pair is not None:
                total += sum(a.nbytes for a in pair)
        return total


def crossover_semantics(s1, s2, r):
    """Componentwise ``r*s1 + (1 - r)*s2``."""
    return r * s1 + (1.0 - r) * s2


def mutation_semantics(s, ms, a, b):
    """``s + ms*(a - b)``."""
    return s + ms * (a - b)


def initial_node(tree: ExprTree, train_ctx: EvalContext, test_ctx=None) -> GsgpNode:
    node = GsgpNode("initial", tree=tree)
    node.train = eval_tree(tree, train_ctx)
    if test_ctx is not None:
        node.test = eval_tree(tree, test_ctx)
    return node


def gsx(p1, p2, train_ctx, test_ctx, rng, max_depth: int = 6, tree=None) -> GsgpNode:
    """Geometric semantic crossover for a Manhattan-distance fitness.

    A random grow tree squashed through the logistic function gives a
    weight ``r_i`` in (0, 1) per instance; the offspring sits at
    ``r*s(p1) + (1 - r)*s(p2)`` on both partitions.
    Pass ``tree`` to fix the random function instead of drawing one.
    """
    d = train_ctx.n_features
    if tree is None:
        stream = _as_stream(rng)
        offset, (rt,) = stream.draw(1, max_depth, d)
        node = GsgpNode("crossover", (p1, p2), stream=stream, offset=offset, depth=max_depth)
    else:
        rt = tree
        node = GsgpNode("crossover", (p1, p2), trees=(tree,), depth=max_depth)
    node.r_train = expit(eval_tree(rt, train_ctx))
    node.train = crossover_semantics(p1.train, p2.train, node.r_train)
    if test_ctx is not None and p1.test is not None and p2.test is not None:
        node.r_test = expit(eval_tree(rt, test_ctx))
        node.test = crossover_semantics(p1.test, p2.test, node.r_test)
    return node


def gsm(p, ms, train_ctx, test_ctx, rng, max_depth: int = 6, bounded: bool = True, trees=None) -> GsgpNode:
    """Geometric semantic mutation ``s(p) + ms*(s(tr1) - s(tr2))``.

    With ``bounded`` the two random trees go through the logistic function,
    so each component moves by at most ``ms``.
    """
    if ms < 0:
        raise ValueError("mutation step must be non-negative")
    d = train_ctx.n_features
    if trees is None:
        stream = _as_stream(rng)
        offset, (tr1, tr2) = stream.draw(2, max_depth, d)
        node = GsgpNode("mutation", (p,), stream=stream, offset=offset, depth=max_depth, bounded=bounded, ms=ms)
    else:
        tr1, tr2 = trees
        node = GsgpNode("mutation", (p,), trees=(tr1, tr2), depth=max_depth, bounded=bounded, ms=ms)
    squash = expit if bounded else (lambda v: v)
    node.tr_train = (squash(eval_tree(tr1, train_ctx)), squash(eval_tree(tr2, train_ctx)))
    node.train = mutation_semantics(p.train, ms, *node.tr_train)
    if test_ctx is not None and p.test is not None:
        node.tr_test = (squash(eval_tree(tr1, test_ctx)), squash(eval_tree(tr2, test_ctx)))
        node.test = mutation_semantics(p.test, ms, *node.tr_test)
    return node


def compute_ms(train_targets, fraction: float = 0.1) -> float:
    """Mutation step: ``fraction`` of the sample standard deviation of the targets."""
    t = np.asarray(train_targets, dtype=np.float64)
    if t.size < 2:
        raise ValueError("need at least two targets")
    sd = float(np.std(t, ddof=1))
    if sd == 0.0:
        warnings.warn("training targets are constant; mutation step is 0", DegenerateStepWarning, stacklevel=2)
        return 0.0
    return fraction * sd


def dag_nodes(roots) -> list:
    """Every node reachable from ``roots``, parents before children."""
    seen = {}
    stack = list(roots)
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        stack.extend(node.parents)
    return sorted(seen.values(), key=lambda n: n.serial)


def evaluate_dag(root: GsgpNode, ctx: EvalContext) -> np.ndarray:
    """Semantics of ``root`` on fresh inputs, replaying every ancestor once."""
    nodes = dag_nodes([root])
    pending = {}
    for node in nodes:
        for parent in node.parents:
            pending[id(parent)] = pending.get(id(parent), 0) + 1
    d = ctx.n_features
    values = {}
    for node in nodes:
        if node.kind == "initial":
            out = eval_tree(node.tree, ctx)
        elif node.kind == "crossover":
            (rt,) = node.random_trees(d)
            p1, p2 = node.parents
            out = crossover_semantics(values[id(p1)], values[id(p2)], expit(eval_tree(rt, ctx)))
        else:
            tr1, tr2 = node.random_trees(d)
            a, b = eval_tree(tr1, ctx), eval_tree(tr2, ctx)
            if node.bounded:
                a, b = expit(a), expit(b)
            out = mutation_semantics(values[id(node.parents[0])], node.ms, a, b)
        values[id(node)] = out
        for parent in node.parents:
            pending[id(parent)] -= 1
            if pending[id(parent)] == 0:
                del values[id(parent)]
    return values[id(root)]


def dump_dag(root: GsgpNode, fh) -> int:
    """Write the provenance of ``root`` as JSON lines; returns the node count."""
    nodes = dag_nodes([root])
    ids = {id(n): i for i, n in enumerate(nodes)}
    for node in nodes:
        rec = {"id": ids[id(node)], "kind": node.kind, "parents": [ids[id(p)] for p in node.parents]}
        if node.kind == "initial":
            rec["tree"] = node.tree.to_prefix()
        else:
            rec["depth"] = node.depth
            if node.stream is not None:
                rec["stream_seed"] = node.stream.seed
                rec["offset"] = node.offset
            if node.trees is not None:
                rec["trees"] = [t.to_prefix() for t in node.trees]
        if node.kind == "mutation":
            rec["ms"] = node.ms
            rec["bounded"] = node.bounded
        if node.fitness is not None:
            rec["fitness"] = node.fitness
        fh.write(json.dumps(rec) + "\n")
    return len(nodes)


class GSGPRegressor(RegressorMixin, BaseEstimator):
    """Symbolic regressor evolved by geometric semantic GP.

    Each offspring comes from exactly one operator: crossover of two
    tournament winners with probability ``p_crossover``, otherwise mutation
    of one winner with step ``ms_fraction * std(y)``.

    Parameters
    ----------
    pop_size : int, default=1000
    generations : int, default=2000
    tournament_size : int, default=10
    p_crossover : float, default=0.5
    ms_fraction : float, default=0.1
    random_tree_depth : int, default=6
        Grow depth of the random functions inside both operators.
    init_max_depth : int, default=6
    bound_mutation_trees : bool, default=True
        Squash mutation trees through the logistic function.
    elitism : int, default=1
    random_state : int, Generator or None

    Attributes
    ----------
    best_ : GsgpNode
    best_fitness_ : float
    fitness_trace_ : ndarray of shape (generations + 1,)
    generation_times_ : ndarray of shape (generations,)
        Wall-clock seconds spent on each generation.
    ms_ : float
    eval_score_ : float or None
        Test NRMSE of ``best_`` on ``eval_set`` when one was given.
    """

    def __init__(
        self,
        pop_size=1000,
        generations=2000,
        tournament_size=10,
        p_crossover=0.5,
        ms_fraction=0.1,
        random_tree_depth=6,
        init_max_depth=6,
        bound_mutation_trees=True,
        elitism=1,
        random_state=None,
    ):
        self.pop_size = pop_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.ms_fraction = ms_fraction
        self.random_tree_depth = random_tree_depth
        self.init_max_depth = init_max_depth
        self.bound_mutation_trees = bound_mutation_trees
        self.elitism = elitism
        self.random_state = random_state

    def fit(self, X, y, eval_set=None):
        """Evolve a model.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,)
        eval_set : tuple (X_test, y_test), optional
            Held-out data whose semantics are carried along every node so the
            final test error needs no replay of the DAG.
        """
        X, y = check_training_data(X, y)
        check_population_params(self)
        if not 0.0 <= self.p_crossover <= 1.0:
            raise ValueError("p_crossover must lie in [0, 1]")
        eval_set = check_eval_set(eval_set, X.shape[1])
        rng = as_generator(self.random_state)
        train_ctx = EvalContext(X)
        test_ctx = EvalContext(eval_set[0]) if eval_set is not None else None
        d = X.shape[1]
        ms = compute_ms(y, self.ms_fraction)
        depth = self.random_tree_depth
        score = FitnessScorer(y)
        stream = TreeStream(int(rng.integers(_SEED_BOUND)))

        pop = []
        for tree in ramped_half_and_half(self.pop_size, self.init_max_depth, d, rng):
            node = initial_node(tree, train_ctx, test_ctx)
            node.fitness = score(node.train)
            pop.append(node)
        fitness = np.array([n.fitness for n in pop])
        trace = [fitness.min()]
        times = []

        for _ in range(self.generations):
            start = time.perf_counter()
            order = np.argsort(fitness, kind="stable")
            offspring = [pop[i] for i in order[: self.elitism]]
            winners = iter(tournament_winners(fitness, self.tournament_size, rng, 2 * self.pop_size).tolist())
            while len(offspring) < self.pop_size:
                if rng.random() < self.p_crossover:
                    a = pop[next(winners)]
                    b = pop[next(winners)]
                    child = gsx(a, b, train_ctx, test_ctx, stream, depth)
                else:
                    a = pop[next(winners)]
                    child = gsm(a, ms, train_ctx, test_ctx, stream, depth, self.bound_mutation_trees)
                child.fitness = score(child.train)
                offspring.append(child)
            survivors = {id(n) for n in offspring}
            for node in pop:
                if id(node) not in survivors:
                    node.release()
            pop = offspring
            fitness = np.array([n.fitness for n in pop])
            trace.append(fitness.min())
            times.append(time.perf_counter() - start)

        best = pop[int(np.argmin(fitness))]
        self.population_ = pop
        self.best_ = best
        self.best_fitness_ = float(best.fitness)
        self.fitness_trace_ = np.array(trace)
        self.generation_times_ = np.array(times)
        self.ms_ = ms
        self.n_features_in_ = d
        self.eval_score_ = None
        if eval_set is not None:
            self.eval_score_ = FitnessScorer(eval_set[1])(best.test)
        return self

    def predict(self, X):
        check_is_fitted(self, "best_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fit on {self.n_features_in_}")
        return evaluate_dag(self.best_, EvalContext(X))


def run_gsgp(config: GsgpConfig, train, test, seed: int, rep_index: int = 0) -> RunRecord:
    """Fit one GSGP run on ``train`` and score its best individual on ``test``."""
    if train.n == 0 or test.n == 0:
        raise ValueError("empty dataset")
    if train.name != test.name:
        raise ValueError(f"train ({train.name}) and test ({test.name}) come from different benchmarks")
    est = GSGPRegressor(
        pop_size=config.pop_size,
        generations=config.generations,
        tournament_size=config.tournament_size,
        p_crossover=config.p_gsx,
        ms_fraction=config.ms_fraction,
        random_tree_depth=config.random_tree_depth,
        init_max_depth=config.init_max_depth,
        bound_mutation_trees=config.bound_mutation_trees,
        elitism=config.elitism,
        random_state=seed,
    )
    start = time.perf_counter()
    est.fit(train.inputs, train.targets)
    # replaying the winner's ancestry touches far fewer nodes than carrying
    # test semantics through every offspring
    test_err = FitnessScorer(test.targets)(est.predict(test.inputs))
    return RunRecord(
        method="GSGP",
        dataset=train.name,
        noise_level=train.noise_level,
        sample_id=train.sample_id,
        rep_index=rep_index,
        seed=int(seed),
        final_train_nrmse=est.best_fitness_,
        final_test_nrmse=float(test_err),
        wall_time_s=time.perf_counter() - start,
        config_hash=config_hash("GSGP", config),
        trace=tuple(est.fitness_trace_.tolist()),
    )
