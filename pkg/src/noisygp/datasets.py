"""Synthetic symbolic-regression benchmarks and output-noise injection.

The fifteen Keijzer and Vladislavleva problems are registered in
:data:`BENCHMARKS`. Sampling follows two rules: ``E[a, b, c]`` is an
inclusive grid with spacing ``c``; ``U[a, b, c]`` is ``c`` uniform draws on
``[a, b]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "SamplingRule",
    "DatasetSpec",
    "Dataset",
    "DomainError",
    "BENCHMARKS",
    "N_UNIFORM_SAMPLES",
    "NOISE_GRID",
    "get_spec",
    "objective",
    "generate_grid",
    "generate_uniform",
    "build_dataset",
    "inject_noise",
    "save_dataset",
    "load_dataset",
]

N_UNIFORM_SAMPLES = 5
NOISE_GRID = tuple(round(0.02 * i, 2) for i in range(11))

# relative slack when deciding whether b lies on the grid a + i*c
_GRID_EPS = 1e-9


class DomainError(ValueError):
    """Objective evaluated outside its mathematical domain."""


@dataclass(frozen=True)
class SamplingRule:
    kind: str
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.kind not in ("E", "U"):
            raise ValueError(f"sampling kind must be 'E' or 'U', got {self.kind!r}")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if not self.c > 0:
            raise ValueError(f"need c > 0, got {self.c}")
        if self.kind == "U" and self.c != int(self.c):
            raise ValueError("uniform sample size must be an integer")

    @property
    def size(self) -> int:
        if self.kind == "U":
            return int(self.c)
        return int(math.floor((self.b - self.a) / self.c + _GRID_EPS)) + 1

    def __str__(self):
        return f"{self.kind}[{self.a:g}, {self.b:g}, {self.c:g}]"


def E(a, b, c):
    return SamplingRule("E", a, b, c)


def U(a, b, c):
    return SamplingRule("U", a, b, c)


@dataclass(frozen=True)
class DatasetSpec:
    """One benchmark problem.

    ``train`` and ``test`` hold one rule per input variable.
    ``expected_train_n``/``expected_test_n`` are the published instance
    counts; generation follows the rules and only reports disagreement.
    """

    name: str
    function: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d: int
    train: tuple
    test: tuple
    expected_train_n: int
    expected_test_n: int

    def __post_init__(self):
        for rules in (self.train, self.test):
            if len(rules) != self.d:
                raise ValueError(f"{self.name}: need {self.d} sampling rules, got {len(rules)}")
            if len({r.kind for r in rules}) != 1:
                raise ValueError(f"{self.name}: mixed E/U rules within one partition")

    @property
    def uniform(self) -> bool:
        """True when any partition is randomly sampled."""
        return any(r.kind == "U" for r in self.train + self.test)

    def rules(self, partition: str) -> tuple:
        if partition == "train":
            return self.train
        if partition == "test":
            return self.test
        raise ValueError(f"partition must be 'train' or 'test', got {partition!r}")

    def expected_n(self, partition: str) -> int:
        return self.expected_train_n if partition == "train" else self.expected_test_n

    def formula_n(self, partition: str) -> int:
        rules = self.rules(partition)
        if rules[0].kind == "U":
            return rules[0].size
        return int(np.prod([r.size for r in rules]))


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    inputs: np.ndarray
    targets: np.ndarray
    partition: str
    sample_id: int = 0
    noise_level: float = 0.0

    def __post_init__(self):
        if self.partition not in ("train", "test"):
            raise ValueError(f"partition must be 'train' or 'test', got {self.partition!r}")
        if self.inputs.ndim != 2 or self.targets.shape != (self.inputs.shape[0],):
            raise ValueError("inputs must be (n, d) and targets (n,)")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


def _check_domain(ok, name):
    if not np.all(ok):
        raise DomainError(f"{name} is undefined at {int(np.size(ok) - np.count_nonzero(ok))} point(s)")


def _keijzer_1(X):
    x = X[:, 0]
    return 0.3 * x * np.sin(2 * np.pi * x)


def _keijzer_4(X):
    x = X[:, 0]
    return x**3 * np.exp(-x) * np.cos(x) * np.sin(x) * (np.sin(x) ** 2 * np.cos(x) - 1)


def _harmonic(X):
    # H(floor(x)), summed left to right
    k = np.floor(X[:, 0]).astype(np.int64)
    top = max(int(k.max()), 0)
    partial = np.concatenate(([0.0], np.cumsum(1.0 / np.arange(1, top + 1))))
    return partial[np.clip(k, 0, None)]


def _keijzer_7(X):
    x = X[:, 0]
    _check_domain(x > 0, "ln(x)")
    return np.log(x)


def _keijzer_8(X):
    x = X[:, 0]
    _check_domain(x >= 0, "sqrt(x)")
    return np.sqrt(x)


def _keijzer_9(X):
    x = X[:, 0]
    return np.log(x + np.sqrt(x**2 + 1))


def _vlad_1(X):
    x, y = X[:, 0], X[:, 1]
    return np.exp(-((x - 1) ** 2)) / (1.2 + (y - 2.5) ** 2)


def _vlad_2(X):
    x = X[:, 0]
    return np.exp(-x) * x**3 * (np.cos(x) * np.sin(x)) * (np.cos(x) * np.sin(x) ** 2 - 1)


def _vlad_3(X):
    return _vlad_2(X) * (X[:, 1] - 5)


def _vlad_4(X):
    return 10.0 / (5 + np.sum((X - 3) ** 2, axis=1))


def _vlad_5(X):
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    _check_domain((y != 0) & (x != 10), "30(x-1)(z-1)/(y^2 (x-10))")
    return 30 * (x - 1) * (z - 1) / (y**2 * (x - 10))


def _vlad_7(X):
    x, y = X[:, 0], X[:, 1]
    return (x - 3) * (y - 3) + 2 * np.sin((x - 4) * (y - 4))


def _vlad_8(X):
    x, y = X[:, 0], X[:, 1]
    return ((x - 3) ** 4 + (y - 3) ** 3 - (y - 3)) / ((y - 2) ** 4 + 10)


def _spec(name, fn, d, train, test, n_train, n_test):
    if len(train) == 1 and d > 1:
        train = train * d
    if len(test) == 1 and d > 1:
        test = test * d
    return DatasetSpec(name, fn, d, tuple(train), tuple(test), n_train, n_test)


BENCHMARKS = {
    s.name: s
    for s in [
        _spec("Keijzer-1", _keijzer_1, 1, [E(-1, 1, 0.1)], [E(-1, 1, 0.001)], 21, 2001),
        _spec("Keijzer-2", _keijzer_1, 1, [E(-2, 2, 0.1)], [E(-2, 2, 0.001)], 41, 4001),
        _spec("Keijzer-3", _keijzer_1, 1, [E(-3, 3, 0.1)], [E(-3, 3, 0.001)], 61, 6001),
        _spec("Keijzer-4", _keijzer_4, 1, [E(0, 10, 0.1)], [E(0.05, 10.05, 0.1)], 101, 101),
        _spec("Keijzer-6", _harmonic, 1, [E(1, 50, 1)], [E(1, 120, 1)], 50, 120),
        _spec("Keijzer-7", _keijzer_7, 1, [E(1, 100, 1)], [E(1, 100, 0.1)], 100, 991),
        _spec("Keijzer-8", _keijzer_8, 1, [E(0, 100, 1)], [E(0, 100, 0.1)], 101, 1001),
        _spec("Keijzer-9", _keijzer_9, 1, [E(0, 100, 1)], [E(0, 100, 0.1)], 100, 2025),
        _spec("Vladislavleva-1", _vlad_1, 2, [U(0.3, 4, 100)], [E(-0.2, 4.2, 0.1)], 100, 2025),
        _spec("Vladislavleva-2", _vlad_2, 1, [E(0.05, 10, 0.1)], [E(-0.5, 10.5, 0.05)], 100, 221),
        _spec(
            "Vladislavleva-3", _vlad_3, 2,
            [E(0.05, 10, 0.1), E(0.05, 10.05, 2)],
            [E(-0.5, 10.5, 0.05), E(-0.5, 10.5, 0.5)],
            600, 5083,
        ),
        _spec("Vladislavleva-4", _vlad_4, 5, [U(0.05, 6.05, 1024)], [U(-0.25, 6.35, 5000)], 1024, 5000),
        _spec(
            "Vladislavleva-5", _vlad_5, 3,
            [U(0.05, 2, 300), U(1, 2, 300), U(0.05, 2, 300)],
            [E(-0.05, 2.1, 0.15), E(0.95, 2.05, 0.1), E(-0.05, 2.1, 0.15)],
            300, 2700,
        ),
        _spec("Vladislavleva-7", _vlad_7, 2, [U(0.05, 6.05, 300)], [U(-0.25, 6.35, 1000)], 300, 1000),
        _spec("Vladislavleva-8", _vlad_8, 2, [U(0.05, 6.05, 50)], [E(-0.25, 6.35, 0.2)], 50, 1089),
    ]
}


def get_spec(name) -> DatasetSpec:
    if isinstance(name, DatasetSpec):
        return name
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(BENCHMARKS)}") from None


def objective(spec, x):
    """Evaluate a benchmark function at one point (1-D ``x``) or at rows of ``x``."""
    spec = get_spec(spec)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != spec.d:
            raise ValueError(f"{spec.name} takes {spec.d} inputs, got {arr.shape[0]}")
        return float(spec.function(arr[None, :])[0])
    if arr.ndim != 2 or arr.shape[1] != spec.d:
        raise ValueError(f"{spec.name} takes rows of {spec.d} inputs")
    return spec.function(arr)


def generate_grid(rule: SamplingRule) -> np.ndarray:
    """Grid ``a + i*c`` for ``i = 0..`` up to ``b`` inclusive.

    Points are computed from the index, never by repeated addition.
    """
    if rule.kind != "E":
        raise ValueError("generate_grid needs an E rule")
    return rule.a + np.arange(rule.size, dtype=np.float64) * rule.c


def generate_uniform(rule: SamplingRule, rng: np.random.Generator) -> np.ndarray:
    if rule.kind != "U":
        raise ValueError("generate_uniform needs a U rule")
    return rng.uniform(rule.a, rule.b, size=rule.size)


def build_dataset(spec, partition: str, sample_id: int = 0, rng=None) -> Dataset:
    """Sample one partition of a benchmark and evaluate clean targets.

    Parameters
    ----------
    spec : DatasetSpec or str
    partition : {"train", "test"}
    sample_id : int
        1..5 for randomly sampled benchmarks, 0 for fully deterministic ones.
    rng : numpy.random.Generator, optional
        Required whenever the partition uses U rules.
    """
    spec = get_spec(spec)
    rules = spec.rules(partition)
    if spec.uniform:
        if not 1 <= sample_id <= N_UNIFORM_SAMPLES:
            raise ValueError(f"{spec.name} is randomly sampled; sample_id must be in 1..{N_UNIFORM_SAMPLES}")
    elif sample_id != 0:
        raise ValueError(f"{spec.name} is deterministic; sample_id must be 0")

    if rules[0].kind == "E":
        axes = [generate_grid(r) for r in rules]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.column_stack([m.ravel() for m in mesh])
    else:
        if rng is None:
            raise ValueError(f"{spec.name} {partition} is randomly sampled and needs an rng")
        sizes = {r.size for r in rules}
        if len(sizes) != 1:
            raise ValueError(f"{spec.name}: per-variable uniform sizes differ")
        lows = np.array([r.a for r in rules])
        highs = np.array([r.b for r in rules])
        X = rng.uniform(lows, highs, size=(sizes.pop(), spec.d))

    n = X.shape[0]
    if n != spec.expected_n(partition):
        logger.warning(
            "%s %s: sampling rules give %d instances, published count is %d",
            spec.name, partition, n, spec.expected_n(partition),
        )
    y = spec.function(X)
    return Dataset(spec.name, X, y, partition, sample_id)


def count_discrepancy(spec, partition: str):
    """Note describing a published-vs-generated count mismatch, or None."""
    spec = get_spec(spec)
    got, listed = spec.formula_n(partition), spec.expected_n(partition)
    if got == listed:
        return None
    rules = " x ".join(str(r) for r in spec.rules(partition))
    return f"{spec.name} {partition}: {rules} yields {got} instances; benchmark table lists {listed}"


def inject_noise(dataset: Dataset, r: float, rng: np.random.Generator) -> Dataset:
    """Add one N(0, 1) draw to each training target with probability ``r``.

    Returns a new dataset; the input is left untouched.
    """
    if dataset.partition != "train":
        raise ValueError("noise is only injected into training partitions")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"noise level must lie in [0, 1], got {r}")
    hit = rng.random(dataset.n) < r
    noise = rng.standard_normal(dataset.n)
    targets = dataset.targets.copy()
    targets[hit] += noise[hit]
    return replace(dataset, targets=targets, noise_level=float(r))


def save_dataset(dataset: Dataset, path, seed=None) -> Path:
    """Write ``dataset`` as headered CSV plus a ``.manifest`` text file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join([f"x{j}" for j in range(dataset.d)] + ["y"])
    data = np.column_stack([dataset.inputs, dataset.targets])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    lines = [
        f"name: {dataset.name}",
        f"partition: {dataset.partition}",
        f"sample_id: {dataset.sample_id}",
        f"noise_level: {dataset.noise_level!r}",
        f"seed: {seed if seed is not None else ''}",
        f"instances: {dataset.n}",
    ]
    if dataset.name in BENCHMARKS:
        note = count_discrepancy(dataset.name, dataset.partition)
        if note:
            lines.append(f"note: {note}")
    path.with_suffix(".manifest").write_text("\n".join(lines) + "\n")
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(".manifest").read_text().splitlines():
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(
        meta["name"],
        data[:, :-1].copy(),
        data[:, -1].copy(),
        meta["partition"],
        int(meta["sample_id"]),
        float(meta["noise_level"]),
    )
