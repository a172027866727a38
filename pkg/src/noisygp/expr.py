"""Expression trees over {+, -, *, AQ}, their evaluation and random generation.

Trees are stored in prefix order as two parallel arrays (opcodes and
payloads) so evaluation runs in a compiled loop and subtree surgery is
plain slicing. :class:`Function`, :class:`Variable` and :class:`Constant`
give a structural view for construction and inspection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from ._kernels import ADD, AQ, CONST, MUL, SUB, VAR

__all__ = [
    "OPERATORS",
    "Function",
    "Variable",
    "Constant",
    "ExprTree",
    "EvalContext",
    "DimensionError",
    "aq",
    "eval_tree",
    "grow",
    "full",
    "ramped_half_and_half",
    "draws_per_tree",
]

OPERATORS = {"+": ADD, "-": SUB, "*": MUL, "AQ": AQ}
_SYMBOLS = {code: sym for sym, code in OPERATORS.items()}


class DimensionError(ValueError):
    """A variable refers to a column the input matrix does not have."""


def aq(a, b):
    """Analytic quotient ``a / sqrt(1 + b**2)``; works on scalars and arrays."""
    return a / np.sqrt(1.0 + np.square(b))


@dataclass(frozen=True)
class Variable:
    index: int


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Function:
    op: str
    left: "Node"
    right: "Node"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")


Node = Union[Function, Variable, Constant]


class ExprTree:
    """Immutable prefix-encoded expression tree.

    Parameters
    ----------
    codes : array-like of int
        Opcodes in prefix order.
    values : array-like of float
        Variable index for variables, the constant for constants, 0 otherwise.
    """

    __slots__ = ("codes", "values", "_n_vars")

    def __init__(self, codes, values):
        codes = np.asarray(codes, dtype=np.int8)
        values = np.asarray(values, dtype=np.float64)
        if codes.ndim != 1 or codes.shape != values.shape or codes.size == 0:
            raise ValueError("codes and values must be equal-length non-empty 1-D arrays")
        codes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_n_vars", None)

    def __setattr__(self, name, value):
        raise AttributeError("ExprTree is immutable")

    def __len__(self):
        return int(self.codes.size)

    def __eq__(self, other):
        if not isinstance(other, ExprTree):
            return NotImplemented
        return np.array_equal(self.codes, other.codes) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.codes.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"ExprTree({self})"

    def __str__(self):
        return self.to_prefix()

    @property
    def size(self) -> int:
        return int(self.codes.size)

    @property
    def depth(self) -> int:
        return int(_kernels.prefix_depth(self.codes))

    @property
    def n_variables_required(self) -> int:
        """Smallest dimensionality the tree can be evaluated on."""
        if self._n_vars is None:
            mask = self.codes == VAR
            object.__setattr__(self, "_n_vars", int(self.values[mask].max()) + 1 if mask.any() else 0)
        return self._n_vars

    def subtree_end(self, start: int) -> int:
        return int(_kernels.subtree_end(self.codes, start))

    def subtree(self, start: int) -> "ExprTree":
        end = self.subtree_end(start)
        return ExprTree(self.codes[start:end], self.values[start:end])

    def replace(self, start: int, other: "ExprTree") -> "ExprTree":
        """Copy of self with the subtree at ``start`` swapped for ``other``."""
        end = self.subtree_end(start)
        return ExprTree(
            np.concatenate((self.codes[:start], other.codes, self.codes[end:])),
            np.concatenate((self.values[:start], other.values, self.values[end:])),
        )

    @classmethod
    def from_node(cls, node: Node) -> "ExprTree":
        codes, values = [], []
        stack = [node]
        while stack:
            cur = stack.pop()
            if isinstance(cur, Function):
                codes.append(OPERATORS[cur.op])
                values.append(0.0)
                stack.append(cur.right)
                stack.append(cur.left)
            elif isinstance(cur, Variable):
                if cur.index < 0:
                    raise ValueError("variable index must be non-negative")
                codes.append(VAR)
                values.append(float(cur.index))
            elif isinstance(cur, Constant):
                codes.append(CONST)
                values.append(float(cur.value))
            else:
                raise TypeError(f"not an expression node: {cur!r}")
        return cls(codes, values)

    def to_node(self) -> Node:
        stack = []
        for code, value in zip(self.codes[::-1].tolist(), self.values[::-1].tolist()):
            if code == VAR:
                stack.append(Variable(int(value)))
            elif code == CONST:
                stack.append(Constant(value))
            else:
                left = stack.pop()
                right = stack.pop()
                stack.append(Function(_SYMBOLS[code], left, right))
        return stack[0]

    def to_prefix(self) -> str:
        """Render as an s-expression such as ``(AQ (+ x0 0.25) x1)``."""
        parts = []
        for code, value in zip(self.codes[::-1].tolist(), self.values[::-1].tolist()):
            if code == VAR:
                parts.append(f"x{int(value)}")
            elif code == CONST:
                parts.append(repr(value))
            else:
                left = parts.pop()
                right = parts.pop()
                parts.append(f"({_SYMBOLS[code]} {left} {right})")
        return parts[0]

    @classmethod
    def parse(cls, text: str) -> "ExprTree":
        """Inverse of :meth:`to_prefix`."""
        tokens = re.findall(r"\(|\)|[^\s()]+", text)
        codes, values = [], []
        depth = 0
        for tok in tokens:
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1
            elif tok in OPERATORS:
                codes.append(OPERATORS[tok])
                values.append(0.0)
            elif re.fullmatch(r"x\d+", tok):
                codes.append(VAR)
                values.append(float(tok[1:]))
            else:
                codes.append(CONST)
                values.append(float(tok))
        if depth != 0 or not codes:
            raise ValueError(f"malformed expression: {text!r}")
        tree = cls(codes, values)
        if tree.subtree_end(0) != len(tree):
            raise ValueError(f"malformed expression: {text!r}")
        return tree


class EvalContext:
    """Fixed input matrix that trees are evaluated against.

    Parameters
    ----------
    inputs : array-like, shape (n_samples, n_features)
    """

    __slots__ = ("inputs", "columns")

    def __init__(self, inputs):
        inputs = np.array(inputs, dtype=np.float64, ndmin=2)
        if inputs.ndim != 2 or inputs.shape[0] < 1 or inputs.shape[1] < 1:
            raise ValueError(f"inputs must be a non-empty 2-D matrix, got shape {inputs.shape}")
        inputs.setflags(write=False)
        self.inputs = inputs
        self.columns = np.ascontiguousarray(inputs.T)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]


def eval_tree(tree: ExprTree, ctx: EvalContext) -> np.ndarray:
    """Semantics of ``tree`` over every row of ``ctx``."""
    if tree.n_variables_required > ctx.n_features:
        raise DimensionError(
            f"tree uses x{tree.n_variables_required - 1} but inputs have {ctx.n_features} columns"
        )
    return _kernels.eval_prefix(tree.codes, tree.values, ctx.columns)


_MAX_GEN_DEPTH = 20


def draws_per_tree(max_depth: int) -> int:
    """Uniforms consumed by one call of :func:`grow` or :func:`full`."""
    return 3 * (2**max_depth - 1)


def _build(max_depth, d, rng, full_method):
    if max_depth > _MAX_GEN_DEPTH:
        raise ValueError(f"random trees are limited to depth {_MAX_GEN_DEPTH}")
    # a fixed-size block of uniforms per tree keeps generation replayable
    u = rng.random(draws_per_tree(max_depth))
    codes, values = _kernels.build_prefix(u, max_depth, d, full_method)
    return ExprTree(codes, values)


def grow(max_depth: int, d: int, rng: np.random.Generator) -> ExprTree:
    """Random tree by the grow method.

    The root is a function whenever ``max_depth > 1``. Below it, nodes above
    ``max_depth`` are a function or a terminal with equal probability;
    terminals are a variable (uniform over ``d``) or a constant drawn from
    U[-1, 1] with equal probability.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    return _build(max_depth, d, rng, full_method=False)


def full(max_depth: int, d: int, rng: np.random.Generator) -> ExprTree:
    """Random tree with every branch reaching exactly ``max_depth``."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    return _build(max_depth, d, rng, full_method=True)


def ramped_half_and_half(pop_size: int, max_depth: int, d: int, rng: np.random.Generator) -> list:
    """Initial population ramped over depths ``2..max_depth``.

    Individual ``i`` goes to depth bucket ``2 + i % n_levels``; successive
    passes over the buckets alternate between grow and full, so each bucket
    is split evenly between the two methods.
    """
    if pop_size < 2:
        raise ValueError("pop_size must be >= 2")
    if max_depth < 2:
        raise ValueError("max_depth must be >= 2")
    n_levels = max_depth - 1
    population = []
    for i in range(pop_size):
        depth = 2 + i % n_levels
        use_full = (i // n_levels) % 2 == 1
        population.append(_build(depth, d, rng, full_method=use_full))
    return population
