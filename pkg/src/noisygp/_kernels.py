"""Compiled loops over prefix-encoded expression trees.

Opcodes: 0 add, 1 sub, 2 mul, 3 analytic quotient, 4 variable, 5 constant.
Every opcode below 4 is binary.
"""

import numpy as np
from numba import njit

ADD, SUB, MUL, AQ, VAR, CONST = 0, 1, 2, 3, 4, 5


@njit(cache=True)
def eval_prefix(codes, values, columns):
    """Evaluate a prefix program over ``columns`` (shape ``(d, n)``)."""
    m = codes.shape[0]
    n = columns.shape[1]

    # stack height pre-pass so the scratch buffer is depth-sized, not size-sized
    height = 0
    peak = 0
    for k in range(m - 1, -1, -1):
        if codes[k] >= VAR:
            height += 1
        else:
            height -= 1
        if height > peak:
            peak = height

    stack = np.empty((peak, n))
    sp = 0
    for k in range(m - 1, -1, -1):
        c = codes[k]
        if c == VAR:
            j = int(values[k])
            for i in range(n):
                stack[sp, i] = columns[j, i]
            sp += 1
        elif c == CONST:
            v = values[k]
            for i in range(n):
                stack[sp, i] = v
            sp += 1
        else:
            # first child sits on top of the stack
            a = sp - 1
            b = sp - 2
            if c == ADD:
                for i in range(n):
                    stack[b, i] = stack[a, i] + stack[b, i]
            elif c == SUB:
                for i in range(n):
                    stack[b, i] = stack[a, i] - stack[b, i]
            elif c == MUL:
                for i in range(n):
                    stack[b, i] = stack[a, i] * stack[b, i]
            else:
                for i in range(n):
                    stack[b, i] = stack[a, i] / np.sqrt(1.0 + stack[b, i] * stack[b, i])
            sp -= 1
    return stack[0].copy()


@njit(cache=True)
def subtree_end(codes, start):
    """Index one past the subtree rooted at ``start``."""
    open_slots = 1
    j = start
    while open_slots > 0:
        if codes[j] < VAR:
            open_slots += 1
        else:
            open_slots -= 1
        j += 1
    return j


@njit(cache=True)
def prefix_depth(codes):
    """Depth of a prefix program; a lone terminal has depth 1."""
    m = codes.shape[0]
    stack = np.empty(m, dtype=np.int64)
    sp = 0
    for k in range(m - 1, -1, -1):
        if codes[k] >= VAR:
            stack[sp] = 1
            sp += 1
        else:
            a = stack[sp - 1]
            b = stack[sp - 2]
            stack[sp - 2] = 1 + (a if a > b else b)
            sp -= 1
    return stack[0]


@njit(cache=True)
def build_prefix(u, max_depth, d, full_method):
    """Random tree from a block of uniforms; see ``expr.grow`` for the rules.

    ``u`` must hold at least ``3 * (2**max_depth - 1)`` draws, enough for
    the largest possible tree.
    """
    cap = 2**max_depth - 1
    codes = np.empty(cap, dtype=np.int8)
    values = np.zeros(cap)
    pending = np.empty(cap + 1, dtype=np.int64)
    pending[0] = 1
    sp = 1
    k = 0
    m = 0
    while sp > 0:
        sp -= 1
        depth = pending[sp]
        make_function = False
        if depth < max_depth:
            if full_method or depth == 1:
                make_function = True
            else:
                make_function = u[k] < 0.5
                k += 1
        if make_function:
            op = int(u[k] * 4)
            k += 1
            codes[m] = op if op < 3 else 3
            pending[sp] = depth + 1
            pending[sp + 1] = depth + 1
            sp += 2
        else:
            is_var = u[k] < 0.5
            k += 1
            if is_var:
                j = int(u[k] * d)
                codes[m] = VAR
                values[m] = j if j < d - 1 else d - 1
            else:
                codes[m] = CONST
                values[m] = -1.0 + 2.0 * u[k]
            k += 1
        m += 1
    return codes[:m].copy(), values[:m].copy()
