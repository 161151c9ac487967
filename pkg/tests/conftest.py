"""Shared generators and fixtures for the test suite."""

from __future__ import annotations

import numpy as np

from gaugekit import timexpr as tx
from gaugekit.polyfield import PolyField


# ---------------------------------------------------------------------------
# Random time-expression corpus
# ---------------------------------------------------------------------------

def random_time_expr(rng: np.random.Generator, depth: int) -> tx.TimeExpr:
    """One random expression tree of depth <= `depth`."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return tx.T
        return tx.Lit(float(np.round(rng.uniform(-2.0, 2.0), 3)))
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "neg", "exp", "sin", "cos"])
    if kind in ("add", "sub", "mul", "div"):
        a = random_time_expr(rng, depth - 1)
        b = random_time_expr(rng, depth - 1)
        cls = {"add": tx.Add, "sub": tx.Sub, "mul": tx.Mul, "div": tx.Div}[kind]
        if kind == "div" and isinstance(b, tx.Lit) and abs(b.value) < 0.1:
            b = tx.Lit(b.value + 1.0)
        if isinstance(a, tx.Lit) and isinstance(b, tx.Lit):
            return a  # literal-only nodes would fold; keep corpus trees as-built
        return cls(a, b)
    if kind == "pow":
        base = random_time_expr(rng, depth - 1)
        if isinstance(base, tx.Lit):
            return base
        return tx.Pow(base, int(rng.integers(2, 4)))
    if kind == "neg":
        a = random_time_expr(rng, depth - 1)
        return tx.Lit(-a.value) if isinstance(a, tx.Lit) else tx.Neg(a)
    a = random_time_expr(rng, depth - 1)
    if isinstance(a, tx.Lit):
        return tx.Fun(kind, tx.Mul(a, tx.T))
    return tx.Fun(kind, a)


def _denominators(e: tx.TimeExpr):
    if isinstance(e, tx.Div):
        yield e.right
    for name in ("left", "right", "arg", "base"):
        child = getattr(e, name, None)
        if child is not None and not isinstance(child, (int, str)):
            yield from _denominators(child)


def expr_corpus(seed: int, count: int, depth: int = 6,
                n_times: int = 10, bound: float = 1e4):
    """Yield (expr, times) pairs with evaluation points clear of poles.

    A candidate t is kept only when every quotient denominator stays clear
    of zero, values stay below `bound`, and the two central-difference
    stencils (h and 2h) agree with each other: points where the
    finite-difference oracle has not converged say nothing about the exact
    derivative either way.
    """
    rng = np.random.default_rng(seed)
    h = 1e-5
    produced = 0
    while produced < count:
        e = random_time_expr(rng, depth)
        de = tx.diff_expr(e)
        dens = list(_denominators(e))
        times = []
        for _ in range(6 * n_times):
            t = float(rng.uniform(-1.0, 1.0))
            try:
                if any(abs(tx.eval_expr(d, t)) < 1e-2 for d in dens):
                    continue
                vals = [tx.eval_expr(e, t + dt) for dt in (-2 * h, -h, 0.0, h, 2 * h)]
                d = tx.eval_expr(de, t)
            except (tx.EvalError, OverflowError):
                continue
            if any(abs(v) > bound for v in vals) or abs(d) > 1e6:
                continue
            fd1 = (vals[3] - vals[1]) / (2 * h)
            fd2 = (vals[4] - vals[0]) / (4 * h)
            if abs(fd1 - fd2) > 2e-7 * (1.0 + abs(fd1)):
                continue
            times.append(t)
            if len(times) == n_times:
                break
        if len(times) < n_times:
            continue
        produced += 1
        yield e, times


# ---------------------------------------------------------------------------
# Random polynomial fields
# ---------------------------------------------------------------------------

def _multi_indices(dim: int, degree: int):
    if dim == 1:
        yield (degree,)
        return
    for head in range(degree + 1):
        for tail in _multi_indices(dim - 1, degree - head):
            yield (head,) + tail


def random_field(rng: np.random.Generator, dim: int, degrees, scale: float = 1.0,
                 density: float = 0.8) -> PolyField:
    """Random field with homogeneous parts at the given total degrees."""
    terms = {}
    for j in degrees:
        for comp in range(dim):
            for exps in _multi_indices(dim, j):
                if rng.random() < density:
                    c = float(np.round(rng.uniform(-scale, scale), 6))
                    if c != 0.0:
                        terms[(comp, exps)] = c
    return PolyField(dim, terms)
