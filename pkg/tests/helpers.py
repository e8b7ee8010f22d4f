"""Shared oracles and generators for the test suite.

The expression corpus is built safe-by-construction (bounded trig/exp
arguments, positively offset log/sqrt arguments, guarded denominators) and
points are rejection-sampled away from residual domain violations, so the
finite-difference oracle is well conditioned wherever it is evaluated.
"""

from __future__ import annotations

import math
import random

from affmech import expr as ex
from affmech.expr import BinOp, Call, Lit, Neg, Var


def fd_partials(e, env, wrt, h=1e-6):
    """Central finite differences; the independent oracle for dual arithmetic."""
    out = []
    for name in wrt:
        up = dict(env)
        up[name] = env[name] + h
        down = dict(env)
        down[name] = env[name] - h
        out.append((ex.evaluate(e, up) - ex.evaluate(e, down)) / (2 * h))
    return out


def jacobi_cyclic_residual(C):
    """Brute-force cyclic-sum Jacobi residual of constant structure data.

    C[a][b][c] is the e_c component of the bracket of (e_a, e_b)."""
    r = len(C)
    worst = 0.0
    for a in range(r):
        for b in range(r):
            for c in range(r):
                for d in range(r):
                    s = 0.0
                    for e in range(r):
                        s += (
                            C[a][b][e] * C[e][c][d]
                            + C[b][c][e] * C[e][a][d]
                            + C[c][a][e] * C[e][b][d]
                        )
                    worst = max(worst, abs(s))
    return worst


# ------------------------------------------------------- expression corpus

CORPUS_VARS = ["x", "y", "z"]


def _linear_arg(rng, variables):
    c1 = round(rng.uniform(-0.5, 0.5), 3)
    c0 = round(rng.uniform(-0.4, 0.4), 3)
    return Lit(c1) * Var(rng.choice(variables)) + Lit(c0)


def _gen(rng, depth, variables):
    if depth <= 0:
        if rng.random() < 0.4:
            return Lit(round(rng.uniform(-2.0, 2.0), 3))
        return Var(rng.choice(variables))
    kind = rng.choices(
        ["add", "sub", "mul", "div", "neg", "pow", "call", "atom"],
        weights=[3, 3, 3, 2, 2, 2, 3, 2],
    )[0]
    if kind == "atom":
        return _gen(rng, 0, variables)
    if kind == "add":
        return _gen(rng, depth - 1, variables) + _gen(rng, depth - 1, variables)
    if kind == "sub":
        return _gen(rng, depth - 1, variables) - _gen(rng, depth - 1, variables)
    if kind == "mul":
        return _gen(rng, depth - 1, variables) * _gen(rng, depth - 1, variables)
    if kind == "div":
        d = _gen(rng, depth - 1, variables)
        return _gen(rng, depth - 1, variables) / (Lit(2.0) + d * d)
    if kind == "neg":
        return -_gen(rng, depth - 1, variables)
    if kind == "pow":
        return _gen(rng, depth - 1, variables) ** Lit(float(rng.choice([2, 3])))
    fn = rng.choice(["sin", "cos", "tan", "exp", "log", "sqrt"])
    if fn in ("sin", "cos", "tan", "exp"):
        return Call(fn, _linear_arg(rng, variables))
    inner = _gen(rng, depth - 1, variables)
    offset = Lit(1.5 if fn == "log" else 0.5)
    return Call(fn, offset + inner * inner)


def expression_corpus(count=200, seed=20240811, max_depth=4):
    rng = random.Random(seed)
    return [_gen(rng, rng.randint(1, max_depth), CORPUS_VARS) for _ in range(count)]


def corpus_points(e, count=100, seed=99, box=(-2.0, 2.0), fd_step=1e-6):
    """Seeded points where e and its finite-difference stencil are defined."""
    rng = random.Random(seed)
    variables = sorted(ex.free_vars(e)) or ["x"]
    points = []
    attempts = 0
    while len(points) < count and attempts < count * 20:
        attempts += 1
        env = {v: rng.uniform(*box) for v in variables}
        try:
            v = ex.evaluate(e, env)
            if not math.isfinite(v) or abs(v) > 1e8:
                continue
            for name in variables:
                for sign in (+1, -1):
                    shifted = dict(env)
                    shifted[name] = env[name] + sign * fd_step
                    w = ex.evaluate(e, shifted)
                    if not math.isfinite(w) or abs(w) > 1e8:
                        raise ex.DomainError("oversize", e)
        except ex.EvalError:
            continue
        points.append(env)
    return points
