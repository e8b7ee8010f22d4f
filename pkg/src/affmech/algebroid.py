"""Lie algebroids in a single coordinate chart.

A chart stores the anchor components rho^i_a(x) and the structure functions
C^c_ab(x) of a local frame {e_a}.  On top of that this module provides
degree-k alternating sections, the exterior differential, pullbacks along
morphisms, numeric chart validation (antisymmetry, anchor compatibility and
Jacobi via d.d = 0 at sampled points), and the prolongation of a chart over
a fibration together with its Liouville and canonical symplectic sections.

Coefficients come in two flavours: expression-backed ones (exact partial
derivatives via dual arithmetic) and derived point-evaluators produced by
the differential or a pullback, whose partials are taken by central finite
differences.  Tolerances of the numeric checks are calibrated to the
finite-difference step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

from . import expr as ex
from .expr import Expr, Lit, Var

__all__ = [
    "FD_STEP",
    "VALIDATION_TOL",
    "ExprCoeff",
    "FnCoeff",
    "Coeff",
    "as_coeff",
    "is_zero_coeff",
    "SplitMix64",
    "SamplePlan",
    "AlgebroidChart",
    "KSection",
    "differential",
    "ValidationReport",
    "validate_chart",
    "Morphism",
    "pullback",
    "morphism_defect",
    "Prolongation",
    "prolong",
    "section_max_abs",
    "section_max_diff",
    "section_combine",
    "section_scale",
]

FD_STEP = 1e-5  # central-difference step for partials of derived coefficients
VALIDATION_TOL = 1e-8


# ------------------------------------------------------------- coefficients


class ExprCoeff:
    """Coefficient backed by an expression; partials are exact."""

    __slots__ = ("node",)

    def __init__(self, node: Expr):
        self.node = node

    def value(self, env) -> float:
        return ex.evaluate(self.node, env)

    def value_and_partials(self, env, wrt: Sequence[str]):
        return ex.evaluate_with_partials(self.node, env, wrt)

    def __repr__(self):
        return f"ExprCoeff({ex.to_string(self.node)})"


class FnCoeff:
    """Derived coefficient known only as a point evaluator.

    Partials fall back to central finite differences of step ``FD_STEP``;
    users of these partials must budget tolerances accordingly.
    """

    __slots__ = ("fn", "step")

    def __init__(self, fn: Callable[[Mapping[str, float]], float], step: float = FD_STEP):
        self.fn = fn
        self.step = step

    def value(self, env) -> float:
        return self.fn(env)

    def value_and_partials(self, env, wrt: Sequence[str]):
        v = self.fn(env)
        h = self.step
        parts = []
        shifted = dict(env)
        for name in wrt:
            x = env[name]
            shifted[name] = x + h
            vp = self.fn(shifted)
            shifted[name] = x - h
            vm = self.fn(shifted)
            shifted[name] = x
            parts.append((vp - vm) / (2.0 * h))
        return v, parts

    def __repr__(self):
        return "FnCoeff(<evaluator>)"


Coeff = Union[ExprCoeff, FnCoeff]

_ZERO = Lit(0.0)


def as_coeff(obj) -> Coeff:
    """Coerce an expression, string, number, callable or Coeff."""
    if isinstance(obj, (ExprCoeff, FnCoeff)):
        return obj
    if isinstance(obj, str):
        return ExprCoeff(ex.parse(obj))
    if isinstance(obj, (int, float)):
        return ExprCoeff(Lit(float(obj)))
    if isinstance(obj, ex._Node):
        return ExprCoeff(obj)
    if callable(obj):
        return FnCoeff(obj)
    raise TypeError(f"cannot use {obj!r} as a coefficient")


def is_zero_coeff(c: Coeff) -> bool:
    return isinstance(c, ExprCoeff) and isinstance(c.node, Lit) and c.node.value == 0.0


# ------------------------------------------------------------------ sampling


class SplitMix64:
    """Deterministic 64-bit PRNG (splitmix64), identical on every platform."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)


@dataclass(frozen=True)
class SamplePlan:
    """Axis-aligned sampling box: per-variable intervals, count and seed."""

    box: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    count: int = 100
    seed: int = 42

    DEFAULT_INTERVAL = (-1.0, 1.0)

    def interval(self, var: str) -> tuple[float, float]:
        return self.box.get(var, self.DEFAULT_INTERVAL)

    def points(self, variables: Sequence[str]) -> list[dict[str, float]]:
        rng = SplitMix64(self.seed)
        pts = []
        for _ in range(self.count):
            pts.append({v: rng.uniform(*self.interval(v)) for v in variables})
        return pts


# -------------------------------------------------------------------- charts


class AlgebroidChart:
    """One-chart Lie algebroid data: anchor rho^i_a and structure C^c_ab.

    ``anchor[a][i]`` is the coefficient of d/dx^i in the image of e_a;
    ``structure[a][b][c]`` is the coefficient of e_c in the bracket of
    (e_a, e_b), stored fully (both index orders).
    """

    def __init__(self, base_vars, anchor, structure, labels=None):
        self.base_vars = list(base_vars)
        self.anchor = [[as_coeff(c) for c in row] for row in anchor]
        self.structure = [
            [[as_coeff(c) for c in col] for col in mat] for mat in structure
        ]
        r = len(self.anchor)
        m = len(self.base_vars)
        if any(len(row) != m for row in self.anchor):
            raise ValueError("anchor rows must have one entry per base variable")
        if len(self.structure) != r or any(
            len(mat) != r or any(len(col) != r for col in mat) for mat in self.structure
        ):
            raise ValueError("structure must be rank x rank x rank")
        self.labels = list(labels) if labels is not None else [f"e{a+1}" for a in range(r)]
        if len(self.labels) != r:
            raise ValueError("one label per basis section")
        self._anchor_nz = [
            [(i, c) for i, c in enumerate(row) if not is_zero_coeff(c)]
            for row in self.anchor
        ]
        self._struct_nz = {}
        for a in range(r):
            for b in range(r):
                nz = [(c, co) for c, co in enumerate(self.structure[a][b]) if not is_zero_coeff(co)]
                if nz:
                    self._struct_nz[(a, b)] = nz

    @property
    def dim(self) -> int:
        return len(self.base_vars)

    @property
    def rank(self) -> int:
        return len(self.anchor)

    def anchor_nonzero(self, a: int):
        return self._anchor_nz[a]

    def structure_nonzero(self, a: int, b: int):
        return self._struct_nz.get((a, b), ())

    def anchor_value(self, a: int, env) -> list[float]:
        return [c.value(env) for c in self.anchor[a]]

    def __repr__(self):
        return f"AlgebroidChart(rank={self.rank}, base={self.base_vars})"


# ------------------------------------------------------------------ sections

MAX_DEGREE = 3


class KSection:
    """Alternating degree-k section, coefficients keyed by increasing tuples."""

    def __init__(self, chart: AlgebroidChart, degree: int, coeffs: Mapping[tuple, object]):
        if not 0 <= degree <= MAX_DEGREE:
            raise ValueError(f"degree must be between 0 and {MAX_DEGREE}")
        self.chart = chart
        self.degree = degree
        self.coeffs: dict[tuple[int, ...], Coeff] = {}
        for idx, c in coeffs.items():
            idx = tuple(idx)
            if len(idx) != degree or list(idx) != sorted(idx) or len(set(idx)) != len(idx):
                raise ValueError(f"index tuple {idx} must be strictly increasing of length {degree}")
            if any(not 0 <= a < chart.rank for a in idx):
                raise ValueError(f"index tuple {idx} out of range for rank {chart.rank}")
            cc = as_coeff(c)
            if not is_zero_coeff(cc):
                self.coeffs[idx] = cc

    # ---- constructors

    @classmethod
    def zero(cls, chart, degree):
        return cls(chart, degree, {})

    @classmethod
    def function(cls, chart, f):
        return cls(chart, 0, {(): f})

    @classmethod
    def basis_covector(cls, chart, a):
        return cls(chart, 1, {(a,): Lit(1.0)})

    @classmethod
    def one_section(cls, chart, components):
        return cls(chart, 1, {(a,): c for a, c in enumerate(components)})

    # ---- evaluation

    def coefficient(self, idx) -> Coeff | None:
        return self.coeffs.get(tuple(idx))

    def component(self, indices, env) -> float:
        """Value on (e_{i1},...,e_{ik}) for an arbitrary index order."""
        key, sign = _sort_with_sign(tuple(indices))
        if key is None:
            return 0.0
        c = self.coeffs.get(key)
        return 0.0 if c is None else sign * c.value(env)

    def values(self, env) -> dict[tuple[int, ...], float]:
        return {idx: c.value(env) for idx, c in self.coeffs.items()}

    def __repr__(self):
        return f"KSection(degree={self.degree}, nonzero={sorted(self.coeffs)})"


def _sort_with_sign(indices: tuple[int, ...]):
    """Sort an index tuple, tracking permutation parity; None on repeats."""
    idx = list(indices)
    sign = 1.0
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(idx)):
        if idx[i - 1] == idx[i]:
            return None, 0.0
    return tuple(idx), sign


# -------------------------------------------------------------- differential


def differential(s: KSection) -> KSection:
    """Exterior differential of a section of degree at most 2.

    Evaluates the Cartan-type formula on basis tuples: the anchor acts on
    coefficient functions through their partials, brackets of basis sections
    contribute through the structure functions.  Output coefficients are
    point evaluators, not printable expressions.
    """
    if s.degree > 2:
        raise ValueError("differential implemented for sections of degree <= 2")
    chart = s.chart
    k = s.degree
    out: dict[tuple, Coeff] = {}
    for idx in itertools.combinations(range(chart.rank), k + 1):
        anchor_terms = []
        for i, a in enumerate(idx):
            sub = idx[:i] + idx[i + 1 :]
            coeff = s.coeffs.get(sub)
            if coeff is None:
                continue
            row = chart.anchor_nonzero(a)
            if not row:
                continue
            names = [chart.base_vars[vi] for vi, _ in row]
            anchor_terms.append(((-1.0) ** i, coeff, row, names))
        bracket_terms = []
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                rest = tuple(idx[p] for p in range(k + 1) if p not in (i, j))
                sign_ij = (-1.0) ** (i + j)
                for c, c_coeff in chart.structure_nonzero(idx[i], idx[j]):
                    key, sgn = _sort_with_sign((c,) + rest)
                    if key is None:
                        continue
                    coeff = s.coeffs.get(key)
                    if coeff is None:
                        continue
                    bracket_terms.append((sign_ij * sgn, c_coeff, coeff))
        if anchor_terms or bracket_terms:
            out[idx] = FnCoeff(_differential_closure(anchor_terms, bracket_terms))
    return KSection(chart, k + 1, out)


def _differential_closure(anchor_terms, bracket_terms):
    def evaluate(env):
        total = 0.0
        for sign, coeff, row, names in anchor_terms:
            _, parts = coeff.value_and_partials(env, names)
            acc = 0.0
            for p, (_, rc) in enumerate(row):
                acc += rc.value(env) * parts[p]
            total += sign * acc
        for sign, c_coeff, coeff in bracket_terms:
            cv = c_coeff.value(env)
            if cv != 0.0:
                total += sign * cv * coeff.value(env)
        return total

    return evaluate


# ---------------------------------------------------------------- morphisms


@dataclass
class Morphism:
    """Bundle morphism between charts: base map plus fiberwise linear map.

    ``base_map[j]`` gives the j-th destination base coordinate as a function
    of the source base coordinates; ``fiber_map[b][a]`` is the coefficient of
    the destination basis section e'_b in the image of the source e_a.
    """

    src: AlgebroidChart
    dst: AlgebroidChart
    base_map: list
    fiber_map: list

    def __post_init__(self):
        self.base_map = [as_coeff(c) for c in self.base_map]
        self.fiber_map = [[as_coeff(c) for c in row] for row in self.fiber_map]
        if len(self.base_map) != self.dst.dim:
            raise ValueError("base map must produce every destination coordinate")
        if len(self.fiber_map) != self.dst.rank or any(
            len(row) != self.src.rank for row in self.fiber_map
        ):
            raise ValueError("fiber map must be dst.rank x src.rank")

    def push_env(self, env) -> dict[str, float]:
        return {
            var: self.base_map[j].value(env) for j, var in enumerate(self.dst.base_vars)
        }


_PERMS = {
    1: [((0,), 1.0)],
    2: [((0, 1), 1.0), ((1, 0), -1.0)],
    3: [
        ((0, 1, 2), 1.0),
        ((1, 2, 0), 1.0),
        ((2, 0, 1), 1.0),
        ((2, 1, 0), -1.0),
        ((1, 0, 2), -1.0),
        ((0, 2, 1), -1.0),
    ],
}


def pullback(morph: Morphism, s: KSection) -> KSection:
    """Pointwise multilinear pullback of a section along a morphism."""
    if s.chart is not morph.dst:
        raise ValueError("section must live on the destination chart of the morphism")
    k = s.degree
    if k == 0:
        coeff = s.coeffs.get(())
        if coeff is None:
            return KSection.zero(morph.src, 0)
        return KSection(
            morph.src, 0, {(): FnCoeff(lambda env, c=coeff: c.value(morph.push_env(env)))}
        )
    out: dict[tuple, Coeff] = {}
    for idx in itertools.combinations(range(morph.src.rank), k):
        terms = []
        for bkey, coeff in s.coeffs.items():
            det_terms = []
            for perm, sign in _PERMS[k]:
                entries = [morph.fiber_map[bkey[perm[p]]][idx[p]] for p in range(k)]
                if any(is_zero_coeff(e) for e in entries):
                    continue
                det_terms.append((sign, entries))
            if det_terms:
                terms.append((coeff, det_terms))
        if terms:
            out[idx] = FnCoeff(_pullback_closure(morph, terms))
    return KSection(morph.src, k, out)


def _pullback_closure(morph, terms):
    def evaluate(env):
        env_dst = morph.push_env(env)
        total = 0.0
        for coeff, det_terms in terms:
            det = 0.0
            for sign, entries in det_terms:
                prod = sign
                for e in entries:
                    prod *= e.value(env)
                    if prod == 0.0:
                        break
                det += prod
            if det != 0.0:
                total += det * coeff.value(env_dst)
        return total

    return evaluate


def morphism_defect(morph: Morphism, s: KSection, envs) -> float:
    """Max deviation of d(pullback s) from pullback(d s) on sample points."""
    lhs = differential(pullback(morph, s))
    rhs = pullback(morph, differential(s))
    return section_max_diff(lhs, rhs, envs)


# --------------------------------------------------------------- comparisons


def section_max_abs(s: KSection, envs) -> tuple[float, tuple, dict]:
    worst, where, at = 0.0, (), {}
    for env in envs:
        for idx, c in s.coeffs.items():
            v = abs(c.value(env))
            if v > worst:
                worst, where, at = v, idx, env
    return worst, where, at


def section_max_diff(s1: KSection, s2: KSection, envs) -> float:
    if s1.degree != s2.degree:
        raise ValueError("sections must have equal degree")
    keys = set(s1.coeffs) | set(s2.coeffs)
    worst = 0.0
    for env in envs:
        for idx in keys:
            a = s1.coeffs[idx].value(env) if idx in s1.coeffs else 0.0
            b = s2.coeffs[idx].value(env) if idx in s2.coeffs else 0.0
            worst = max(worst, abs(a - b))
    return worst


def section_combine(a: float, s: KSection, b: float, t: KSection) -> KSection:
    """Pointwise a*s + b*t for sections of one chart and degree."""
    if s.chart is not t.chart or s.degree != t.degree:
        raise ValueError("sections must share chart and degree")
    out: dict[tuple, Coeff] = {}
    for idx in set(s.coeffs) | set(t.coeffs):
        cs, ct = s.coeffs.get(idx), t.coeffs.get(idx)
        if isinstance(cs, (ExprCoeff, type(None))) and isinstance(ct, (ExprCoeff, type(None))):
            node = Lit(0.0)
            if cs is not None:
                node = node + Lit(a) * cs.node
            if ct is not None:
                node = node + Lit(b) * ct.node
            out[idx] = ExprCoeff(node)
        else:
            def fn(env, cs=cs, ct=ct):
                v = 0.0
                if cs is not None:
                    v += a * cs.value(env)
                if ct is not None:
                    v += b * ct.value(env)
                return v

            out[idx] = FnCoeff(fn)
    return KSection(s.chart, s.degree, out)


def section_scale(s: KSection, factor: float) -> KSection:
    return section_combine(factor, s, 0.0, KSection.zero(s.chart, s.degree))


# --------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    """Residual maxima of the chart axioms at sampled points."""

    antisymmetry_max: float
    anchor_max: float
    jacobi_max: float
    points: int
    tol: float = VALIDATION_TOL
    worst_jacobi: str = ""

    @property
    def valid(self) -> bool:
        return (
            self.antisymmetry_max <= self.tol
            and self.anchor_max <= self.tol
            and self.jacobi_max <= self.tol
        )

    def lines(self) -> list[str]:
        return [
            f"antisymmetry_max = {self.antisymmetry_max:.3e}",
            f"anchor_compat_max = {self.anchor_max:.3e}",
            f"jacobi_max = {self.jacobi_max:.3e}",
            f"valid = {self.valid}",
        ]


def validate_chart(chart: AlgebroidChart, sample: SamplePlan | None = None) -> ValidationReport:
    """Check C antisymmetry and d.d = 0 on coordinates and basis covectors.

    d.d on coordinate functions encodes compatibility of the anchor with the
    bracket; d.d on basis covectors encodes the Jacobi identity.
    """
    plan = sample if sample is not None else SamplePlan()
    envs = plan.points(chart.base_vars)
    r = chart.rank

    antisym = 0.0
    for a in range(r):
        for b in range(a, r):
            cols = {c for c, _ in chart.structure_nonzero(a, b)}
            cols |= {c for c, _ in chart.structure_nonzero(b, a)}
            for c in cols:
                fwd = chart.structure[a][b][c]
                rev = chart.structure[b][a][c]
                for env in envs:
                    antisym = max(antisym, abs(fwd.value(env) + rev.value(env)))

    anchor_max = 0.0
    for i, var in enumerate(chart.base_vars):
        dd = differential(differential(KSection.function(chart, Var(var))))
        worst, _, _ = section_max_abs(dd, envs)
        anchor_max = max(anchor_max, worst)

    jacobi_max, worst_info = 0.0, ""
    for a in range(r):
        dd = differential(differential(KSection.basis_covector(chart, a)))
        worst, where, _ = section_max_abs(dd, envs)
        if worst > jacobi_max:
            jacobi_max = worst
            worst_info = f"d(d {chart.labels[a]}) component {where}"
    return ValidationReport(antisym, anchor_max, jacobi_max, len(envs), worst_jacobi=worst_info)


# ------------------------------------------------------------- prolongation


@dataclass
class Prolongation:
    """Prolongation of a chart over a fibration with the given fiber coordinates.

    Basis ordering: one lifted section per parent basis section first, then
    one vertical section per fiber coordinate.  Lifted brackets reproduce the
    parent structure functions (they depend on the parent base only), all
    other brackets vanish.
    """

    parent: AlgebroidChart
    fiber_vars: list[str]
    chart: AlgebroidChart

    @property
    def horizontal(self) -> range:
        return range(self.parent.rank)

    def vertical(self, j: int) -> int:
        return self.parent.rank + j

    def liouville(self) -> KSection:
        """Tautological 1-section; needs one fiber coordinate per parent section."""
        if len(self.fiber_vars) != self.parent.rank:
            raise ValueError("Liouville section needs fibers dual to the parent basis")
        comps: dict[tuple, object] = {
            (a,): Var(self.fiber_vars[a]) for a in self.horizontal
        }
        return KSection(self.chart, 1, comps)

    def canonical_symplectic(self) -> KSection:
        """Canonical symplectic 2-section on the prolongation over the dual."""
        if len(self.fiber_vars) != self.parent.rank:
            raise ValueError("canonical symplectic section needs dual fibers")
        r = self.parent.rank
        comps: dict[tuple, object] = {}
        for a in self.horizontal:
            comps[(a, r + a)] = Lit(1.0)
        for a in range(r):
            for b in range(a + 1, r):
                node = None
                for c, coeff in self.parent.structure_nonzero(a, b):
                    if not isinstance(coeff, ExprCoeff):
                        raise ValueError("parent structure must be expression-backed")
                    term = coeff.node * Var(self.fiber_vars[c])
                    node = term if node is None else node + term
                if node is not None:
                    comps[(a, b)] = node
        return KSection(self.chart, 2, comps)


def prolong(parent: AlgebroidChart, fiber_vars: Sequence[str]) -> Prolongation:
    """Prolong a chart over the fibration that forgets the fiber coordinates."""
    fiber_vars = list(fiber_vars)
    clash = set(fiber_vars) & set(parent.base_vars)
    if clash:
        raise ValueError(f"fiber coordinates {sorted(clash)} clash with base coordinates")
    m, r = parent.dim, parent.rank
    rank = r + len(fiber_vars)
    zero = Lit(0.0)
    anchor: list[list[object]] = []
    for a in range(r):
        anchor.append([parent.anchor[a][i] for i in range(m)] + [zero] * len(fiber_vars))
    for j in range(len(fiber_vars)):
        row: list[object] = [zero] * (m + len(fiber_vars))
        row[m + j] = Lit(1.0)
        anchor.append(row)
    structure = [[[zero] * rank for _ in range(rank)] for _ in range(rank)]
    for a in range(r):
        for b in range(r):
            for c, coeff in parent.structure_nonzero(a, b):
                structure[a][b][c] = coeff
    labels = [f"~{lab}" for lab in parent.labels] + [f"d/d{v}" for v in fiber_vars]
    chart = AlgebroidChart(
        list(parent.base_vars) + fiber_vars, anchor, structure, labels=labels
    )
    return Prolongation(parent, fiber_vars, chart)
