"""Lie affgebroids through their bidual chart in an adapted basis.

The affine structure is encoded once and for all by the bidual algebroid
data in a frame (e_0, e_1, ..., e_n) whose first section is dual to the
distinguished 1-cocycle: brackets never produce an e_0 component, so the
stored data reduces to

    rho0[i]        anchor of e_0,
    rhoV[a][i]     anchor of e_a,
    C0[a][g]       e_g-coefficient of [e_0, e_a],
    CV[a][b][g]    e_g-coefficient of [e_a, e_b].

From this chart the module builds the vertical subalgebroid, the
prolongation over the dual of the vertical bundle with its cosymplectic
pair, the Reeb section (closed formula and defining-equation solve), and
the pullback identities satisfied by sections of that dual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, Lit, Neg, Var
from .algebroid import (
    AlgebroidChart,
    Coeff,
    ExprCoeff,
    FnCoeff,
    KSection,
    Morphism,
    Prolongation,
    SamplePlan,
    as_coeff,
    differential,
    prolong,
    pullback,
    section_combine,
    section_max_abs,
    section_max_diff,
)

__all__ = [
    "AffgebroidChart",
    "HamiltonianSection",
    "CoSection",
    "VStarSection",
    "eta",
    "omega_h",
    "lambda_h",
    "omega_h_from_pullback",
    "hamiltonian_morphism",
    "reeb",
    "reeb_solve",
    "ReebResult",
    "DegenerateStructureError",
    "covector_morphism",
    "h_compose",
    "pullback_identities",
    "PullbackIdentitiesReport",
    "vertical_restriction_check",
    "RestrictionReport",
]


def _as_expr(obj) -> Expr:
    if isinstance(obj, str):
        return ex.parse(obj)
    if isinstance(obj, (int, float)):
        return Lit(float(obj))
    if isinstance(obj, ex._Node):
        return obj
    if isinstance(obj, ExprCoeff):
        return obj.node
    raise TypeError(f"chart data must be expressions, got {obj!r}")


class AffgebroidChart:
    """Single-chart affgebroid data in a basis adapted to the 1-cocycle."""

    def __init__(self, base_vars, fiber_vars, rho0, rhoV, C0, CV):
        self.base_vars = list(base_vars)
        self.fiber_vars = list(fiber_vars)
        m, n = len(self.base_vars), len(self.fiber_vars)
        self.rho0 = [_as_expr(c) for c in rho0]
        self.rhoV = [[_as_expr(c) for c in row] for row in rhoV]
        self.C0 = [[_as_expr(c) for c in row] for row in C0]
        self.CV = [[[_as_expr(c) for c in col] for col in mat] for mat in CV]
        if len(self.rho0) != m:
            raise ValueError("rho0 needs one component per base variable")
        if len(self.rhoV) != n or any(len(r) != m for r in self.rhoV):
            raise ValueError("rhoV must be n x m")
        if len(self.C0) != n or any(len(r) != n for r in self.C0):
            raise ValueError("C0 must be n x n")
        if len(self.CV) != n or any(
            len(mat) != n or any(len(col) != n for col in mat) for mat in self.CV
        ):
            raise ValueError("CV must be n x n x n")
        if set(self.base_vars) & set(self.fiber_vars):
            raise ValueError("base and fiber variable names must not overlap")
        self._bidual = None
        self._vertical = None
        self._prolongation = None
        self._vertical_prolongation = None
        self._aplus_prolongation = None

    @property
    def m(self) -> int:
        return len(self.base_vars)

    @property
    def n(self) -> int:
        return len(self.fiber_vars)

    def all_vars(self) -> list[str]:
        return self.base_vars + self.fiber_vars

    def bidual_chart(self) -> AlgebroidChart:
        """Rank n+1 chart, adapted section first; no bracket outputs e_0."""
        if self._bidual is None:
            n = self.n
            zero = Lit(0.0)
            anchor = [list(self.rho0)] + [list(row) for row in self.rhoV]
            structure = [[[zero] * (n + 1) for _ in range(n + 1)] for _ in range(n + 1)]
            for a in range(n):
                for g in range(n):
                    structure[0][1 + a][1 + g] = self.C0[a][g]
                    structure[1 + a][0][1 + g] = Neg(self.C0[a][g])
            for a in range(n):
                for b in range(n):
                    for g in range(n):
                        structure[1 + a][1 + b][1 + g] = self.CV[a][b][g]
            labels = ["e0"] + [f"e{a+1}" for a in range(n)]
            self._bidual = AlgebroidChart(self.base_vars, anchor, structure, labels=labels)
        return self._bidual

    def vertical_chart(self) -> AlgebroidChart:
        """Rank n subchart spanned by the model directions."""
        if self._vertical is None:
            self._vertical = AlgebroidChart(
                self.base_vars,
                [list(row) for row in self.rhoV],
                [[[self.CV[a][b][g] for g in range(self.n)] for b in range(self.n)] for a in range(self.n)],
                labels=[f"e{a+1}" for a in range(self.n)],
            )
        return self._vertical

    def prolongation(self) -> Prolongation:
        """Prolongation of the bidual over the dual of the vertical bundle.

        Rank 2n+1, ordered as (lift of e_0, lifts of e_a, verticals)."""
        if self._prolongation is None:
            self._prolongation = prolong(self.bidual_chart(), self.fiber_vars)
        return self._prolongation

    def vertical_prolongation(self) -> Prolongation:
        if self._vertical_prolongation is None:
            self._vertical_prolongation = prolong(self.vertical_chart(), self.fiber_vars)
        return self._vertical_prolongation

    def aplus_prolongation(self) -> Prolongation:
        """Prolongation of the bidual over the full dual (extra y0 fiber)."""
        if self._aplus_prolongation is None:
            y0 = "y0"
            used = set(self.base_vars) | set(self.fiber_vars)
            while y0 in used:
                y0 += "_"
            self._aplus_prolongation = prolong(self.bidual_chart(), [y0] + self.fiber_vars)
        return self._aplus_prolongation

    def __repr__(self):
        return f"AffgebroidChart(m={self.m}, n={self.n}, base={self.base_vars}, fiber={self.fiber_vars})"


@dataclass
class HamiltonianSection:
    """Section of the dual projection, (x, y) -> (x, -H(x, y), y)."""

    chart: AffgebroidChart
    H: Expr

    def __post_init__(self):
        self.H = _as_expr(self.H)
        extra = ex.free_vars(self.H) - set(self.chart.all_vars())
        if extra:
            raise ValueError(f"Hamiltonian uses unknown variables {sorted(extra)}")

    def value(self, env) -> float:
        return ex.evaluate(self.H, env)

    def gradients(self, env) -> tuple[float, list[float], list[float]]:
        """Value, base partials, fiber partials at one point."""
        m = self.chart.m
        v, parts = ex.evaluate_with_partials(self.H, env, self.chart.all_vars())
        return v, parts[:m], parts[m:]


@dataclass
class CoSection:
    """Section of the full dual bundle: components (alpha0, alphaV) over the base."""

    chart: AffgebroidChart
    alpha0: object
    alphaV: list

    def __post_init__(self):
        self.alpha0 = as_coeff(self.alpha0)
        self.alphaV = [as_coeff(c) for c in self.alphaV]
        if len(self.alphaV) != self.chart.n:
            raise ValueError("alphaV needs one component per fiber coordinate")

    def as_bidual_section(self) -> KSection:
        return KSection.one_section(self.chart.bidual_chart(), [self.alpha0] + self.alphaV)

    def vertical_values(self, env) -> list[float]:
        return [c.value(env) for c in self.alphaV]

    def is_expression_backed(self) -> bool:
        return isinstance(self.alpha0, ExprCoeff) and all(
            isinstance(c, ExprCoeff) for c in self.alphaV
        )


@dataclass
class VStarSection:
    """Section of the dual of the vertical bundle, gamma = gamma_a e^a."""

    chart: AffgebroidChart
    gammaV: list

    def __post_init__(self):
        self.gammaV = [_as_expr(c) for c in self.gammaV]
        if len(self.gammaV) != self.chart.n:
            raise ValueError("gammaV needs one component per fiber coordinate")

    def values(self, env) -> list[float]:
        return [ex.evaluate(c, env) for c in self.gammaV]


# ------------------------------------------------------- cosymplectic pair


def eta(aff: AffgebroidChart) -> KSection:
    """The closed 1-section dual to the lifted adapted section."""
    return KSection(aff.prolongation().chart, 1, {(0,): Lit(1.0)})


def omega_h(h: HamiltonianSection) -> KSection:
    """The 2-section of the cosymplectic pair, assembled coefficientwise.

    Nonzero coefficients on increasing index pairs, with lifts at 0..n and
    verticals at n+1..2n:

        (0, g)        sum_a C0[g][a] y_a  -  sum_i rhoV[g][i] dH/dx_i
        (0, n+1+g)    -dH/dy_g
        (a, b)        sum_g CV[a][b][g] y_g          (1 <= a < b <= n)
        (g, n+1+g)    1
    """
    aff = h.chart
    n = aff.n
    pro = aff.prolongation().chart
    coeffs: dict[tuple, object] = {}

    for g in range(n):
        c0_row = aff.C0[g]
        rho_row = aff.rhoV[g]

        def mixed(env, c0_row=c0_row, rho_row=rho_row):
            _, hx, _ = h.gradients(env)
            total = 0.0
            for a in range(n):
                total += ex.evaluate(c0_row[a], env) * env[aff.fiber_vars[a]]
            for i in range(aff.m):
                total -= ex.evaluate(rho_row[i], env) * hx[i]
            return total

        coeffs[(0, 1 + g)] = FnCoeff(mixed)

        def dh_dy(env, g=g):
            _, _, hy = h.gradients(env)
            return -hy[g]

        coeffs[(0, n + 1 + g)] = FnCoeff(dh_dy)
        coeffs[(1 + g, n + 1 + g)] = Lit(1.0)

    for a in range(n):
        for b in range(a + 1, n):
            node = None
            for g in range(n):
                entry = aff.CV[a][b][g]
                if isinstance(entry, Lit) and entry.value == 0.0:
                    continue
                term = entry * Var(aff.fiber_vars[g])
                node = term if node is None else node + term
            if node is not None:
                coeffs[(1 + a, 1 + b)] = node

    return KSection(pro, 2, coeffs)


def hamiltonian_morphism(h: HamiltonianSection) -> Morphism:
    """Prolonged graph map of h into the prolongation over the full dual."""
    aff = h.chart
    n, m = aff.n, aff.m
    src = aff.prolongation().chart
    ap = aff.aplus_prolongation()
    dst = ap.chart
    y0 = ap.fiber_vars[0]

    base_map: list[object] = []
    for var in dst.base_vars:
        base_map.append(Neg(h.H) if var == y0 else Var(var))

    zero = Lit(0.0)
    fiber = [[zero] * src.rank for _ in range(dst.rank)]
    for a in range(n + 1):
        fiber[a][a] = Lit(1.0)
    e0bar = n + 1  # vertical row of the extra dual fiber

    def drag_along(row_idx):
        # rho^i_(row) dH/dx^i, negated: the y0-component of the pushed lift
        rho_row = aff.rho0 if row_idx == 0 else aff.rhoV[row_idx - 1]

        def fn(env, rho_row=rho_row):
            _, hx, _ = h.gradients(env)
            return -sum(ex.evaluate(rho_row[i], env) * hx[i] for i in range(m))

        return FnCoeff(fn)

    for a in range(n + 1):
        fiber[e0bar][a] = drag_along(a)
    for g in range(n):
        def fn(env, g=g):
            _, _, hy = h.gradients(env)
            return -hy[g]

        fiber[e0bar][n + 1 + g] = FnCoeff(fn)
        fiber[n + 2 + g][n + 1 + g] = Lit(1.0)

    return Morphism(src, dst, base_map, fiber)


def lambda_h(h: HamiltonianSection) -> KSection:
    """Pullback of the tautological section along the graph morphism of h."""
    ap = h.chart.aplus_prolongation()
    return pullback(hamiltonian_morphism(h), ap.liouville())


def omega_h_from_pullback(h: HamiltonianSection) -> KSection:
    """Pullback of the canonical symplectic section; cross-check route."""
    ap = h.chart.aplus_prolongation()
    return pullback(hamiltonian_morphism(h), ap.canonical_symplectic())


# ------------------------------------------------------------ Reeb section


class DegenerateStructureError(RuntimeError):
    """The pair (omega, eta) failed to determine a unique Reeb value."""


@dataclass
class ReebResult:
    coefficients: list[float]
    residual: float
    rank: int


def reeb(h: HamiltonianSection):
    """Closed-formula Reeb evaluator in the ordered prolongation basis.

    Returns a function of a point of the dual producing the 2n+1 components

        (1,
         dH/dy_a,
         -(CV[a][b][g] y_g dH/dy_b + rhoV[a][i] dH/dx_i - C0[a][g] y_g)).
    """
    aff = h.chart
    n, m = aff.n, aff.m

    def evaluate(env) -> list[float]:
        _, hx, hy = h.gradients(env)
        yv = [env[v] for v in aff.fiber_vars]
        out = [1.0] + list(hy)
        for a in range(n):
            total = 0.0
            for b in range(n):
                if hy[b] == 0.0:
                    continue
                for g in range(n):
                    total += ex.evaluate(aff.CV[a][b][g], env) * yv[g] * hy[b]
            for i in range(m):
                total += ex.evaluate(aff.rhoV[a][i], env) * hx[i]
            for g in range(n):
                total -= ex.evaluate(aff.C0[a][g], env) * yv[g]
            out.append(-total)
        return out

    return evaluate


def omega_matrix(omega: KSection, env) -> np.ndarray:
    """Full antisymmetric coefficient matrix of a 2-section at a point."""
    r = omega.chart.rank
    mat = np.zeros((r, r))
    for (a, b), coeff in omega.coeffs.items():
        v = coeff.value(env)
        mat[a, b] = v
        mat[b, a] = -v
    return mat


def reeb_solve(
    h: HamiltonianSection,
    env,
    omega: KSection | None = None,
    residual_tol: float = 1e-8,
) -> ReebResult:
    """Solve the defining conditions of the Reeb section at one point.

    Stacks the contraction equations with the 2-section on top of the
    normalization row and solves the least-squares system; a tiny residual
    certifies pointwise nondegeneracy of the cosymplectic pair.
    """
    aff = h.chart
    om = omega if omega is not None else omega_h(h)
    r = om.chart.rank
    mat = omega_matrix(om, env)
    system = np.zeros((r + 1, r))
    # row b: sum_a v^a Omega(e_a, e_b) = 0
    for b in range(r):
        system[b, :] = mat[:, b]
    system[r, 0] = 1.0  # normalization against the adapted 1-section
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    sol, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = float(np.linalg.norm(system @ sol - rhs))
    if rank < r or residual > residual_tol:
        raise DegenerateStructureError(
            f"degenerate cosymplectic pair at {env}: rank {rank} of {r}, residual {residual:.3e}"
        )
    return ReebResult([float(v) for v in sol], residual, int(rank))


# --------------------------------------------------- sections of the dual


def covector_morphism(gamma: VStarSection) -> Morphism:
    """Prolonged graph morphism of a section of the dual of the vertical bundle.

    Lifts land on the corresponding lifted sections plus the vertical
    correction rho^i_a (d gamma_v / dx^i) along each fiber direction.
    """
    aff = gamma.chart
    n, m = aff.n, aff.m
    src = aff.bidual_chart()
    dst = aff.prolongation().chart

    base_map: list[object] = [Var(v) for v in aff.base_vars] + list(gamma.gammaV)

    zero = Lit(0.0)
    fiber = [[zero] * src.rank for _ in range(dst.rank)]
    for a in range(n + 1):
        fiber[a][a] = Lit(1.0)
    for a in range(n + 1):
        rho_row = aff.rho0 if a == 0 else aff.rhoV[a - 1]
        for nu in range(n):
            def fn(env, rho_row=rho_row, nu=nu):
                _, dg = ex.evaluate_with_partials(gamma.gammaV[nu], env, aff.base_vars)
                return sum(ex.evaluate(rho_row[i], env) * dg[i] for i in range(m))

            fiber[n + 1 + nu][a] = FnCoeff(fn)
    return Morphism(src, dst, base_map, fiber)


def h_compose(h: HamiltonianSection, gamma: VStarSection) -> KSection:
    """h composed with gamma, as a 1-section of the bidual chart.

    Components in the adapted dual basis: (-H(x, gamma(x)), gamma_a(x))."""
    aff = h.chart
    sub = {aff.fiber_vars[a]: gamma.gammaV[a] for a in range(aff.n)}
    head = Neg(ex.substitute(h.H, sub))
    return KSection.one_section(aff.bidual_chart(), [head] + list(gamma.gammaV))


@dataclass
class PullbackIdentitiesReport:
    lambda_dev: float
    omega_dev: float
    points: int
    tol: float = 1e-8

    @property
    def holds(self) -> bool:
        return self.lambda_dev <= self.tol and self.omega_dev <= self.tol

    def lines(self) -> list[str]:
        return [
            f"pullback_lambda_dev = {self.lambda_dev:.3e}",
            f"pullback_omega_dev = {self.omega_dev:.3e}",
            f"pullback_identities_hold = {self.holds}",
        ]


def pullback_identities(
    gamma: VStarSection, h: HamiltonianSection, sample: SamplePlan | None = None
) -> PullbackIdentitiesReport:
    """Deviation of the two graph-pullback identities at sampled base points.

    Checks that pulling the tautological pairing back along the graph of
    gamma reproduces h composed with gamma, and that pulling the 2-section
    back gives minus the differential of that composite.
    """
    aff = gamma.chart
    plan = sample if sample is not None else SamplePlan()
    envs = plan.points(aff.base_vars)
    morph = covector_morphism(gamma)
    hg = h_compose(h, gamma)

    lam_pulled = pullback(morph, lambda_h(h))
    lambda_dev = section_max_diff(lam_pulled, hg, envs)

    om_pulled = pullback(morph, omega_h(h))
    minus_dhg = section_combine(-1.0, differential(hg), 0.0, KSection.zero(aff.bidual_chart(), 2))
    omega_dev = section_max_diff(om_pulled, minus_dhg, envs)
    return PullbackIdentitiesReport(lambda_dev, omega_dev, len(envs))


# --------------------------------------------------- vertical restriction


def vertical_inclusion_morphism(aff: AffgebroidChart) -> Morphism:
    """Inclusion of the vertical prolongation: drop the lifted adapted section."""
    src = aff.vertical_prolongation().chart
    dst = aff.prolongation().chart
    n = aff.n
    zero = Lit(0.0)
    fiber = [[zero] * src.rank for _ in range(dst.rank)]
    for a in range(n):
        fiber[1 + a][a] = Lit(1.0)
        fiber[n + 1 + a][n + a] = Lit(1.0)
    base_map = [Var(v) for v in dst.base_vars]
    return Morphism(src, dst, base_map, fiber)


@dataclass
class RestrictionReport:
    lambda_dev: float
    omega_dev: float
    eta_dev: float
    points: int
    tol: float = 1e-10

    @property
    def holds(self) -> bool:
        return max(self.lambda_dev, self.omega_dev, self.eta_dev) <= self.tol

    def lines(self) -> list[str]:
        return [
            f"restriction_lambda_dev = {self.lambda_dev:.3e}",
            f"restriction_omega_dev = {self.omega_dev:.3e}",
            f"restriction_eta_dev = {self.eta_dev:.3e}",
            f"restriction_holds = {self.holds}",
        ]


def vertical_restriction_check(
    h: HamiltonianSection, sample: SamplePlan | None = None
) -> RestrictionReport:
    """Restrict the cosymplectic data to the vertical prolongation.

    The 2-section must restrict to the canonical symplectic section of the
    vertical chart, the tautological section to its own, and the adapted
    1-section to zero."""
    aff = h.chart
    plan = sample if sample is not None else SamplePlan()
    envs = plan.points(aff.prolongation().chart.base_vars)
    incl = vertical_inclusion_morphism(aff)
    vp = aff.vertical_prolongation()

    omega_dev = section_max_diff(pullback(incl, omega_h(h)), vp.canonical_symplectic(), envs)
    lambda_dev = section_max_diff(pullback(incl, lambda_h(h)), vp.liouville(), envs)
    eta_restricted = pullback(incl, eta(aff))
    eta_dev, _, _ = section_max_abs(eta_restricted, envs)
    return RestrictionReport(lambda_dev, omega_dev, eta_dev, len(envs))
