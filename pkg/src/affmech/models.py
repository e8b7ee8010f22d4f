"""Built-in model bundles: charts, Hamiltonians and candidate dual sections.

Three families ship ready to use:

* a trivial fibration over time (classical time-dependent mechanics), with
  free-particle and harmonic-oscillator presets and known HJ solutions;
* any valid Lie algebroid re-read as an affgebroid with central adapted
  section (zero extra anchor, no mixed brackets), specialized to tangent
  charts of R^d;
* the heavy-top-free rigid body: time extended so(3) coadjoint dynamics in
  a trivialized chart, i.e. the Euler equations dPi/dt = Pi x Omega.

Sample boxes of the bundles exclude the singularities of their shipped
sections (the 1/(t+1) family, the cot(t) family).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebroid import AlgebroidChart, ExprCoeff, SamplePlan, validate_chart
from .affgebroid import AffgebroidChart, CoSection, HamiltonianSection

__all__ = [
    "ModelBundle",
    "ModelNameError",
    "trivial_fibration",
    "harmonic_oscillator",
    "tangent_algebroid",
    "linear_algebroid",
    "linear_tangent_model",
    "rigid_body",
    "so3_chart",
    "perturbed_so3_chart",
    "by_name",
    "BUILTIN_PATTERNS",
]

_LEVI_CIVITA = {
    (0, 1, 2): 1.0,
    (1, 2, 0): 1.0,
    (2, 0, 1): 1.0,
    (2, 1, 0): -1.0,
    (1, 0, 2): -1.0,
    (0, 2, 1): -1.0,
}


@dataclass
class ModelBundle:
    name: str
    chart: AffgebroidChart
    hamiltonian: HamiltonianSection
    sections: dict[str, CoSection] = field(default_factory=dict)
    sample: SamplePlan = field(default_factory=SamplePlan)
    description: str = ""

    def section(self, name: str) -> CoSection:
        try:
            return self.sections[name]
        except KeyError:
            raise KeyError(
                f"model '{self.name}' has no section '{name}'; "
                f"available: {sorted(self.sections)}"
            ) from None


class ModelNameError(ValueError):
    pass


# ------------------------------------------------------- trivial fibration


def trivial_fibration(dim_q: int) -> ModelBundle:
    """Time plus flat configuration space; free-particle Hamiltonian.

    Coordinates (t, q1..qn) with momenta (p1..pn); the adapted section
    carries the time translation, model directions move the q's.  Shipped
    sections: the spreading-packet HJ solution of the free particle and two
    closed non-solutions.
    """
    if dim_q < 1:
        raise ValueError("dim_q must be at least 1")
    n = dim_q
    base = ["t"] + [f"q{i+1}" for i in range(n)]
    fibers = [f"p{i+1}" for i in range(n)]
    rho0 = [1.0] + [0.0] * n
    rhoV = [[1.0 if i == 1 + a else 0.0 for i in range(1 + n)] for a in range(n)]
    zero_n = [[0.0] * n for _ in range(n)]
    chart = AffgebroidChart(base, fibers, rho0, rhoV, zero_n, [[list(r) for r in zero_n] for _ in range(n)])

    h = HamiltonianSection(chart, "+".join(f"p{i+1}^2/2" for i in range(n)))
    sections = {
        # generating function sum q_i^2 / (2(t+1)); solves the HJ equation
        "w_free": CoSection(
            chart,
            "-(" + "+".join(f"q{i+1}^2" for i in range(n)) + ")/(2*(t+1)^2)",
            [f"q{i+1}/(t+1)" for i in range(n)],
        ),
        # generating function sum q_i^3 / 3; closed but not a solution
        "w_cubic": CoSection(chart, 0.0, [f"q{i+1}^2" for i in range(n)]),
        # generating function sum q_i^2 / 2; closed but not a solution
        "w_sq": CoSection(chart, 0.0, [f"q{i+1}" for i in range(n)]),
        "zero": CoSection(chart, 0.0, [0.0] * n),
    }
    sample = SamplePlan(box={"t": (-0.5, 1.0)})
    return ModelBundle(
        name=f"trivial:{n}",
        chart=chart,
        hamiltonian=h,
        sections=sections,
        sample=sample,
        description="trivial fibration over time, free particle",
    )


def harmonic_oscillator() -> ModelBundle:
    """One-dimensional oscillator on the trivial fibration.

    The shipped solution is the cot-generated one, valid between the zeros
    of sin; the sample box stays inside (0, pi)."""
    bundle = trivial_fibration(1)
    chart = bundle.chart
    h = HamiltonianSection(chart, "(p1^2+q1^2)/2")
    sections = {
        "w_osc": CoSection(chart, "-(q1^2/2)/sin(t)^2", ["q1*cos(t)/sin(t)"]),
        "zero": CoSection(chart, 0.0, [0.0]),
    }
    sample = SamplePlan(box={"t": (0.2, 2.9)})
    return ModelBundle(
        name="oscillator",
        chart=chart,
        hamiltonian=h,
        sections=sections,
        sample=sample,
        description="harmonic oscillator on the trivial fibration",
    )


# --------------------------------------------------------- linear algebroid


def tangent_algebroid(dim: int) -> AlgebroidChart:
    """Tangent chart of R^dim: identity anchor, vanishing brackets."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    base = [f"x{i+1}" for i in range(dim)]
    anchor = [[1.0 if i == a else 0.0 for i in range(dim)] for a in range(dim)]
    structure = [[[0.0] * dim for _ in range(dim)] for _ in range(dim)]
    return AlgebroidChart(base, anchor, structure)


def linear_algebroid(chart: AlgebroidChart, fiber_vars=None) -> AffgebroidChart:
    """Re-read a Lie algebroid chart as an affgebroid chart.

    The adapted section is central with zero anchor: rho0 and the mixed
    structure functions vanish, model data is the input chart.  The input
    chart must pass validation."""
    report = validate_chart(chart)
    if not report.valid:
        raise ValueError(
            "input chart fails validation: "
            f"antisym {report.antisymmetry_max:.2e}, anchor {report.anchor_max:.2e}, "
            f"jacobi {report.jacobi_max:.2e}"
        )
    n, m = chart.rank, chart.dim
    if fiber_vars is None:
        fiber_vars = []
        used = set(chart.base_vars)
        for a in range(n):
            name = f"y{a+1}"
            while name in used:
                name += "_"
            used.add(name)
            fiber_vars.append(name)
    for row in chart.anchor:
        for c in row:
            if not isinstance(c, ExprCoeff):
                raise ValueError("chart data must be expression-backed")
    rhoV = [[chart.anchor[a][i].node for i in range(m)] for a in range(n)]
    CV = [
        [[chart.structure[a][b][g].node for g in range(n)] for b in range(n)]
        for a in range(n)
    ]
    zeros_m = [0.0] * m
    zeros_nn = [[0.0] * n for _ in range(n)]
    return AffgebroidChart(chart.base_vars, fiber_vars, zeros_m, rhoV, zeros_nn, CV)


def linear_tangent_model(dim: int) -> ModelBundle:
    """Geodesic flow of the flat metric in the linear-algebroid reading."""
    aff = linear_algebroid(tangent_algebroid(dim))
    h = HamiltonianSection(aff, "+".join(f"y{a+1}^2/2" for a in range(dim)))
    const = [0.7, -0.3, 0.5, -0.1, 0.9]
    sections = {
        # constant section: closed, and an HJ solution (f is constant)
        "const": CoSection(aff, 0.0, [const[a % len(const)] for a in range(dim)]),
        # gradient of sum x_i^2/2: closed, not a solution
        "grad_sq": CoSection(aff, 0.0, [f"x{a+1}" for a in range(dim)]),
        "zero": CoSection(aff, 0.0, [0.0] * dim),
    }
    return ModelBundle(
        name=f"linear:tangent{dim}",
        chart=aff,
        hamiltonian=h,
        sections=sections,
        sample=SamplePlan(),
        description="tangent algebroid as an affgebroid, flat geodesic flow",
    )


# --------------------------------------------------------------- rigid body


def rigid_body(i1: float, i2: float, i3: float) -> ModelBundle:
    """Time-extended free rigid body in the reduced trivialized chart.

    Base coordinate t, fiber coordinates the body momenta (P1, P2, P3);
    brackets are the so(3) constants, so the fiber equations are the Euler
    equations dPi/dt = Pi x Omega with Omega_a = Pa/Ia.
    """
    inertia = (float(i1), float(i2), float(i3))
    if any(v <= 0.0 for v in inertia):
        raise ValueError("inertia moments must be positive")
    base = ["t"]
    fibers = ["P1", "P2", "P3"]
    CV = [[[_LEVI_CIVITA.get((a, b, g), 0.0) for g in range(3)] for b in range(3)] for a in range(3)]
    chart = AffgebroidChart(
        base,
        fibers,
        [1.0],
        [[0.0], [0.0], [0.0]],
        [[0.0] * 3 for _ in range(3)],
        CV,
    )
    h = HamiltonianSection(
        chart,
        "+".join(f"P{a+1}^2/(2*{inertia[a]!r})" for a in range(3)),
    )
    sections = {
        # the only cocycles of this chart have vanishing fiber part
        "cocycle_t": CoSection(chart, "t", [0.0, 0.0, 0.0]),
        "bad_constant": CoSection(chart, 0.0, [0.0, 0.0, 1.0]),
        "zero": CoSection(chart, 0.0, [0.0, 0.0, 0.0]),
    }
    return ModelBundle(
        name=f"rigid:{inertia[0]:g},{inertia[1]:g},{inertia[2]:g}",
        chart=chart,
        hamiltonian=h,
        sections=sections,
        sample=SamplePlan(),
        description="time-extended rigid body (Euler equations)",
    )


# -------------------------------------------------------- validation charts


def so3_chart() -> AlgebroidChart:
    """so(3) over a one-dimensional base with zero anchor."""
    structure = [
        [[_LEVI_CIVITA.get((a, b, g), 0.0) for g in range(3)] for b in range(3)]
        for a in range(3)
    ]
    return AlgebroidChart(["t"], [[0.0], [0.0], [0.0]], structure)


def perturbed_so3_chart() -> AlgebroidChart:
    """Negative control: so(3) plus an off-diagonal bracket term.

    The extra antisymmetric entry C^2_12 = 0.3 breaks the Jacobi identity
    with cyclic-sum residual 0.3.  (Rescaling a single diagonal constant
    does not: any diagonal antisymmetric bracket on a rank-3 chart is a Lie
    algebra.)"""
    chart = so3_chart()
    structure = [
        [[chart.structure[a][b][g].node for g in range(3)] for b in range(3)]
        for a in range(3)
    ]
    structure[0][1][1] = 0.3
    structure[1][0][1] = -0.3
    return AlgebroidChart(["t"], [[0.0], [0.0], [0.0]], structure)


# ---------------------------------------------------------------- registry

BUILTIN_PATTERNS = [
    "trivial:<dim>",
    "oscillator",
    "linear:tangent<dim>",
    "rigid:<I1>,<I2>,<I3>",
    "perturbed-so3",
]


def by_name(name: str) -> ModelBundle:
    """Resolve a builtin model name."""
    if name == "oscillator":
        return harmonic_oscillator()
    if name == "perturbed-so3":
        bundle = ModelBundle(
            name="perturbed-so3",
            chart=_perturbed_so3_aff(),
            hamiltonian=HamiltonianSection(_perturbed_so3_aff(), 0.0),
            description="invalid structure constants (Jacobi violation)",
        )
        return bundle
    if name.startswith("trivial:"):
        return trivial_fibration(_positive_int(name, name.split(":", 1)[1]))
    if name.startswith("linear:tangent"):
        return linear_tangent_model(_positive_int(name, name[len("linear:tangent"):]))
    if name.startswith("rigid:"):
        parts = name.split(":", 1)[1].split(",")
        if len(parts) != 3:
            raise ModelNameError(f"'{name}': rigid model needs three inertia values")
        try:
            inertia = [float(p) for p in parts]
        except ValueError:
            raise ModelNameError(f"'{name}': inertia values must be numbers") from None
        return rigid_body(*inertia)
    raise ModelNameError(f"unknown model '{name}'; builtins: {BUILTIN_PATTERNS}")


def _positive_int(name: str, text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ModelNameError(f"'{name}': expected an integer dimension") from None
    if value < 1:
        raise ModelNameError(f"'{name}': dimension must be positive")
    return value


def _perturbed_so3_aff() -> AffgebroidChart:
    """Affgebroid wrapper around the invalid chart, bypassing the guard."""
    chart = perturbed_so3_chart()
    structure = [
        [[chart.structure[a][b][g].node for g in range(3)] for b in range(3)]
        for a in range(3)
    ]
    return AffgebroidChart(
        ["t"],
        ["y1", "y2", "y3"],
        [0.0],
        [[0.0], [0.0], [0.0]],
        [[0.0] * 3 for _ in range(3)],
        structure,
    )
