"""Problem definitions: energy coefficients, reaction terms, sources, presets.

A problem couples the quadratic gradient energy (diffusion coefficient
``alpha``), a pointwise energy density F(x, u) with its u-derivative f, an
optional source (smooth density or a point load), Dirichlet boundary data,
and a friction coefficient ``xi`` scaling the dissipation.  The presets
reproduce the experiment setups used by the command-line runner: linear
diffusion driven by a point source, a spreading narrow Gaussian, and
phase-field kink relaxation at two interface widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import UnknownPresetError
from .mesh import Partition, make_uniform_partition


@dataclass(frozen=True)
class ReactionTerm:
    """Pointwise energy density F(x, u) with derivatives f = dF/du, fu = df/du.

    All three callables must accept numpy arrays for both arguments.
    """

    F: Callable
    f: Callable
    fu: Callable
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "ReactionTerm":
        z = lambda x, u: np.zeros_like(np.asarray(u, dtype=float))
        return cls(F=z, f=z, fu=z, is_zero=True)


@dataclass(frozen=True)
class SourceTerm:
    """Forcing term: none, a smooth density g(x), or a weighted point load."""

    kind: str  # "none" | "smooth" | "dirac"
    g: Optional[Callable] = None
    location: Optional[float] = None
    weight: float = 1.0

    @classmethod
    def none(cls) -> "SourceTerm":
        return cls(kind="none")

    @classmethod
    def smooth(cls, g: Callable) -> "SourceTerm":
        return cls(kind="smooth", g=g)

    @classmethod
    def dirac(cls, location: float, weight: float = 1.0) -> "SourceTerm":
        return cls(kind="dirac", location=float(location), weight=float(weight))


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form reference solution used for error reporting.

    ``value`` and ``x_derivative`` take (t, x) with x possibly an array;
    ``breakpoints`` lists the x-locations where the solution is not smooth.
    ``space_scale`` hints the smallest feature width for finite-difference
    probing of the closed form.
    """

    value: Callable
    x_derivative: Callable
    breakpoints: Tuple[float, ...] = ()
    stationary_energy: Optional[float] = None
    space_scale: float = 1.0


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients, reaction, source, domain and boundary data of one problem."""

    alpha: float
    xi: float
    reaction: ReactionTerm
    source: SourceTerm
    domain: Tuple[float, float]
    boundary: Tuple[float, float]
    lipschitz_L0: Optional[float] = None

    def __post_init__(self):
        a, b = self.domain
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not a < b:
            raise ValueError(f"domain must satisfy a < b, got {self.domain}")
        if self.source.kind == "dirac" and not a < self.source.location < b:
            raise ValueError(
                f"point-load location {self.source.location} must be strictly "
                f"inside {self.domain}"
            )


def reaction_allen_cahn(eps: float) -> ReactionTerm:
    """Double-well reaction with well depth scaled by 1/eps.

    F(x, u) = (1 - u^2)^2 / (4 eps), f = (u^3 - u)/eps, fu = (3u^2 - 1)/eps.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return ReactionTerm(
        F=lambda x, u: (1.0 - u**2) ** 2 / (4.0 * eps),
        f=lambda x, u: (u**3 - u) / eps,
        fu=lambda x, u: (3.0 * u**2 - 1.0) / eps,
    )


@dataclass(frozen=True)
class Preset:
    """One ready-to-run experiment setup.

    Carries the problem, the initial profile, the optional exact reference,
    and the run defaults (time step, stabilization, mesh penalty, stopping
    rule, N sweep) used by the command-line runner.
    """

    name: str
    problem: ProblemSpec
    initial: Callable
    exact: Optional[ExactSolution]
    dt: float
    delta: float = 1e-4
    delta_tilde: float = 0.0
    t_end: Optional[float] = None
    stationary_tol: Optional[float] = None
    safety_horizon: Optional[float] = None
    n_values: Tuple[int, ...] = ()
    snapshot_times: Tuple[float, ...] = ()
    has_uniform_baseline: bool = False
    description: str = ""
    partition_builder: Optional[Callable[[int], Partition]] = None

    def initial_partition(self, n_elements: int) -> Partition:
        if self.partition_builder is not None:
            return self.partition_builder(n_elements)
        a, b = self.problem.domain
        return make_uniform_partition(a, b, n_elements)


def _hat(x):
    x = np.asarray(x, dtype=float)
    return np.minimum(x, 1.0 - x)


def _example1() -> Preset:
    problem = ProblemSpec(
        alpha=1.0,
        xi=1.0,
        reaction=ReactionTerm.zero(),
        source=SourceTerm.dirac(0.5, 1.0),
        domain=(0.0, 1.0),
        boundary=(0.0, 0.0),
        lipschitz_L0=0.0,
    )
    exact = ExactSolution(
        value=lambda t, x: np.sin(np.pi * np.asarray(x)) * math.exp(-np.pi**2 * t)
        + _hat(x),
        x_derivative=lambda t, x: np.pi
        * np.cos(np.pi * np.asarray(x))
        * math.exp(-np.pi**2 * t)
        + np.where(np.asarray(x) < 0.5, 1.0, -1.0),
        breakpoints=(0.5,),
        stationary_energy=0.0,
    )
    initial = lambda x: exact.value(0.0, x)
    return Preset(
        name="example1",
        problem=problem,
        initial=initial,
        exact=exact,
        dt=1e-5,
        delta=1e-4,
        delta_tilde=0.01,
        t_end=0.04,
        n_values=(5, 9, 19, 39, 79),
        snapshot_times=(0.0, 0.0012, 0.0024, 0.0036, 0.0048, 0.006, 0.009, 0.014, 0.04),
        has_uniform_baseline=True,
        description="linear diffusion on (0,1), unit point load at 0.5, kinked exact solution",
    )


def _example2_partition(n_elements: int) -> Partition:
    if n_elements < 4:
        raise ValueError("the layered start mesh needs at least 4 elements")
    inner = np.linspace(-0.2, 0.2, n_elements - 1)
    return Partition(np.concatenate([[-3.0], inner, [3.0]]))


def _example2() -> Preset:
    norm = 1.0 / math.sqrt(0.004 * math.pi)
    offset = math.exp(-9.0 / 0.004)

    def initial(x):
        x = np.asarray(x, dtype=float)
        return norm * (np.exp(-(x**2) / 0.004) - offset)

    problem = ProblemSpec(
        alpha=1.0,
        xi=1.0,
        reaction=ReactionTerm.zero(),
        source=SourceTerm.none(),
        domain=(-3.0, 3.0),
        boundary=(0.0, 0.0),
        lipschitz_L0=0.0,
    )
    return Preset(
        name="example2",
        problem=problem,
        initial=initial,
        exact=None,
        dt=1e-5,
        delta=1e-4,
        delta_tilde=0.01,
        t_end=0.2,
        n_values=(19,),
        snapshot_times=(0.0, 0.001, 0.005, 0.02, 0.1, 0.2),
        description="free diffusion of a sharp Gaussian on (-3,3), start mesh packed in (-0.2,0.2)",
        partition_builder=_example2_partition,
    )


def _allen_cahn(eps: float, name: str = "allen_cahn") -> Preset:
    problem = ProblemSpec(
        alpha=eps,
        xi=1.0,
        reaction=reaction_allen_cahn(eps),
        source=SourceTerm.none(),
        domain=(0.0, 1.0),
        boundary=(-1.0, 1.0),
    )
    width = math.sqrt(2.0) * eps
    exact = ExactSolution(
        value=lambda t, x: np.tanh((np.asarray(x) - 0.5) / width),
        x_derivative=lambda t, x: (1.0 / width)
        / np.cosh((np.asarray(x) - 0.5) / width) ** 2,
        breakpoints=(),
        stationary_energy=2.0 * math.sqrt(2.0) / 3.0,
        space_scale=width,
    )
    initial = lambda x: 2.0 * (np.asarray(x, dtype=float) - 0.5)
    # Time step set by the explicit-stability limit of the clustered mesh;
    # the integrator halves further when a step would raise the energy.
    return Preset(
        name=name,
        problem=problem,
        initial=initial,
        exact=exact,
        dt=2e-4 * (eps / 0.05),
        delta=1e-4,
        delta_tilde=1e-4,
        stationary_tol=1e-10,
        safety_horizon=50.0,
        n_values=(5, 10, 20, 40, 80),
        description=f"phase-field kink relaxation, interface width parameter {eps}",
    )


def _linear_diffusion() -> Preset:
    problem = ProblemSpec(
        alpha=1.0,
        xi=1.0,
        reaction=ReactionTerm.zero(),
        source=SourceTerm.none(),
        domain=(0.0, 1.0),
        boundary=(0.0, 0.0),
        lipschitz_L0=0.0,
    )
    exact = ExactSolution(
        value=lambda t, x: np.sin(np.pi * np.asarray(x)) * math.exp(-np.pi**2 * t),
        x_derivative=lambda t, x: np.pi
        * np.cos(np.pi * np.asarray(x))
        * math.exp(-np.pi**2 * t),
        breakpoints=(),
    )
    return Preset(
        name="linear_diffusion",
        problem=problem,
        initial=lambda x: exact.value(0.0, x),
        exact=exact,
        dt=1e-5,
        delta=1e-4,
        delta_tilde=0.01,
        t_end=0.04,
        n_values=(8, 16, 32),
        has_uniform_baseline=True,
        description="plain heat flow on (0,1) with a smooth separable exact solution",
    )


_BUILDERS = {
    "example1": lambda eps: _example1(),
    "example2": lambda eps: _example2(),
    "example3": lambda eps: _allen_cahn(0.05, "example3"),
    "example4": lambda eps: _allen_cahn(0.01, "example4"),
    "allen_cahn": lambda eps: _allen_cahn(eps if eps is not None else 0.05),
    "linear_diffusion": lambda eps: _linear_diffusion(),
}


def preset_names() -> Tuple[str, ...]:
    """Stable, CLI-facing preset identifiers."""
    return tuple(_BUILDERS)


def preset(name: str, epsilon: Optional[float] = None) -> Preset:
    """Look up a named experiment preset.

    ``epsilon`` only applies to the parametrized ``allen_cahn`` preset.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownPresetError(
            f"unknown preset {name!r}; available: {', '.join(_BUILDERS)}"
        ) from None
    return builder(epsilon)


def strong_form_residual(prob: ProblemSpec, exact: ExactSolution, t: float, x: float) -> float:
    """Relative residual of the exact solution in the pointwise PDE.

    Probes du/dt and d2u/dx2 of the closed form by finite differences (the
    second derivative with a five-point stencil scaled to the solution's
    feature width) and returns

        |u_t - (alpha/xi) u_xx + f(x,u)/xi - g(x)/xi| / max(1, term scales).

    Only meaningful away from breakpoints and point-load locations.
    """
    ht = 1e-6 * max(1.0, abs(t))
    u = lambda tt, xx: float(exact.value(tt, xx))
    du_dt = (u(t + ht, x) - u(t - ht, x)) / (2.0 * ht)
    hx = 1e-2 * exact.space_scale
    u_xx = (
        -u(t, x - 2 * hx)
        + 16.0 * u(t, x - hx)
        - 30.0 * u(t, x)
        + 16.0 * u(t, x + hx)
        - u(t, x + 2 * hx)
    ) / (12.0 * hx**2)
    fval = float(prob.reaction.f(x, u(t, x)))
    gval = 0.0
    if prob.source.kind == "smooth":
        gval = float(prob.source.g(x))
    resid = du_dt - (prob.alpha / prob.xi) * u_xx + fval / prob.xi - gval / prob.xi
    scale = max(1.0, abs(du_dt), abs(prob.alpha / prob.xi * u_xx), abs(fval / prob.xi))
    return abs(resid) / scale
