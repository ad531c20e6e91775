"""Self-check suites: gradient consistency and positive definiteness.

These are the runtime invariants the solver leans on: the analytic gradients
must match the central-difference oracle on random nondegenerate states, and
the ridge-stabilized dissipation matrix must factorize with positive pivots
for every valid state (while the unstabilized matrix of a constant-valued
state must not).  The command-line ``check`` subcommand and the acceptance
tests both run through this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .assembly import assemble, solve
from .energy import SimState, fd_gradient, gradient_report
from .exceptions import NotPositiveDefiniteError
from .mesh import FreeKnotFn, Partition
from .problems import Preset, preset, preset_names


def random_sim_state(
    pre: Preset, n_elements: int, rng: np.random.Generator
) -> SimState:
    """Random nondegenerate state compatible with the preset's boundary data.

    Interior nodes keep a floor gap and stay clear of any point-load
    location so finite-difference probes never cross the kink.
    """
    a, b = pre.problem.domain
    span = b - a
    keep_out = None
    if pre.problem.source.kind == "dirac":
        keep_out = pre.problem.source.location
    while True:
        interior = np.sort(rng.uniform(a + 0.02 * span, b - 0.02 * span, n_elements - 1))
        gaps = np.diff(np.concatenate([[a], interior, [b]]))
        if gaps.min() < 5e-3 * span:
            continue
        if keep_out is not None and np.min(np.abs(interior - keep_out)) < 1e-3 * span:
            continue
        break
    lo, hi = pre.problem.boundary
    width = max(1.0, abs(lo), abs(hi))
    values = rng.uniform(-1.5 * width, 1.5 * width, n_elements + 1)
    values[0], values[-1] = pre.problem.boundary
    return SimState(t=0.0, fn=FreeKnotFn(Partition.from_interior(a, b, interior), values))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def gradient_consistency(
    names: Optional[Sequence[str]] = None,
    n_states: int = 100,
    n_elements: int = 10,
    seed: int = 12345,
    tol: float = 1e-6,
) -> List[CheckResult]:
    """Analytic vs central-difference gradients on random states, per preset."""
    results = []
    for name in names or preset_names():
        pre = preset(name)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_states):
            state = random_sim_state(pre, n_elements, rng)
            rep = gradient_report(state, pre.problem, pre.delta_tilde)
            fd = fd_gradient(state, pre.problem, pre.delta_tilde)
            scale = max(
                1.0,
                float(np.max(np.abs(fd.dE_du))),
                float(np.max(np.abs(fd.dE_dx))),
            )
            err = max(
                float(np.max(np.abs(rep.dE_du - fd.dE_du))),
                float(np.max(np.abs(rep.dE_dx - fd.dE_dx))),
            )
            worst = max(worst, err / scale)
        results.append(
            CheckResult(
                name=f"gradient[{name}]",
                passed=worst <= tol,
                detail=f"max rel err {worst:.3e} over {n_states} states (tol {tol:g})",
            )
        )
    return results


def positive_definiteness(
    n_states: int = 100,
    n_elements: int = 10,
    delta: float = 1e-4,
    seed: int = 54321,
) -> List[CheckResult]:
    """Ridge-stabilized matrix factorizes; constant state without ridge fails."""
    pre = preset("example3")
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(n_states):
        state = random_sim_state(pre, n_elements, rng)
        m = assemble(state, delta)
        try:
            z = solve(m, rng.standard_normal(m.order))
            if np.all(np.isfinite(z)):
                ok += 1
        except NotPositiveDefiniteError:
            pass
    results = [
        CheckResult(
            name="positive-definite[ridge]",
            passed=ok == n_states,
            detail=f"{ok}/{n_states} random states factorized with delta={delta:g}",
        )
    ]

    a, b = pre.problem.domain
    flat = SimState(
        t=0.0,
        fn=FreeKnotFn(
            Partition.from_interior(a, b, np.linspace(a, b, n_elements + 1)[1:-1]),
            np.zeros(n_elements + 1),
        ),
    )
    m0 = assemble(flat, 0.0)
    try:
        solve(m0, np.ones(m0.order))
        singular_detected = False
    except NotPositiveDefiniteError:
        singular_detected = True
    results.append(
        CheckResult(
            name="positive-definite[flat,no-ridge]",
            passed=singular_detected,
            detail="factorization of the constant-state matrix without ridge "
            + ("failed as it must" if singular_detected else "unexpectedly succeeded"),
        )
    )
    return results


def run_all(n_states: int = 20) -> List[CheckResult]:
    """The invariant suite behind the CLI ``check`` subcommand."""
    return gradient_consistency(n_states=n_states) + positive_definiteness()
