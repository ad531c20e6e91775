"""Forward-Euler time stepping with energy-decrease and ordering safeguards.

Each step solves the dissipation system for the rates of the interior values
and node positions, then advances by the current time step.  A candidate
step is rejected (and the step halved, up to a configured limit) when it
breaks the node ordering or raises the penalized energy, so the penalized
energy is nonincreasing across every accepted step by construction.  After a
stretch of clean steps the step size grows back toward the configured value,
which keeps runs efficient through stiff transients without giving up the
nominal resolution.

Stopping rules: a fixed horizon, or stationarity detected when the per-step
energy decrease falls below a tolerance *and* the gradient of the penalized
energy is small relative to its value (the gradient certificate guards
against declaring stationarity just because the step size is tiny).  A
frozen-mesh mode solves only the value block with the partition pinned, as a
uniform-mesh baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solveh_banded

from .assembly import _assemble_bands, _solve_bands
from .energy import SimState, _eval_arrays
from .exceptions import (
    ConfigError,
    DegenerateMeshError,
    NotPositiveDefiniteError,
    StepFloorError,
)
from .mesh import FreeKnotFn, Partition, hard_gap_threshold, interpolate, make_uniform_partition
from .problems import ProblemSpec

# Tolerated roundoff-level energy increase on an accepted step.
ENERGY_SLACK = 1e-12
# Gradient certificate: stationary when max|grad| <= this times max(1, |E|).
GRAD_CERT_RTOL = 1e-5
# Accepted steps without halving before the step size is doubled back
# toward the configured value.
_GROWTH_STREAK = 8


@dataclass(frozen=True)
class RunConfig:
    """Settings for one time integration."""

    n_elements: int
    dt: float
    delta: float = 1e-4
    delta_tilde: float = 0.0
    t_end: Optional[float] = None
    stationary_tol: Optional[float] = None
    snapshot_times: Tuple[float, ...] = ()
    mode: str = "moving"
    max_halvings: int = 40

    def __post_init__(self):
        if self.n_elements < 2:
            raise ConfigError(f"need at least 2 elements, got {self.n_elements}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.delta < 0 or self.delta_tilde < 0:
            raise ConfigError("delta and delta_tilde must be >= 0")
        if self.t_end is None and self.stationary_tol is None:
            raise ConfigError("set t_end, stationary_tol, or both")
        if self.mode not in ("moving", "frozen_mesh"):
            raise ConfigError(f"mode must be 'moving' or 'frozen_mesh', got {self.mode!r}")
        object.__setattr__(
            self, "snapshot_times", tuple(sorted(float(s) for s in self.snapshot_times))
        )


@dataclass
class StepStats:
    accepted: int = 0
    halvings: int = 0


@dataclass
class Trajectory:
    """Record of one run: snapshots, energy history, and how it stopped."""

    snapshots: List[Tuple[float, SimState]]
    energy_series: np.ndarray  # rows (t, penalized energy, energy)
    node_series: np.ndarray  # rows (t, x_1 .. x_{N-1})
    step_stats: StepStats
    stop_reason: str  # horizon | stationary | degenerate | step_floor
    final_state: SimState
    max_energy_increase: float
    final_grad_max: float


class _ThinnedLog:
    """Append-only log that halves its resolution whenever it fills up."""

    def __init__(self, cap: int = 4096):
        self.cap = cap
        self.stride = 1
        self.rows: list = []
        self.count = 0

    def append(self, row) -> None:
        if self.count % self.stride == 0:
            self.rows.append(row)
            if len(self.rows) >= self.cap:
                self.rows = self.rows[::2]
                self.stride *= 2
        self.count += 1

    def append_always(self, row) -> None:
        if not self.rows or self.rows[-1][0] != row[0]:
            self.rows.append(row)
        self.count += 1

    def array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)


def _make_state(t: float, x: np.ndarray, u: np.ndarray) -> SimState:
    return SimState(t=t, fn=FreeKnotFn(Partition(x), u))


class _SnapshotTracker:
    """Streams requested snapshot times onto the nearest accepted step."""

    def __init__(self, targets: Sequence[float]):
        self.targets = list(targets)
        self.idx = 0
        self.records: List[Tuple[float, SimState]] = []

    def start(self, t0, x, u) -> None:
        while self.idx < len(self.targets) and self.targets[self.idx] <= t0:
            self.records.append((self.targets[self.idx], _make_state(t0, x, u)))
            self.idx += 1

    def after_step(self, t_prev, x_prev, u_prev, t_new, x_new, u_new) -> None:
        while self.idx < len(self.targets) and self.targets[self.idx] <= t_new:
            tgt = self.targets[self.idx]
            if tgt - t_prev < t_new - tgt:
                self.records.append((tgt, _make_state(t_prev, x_prev, u_prev)))
            else:
                self.records.append((tgt, _make_state(t_new, x_new, u_new)))
            self.idx += 1

    def finish(self, t_final, x, u) -> None:
        while self.idx < len(self.targets):
            self.records.append((self.targets[self.idx], _make_state(t_final, x, u)))
            self.idx += 1


def _rates(x, u, gu, gx, prob, cfg):
    """Solve the dissipation system for the interior rates (zu, zx)."""
    xi = prob.xi
    if cfg.mode == "frozen_mesh":
        h = np.diff(x)
        m = x.size - 2
        bands = np.zeros((2, m))
        bands[1] = (h[:-1] + h[1:]) / 3.0
        if m > 1:
            bands[0, 1:] = h[1:-1] / 6.0
        zu = solveh_banded(bands, -gu / xi, lower=False, check_finite=False)
        return zu, np.zeros(m)
    bands = _assemble_bands(x, u, cfg.delta)
    rhs = np.empty(2 * (x.size - 2))
    rhs[0::2] = -gu / xi
    rhs[1::2] = -gx / xi
    z = _solve_bands(bands, rhs)
    return z[0::2], z[1::2]


def _attempt(x, u, zu, zx, dt_try, et, hard_gap, prob, cfg):
    """Halve dt until the candidate keeps ordering and does not raise energy.

    ``et`` is the penalized energy of the current state.  Returns
    (x_new, u_new, eval_tuple, dt_accepted, halvings); raises StepFloorError
    when the halving budget runs out.
    """
    moving = cfg.mode == "moving"
    halvings = 0
    while True:
        u_new = u.copy()
        u_new[1:-1] += dt_try * zu
        if moving:
            x_new = x.copy()
            x_new[1:-1] += dt_try * zx
        else:
            x_new = x
        if (not moving) or bool(np.all(np.diff(x_new) > hard_gap)):
            ev = _eval_arrays(x_new, u_new, prob, cfg.delta_tilde)
            if ev[0] + ev[1] <= et + ENERGY_SLACK:
                return x_new, u_new, ev, dt_try, halvings
        halvings += 1
        if halvings > cfg.max_halvings:
            raise StepFloorError(
                f"no acceptable step after {halvings} halvings (dt={dt_try:.3e})"
            )
        dt_try *= 0.5


def step(state: SimState, prob: ProblemSpec, cfg: RunConfig) -> SimState:
    """Advance one accepted step from ``state`` at the configured step size.

    Halves the step up to ``cfg.max_halvings`` times when a candidate breaks
    node ordering or raises the penalized energy.

    Raises
    ------
    StepFloorError
        When no acceptable step is found within the halving budget.
    NotPositiveDefiniteError
        When the dissipation system cannot be factorized (degenerate state).
    """
    x = state.fn.partition.nodes.copy()
    u = state.fn.values.copy()
    a, b = prob.domain
    hard_gap = hard_gap_threshold(a, b)
    e, pen, gu, gx = _eval_arrays(x, u, prob, cfg.delta_tilde)
    et = e + pen
    zu, zx = _rates(x, u, gu, gx, prob, cfg)
    x_new, u_new, _, dt_acc, _ = _attempt(x, u, zu, zx, cfg.dt, et, hard_gap, prob, cfg)
    return _make_state(state.t + dt_acc, x_new, u_new)


def run(
    prob: ProblemSpec,
    initial: Callable[[float], float],
    cfg: RunConfig,
    partition: Optional[Partition] = None,
) -> Trajectory:
    """Integrate from the interpolated initial profile until a stopping rule fires.

    The start mesh is ``partition`` when given, otherwise uniform with
    ``cfg.n_elements`` elements.  Returns a Trajectory whose ``stop_reason``
    records how the run ended; degenerate states and step-floor hits are
    reported through it rather than raised.
    """
    a, b = prob.domain
    part0 = partition if partition is not None else make_uniform_partition(a, b, cfg.n_elements)
    if part0.n_elements != cfg.n_elements:
        raise ConfigError(
            f"partition has {part0.n_elements} elements, config says {cfg.n_elements}"
        )
    fn0 = interpolate(initial, part0)
    x = fn0.partition.nodes.copy()
    u = fn0.values.copy()
    u[0], u[-1] = prob.boundary
    hard_gap = hard_gap_threshold(a, b)
    moving = cfg.mode == "moving"

    e, pen, gu, gx = _eval_arrays(x, u, prob, cfg.delta_tilde)
    et = e + pen

    stats = StepStats()
    energy_log = _ThinnedLog()
    node_log = _ThinnedLog()
    snaps = _SnapshotTracker(cfg.snapshot_times)
    t = 0.0
    energy_log.append((t, et, e))
    node_log.append((t, *x[1:-1]))
    snaps.start(t, x, u)
    max_increase = 0.0

    dt_cur = cfg.dt
    streak = 0
    stop = None

    def _grad_cert() -> float:
        g = float(np.max(np.abs(gu))) if gu.size else 0.0
        if moving and gx.size:
            g = max(g, float(np.max(np.abs(gx))))
        return g

    while True:
        if cfg.t_end is not None and t >= cfg.t_end - 1e-12 * max(1.0, cfg.t_end):
            stop = "horizon"
            break
        dt_try = dt_cur
        if cfg.t_end is not None:
            dt_try = min(dt_try, cfg.t_end - t)
        try:
            zu, zx = _rates(x, u, gu, gx, prob, cfg)
        except NotPositiveDefiniteError:
            stop = "degenerate"
            break
        try:
            x_new, u_new, ev, dt_acc, halvings = _attempt(
                x, u, zu, zx, dt_try, et, hard_gap, prob, cfg
            )
        except StepFloorError:
            stop = "step_floor"
            break
        except DegenerateMeshError:
            stop = "degenerate"
            break

        e_new, pen_new, gu_new, gx_new = ev
        et_new = e_new + pen_new
        decrease = et - et_new
        max_increase = max(max_increase, -decrease)
        t_prev, x_prev, u_prev = t, x, u
        t = t + dt_acc
        x, u = x_new, u_new
        e, pen, gu, gx, et = e_new, pen_new, gu_new, gx_new, et_new

        stats.accepted += 1
        stats.halvings += halvings
        energy_log.append((t, et, e))
        node_log.append((t, *x[1:-1]))
        snaps.after_step(t_prev, x_prev, u_prev, t, x, u)

        if halvings:
            dt_cur = dt_acc
            streak = 0
        else:
            streak += 1
            if dt_cur < cfg.dt and streak >= _GROWTH_STREAK:
                dt_cur = min(cfg.dt, 2.0 * dt_cur)
                streak = 0

        if (
            cfg.stationary_tol is not None
            and decrease < cfg.stationary_tol
            and _grad_cert() <= GRAD_CERT_RTOL * max(1.0, abs(et))
        ):
            stop = "stationary"
            break

    energy_log.append_always((t, et, e))
    node_log.append_always((t, *x[1:-1]))
    snaps.finish(t, x, u)
    return Trajectory(
        snapshots=snaps.records,
        energy_series=energy_log.array(),
        node_series=node_log.array(),
        step_stats=stats,
        stop_reason=stop,
        final_state=_make_state(t, x, u),
        max_energy_increase=max_increase,
        final_grad_max=_grad_cert(),
    )


def run_frozen_mesh(
    prob: ProblemSpec,
    initial: Callable[[float], float],
    cfg: RunConfig,
    partition: Optional[Partition] = None,
) -> Trajectory:
    """Uniform-baseline run: only the values evolve, the mesh stays put."""
    if cfg.mode != "frozen_mesh":
        raise ConfigError(f"run_frozen_mesh needs mode='frozen_mesh', got {cfg.mode!r}")
    return run(prob, initial, cfg, partition)
