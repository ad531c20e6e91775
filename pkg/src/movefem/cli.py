"""Command-line front end: experiment presets, N sweeps, CSV emission.

Subcommands
-----------
run <config-path>
    Execute one experiment described by a flat key=value config file and
    write the error table, energy series, snapshots, node trajectories, and
    a gnuplot script into the output directory.
list-presets
    Show the available experiment presets.
check
    Run the gradient-consistency and positive-definiteness invariant suite.

Config keys: preset (required), N (comma-separated sweep), epsilon, dt,
delta, delta_tilde, t_end, stationary_tol, snapshot_times, mode
(moving|frozen|both), seed, out.  Lines starting with '#' are comments.
Exit codes: 0 success, 1 partial failures, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import analysis, diagnostics
from .exceptions import ConfigError, MoveFemError, UnknownPresetError
from .integrator import RunConfig, Trajectory, run
from .problems import Preset, preset, preset_names


@dataclass
class ExperimentConfig:
    """Parsed experiment description."""

    preset_name: str
    n_values: Tuple[int, ...]
    out_dir: Path
    seed: int = 0
    mode: str = "default"  # default | moving | frozen | both
    epsilon: Optional[float] = None
    overrides: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_values == tuple(sorted(set(self.n_values))):
            raise ConfigError("N values must be strictly increasing")


@dataclass
class Cell:
    """One (N, mode) run with its outcome."""

    n_elements: int
    mode: str  # moving | frozen
    trajectory: Optional[Trajectory] = None
    report: Optional[analysis.ErrorReport] = None
    error: Optional[str] = None
    dt: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ResultBundle:
    """Everything one experiment produced, ready to serialize."""

    preset_name: str
    cells: List[Cell]
    seed: int
    uses_energy_column: bool

    def cells_for(self, mode: str) -> List[Cell]:
        return [c for c in self.cells if c.mode == mode]

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.cells if not c.ok)


_FLOAT_KEYS = ("dt", "delta", "delta_tilde", "t_end", "stationary_tol", "epsilon")


def parse_config(path: Path) -> ExperimentConfig:
    """Read a flat key=value config file."""
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value

    if "preset" not in raw:
        raise ConfigError(f"{path}: missing required key 'preset'")
    name = raw.pop("preset")

    try:
        n_values = tuple(int(v) for v in raw.pop("N").split(",")) if "N" in raw else ()
        seed = int(raw.pop("seed", "0"))
        mode = raw.pop("mode", "default")
        out_dir = Path(raw.pop("out", "results"))
        snapshot_times = raw.pop("snapshot_times", None)
        max_halvings = raw.pop("max_halvings", None)
        overrides: Dict[str, float] = {}
        for key in _FLOAT_KEYS:
            if key in raw:
                overrides[key] = float(raw.pop(key))
        if snapshot_times is not None:
            overrides["snapshot_times"] = tuple(
                float(v) for v in snapshot_times.split(",") if v.strip()
            )
        if max_halvings is not None:
            overrides["max_halvings"] = int(max_halvings)
    except ValueError as err:
        raise ConfigError(f"{path}: bad value: {err}") from err
    if raw:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(raw))}")
    if mode not in ("default", "moving", "frozen", "both"):
        raise ConfigError(f"mode must be moving, frozen, or both, got {mode!r}")

    epsilon = overrides.pop("epsilon", None)
    return ExperimentConfig(
        preset_name=name,
        n_values=n_values,
        out_dir=out_dir,
        seed=seed,
        mode=mode,
        epsilon=epsilon,
        overrides=overrides,
    )


def _run_config(pre: Preset, n: int, mode: str, overrides: Dict) -> RunConfig:
    kwargs = dict(
        n_elements=n,
        dt=pre.dt,
        delta=pre.delta,
        delta_tilde=pre.delta_tilde,
        t_end=pre.t_end if pre.t_end is not None else pre.safety_horizon,
        stationary_tol=pre.stationary_tol,
        snapshot_times=pre.snapshot_times,
        mode="frozen_mesh" if mode == "frozen" else "moving",
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


def _measure(pre: Preset, trajectory: Trajectory, n: int) -> Optional[analysis.ErrorReport]:
    if pre.exact is None:
        return None
    state = trajectory.final_state
    err_h1 = analysis.h1_error(state.fn, pre.exact, state.t)
    err_l2 = analysis.l2_error(state.fn, pre.exact, state.t)
    err_eng = None
    if pre.exact.stationary_energy is not None:
        from .energy import energy as _energy

        err_eng = analysis.energy_error(
            _energy(state, pre.problem), pre.exact.stationary_energy
        )
    return analysis.ErrorReport(err_h1=err_h1, err_l2=err_l2, err_energy=err_eng, n_elements=n)


def run_experiment(cfg: ExperimentConfig) -> ResultBundle:
    """Execute every (N, mode) cell of the experiment; failures stay per-cell."""
    pre = preset(cfg.preset_name, cfg.epsilon)
    n_values = cfg.n_values or pre.n_values
    if cfg.mode == "default":
        modes = ("moving", "frozen") if pre.has_uniform_baseline else ("moving",)
    elif cfg.mode == "both":
        modes = ("moving", "frozen")
    else:
        modes = (cfg.mode,)

    cells: List[Cell] = []
    for n in n_values:
        for mode in modes:
            run_cfg = _run_config(pre, n, mode, cfg.overrides)
            cell = Cell(n_elements=n, mode=mode, dt=run_cfg.dt)
            try:
                trajectory = run(
                    pre.problem, pre.initial, run_cfg, pre.initial_partition(n)
                )
                cell.trajectory = trajectory
                expected = "stationary" if run_cfg.stationary_tol is not None else "horizon"
                if trajectory.stop_reason not in (expected, "horizon", "stationary"):
                    cell.error = f"run stopped early: {trajectory.stop_reason}"
                else:
                    cell.report = _measure(pre, trajectory, n)
            except MoveFemError as err:
                cell.error = f"{type(err).__name__}: {err}"
            cells.append(cell)
    uses_energy = pre.exact is not None and pre.exact.stationary_energy is not None
    return ResultBundle(
        preset_name=pre.name, cells=cells, seed=cfg.seed, uses_energy_column=uses_energy
    )


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _error_table_lines(bundle: ResultBundle, cells: List[Cell]) -> List[str]:
    lines = ["N,err_h1,order_h1,err_l2_or_eng,order_2"]
    good = [c for c in cells if c.ok and c.report is not None]
    h1_rows = [(c.n_elements, c.report.err_h1) for c in good]
    second = [
        (c.n_elements, c.report.err_energy if bundle.uses_energy_column else c.report.err_l2)
        for c in good
    ]
    o1 = analysis.orders(h1_rows).rows if len(h1_rows) >= 1 else ()
    o2 = analysis.orders(second).rows if len(second) >= 1 else ()
    for (n, e1, s1), (_, e2, s2) in zip(o1, o2):
        lines.append(
            ",".join(
                [
                    str(n),
                    _fmt(e1),
                    "" if s1 is None else _fmt(s1),
                    _fmt(e2),
                    "" if s2 is None else _fmt(s2),
                ]
            )
        )
    for c in cells:
        if not c.ok:
            lines.append(f"# N={c.n_elements} failed: {c.error}")
    return lines


def emit(bundle: ResultBundle, out_dir: Path) -> List[Path]:
    """Write the bundle's CSV tables, series, snapshots, and plot script."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    def _write(name: str, lines: List[str]) -> None:
        path = out_dir / name
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    name = bundle.preset_name
    moving = bundle.cells_for("moving")
    frozen = bundle.cells_for("frozen")
    if any(c.report is not None for c in moving):
        _write(f"errors_{name}.csv", _error_table_lines(bundle, moving))
    if any(c.report is not None for c in frozen):
        _write(f"errors_{name}_uniform.csv", _error_table_lines(bundle, frozen))

    for cell in bundle.cells:
        if cell.trajectory is None:
            continue
        suffix = "_uniform" if cell.mode == "frozen" else ""
        tag = f"{name}{suffix}_N{cell.n_elements}"
        lines = ["t,E_penalized,E"]
        for t, ep, e in cell.trajectory.energy_series:
            lines.append(f"{_fmt(t)},{_fmt(ep)},{_fmt(e)}")
        _write(f"energy_{tag}.csv", lines)
        if cell.mode == "moving":
            header = "t," + ",".join(
                f"x_{i}" for i in range(1, cell.n_elements)
            )
            lines = [header]
            for row in cell.trajectory.node_series:
                lines.append(",".join(_fmt(v) for v in row))
            _write(f"nodes_{tag}.csv", lines)
            for t_req, state in cell.trajectory.snapshots:
                lines = ["x_k,u_k"]
                for xk, uk in zip(state.fn.partition.nodes, state.fn.values):
                    lines.append(f"{_fmt(xk)},{_fmt(uk)}")
                _write(f"snapshot_{tag}_t{t_req:g}.csv", lines)

    plot = [
        "# gnuplot script generated alongside the CSV tables",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        f"plot 'errors_{name}.csv' using 1:2 with linespoints title 'derivative-norm error'",
        "pause -1",
        "unset logscale",
    ]
    for cell in moving:
        if cell.trajectory is not None:
            plot.append(
                f"plot 'energy_{name}_N{cell.n_elements}.csv' using 1:2 with lines "
                f"title 'penalized energy N={cell.n_elements}'"
            )
            plot.append("pause -1")
    _write(f"plot_{name}.gp", plot)
    return written


def _cmd_run(args) -> int:
    cfg = parse_config(Path(args.config))
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.dt is not None:
        cfg.overrides["dt"] = args.dt
    if args.mode is not None:
        cfg.mode = args.mode
    bundle = run_experiment(cfg)
    written = emit(bundle, cfg.out_dir)
    for path in written:
        print(path)
    for cell in bundle.cells:
        if not cell.ok:
            print(
                f"FAILED {bundle.preset_name} N={cell.n_elements} ({cell.mode}): {cell.error}",
                file=sys.stderr,
            )
    return 1 if bundle.n_failed else 0


def _cmd_list_presets(_args) -> int:
    for name in preset_names():
        pre = preset(name, 0.05 if name == "allen_cahn" else None)
        print(f"{name:18s} {pre.description}")
    return 0


def _cmd_check(_args) -> int:
    results = diagnostics.run_all()
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        ok = ok and res.passed
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="movefem",
        description="Moving-mesh finite element experiments for 1D gradient flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a key=value config file")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--seed", type=int, help="seed for randomized helpers")
    p_run.add_argument("--dt", type=float, help="time step override")
    p_run.add_argument("--mode", choices=("moving", "frozen", "both"), help="run mode override")
    p_run.set_defaults(func=_cmd_run)

    p_list = sub.add_parser("list-presets", help="show available presets")
    p_list.set_defaults(func=_cmd_list_presets)

    p_check = sub.add_parser("check", help="run the invariant self-checks")
    p_check.set_defaults(func=_cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownPresetError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
