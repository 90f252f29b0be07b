"""Command-line entry point: ``gfn simulate|analytic|propagate|wick``.

Exit status is 0 when every gate passes, 1 when a gate fails and 2 on configuration
or usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .analytic import (
    CoincidentPointError, SpacetimePoint, field_mode_correlation, mode_correlation,
    modesum_npoint, schwinger2_continuum, schwinger2_quadrature, schwingerN, wick_pairings,
)
from .config import ConfigError, RunConfig, parse_config
from .continuation import (
    STANDARD_BOOST_PAIRS, QuadratureError, continued_two_point, lorentz_invariance_check,
)
from .lattice import ResourceLimitError, build_mode_set
from .report import COMPARISON_COLUMNS, ComparisonReport, write_csv, write_summary
from .sim import (
    AutocorrObservable, CorrelatorEstimate, EnsembleError, _simulate_batch, npoint_observable,
    run_ensemble, snap_to_grid, FieldTrajectory, write_trajectory_dump,
)

VERSION = f"v{__version__}"


@dataclass
class CommandResult:
    """What a command produced: exit code, summary rows, written files, text for stdout."""

    exit_code: int
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)


def _point_label(p: SpacetimePoint) -> str:
    return "(" + ",".join(f"{c:g}" for c in p.x) + f";{p.t:g})"


def _set_label(points) -> str:
    return "<" + " ".join(_point_label(p) for p in points) + ">"


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: RunConfig, out: Path, jobs: int = 1) -> CommandResult:
    """Monte Carlo correlators against the finite-volume analytic values."""
    params = cfg.params
    modes = build_mode_set(params)
    block = cfg.simulate
    dt = cfg.ensemble.grid_dt

    observables, plans = [], []
    for n in block.modes:
        if n not in modes.canonical:
            raise ConfigError(f"mode {n} is not a canonical mode inside the cutoff (representatives "
                              "have their first nonzero component positive)")
        snaps = [snap_to_grid(abs(tau), dt) for tau in block.lags]
        if any(s > cfg.ensemble.grid_len for s, _ in snaps):
            raise ConfigError("a lag exceeds the simulated time span")
        observables.append(AutocorrObservable(n, tuple(s for s, _ in snaps), block.component))
        plans.append(("autocorr", n, snaps))
    if block.correlators:
        try:
            obs, errors = npoint_observable(block.correlators, cfg.ensemble, cfg.normalization)
        except EnsembleError as exc:
            raise ConfigError(str(exc)) from None
        observables.append(obs)
        plans.append(("npoint", None, errors))

    values = run_ensemble(modes, cfg.ensemble, cfg.policy, observables, jobs)

    report = ComparisonReport(cfg.gates.z)
    col = 0
    for kind, n, info in plans:
        if kind == "autocorr":
            for tau, (steps, err) in zip(block.lags, info):
                est = CorrelatorEstimate.from_batches(values[:, col].tolist(), err)
                col += 1
                lag = steps * dt
                if n == (0, 0, 0):
                    exact = field_mode_correlation(n, n, lag, params)
                else:
                    exact = mode_correlation(n, lag, params)
                label = f"autocorr n={n} comp={block.component} tau={tau:g}"
                if err:
                    label += f" (snapped to {lag:g})"
                report.add(label, est.mean, est.std_err, exact, err)
        else:
            for points, err in zip(block.correlators, info):
                est = CorrelatorEstimate.from_batches(values[:, col].tolist(), err)
                col += 1
                exact = modesum_npoint(points, modes)
                if cfg.normalization == "literal":
                    exact *= 2.0 ** (len(points) / 2)
                report.add(f"npoint N={len(points)} {_set_label(points)}", est.mean, est.std_err, exact, err)

    files = [write_csv(out / "comparisons.csv", COMPARISON_COLUMNS, (r.csv_row() for r in report.rows))]
    if cfg.dump_trajectories:
        files.append(_dump(cfg, modes, out))
    rows = [{"label": r.label, "value": r.mc_mean, "std_err": r.mc_std_err, "analytic": r.analytic_value,
             "z": r.z_score, "pass": r.passed, "snap_error": r.snap_error} for r in report.rows]
    lines = [f"{'PASS' if r.passed else 'FAIL'}  z={r.z_score:+.3f}  {r.label}" for r in report.rows]
    lines += [f"{report.n_pass} passed, {report.n_fail} failed, worst |z| = {report.worst_z:.3f} (gate {report.gate:g})"]
    snapped = [r for r in report.rows if r.snap_error]
    if snapped:
        lines.append(f"note: {len(snapped)} entries were snapped to the time grid (see snap_error in summary.json)")
    return CommandResult(0 if report.n_fail == 0 else 1, rows, report.summary(), files, lines)


def _dump(cfg: RunConfig, modes, out: Path) -> Path:
    grid = cfg.ensemble.grid
    ids = list(range(cfg.ensemble.n_trajectories))
    r, i = _simulate_batch(modes, modes.canonical, grid, cfg.policy, ids, cfg.ensemble.scheme)
    trajs = (FieldTrajectory(grid, r[b], i[b], cfg.policy.master_seed, tid, modes.canonical)
             for b, tid in enumerate(ids))
    path = out / "trajectories.csv"
    write_trajectory_dump(path, trajs, modes)
    return path


# ---------------------------------------------------------------------------
# analytic


def cmd_analytic(cfg: RunConfig, out: Path) -> CommandResult:
    """Tabulate the Euclidean two-point function and Wick N-point values."""
    params = cfg.params
    s2_rows, rows, lines = [], [], []
    for r in cfg.analytic.r_grid:
        dp = SpacetimePoint((r, 0.0, 0.0), 0.0)
        closed = schwinger2_continuum(dp, params)
        quad = schwinger2_quadrature(dp, params)
        rel = abs(quad / closed - 1.0)
        s2_rows.append([r, closed, quad, rel])
        rows.append({"r": r, "value": closed, "quadrature": quad, "rel_diff": rel})
        lines.append(f"S2(r={r:g}) = {closed:.10g}   quadrature {quad:.10g}   rel diff {rel:.2e}")
    sn_rows = []
    for points in cfg.analytic.sets:
        label = _set_label(points)
        try:
            value = schwingerN(points, params)
        except CoincidentPointError as exc:
            raise ConfigError(f"analytic set {label}: {exc}") from None
        note = "odd N: odd moments of a mean-zero Gaussian vanish" if len(points) % 2 else ""
        sn_rows.append([label, len(points), float(value), note])
        rows.append({"label": label, "n_points": len(points), "value": float(value), "note": note})
        lines.append(f"S{len(points)}{label} = {float(value):.10g}" + (f"   ({note})" if note else ""))
    files = [write_csv(out / "s2.csv", ("r", "value", "quadrature", "rel_diff"), s2_rows)]
    if sn_rows:
        files.append(write_csv(out / "sn.csv", ("label", "n_points", "value", "note"), sn_rows))
    return CommandResult(0, rows, {"n_s2": len(s2_rows), "n_sets": len(sn_rows)}, files, lines)


# ---------------------------------------------------------------------------
# propagate


def cmd_propagate(cfg: RunConfig, out: Path) -> CommandResult:
    """Time-ordered propagator values, equal-time identity, conjugation and boost checks."""
    params = cfg.params
    hbar = params.hbar
    gates = cfg.gates
    rows, lines, failures = [], [], 0

    prop_rows, eq_rows = [], []
    for dp in cfg.propagate.separations:
        res = continued_two_point(dp, 0.5j * hbar, params)
        v = res.value
        prop_rows.append([_point_label(dp), *dp.x, dp.t, v.real, v.imag, res.systematic])
        rows.append({"kind": "propagator", "label": _point_label(dp), "re": v.real, "im": v.imag,
                     "systematic": res.systematic})
        if dp.t == 0.0:
            s2 = schwinger2_continuum(dp, params)
            rel = abs(v - s2) / abs(s2)
            ok = rel <= gates.equal_time
            failures += not ok
            eq_rows.append([_point_label(dp), dp.spatial_norm, v.real, v.imag, s2, rel, ok])
            rows.append({"kind": "equal_time", "label": _point_label(dp), "rel_diff": rel, "pass": ok})
            lines.append(f"{'PASS' if ok else 'FAIL'}  equal-time {_point_label(dp)}: rel diff {rel:.2e}")

    conj_rows = []
    for dp in cfg.propagate.conjugation:
        plus = continued_two_point(dp, 0.5j * hbar, params).value
        minus = continued_two_point(dp, -0.5j * hbar, params).value
        total = plus + minus
        ok = total.imag == 0.0
        failures += not ok
        conj_rows.append([_point_label(dp), plus.real, plus.imag, minus.real, minus.imag, total.imag, ok])
        rows.append({"kind": "conjugation", "label": _point_label(dp), "im_sum": total.imag, "pass": ok})
        lines.append(f"{'PASS' if ok else 'FAIL'}  conjugation {_point_label(dp)}: Im(+ + -) = {total.imag:g}")

    pairs = cfg.propagate.boost_pairs if cfg.propagate.boost_pairs is not None else STANDARD_BOOST_PAIRS
    inv_rows = []
    for check in lorentz_invariance_check(pairs, params):
        ok = check.residual <= gates.residual
        failures += not ok
        label = f"{_point_label(check.first)} > {_point_label(check.second)}"
        inv_rows.append([label, check.interval, check.residual, gates.residual, ok])
        rows.append({"kind": "boost", "label": label, "residual": check.residual, "pass": ok})
        lines.append(f"{'PASS' if ok else 'FAIL'}  boost {label}: residual {check.residual:.2e}")

    files = [
        write_csv(out / "propagator.csv", ("label", "dx", "dy", "dz", "dt", "re", "im", "systematic"), prop_rows),
        write_csv(out / "equal_time.csv", ("label", "r", "re", "im", "schwinger", "rel_diff", "pass"), eq_rows),
        write_csv(out / "conjugation.csv",
                  ("label", "re_plus", "im_plus", "re_minus", "im_minus", "im_sum", "pass"), conj_rows),
        write_csv(out / "invariance.csv", ("label", "interval", "residual", "tolerance", "pass"), inv_rows),
    ]
    n_checks = len(eq_rows) + len(conj_rows) + len(inv_rows)
    summary = {"n_pass": n_checks - failures, "n_fail": failures}
    lines.append(f"{n_checks - failures} passed, {failures} failed")
    return CommandResult(0 if failures == 0 else 1, rows, summary, files, lines)


# ---------------------------------------------------------------------------
# wick


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def cmd_wick(n: int, out: Path | None, max_n: int = 12) -> CommandResult:
    """List every pairing of N points (1-based) and the count."""
    pairings = wick_pairings(n, max_n=max_n)
    text = [" ".join(f"({i + 1} {j + 1})" for i, j in p) for p in pairings]
    lines = list(text)
    if n % 2:
        lines.append(f"N={n}: 0 pairings (odd N: odd moments of a mean-zero Gaussian vanish)")
    else:
        lines.append(f"N={n}: {len(pairings)} pairings ((N-1)!! = {_double_factorial(n - 1)})")
    files = []
    if out is not None:
        files.append(write_csv(out / "wick.csv", ("index", "pairing"), enumerate(text, start=1)))
    ok = len(pairings) == (0 if n % 2 else _double_factorial(n - 1))
    rows = [{"index": k, "pairing": t} for k, t in enumerate(text, start=1)]
    return CommandResult(0 if ok else 1, rows, {"n": n, "count": len(pairings)}, files, lines)


# ---------------------------------------------------------------------------


def _jobs(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("GFN_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"GFN_JOBS must be an integer, got {env!r}") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "Monte Carlo correlators vs analytic values"),
        ("analytic", "tabulate Schwinger functions"),
        ("propagate", "continued propagator, conjugation and boost checks"),
        ("wick", "list Wick pairings"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=name != "wick")
        p.add_argument("--out", type=Path, default=Path("gfn_output"))
        p.add_argument("--seed", type=int, default=None, help="override [rng] master_seed")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: $GFN_JOBS or 1)")
        if name == "wick":
            p.add_argument("--n", type=int, default=None, help="number of points (overrides [wick] n)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        jobs = _jobs(args.jobs)
        if args.command == "wick" and args.config is None:
            if args.n is None:
                raise ConfigError("wick needs --n or a config with [wick] n")
            cfg = None
        else:
            cfg = parse_config(args.config, seed=args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            result = cmd_simulate(cfg, args.out, jobs)
        elif args.command == "analytic":
            result = cmd_analytic(cfg, args.out)
        elif args.command == "propagate":
            result = cmd_propagate(cfg, args.out)
        else:
            n = args.n if args.n is not None else cfg.wick_n
            if n is None:
                raise ConfigError("wick needs --n or [wick] n")
            result = cmd_wick(n, args.out, cfg.wick_max_n if cfg else 12)
    except (ConfigError, EnsembleError, ResourceLimitError, CoincidentPointError, ValueError) as exc:
        print(f"gfn: error: {exc}", file=sys.stderr)
        return 2
    except QuadratureError as exc:
        print(f"gfn: quadrature failure: {exc}", file=sys.stderr)
        return 1
    echo = cfg.echo() if cfg is not None else {}
    result.files.append(write_summary(args.out / "summary.json", args.command, VERSION, echo,
                                      result.rows, result.summary))
    for line in result.lines:
        print(line)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
