"""Command-line entry point: ``fracburst <module> <action> [options]``.

Exit codes: 0 on success, 1 for domain, configuration or usage errors
(one-line diagnostic on stderr), 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import env_overrides, load_config, renewal_problem, resolve_renewal, resolve_spde, sim_config
from .errors import ConfigError, FracburstError, NumericalFailure, ResolutionError
from .fracops import TimeGrid, caputo_derivative, rl_integral
from .manifest import RunManifest
from .mlf import ml_eval, ml_table
from .params import PhysParams
from .renewal import PHASE_COLUMNS, RenewalProblem, frontier_summary, phase_diagram, solve_renewal
from .spectral import GridSpec, kernel_decay_report, read_profile_csv, write_field, write_profile_csv
from .spde import run_ensemble

__all__ = ["main", "build_parser", "parse_range"]

_SWEEP_KEYS = ("C0", "C1", "C2", "omega0_norm", "horizon", "blowup_threshold", "kernel_mode")
FRONTIER_STEPS = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as :class:`ConfigError`."""

    def error(self, message):
        raise ConfigError(f"{message} (see '{self.prog} --help')")


def parse_range(text: str) -> np.ndarray:
    """``start:stop:count`` (inclusive ends) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            return np.linspace(float(start), float(stop), n)
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"bad range {text!r}: expected start:stop:count or a comma list") from None


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _file_manifest(command: str, config: dict, out: Path, inputs=()) -> None:
    # single-file outputs get a sibling manifest
    man = RunManifest(command, config)
    for p in inputs:
        man.add_input(p)
    man.add_output(out.parent, out.name)
    out.with_name(out.name + ".manifest.toml").write_text(man.to_toml())


def _rundir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _workers(args) -> int:
    env = env_overrides().get("workers")
    return args.workers if args.workers is not None else (env or 1)


# --- mlf -----------------------------------------------------------------------


def _mlf_eval(args) -> int:
    print(_fmt(ml_eval(args.beta, args.gamma, args.z)))
    return 0


def _mlf_table(args) -> int:
    betas, gammas, zs = parse_range(args.beta), parse_range(args.gamma), parse_range(args.z)
    rows = ml_table(betas, gammas, zs)
    out = Path(args.out)
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    write_profile_csv(out, {"beta": arr[:, 0], "gamma": arr[:, 1], "z": arr[:, 2], "value": arr[:, 3]})
    _file_manifest("mlf table", {"beta": args.beta, "gamma": args.gamma, "z": args.z}, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


# --- fracops -------------------------------------------------------------------


def _fracops_apply(args) -> int:
    data = read_profile_csv(args.input)
    if "t" not in data or "value" not in data:
        raise ConfigError(f"{args.input}: expected columns t,value")
    grid = TimeGrid.from_times(data["t"])
    if args.op == "caputo":
        res = caputo_derivative(data["value"], grid, args.beta)
    else:
        res = rl_integral(data["value"], grid, args.beta, args.rule)
    out = Path(args.output)
    write_profile_csv(out, {"t": grid.times, "value": res})
    cfg = {"op": args.op, "beta": args.beta, "rule": args.rule}
    _file_manifest("fracops apply", cfg, out, inputs=[args.input])
    return 0


# --- spectral ------------------------------------------------------------------


def _spectral_kernel(args) -> int:
    from .plotting import plot_kernel

    params = PhysParams(args.alpha, args.beta, nu=args.nu, relaxed=args.relaxed)
    grid = GridSpec(args.dim, args.n, args.L)
    rep = kernel_decay_report(params, args.t, grid)
    out = _rundir(args.out)
    write_profile_csv(out / "kernel.csv", {"x": rep.x, "rho": rep.rho, "profile": rep.profile, "bound": rep.bound})
    plot_kernel(rep, out / "kernel.png")
    cfg = {"alpha": args.alpha, "beta": args.beta, "nu": args.nu, "t": args.t, "dim": args.dim, "n": args.n,
           "L": args.L, "relaxed": args.relaxed}
    man = RunManifest("spectral kernel", cfg, extra={
        "form": rep.form, "c": rep.c, "d": rep.d, "max_violation": rep.max_violation, "monotone": rep.monotone,
    })
    for name in ("kernel.csv", "kernel.png"):
        man.add_output(out, name)
    man.write(out)
    print(f"{rep.form} tail, c={rep.c:.6g} d={rep.d:.6g}, monotone={rep.monotone}, "
          f"max violation {rep.max_violation:.4g} of peak")
    return 0


# --- renewal -------------------------------------------------------------------


def _renewal_solve(args) -> int:
    from .plotting import plot_trajectory

    raw = load_config(args.config) if args.config else {}
    resolved = resolve_renewal(raw, relaxed=args.relaxed)
    prob = renewal_problem(resolved)
    dt = args.dt if args.dt is not None else prob.horizon / 1000.0
    traj = solve_renewal(prob, dt, refine=not args.no_refine)
    out = _rundir(args.out)
    write_profile_csv(out / "trajectory.csv", {"t": traj.times, "P": traj.values})
    plot_trajectory(traj, out / "trajectory.png", threshold=prob.blowup_threshold)
    man = RunManifest("renewal solve", dict(resolved, dt=dt), extra={
        "verdict": traj.verdict, "t_star": traj.t_star, "refinement_change": traj.confidence, "note": traj.note,
    })
    if args.config:
        man.add_input(args.config)
    for name in ("trajectory.csv", "trajectory.png"):
        man.add_output(out, name)
    man.write(out)
    line = f"verdict: {traj.verdict}"
    if traj.blowup:
        line += f", T* = {_fmt(traj.t_star)}"
    if traj.confidence is not None:
        line += f", refinement change {traj.confidence:.3g}"
    print(line)
    if traj.blowup and traj.stable is False:
        print(f"warning: T* is not refinement-stable ({traj.note}); reduce --dt", file=sys.stderr)
    return 0


def _renewal_sweep(args) -> int:
    from .plotting import plot_phase

    alphas, gammas = parse_range(args.alpha), parse_range(args.gamma)
    if args.beta_steps < 2:
        raise ConfigError("--beta-steps must be >= 2")
    betas = np.arange(1, args.beta_steps + 1) / (args.beta_steps + 1)
    base = {}
    if args.config:
        raw = load_config(args.config)
        raw.pop("__text__")
        source = raw.pop("__source__")
        unknown = sorted(set(raw) - set(_SWEEP_KEYS))
        if unknown:
            raise ConfigError(f"{source}: keys not sweepable: {', '.join(unknown)} (allowed: {', '.join(_SWEEP_KEYS)})")
        base = raw
        # validate the constants once before sweeping
        RenewalProblem(**base)
    horizon = base.get("horizon", RenewalProblem.horizon)
    dt = args.dt if args.dt is not None else horizon / 1000.0
    cells = phase_diagram(alphas, gammas, betas, base=base, dt=dt, workers=_workers(args))
    summary = frontier_summary(cells, betas)
    out = _rundir(args.out)
    with open(out / "phase.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS)
        for c in cells:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in c.row()])
    with open(out / "frontier.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "gamma", "frontier", "beta_lower", "steps"])
        for s in summary:
            front = "" if s["frontier"] is None else _fmt(s["frontier"])
            w.writerow([_fmt(s["alpha"]), _fmt(s["gamma"]), front, _fmt(s["beta_lower"]), _fmt(s["steps"])])
    plot_phase(cells, out / "phase.png")
    within = sum(s["steps"] <= FRONTIER_STEPS for s in summary) / len(summary)
    cfg = {"alpha": args.alpha, "gamma": args.gamma, "beta_steps": args.beta_steps, "dt": dt, **base}
    man = RunManifest("renewal sweep", cfg, extra={"frontier_within_2_steps": within})
    if args.config:
        man.add_input(args.config)
    for name in ("phase.csv", "frontier.csv", "phase.png"):
        man.add_output(out, name)
    man.write(out)
    counts = {v: sum(c.verdict == v for c in cells) for v in ("bounded", "blowup", "error")}
    print(f"{len(cells)} cells: {counts['blowup']} blow-up, {counts['bounded']} bounded, {counts['error']} rejected; "
          f"frontier within {FRONTIER_STEPS} steps of beta_lower in {100 * within:.1f}% of columns")
    return 0


# --- spde ----------------------------------------------------------------------


def _spde_run(args) -> int:
    from .plotting import plot_ensemble

    raw = load_config(args.config) if args.config else {}
    env = env_overrides()
    for key in ("seed", "ensemble"):
        if key in env:
            raw[key] = env[key]
    resolved = resolve_spde(raw, relaxed=args.relaxed)
    cfg = sim_config(resolved)
    stats = run_ensemble(cfg, workers=_workers(args))
    out = _rundir(args.out)
    write_profile_csv(out / "stats.csv", stats.table())
    names = ["stats.csv"]
    if stats.mean_field is not None:
        write_field(out / "mean_field.bin", stats.mean_field)
        names.append("mean_field.bin")
    plot_ensemble(stats, out / "ensemble.png")
    names.append("ensemble.png")
    man = RunManifest("spde run", resolved, seeds={"seed": cfg.seed, "streams": "(seed, realization, step)"},
                      extra={"failures": stats.failures, "max_divergence": stats.max_divergence,
                             "digest": stats.digest()})
    if args.config:
        man.add_input(args.config)
    for name in names:
        man.add_output(out, name)
    man.write(out)
    final = stats.P_estimate[-1]
    print(f"P_estimate(t_end) = {_fmt(final)}, blow-up fraction {stats.blowup_fraction[-1]:.3g}, "
          f"failures {stats.failures}/{cfg.ensemble}")
    if stats.failures:
        raise NumericalFailure(f"{stats.failures} of {cfg.ensemble} realizations hit non-finite values "
                               f"(outputs written to {out})")
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--relaxed", action="store_true", default=argparse.SUPPRESS,
                        help="widen parameter validation to the relaxed ranges")
    parser = _Parser(prog="fracburst", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    mods = parser.add_subparsers(dest="module", required=True, parser_class=_Parser)

    mlf = mods.add_parser("mlf", help="Mittag-Leffler functions").add_subparsers(dest="action", required=True)
    p = mlf.add_parser("eval", parents=[common], help="evaluate E_{beta,gamma}(z)")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--z", type=float, required=True)
    p.set_defaults(func=_mlf_eval)
    p = mlf.add_parser("table", parents=[common], help="tabulate over index and argument ranges")
    p.add_argument("--beta", required=True, help="list or start:stop:count")
    p.add_argument("--gamma", default="1")
    p.add_argument("--z", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_mlf_table)

    fr = mods.add_parser("fracops", help="fractional derivatives and integrals").add_subparsers(
        dest="action", required=True)
    p = fr.add_parser("apply", parents=[common], help="apply an operator to a t,value CSV")
    p.add_argument("--op", choices=("caputo", "rl"), required=True)
    p.add_argument("--beta", type=float, required=True, help="operator order in (0, 1)")
    p.add_argument("--rule", choices=("linear", "constant"), default="linear", help="RL product rule")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_fracops_apply)

    sp = mods.add_parser("spectral", help="spectral engine").add_subparsers(dest="action", required=True)
    p = sp.add_parser("kernel", parents=[common], help="radial Green-kernel profile and bound fit")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--L", type=float, default=800.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_spectral_kernel)

    rn = mods.add_parser("renewal", help="renewal inequality dynamics").add_subparsers(dest="action", required=True)
    p = rn.add_parser("solve", parents=[common], help="solve one renewal problem")
    p.add_argument("--config")
    p.add_argument("--dt", type=float)
    p.add_argument("--no-refine", action="store_true", help="skip the dt/2 refinement check")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_renewal_solve)
    p = rn.add_parser("sweep", parents=[common], help="(alpha, gamma, beta) phase diagram")
    p.add_argument("--alpha", default="1.05:1.45:9")
    p.add_argument("--gamma", default="0.05:0.45:9")
    p.add_argument("--beta-steps", type=int, default=40)
    p.add_argument("--config", help="constants shared by every cell")
    p.add_argument("--dt", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_renewal_sweep)

    sd = mods.add_parser("spde", help="stochastic vorticity simulator").add_subparsers(dest="action", required=True)
    p = sd.add_parser("run", parents=[common], help="run an ensemble")
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_spde_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.relaxed = getattr(args, "relaxed", False)
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return args.func(args)
    except NumericalFailure as exc:
        print(f"fracburst: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (FracburstError, ValueError, OSError) as exc:
        kind = "resolution" if isinstance(exc, ResolutionError) else "error"
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"fracburst: {kind}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
