"""Command-line front end.

    hjhomog effective --config run.json --out results/
    hjhomog solve     --config run.json --out results/ --plot
    hjhomog mather    --config run.json
    hjhomog rate      --config run.json
    hjhomog examples

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import svg
from .config import ConfigError, OutputSchemaError, RunConfig, dump_json, interval_from_block
from .core import PeriodicGrid
from .effective import level_set, sample_curve, singleton_certificate
from .epsolve import EpsProblem, StagnationError, build_envelope, inverse_eps, solve_eps, uniqueness_probe
from .hamdsl import ParseError
from .hamiltonian import BUILTIN_DESCRIPTIONS, HamiltonianError
from .harness import MIN_ROWS, RateError, envelope_sweep, rate_sweep
from .mather import SUPPORT_CUTOFF, MeasureGrid, mather_lp, measure_pushforward_density, ordinal_diagnostic
from .scheme import ConvergenceError

logger = logging.getLogger("hjhomog")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


class NumericalFailure(RuntimeError):
    pass


class Context:
    def __init__(self, cfg: RunConfig, out: str, plot: bool):
        self.cfg = cfg
        self.out = out
        self.plot = plot
        self.written: list[str] = []
        self.ham = cfg.hamiltonian()
        if self.ham.monotone_u:
            self.ham.check_monotone(seed=int(cfg.raw["seed"]))

    def write(self, name: str, text: str) -> None:
        os.makedirs(self.out, exist_ok=True)
        path = os.path.join(self.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(path)

    def measure_grid(self) -> MeasureGrid:
        m = self.cfg.block("mather")
        return MeasureGrid(PeriodicGrid(self.cfg.dim, int(m["points"])), float(m["v_max"]), int(m["mv"]))


def _curve_interval(ctx: Context, c: float):
    eff = ctx.cfg.block("effective")
    curve = sample_curve(ctx.ham, ctx.cfg.order, tuple(eff["theta_range"]), int(eff["count"]), ctx.cfg.grid(),
                         ctx.cfg.tol)
    return curve, level_set(curve, c, float(eff["resolution"]), float(eff["level_tol"]))


def _check_eps(value, path: str) -> float:
    try:
        inverse_eps(float(value))
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None
    return float(value)


def cmd_effective(ctx: Context) -> None:
    eff = ctx.cfg.block("effective")
    curve, interval = _curve_interval(ctx, float(eff["c"]))
    ctx.write("curve.csv", curve.to_csv())
    certificate = None
    if interval.singleton:
        cert = singleton_certificate(ctx.ham, ctx.cfg.order, interval, ctx.cfg.grid(), ctx.cfg.tol,
                                     ctx.measure_grid())
        certificate = {"verdict": cert.verdict, "theta": cert.theta, "statistic": cert.statistic,
                       "detail": cert.detail}
    doc = interval.to_dict()
    doc.update({"certificate": certificate, "config": ctx.cfg.raw})
    ctx.write("levelset.json", dump_json(doc, "levelset"))
    if ctx.plot:
        ctx.write("curve.svg", svg.line_plot({"hbar": (curve.thetas, curve.hbars)},
                                             f"effective curve of {ctx.ham.name}", "theta", "hbar(0, theta)"))


def cmd_solve(ctx: Context) -> None:
    blk = ctx.cfg.block("solve")
    eps = _check_eps(blk["eps"], "solve/eps")
    c = float(blk["c"])
    grid = ctx.cfg.grid()
    order = ctx.cfg.order
    if blk["interval"] is not None:
        interval = interval_from_block(blk["interval"], c)
    elif blk["envelope"]:
        interval = _curve_interval(ctx, c)[1]
    else:
        interval = None
    sol = solve_eps(EpsProblem(ctx.ham, eps, c, order, grid, interval), ctx.cfg.tol, strict=bool(blk["strict"]))
    probe = uniqueness_probe(sol, tol=ctx.cfg.tol, measure_grid=ctx.measure_grid())
    ctx.write("solution.csv", sol.to_csv())

    envelope = None
    if blk["envelope"] and interval is not None and not (interval.minus_unbounded and interval.plus_unbounded):
        env = build_envelope(ctx.ham, eps, c, interval, order, grid, ctx.cfg.tol)
        ctx.write("envelope.csv", env.to_csv())
        lo, hi = env.deviation()
        envelope = {
            "contained": env.contains(sol.u, 2 * ctx.cfg.tol),
            "minus_unbounded": env.minus_unbounded,
            "plus_unbounded": env.plus_unbounded,
            "theta_minus": env.theta_minus,
            "theta_plus": env.theta_plus,
            "lower_deviation": lo,
            "upper_deviation": hi,
        }
    doc = {
        "verdict": probe.verdict,
        "statistic": probe.statistic,
        "shift_residual": probe.shift_residual,
        "detail": probe.detail,
        "settled": sol.settled,
        "lipschitz": sol.lipschitz_estimate,
        "residual_sup": sol.residual_sup,
        "u_min": float(sol.u.values.min()),
        "u_max": float(sol.u.values.max()),
        "lambda_trace": [list(t) for t in sol.lambda_trace],
        "envelope": envelope,
        "config": ctx.cfg.raw,
    }
    ctx.write("probe.json", dump_json(doc, "probe"))
    if ctx.plot and grid.dim == 1:
        x, values = sol.on_x_grid()
        ctx.write("solution.svg", svg.line_plot({"u_eps": (x.ravel(), values)}, f"{ctx.ham.name}, eps = {eps:g}",
                                                "x", "u"))


def cmd_mather(ctx: Context) -> None:
    blk = ctx.cfg.block("mather")
    mg = ctx.measure_grid()
    order = ctx.cfg.order
    result = mather_lp(ctx.ham, float(blk["theta"]), order, mg, blk["fourier_order"])
    ctx.write("measure.csv", result.measure.to_csv(cutoff=1e-12))
    doc = {
        "order": order,
        "c_value": result.c_value,
        "residual": result.residual,
        "fourier_order": result.fourier_order,
        "support_size": len(result.measure.support(SUPPORT_CUTOFF)),
        "config": ctx.cfg.raw,
    }
    if order == "first":
        diag = ordinal_diagnostic(ctx.ham, float(blk["theta"]), mg, result=result)
        doc.update({"status": diag.status, "max_integral": diag.max_integral, "positivity_fraction": None})
    else:
        table = measure_pushforward_density(result)
        ctx.write("marginal.csv", table.to_csv())
        doc.update({"status": "density", "max_integral": None, "positivity_fraction": table.positivity_fraction})
    ctx.write("diagnostic.json", dump_json(doc, "diagnostic"))
    if ctx.plot and mg.dim == 1:
        ctx.write("marginal.svg", svg.line_plot({"x-marginal": (mg.x_nodes().ravel(), result.measure.x_marginal())},
                                                f"Mather measure of {ctx.ham.name}", "x", "weight"))


def cmd_rate(ctx: Context) -> None:
    blk = ctx.cfg.block("rate")
    c = float(blk["c"])
    eps_list = [_check_eps(e, f"rate/eps_list/{k}") for k, e in enumerate(blk["eps_list"])]
    grid = ctx.cfg.grid()
    order = ctx.cfg.order
    if blk["mode"] == "rate":
        if len(eps_list) < MIN_ROWS:
            raise ConfigError(f"a rate sweep needs at least {MIN_ROWS} eps values, got {len(eps_list)}",
                              "rate/eps_list")
        interval = None
        target = blk["target"]
        if target is None:
            interval = _curve_interval(ctx, c)[1]
            if not interval.singleton:
                raise NumericalFailure(f"I({c}) is not a singleton ({interval.to_dict()}); set rate.target")
            target = interval.midpoint
        try:
            report = rate_sweep(ctx.ham, order, c, float(target), eps_list, grid, ctx.cfg.tol, interval)
        except RateError as exc:
            raise ConfigError(str(exc), "rate/eps_list") from None
        ctx.write("rate.csv", report.to_csv())
        doc = report.summary()
        doc.update({"mode": "rate", "config": ctx.cfg.raw})
        ctx.write("summary.json", dump_json(doc, "summary"))
        if ctx.plot:
            eps = [r.eps for r in report.rows]
            err = [r.sup_error for r in report.rows]
            fit = [report.fitted_C * e**report.fitted_slope for e in eps]
            ctx.write("rate.svg", svg.line_plot({"sup error": (eps, err), "fit": (eps, fit)},
                                                f"{ctx.ham.name}: slope {report.fitted_slope:.3f}",
                                                "log10 eps", "log10 sup error", loglog=True))
        return
    if blk["interval"] is not None:
        interval = interval_from_block(blk["interval"], c)
    else:
        interval = _curve_interval(ctx, c)[1]
    if interval.minus_unbounded and interval.plus_unbounded:
        raise NumericalFailure("the level set is unbounded on both sides; no envelope to check")
    report = envelope_sweep(ctx.ham, order, c, interval, eps_list, grid, ctx.cfg.tol)
    ctx.write("envelope_sweep.csv", report.to_csv())
    doc = report.summary()
    doc.update({"mode": "envelope", "pass": report.all_contained, "config": ctx.cfg.raw})
    doc["interval"] = interval.to_dict()
    ctx.write("summary.json", dump_json(doc, "summary"))
    if ctx.plot:
        eps = [r.eps for r in report.rows]
        series = {}
        if not interval.minus_unbounded:
            series["lower deviation"] = (eps, [r.lower_deviation for r in report.rows])
        if not interval.plus_unbounded:
            series["upper deviation"] = (eps, [r.upper_deviation for r in report.rows])
        ctx.write("rate.svg", svg.line_plot(series, f"{ctx.ham.name}: envelope deviation", "log10 eps",
                                            "log10 deviation", loglog=True))


def cmd_examples(out: str | None) -> None:
    for name, text in BUILTIN_DESCRIPTIONS.items():
        print(f"{name:10s} {text}")
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "examples.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump_json(dict(BUILTIN_DESCRIPTIONS), "examples"))


COMMANDS = {"effective": cmd_effective, "solve": cmd_solve, "mather": cmd_mather, "rate": cmd_rate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", metavar="N", type=int, help="seed for randomized spot checks")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="hjhomog",
                                     description="Periodic homogenization of contact Hamilton-Jacobi equations.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("effective", parents=[common], help="effective curve and level set I(c)")
    sub.add_parser("solve", parents=[common], help="oscillatory solve, envelopes and uniqueness probe")
    sub.add_parser("mather", parents=[common], help="Mather LP and ordinal diagnostic")
    sub.add_parser("rate", parents=[common], help="epsilon sweep: rate fit or envelope containment")
    sub.add_parser("examples", parents=[common], help="list the built-in Hamiltonians")
    return parser


def _render_parse_error(exc: ParseError, raw: dict | None) -> str:
    source = (raw or {}).get("hamiltonian", {}).get("expr", "")
    return exc.diagnostic.render(source) if source else str(exc)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "examples":
        cmd_examples(args.out if args.out != "." else None)
        return EXIT_OK
    if not args.config:
        print("error: --config PATH is required", file=sys.stderr)
        return EXIT_CONFIG

    raw = None
    try:
        cfg = RunConfig.from_file(args.config)
        raw = cfg.raw
        if args.seed is not None:
            raw["seed"] = args.seed
        ctx = Context(cfg, args.out, args.plot)
        COMMANDS[args.command](ctx)
    except ParseError as exc:
        print(_render_parse_error(exc, raw), file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, HamiltonianError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, StagnationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for row in exc.trace:
            print(f"  trace: {row}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NumericalFailure, OutputSchemaError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # solver internals: LP stalls, NaNs, envelope sign checks
        logger.debug("failure", exc_info=True)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in ctx.written:
        logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
