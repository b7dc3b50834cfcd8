"""Command-line front end: ``blahut solve | analyze | sweep``.

Exit codes: 0 success (including a max-iterations stop), 2 malformed
channel or arguments, 3 dimension errors, 4 no reference optimum at the
requested precision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import channels
from .analysis import (
    ReferenceOptimum,
    ReferenceSource,
    Regime,
    annotate_trace,
    classify_indexes,
    fit_rate,
    fit_tail,
    iteration_bound_check,
    reference_optimum,
)
from .errors import (
    DimensionGuard,
    DimensionMismatch,
    InsufficientData,
    InvalidChannel,
    InvalidDistribution,
    ReferenceUnavailable,
)
from .info import Channel, nats_to_bits
from .oracle import analytic_capacity, grid_search_capacity
from .solver import DEFAULT_MAX_ITERS, SolverConfig, solve

EXIT_OK, EXIT_MALFORMED, EXIT_DIMENSION, EXIT_REFERENCE = 0, 2, 3, 4
fmt = channels.fmt_float


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines a run's output files."""

    subcommand: str
    channel: str | None
    generate: str | None
    m: tuple[int, int] | None
    n: tuple[int, int] | None
    delta: float | None
    seed: int | None
    epsilon: float
    max_iters: int
    init: str
    init_file: str | None
    long_horizon: bool
    trace_out: str | None
    report_out: str | None
    count: int = 1

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunManifest":
        if args.generate == "random" and args.seed is None:
            raise UsageError("--generate random needs --seed")
        if args.init == "random" and args.seed is None:
            raise UsageError("--init random needs --seed")
        if args.init == "file" and args.init_file is None:
            raise UsageError("--init file needs --init-file")
        if args.channel is None and args.generate is None:
            raise UsageError("give --channel or --generate")
        return cls(
            subcommand=args.command,
            channel=str(args.channel) if args.channel else None,
            generate=args.generate,
            m=args.m,
            n=args.n,
            delta=args.delta,
            seed=args.seed,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            init=args.init,
            init_file=str(args.init_file) if args.init_file else None,
            long_horizon=args.long_horizon,
            trace_out=str(args.trace_out) if args.trace_out else None,
            report_out=str(args.report_out) if args.report_out else None,
            count=getattr(args, "count", 1),
        )


def _int_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        bounds = (int(lo), int(hi) if sep else int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO..HI, got {text!r}") from None
    if bounds[0] < 1 or bounds[1] < bounds[0]:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return bounds


def _single(value: tuple[int, int] | None, flag: str) -> int:
    if value is None:
        raise UsageError(f"{flag} is required for this generator")
    if value[0] != value[1]:
        raise UsageError(f"{flag} must be a single value here, got a range")
    return value[0]


def _generate(kind: str, m: int | None, n: int | None, delta: float | None, seed: int | None):
    """Build a generated channel; returns ``(channel, known reference or None)``."""
    if kind == "random":
        return channels.random_channel(m, n, seed), None
    if kind == "identity":
        return channels.identity(m), None
    if kind == "bsc":
        if delta is None:
            raise UsageError("--generate bsc needs --delta")
        return channels.bsc(delta), None
    if kind == "dup-row":
        ch, p_star, c_star = channels.dup_row_channel(0.3 if delta is None else delta)
        return ch, ReferenceOptimum.from_distribution(ch, p_star, ReferenceSource.ANALYTIC, c_star)
    raise UsageError(f"unknown generator {kind!r}")


def load_channel(man: RunManifest, fmt_name: str | None = None):
    if man.channel is not None:
        return channels.read_channel(man.channel, fmt_name), None
    m = _single(man.m, "--m") if man.generate in ("random", "identity") else None
    n = _single(man.n, "--n") if man.generate == "random" else None
    return _generate(man.generate, m, n, man.delta, man.seed)


def solver_config(man: RunManifest, record_trace: bool = True) -> SolverConfig:
    init = man.init
    if init == "file":
        init = channels.read_distribution(man.init_file)
    return SolverConfig(
        epsilon=man.epsilon,
        max_iters=man.max_iters,
        init=init,
        seed=man.seed,
        record_trace=record_trace,
        long_horizon=man.long_horizon,
    )


def _clean(obj):
    """Make a structure JSON-safe: enums to values, NaN/inf to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _show(label: str, nats: float, units: str) -> str:
    return f"{label} = {fmt(nats_to_bits(nats)) + ' bits' if units == 'bits' else fmt(nats) + ' nats'}"


def _oracle_block(channel: Channel, capacity: float, epsilon: float) -> dict:
    result = analytic_capacity(channel)
    if result is None:
        try:
            result = grid_search_capacity(channel, 0.01, 3)
        except DimensionGuard as exc:
            return {"method": None, "c_star": None, "agreement": None, "note": str(exc)}
    diff = abs(capacity - result.c_star)
    return {
        "method": result.method,
        "c_star": result.c_star,
        "tolerance": result.tolerance,
        "difference": diff,
        "agreement": diff <= result.tolerance + epsilon,
    }


def cmd_solve(man: RunManifest, args) -> int:
    channel, _ = load_channel(man, args.format)
    report = solve(channel, solver_config(man, record_trace=man.trace_out is not None))
    out = {
        "name": channel.name,
        "m": channel.m,
        "n": channel.n_original,
        "capacity_nats": report.capacity_estimate,
        "capacity_bits": nats_to_bits(report.capacity_estimate),
        "iterations": report.iterations,
        "stop_reason": report.stop_reason,
        "epsilon": man.epsilon,
        "gap_nats": report.gap,
        "upper_bound_nats": report.upper_bound,
        "p_final": report.p_final.probs.tolist(),
    }
    if args.verify:
        out["oracle"] = _oracle_block(channel, report.capacity_estimate, man.epsilon)
    out["manifest"] = asdict(man)
    if man.trace_out:
        tr = report.trace
        header = ["t", "c_lower", "c_upper", "gap"] + [f"p_{i}" for i in range(channel.m)]
        rows = ([int(tr.t[k]), tr.c_lower[k], tr.c_upper[k], tr.gap[k], *tr.p[k]] for k in range(len(tr)))
        _emit(_csv(header, rows), man.trace_out)
    _emit(_json(out), man.report_out)
    if man.report_out:
        print(f"{_show('capacity', report.capacity_estimate, args.units)} "
              f"after {report.iterations} iterations ({report.stop_reason.value})")
    return EXIT_OK


def _fit_block(fn, series, epsilon: float) -> dict:
    try:
        return asdict(fn(series, epsilon))
    except InsufficientData as exc:
        return {"regime": Regime.UNDETERMINED, "reason": str(exc)}


def analyze_channel(channel: Channel, ref: ReferenceOptimum, cfg: SolverConfig) -> tuple[dict, object]:
    """Solve, annotate against ``ref`` and summarize; returns ``(summary, table)``."""
    report = solve(channel, cfg)
    table = annotate_trace(report.trace, ref, report.p_final)
    series = table.series()
    reached = np.flatnonzero(report.trace.gap <= cfg.epsilon)
    to_eps = int(reached[0]) + 1 if reached.size else report.iterations

    rate = _fit_block(fit_rate, series, cfg.epsilon)
    bound = None
    if "c_hat" in rate:
        bound = asdict(iteration_bound_check(channel.m, cfg.epsilon, to_eps, rate["c_hat"]))
    try:
        cls = classify_indexes(channel, ref)
        classification = {"labels": cls.labels, "tolerance": cls.tolerance,
                          "mass_threshold": cls.mass_threshold, "divergences": cls.divergences}
    except ValueError as exc:
        classification = {"error": str(exc)}

    summary = {
        "name": channel.name,
        "m": channel.m,
        "n": channel.n_original,
        "epsilon": cfg.epsilon,
        "long_horizon": cfg.long_horizon,
        "reference": {"source": ref.source, "c_star_nats": ref.c_star,
                      "p_star": ref.p_star.probs.tolist(), "residual": ref.residual},
        "solve": {"capacity_nats": report.capacity_estimate,
                  "capacity_bits": nats_to_bits(report.capacity_estimate),
                  "iterations": report.iterations, "iterations_to_epsilon": to_eps,
                  "stop_reason": report.stop_reason},
        "identity": {"rows": len(table),
                     "max_residual": float(table.residual.max()) if len(table) else 0.0,
                     "max_ratio": float(np.nanmax(table.a)) if np.isfinite(table.a).any() else None},
        "rate_fit": rate,
        "classification": classification,
        "bound_check": bound,
    }
    if cfg.long_horizon:
        summary["tail_fit"] = _fit_block(fit_tail, series, cfg.epsilon)
    return summary, table


def cmd_analyze(man: RunManifest, args) -> int:
    channel, ref = load_channel(man, args.format)
    if ref is None:
        ref = reference_optimum(channel, gap=args.reference_gap, max_iters=man.max_iters)
    summary, table = analyze_channel(channel, ref, solver_config(man))
    summary["manifest"] = asdict(man)
    if man.trace_out:
        rows = zip(table.t.tolist(), table.f, table.d_p, table.d_q, table.a, table.residual)
        _emit(_csv(["t", "f", "d_p", "d_q", "a", "residual"], rows), man.trace_out)
    _emit(_json(summary), man.report_out)
    if man.report_out:
        print(f"regime {_clean(summary['rate_fit']['regime'])}, "
              f"max identity residual {fmt(summary['identity']['max_residual'])}")
    return EXIT_OK


SWEEP_HEADER = ["index", "m", "n", "seed", "capacity_nats", "iterations",
                "c_hat", "regime", "bound_check", "status"]


def _sweep_one(job: tuple) -> list:
    index, kind, m, n, delta, seed, cfg, ref_gap = job
    row = [index, m, n, "" if seed is None else seed]
    try:
        channel, ref = _generate(kind, m, n, delta, seed)
        if ref is None:
            ref = reference_optimum(channel, gap=ref_gap, max_iters=cfg.max_iters)
        summary, _ = analyze_channel(channel, ref, cfg)
    except (ReferenceUnavailable, InvalidChannel, ValueError) as exc:
        return row + ["", "", "", "", "", f"error: {exc}"]
    rate, bound = summary["rate_fit"], summary["bound_check"]
    return row + [
        summary["solve"]["capacity_nats"],
        summary["solve"]["iterations"],
        rate.get("c_hat", ""),
        _clean(rate["regime"]),
        "" if bound is None else str(bound["passed"]).lower(),
        "ok",
    ]


def sweep_jobs(man: RunManifest, reference_gap: float = 1e-12) -> list[tuple]:
    """One job per channel; random ensembles come from :func:`channels.random_ensemble`."""
    kind = man.generate or "random"
    cfg = SolverConfig(epsilon=man.epsilon, max_iters=man.max_iters, long_horizon=man.long_horizon)
    jobs = []
    if kind == "random":
        if man.seed is None or man.m is None or man.n is None:
            raise UsageError("random sweeps need --seed, --m and --n")
        for i, (m, n, seed) in enumerate(channels.random_ensemble(man.seed, man.count, man.m, man.n)):
            jobs.append((i, kind, m, n, man.delta, seed, cfg, reference_gap))
    else:
        m = _single(man.m, "--m") if kind == "identity" else None
        for i in range(man.count):
            jobs.append((i, kind, m, None, man.delta, man.seed, cfg, reference_gap))
    return jobs


def cmd_sweep(man: RunManifest, args) -> int:
    if man.channel is not None:
        raise UsageError("sweep works on generated channels only")
    jobs = sweep_jobs(man, args.reference_gap)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]
    _emit(_csv(SWEEP_HEADER, rows), man.report_out)
    if man.report_out:
        ok = sum(r[-1] == "ok" for r in rows)
        print(f"{ok}/{len(rows)} channels analyzed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--channel", type=Path, help="channel file (CSV rows or JSON)")
    source.add_argument("--generate", choices=["random", "bsc", "identity", "dup-row"])
    common.add_argument("--format", choices=["csv", "json"], help="channel file format (default: by suffix)")
    common.add_argument("--m", type=_int_range, help="input size, or LO..HI for sweeps")
    common.add_argument("--n", type=_int_range, help="output size, or LO..HI for sweeps")
    common.add_argument("--delta", type=float, help="BSC crossover (bsc, dup-row)")
    common.add_argument("--seed", type=int, help="generator seed")
    common.add_argument("--epsilon", type=float, default=1e-8, help="target bound gap in nats")
    common.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    common.add_argument("--init", choices=["uniform", "random", "file"], default="uniform")
    common.add_argument("--init-file", type=Path, help="initial distribution for --init file")
    common.add_argument("--long-horizon", action="store_true", help="ignore epsilon and run max-iters iterations")
    common.add_argument("--trace-out", type=Path)
    common.add_argument("--report-out", type=Path)
    common.add_argument("--verify", action="store_true", help="compare against an oracle capacity")
    common.add_argument("--units", choices=["nats", "bits"], default="nats", help="units of the console summary")

    parser = argparse.ArgumentParser(prog="blahut", description="Arimoto-Blahut channel capacity tools.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute a channel's capacity")
    analyze = sub.add_parser("analyze", parents=[common], help="convergence diagnostics for one channel")
    analyze.add_argument("--reference-gap", type=float, default=1e-12,
                         help="bound gap required of a long-run reference optimum")
    sweep = sub.add_parser("sweep", parents=[common], help="solve and analyze a generated ensemble")
    sweep.add_argument("--count", type=int, default=1)
    sweep.add_argument("--jobs", type=int, default=1, help="worker processes")
    sweep.add_argument("--reference-gap", type=float, default=1e-12)
    return parser


COMMANDS = {"solve": cmd_solve, "analyze": cmd_analyze, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        man = RunManifest.from_args(args)
        return COMMANDS[args.command](man, args)
    except UsageError as exc:
        parser.error(str(exc))
    except (channels.ChannelFormatError, InvalidChannel, InvalidDistribution) as exc:
        print(f"blahut: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (DimensionMismatch, DimensionGuard) as exc:
        print(f"blahut: dimension error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ReferenceUnavailable as exc:
        print(f"blahut: no reference optimum: {exc}", file=sys.stderr)
        return EXIT_REFERENCE


if __name__ == "__main__":
    sys.exit(main())
