"""Command-line surface: predict, fit, decompose, stats, hist, compare,
extrapolate, synth.

Exit codes: 0 success, 1 usage error, 2 data/model error. All output is
deterministic for fixed inputs, flags, and seeds. Table output rounds to 4
significant digits; json and delimited output carry full precision.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bundled
from .errors import InferwattError
from .estimator import (
    AnalyticSource,
    FittedSource,
    WorkloadSpec,
    compare_models,
    estimate_interaction,
    fleet_extrapolate,
    led_equivalent_minutes,
)
from .phase_model import (
    CoefficientSet,
    fit_decode_energy,
    fit_decode_latency,
    fit_prefill_energy,
    fit_prefill_latency,
    format_coefficients,
    load_coefficients,
)
from .roofline import load_profile
from .traces import (
    FORMAT_DELIMITED,
    FORMAT_LINE_JSON,
    PHASE_DECODE,
    PHASE_PREFILL,
    RunKind,
    aggregate,
    decompose,
    drop_warmup,
    histogram,
    parse_records,
    synthesize_trace,
    to_fit_samples,
    write_records,
)
from .transformer_costs import load_model

FORMATS = ("table", "json", "delimited")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt_cell(value, full_precision: bool) -> str:
    if isinstance(value, float):
        return repr(value) if full_precision else f"{value:.4g}"
    return str(value)


def _emit_rows(rows, fmt: str, out) -> None:
    """Render a list of uniform mappings as table, json, or delimited text."""
    if fmt == "json":
        print(json.dumps(rows if len(rows) != 1 else rows[0], indent=2), file=out)
        return
    if not rows:
        return
    keys = list(rows[0])
    if fmt == "delimited":
        print(",".join(keys), file=out)
        for row in rows:
            print(",".join(_fmt_cell(row[k], True) for k in keys), file=out)
        return
    cells = [[_fmt_cell(row[k], False) for k in keys] for row in rows]
    widths = [max(len(k), *(len(r[i]) for r in cells)) for i, k in enumerate(keys)]
    numeric = [all(isinstance(row[k], (int, float)) for row in rows) for k in keys]

    def align(text, i):
        return text.rjust(widths[i]) if numeric[i] else text.ljust(widths[i])

    print("  ".join(align(k, i) for i, k in enumerate(keys)).rstrip(), file=out)
    for r in cells:
        print("  ".join(align(c, i) for i, c in enumerate(r)).rstrip(), file=out)


def _read_trace(args):
    path = Path(args.trace)
    fmt = args.trace_format
    if fmt is None:
        fmt = FORMAT_LINE_JSON if path.suffix in (".jsonl", ".ndjson") else FORMAT_DELIMITED
    rename = None
    if getattr(args, "rename", None):
        rename = dict(pair.split("=", 1) for pair in args.rename.split(","))
    records, issues = parse_records(path, fmt, rename=rename)
    for issue in issues:
        print(f"warning: line {issue.line}: {issue.message}", file=sys.stderr)
    if getattr(args, "drop_first", 0):
        records = drop_warmup(records, args.drop_first)
    return records


def _load_coeffs(args) -> CoefficientSet:
    if getattr(args, "coeffs", None):
        return load_coefficients(args.coeffs)
    return bundled.reference_coefficients()


def _load_hw(args):
    if getattr(args, "hw", None):
        return load_profile(args.hw)
    return bundled.reference_profile()


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise _UsageError(f"expected a comma-separated integer list, got {text!r}") from None


# --- subcommand handlers --------------------------------------------------


def _cmd_predict(args, out) -> int:
    if args.model:
        source = AnalyticSource(load_model(args.model), _load_hw(args))
    else:
        source = FittedSource(_load_coeffs(args), label=f"fitted-coeffs ({args.coeffs or 'bundled'})")
    breakdown = estimate_interaction(source, args.s, args.g)
    for note in breakdown.warnings:
        print(f"warning: {note}", file=sys.stderr)
    _emit_rows(
        [
            {
                "source": breakdown.provenance,
                "prefill_wh": breakdown.prefill_wh,
                "decode_wh": breakdown.decode_wh,
                "total_wh": breakdown.total_wh,
                "led_minutes": led_equivalent_minutes(breakdown.total_wh, args.led_watts),
            }
        ],
        args.format,
        out,
    )
    return 0


def _cmd_fit(args, out) -> int:
    records = _read_trace(args)
    decomps, missing = decompose(records)
    for m in missing:
        print(f"warning: prompt {m.prompt_id!r} has no {m.missing.value} runs", file=sys.stderr)
    prefill_records = [r for r in records if r.run_kind is RunKind.PREFILL_ONLY]
    samples = to_fit_samples(prefill_records, component=args.component)
    samples += [s for s in to_fit_samples(decomps, component=args.component) if s.g >= 1]

    families = (
        ("prefill_latency", fit_prefill_latency),
        ("decode_latency", fit_decode_latency),
        ("prefill_energy", fit_prefill_energy),
        ("decode_energy", fit_decode_energy),
    )
    fitted = {}
    rows = []
    for name, fit_fn in families:
        try:
            coeffs, fit = fit_fn(samples)
        except InferwattError as exc:
            print(f"warning: {name}: {exc}", file=sys.stderr)
            continue
        fitted[name] = coeffs
        rows.append(
            {
                "family": name,
                "r_squared": fit.r_squared,
                "residual_norm": fit.residual_norm,
                "condition": fit.condition_estimate,
                "physical": coeffs.is_physical,
            }
        )
    if not fitted:
        raise InferwattError("no coefficient family could be fitted from this trace")
    cs = CoefficientSet(**fitted)
    text = format_coefficients(
        cs, header=f"fitted from {args.trace} (component: {args.component})"
    )
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    _emit_rows(rows, args.format, sys.stderr if not args.out else out)
    return 0


def _cmd_decompose(args, out) -> int:
    records = _read_trace(args)
    decomps, missing = decompose(records)
    for m in missing:
        print(f"warning: prompt {m.prompt_id!r} has no {m.missing.value} runs", file=sys.stderr)
    rows = [
        {
            "prompt_id": d.prompt_id,
            "input_tokens": d.input_tokens,
            "output_tokens": d.output_tokens,
            "prefill_gpu_wh": d.prefill_mean_wh.gpu,
            "decode_gpu_wh": d.decode_wh.gpu,
            "decode_cpu_wh": d.decode_wh.cpu,
            "decode_ram_wh": d.decode_wh.ram,
            "decode_latency_s": d.decode_latency_s,
            "flags": ";".join(d.flags),
        }
        for d in decomps
    ]
    _emit_rows(rows, args.format, out)
    return 0


def _cmd_stats(args, out) -> int:
    records = _read_trace(args)
    items = records
    if args.phase == PHASE_DECODE:
        items, missing = decompose(records)
        for m in missing:
            print(f"warning: prompt {m.prompt_id!r} has no {m.missing.value} runs", file=sys.stderr)
    stats = aggregate(items, phase=args.phase)
    rows = [
        {
            "component": comp,
            "mean_wh": cs.mean,
            "std_wh": cs.std,
            "count": cs.count,
            "min_wh": cs.min,
            "max_wh": cs.max,
        }
        for comp, cs in stats.components.items()
    ]
    rows.append(
        {
            "component": "total",
            "mean_wh": stats.total_mean,
            "std_wh": float("nan"),
            "count": rows[0]["count"],
            "min_wh": float("nan"),
            "max_wh": float("nan"),
        }
    )
    _emit_rows(rows, args.format, out)
    return 0


def _cmd_hist(args, out) -> int:
    records = _read_trace(args)
    items = records
    if args.phase == PHASE_DECODE:
        items, _ = decompose(records)
    if args.phase == PHASE_PREFILL and items and isinstance(items[0], type(records[0])):
        values = [r.energy.get(args.component) for r in records if r.run_kind is RunKind.PREFILL_ONLY]
    elif args.phase == PHASE_DECODE:
        values = [d.decode_wh.get(args.component) for d in items]
    else:
        values = [r.energy.get(args.component) for r in records if r.run_kind is RunKind.FULL]
    bins = [float(v) for v in args.edges.split(",")] if args.edges else args.bins
    result = histogram(values, bins)
    skew = "right-skewed (mean > median)" if result.right_skewed else "not right-skewed"
    print(
        f"note: mean={result.mean:.6g} Wh, median={result.median:.6g} Wh: {skew}",
        file=sys.stderr,
    )
    rows = [
        {"bin_left_edge": result.edges[i], "count": result.counts[i]}
        for i in range(len(result.counts))
    ]
    _emit_rows(rows, args.format, out)
    return 0


def _cmd_compare(args, out) -> int:
    specs = [load_model(path) for path in args.models]
    if args.family:
        if args.family != "qwen25":
            raise _UsageError(f"unknown bundled family {args.family!r}")
        specs.extend(bundled.qwen_family())
    if not specs:
        raise _UsageError("give model spec files and/or --family")
    hw = _load_hw(args)
    workload = WorkloadSpec.single(args.s, args.g)
    contour_g = tuple(_int_list(args.contour_g)) if args.contour_g else None
    comparison = (
        compare_models(specs, hw, workload, contour_g)
        if contour_g
        else compare_models(specs, hw, workload)
    )
    rows = [
        {
            "name": r.name,
            "n_params": r.n_params,
            "mean_total_wh": r.mean_total_wh,
            "wh_per_token": r.wh_per_token,
        }
        for r in comparison.rows
    ]
    _emit_rows(rows, args.format, out)
    if args.grid_out:
        grid_rows = [
            {"name": p.name, "n_params": p.n_params, "g": p.g, "decode_wh": p.decode_wh}
            for p in comparison.grid
        ]
        with open(args.grid_out, "w", encoding="utf-8") as fh:
            _emit_rows(grid_rows, "delimited", fh)
    return 0


def _cmd_extrapolate(args, out) -> int:
    kwh_day, mwh_year = fleet_extrapolate(args.wh, args.per_day)
    _emit_rows(
        [
            {
                "wh_per_interaction": args.wh,
                "interactions_per_day": args.per_day,
                "kwh_per_day": kwh_day,
                "mwh_per_year": mwh_year,
                "led_minutes_per_interaction": led_equivalent_minutes(args.wh, args.led_watts),
            }
        ],
        args.format,
        out,
    )
    return 0


def _cmd_synth(args, out) -> int:
    coeffs = _load_coeffs(args)
    plan = [(s, g) for s in _int_list(args.s_values) for g in _int_list(args.g_values)]
    records = synthesize_trace(
        plan, coeffs, noise=args.noise, seed=args.seed, runs=args.runs
    )
    fmt = args.trace_format or FORMAT_DELIMITED
    text = write_records(records, fmt)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return 0


# --- parser ---------------------------------------------------------------


def _add_common(sub, trace=False, fmt=True):
    if fmt:
        sub.add_argument("--format", choices=FORMATS, default="table")
    if trace:
        sub.add_argument("--trace", required=True, help="trace file path")
        sub.add_argument(
            "--trace-format",
            choices=(FORMAT_DELIMITED, FORMAT_LINE_JSON),
            default=None,
            help="default: by file extension (.jsonl/.ndjson is line-json)",
        )
        sub.add_argument("--rename", default=None, help="external=canonical[,..] column mapping")
        sub.add_argument("--drop-first", type=int, default=0, help="drop first k runs per prompt+kind")


def build_parser() -> _Parser:
    parser = _Parser(prog="inferwatt", description=__doc__)
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("predict", help="energy breakdown of one interaction")
    p.add_argument("-s", type=int, required=True, help="input (prompt) tokens")
    p.add_argument("-g", type=int, required=True, help="generated tokens")
    p.add_argument("--coeffs", help="coefficient file (default: bundled reference set)")
    p.add_argument("--model", help="model spec file: use the analytic roofline source")
    p.add_argument("--hw", help="hardware profile file (default: bundled H100 profile)")
    p.add_argument("--led-watts", type=float, default=5.0)
    _add_common(p)
    p.set_defaults(func=_cmd_predict)

    p = subs.add_parser("fit", help="fit polynomial coefficients from a trace")
    _add_common(p, trace=True)
    p.add_argument("--component", choices=("gpu", "cpu", "ram", "total"), default="total")
    p.add_argument("--out", help="write coefficient file here instead of stdout")
    p.set_defaults(func=_cmd_fit)

    p = subs.add_parser("decompose", help="per-prompt prefill/decode split")
    _add_common(p, trace=True)
    p.set_defaults(func=_cmd_decompose)

    p = subs.add_parser("stats", help="aggregate energy statistics")
    _add_common(p, trace=True)
    p.add_argument("--phase", choices=("prefill", "full", "decode"), default="full")
    p.set_defaults(func=_cmd_stats)

    p = subs.add_parser("hist", help="energy histogram (bin_left_edge, count)")
    _add_common(p, trace=True)
    p.add_argument("--component", choices=("gpu", "cpu", "ram", "total"), default="gpu")
    p.add_argument("--phase", choices=("prefill", "full", "decode"), default="full")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--edges", default=None, help="explicit comma-separated bin edges")
    p.set_defaults(func=_cmd_hist)

    p = subs.add_parser("compare", help="workload energy across model sizes")
    p.add_argument("models", nargs="*", help="model spec files")
    p.add_argument("--family", help="bundled family name (qwen25)")
    p.add_argument("--hw", help="hardware profile file (default: bundled H100 profile)")
    p.add_argument("-s", type=int, required=True)
    p.add_argument("-g", type=int, required=True)
    p.add_argument("--contour-g", default=None, help="g values for the contour grid")
    p.add_argument("--grid-out", default=None, help="write contour grid (delimited) here")
    _add_common(p)
    p.set_defaults(func=_cmd_compare)

    p = subs.add_parser("extrapolate", help="scale one interaction to fleet level")
    p.add_argument("--wh", type=float, required=True, help="Wh per interaction")
    p.add_argument("--per-day", type=float, required=True, help="interactions per day")
    p.add_argument("--led-watts", type=float, default=5.0)
    _add_common(p)
    p.set_defaults(func=_cmd_extrapolate)

    p = subs.add_parser("synth", help="generate a synthetic trace from coefficients")
    p.add_argument("--coeffs", help="coefficient file (default: bundled reference set)")
    p.add_argument("--s-values", required=True, help="comma-separated input lengths")
    p.add_argument("--g-values", required=True, help="comma-separated output lengths (0 = prefill-only)")
    p.add_argument("--noise", type=float, default=0.0, help="relative noise std")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1, help="runs per kind per grid point")
    p.add_argument("--out", help="write trace here instead of stdout")
    p.add_argument(
        "--trace-format", choices=(FORMAT_DELIMITED, FORMAT_LINE_JSON), default=None
    )
    p.set_defaults(func=_cmd_synth)

    return parser


def cli_dispatch(argv, out=None) -> int:
    """Run one CLI invocation; returns the process exit code."""
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args, out)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InferwattError, OSError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
