"""Command-line surface.

Subcommands: enumerate | build | analyze | compare | verify | metrics | render.
Exit codes: 0 success, 1 usage error, 2 build/input error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import AnalysisError, compare, count_flops, count_params
from .builder import BuildError, build, make_request
from .catalog import CATALOG_NAMES, PRINCIPAL_CONFIG, is_cataloged
from .diagram import trellis_dot
from .layers import Family, TensorShape
from .metrics import (
    DegenerateScoresError,
    ScoreFileError,
    TrialScoreSet,
    compute_eer,
    compute_min_dcf,
)
from .serialize import (
    SpecFormatError,
    TableRow,
    format_table,
    model_from_json,
    model_to_json,
)
from .strides import (
    PathClass,
    TrellisPath,
    UnknownConfigError,
    canonical_name,
    classify_path,
    final_factors,
    iter_all_paths,
    paths_to_endpoint,
    resolve_name,
)
from .trellis import enumerate_endpoints, enumerate_paths, golden_gemini_endpoints
from .verification import (
    catalog_spec,
    default_seed,
    gradcheck_suite,
    verify_catalog_configs,
    verify_spec_numeric,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUILD = 2
EXIT_VERIFY = 3

FRAMES_2S = 200
FRAMES_3S = 300

_FAMILIES = {
    "resnet": Family.MODIFIED_RESNET,
    "original-resnet": Family.ORIGINAL_RESNET,
    "gemini-resnet": Family.GEMINI_RESNET,
    "dfresnet": Family.DF_RESNET,
    "sdresnet": Family.SD_RESNET,
}

_CLASSES = {
    "time-priority": PathClass.TIME_PRIORITY,
    "equal": PathClass.EQUAL,
    "frequency-priority": PathClass.FREQUENCY_PRIORITY,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="stride-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_enum = sub.add_parser("enumerate", help="list trellis endpoints or paths")
    p_enum.add_argument("--endpoint", help="alpha,beta downsampling factors, e.g. 2,16")
    p_enum.add_argument("--class", dest="path_class", choices=sorted(_CLASSES))
    p_enum.add_argument("--paths", action="store_true", help="list paths instead of endpoints")
    p_enum.add_argument("--dot", action="store_true", help="emit the trellis as Graphviz DOT")

    def add_model_args(p, with_path=True):
        p.add_argument("family", choices=sorted(_FAMILIES))
        p.add_argument("depth", type=int)
        if with_path:
            p.add_argument("--path", help="configuration name, e.g. T14c or MOD")
            p.add_argument(
                "--gemini", action="store_true",
                help=f"use the principal golden-gemini configuration ({PRINCIPAL_CONFIG})",
            )
        p.add_argument("--se", type=int, default=None, metavar="R",
                       help="add squeeze-excitation blocks with reduction R")
        p.add_argument("--res2net", type=int, default=None, metavar="S",
                       help="use res2net splitting with scale S")
        p.add_argument("--freq-bins", type=int, default=80)
        p.add_argument("--embedding-dim", type=int, default=256)

    p_build = sub.add_parser("build", help="elaborate a model spec and export JSON")
    add_model_args(p_build)
    p_build.add_argument("-o", "--output", help="output file (default: stdout)")

    p_analyze = sub.add_parser("analyze", help="analytic shapes, params, and FLOPs")
    add_model_args(p_analyze)
    p_analyze.add_argument("--compare", dest="compare_with", metavar="NAME",
                           help="also report deltas against this configuration")
    p_analyze.add_argument("--per-layer", action="store_true")
    p_analyze.add_argument("--json", action="store_true", dest="as_json")
    p_analyze.add_argument("--csv", action="store_true", dest="as_csv")
    p_analyze.add_argument("--catalog", action="store_true",
                           help="analyze every cataloged configuration")

    p_compare = sub.add_parser("compare", help="complexity deltas between two configurations")
    p_compare.add_argument("family", choices=sorted(_FAMILIES))
    p_compare.add_argument("depth", type=int)
    p_compare.add_argument("path_a")
    p_compare.add_argument("path_b")
    p_compare.add_argument("--freq-bins", type=int, default=80)

    p_verify = sub.add_parser("verify", help="numeric-vs-symbolic cross checks")
    p_verify.add_argument("--all-table3-configs", action="store_true",
                          help="check the strategic-search configuration set")
    p_verify.add_argument("--all-catalog-configs", action="store_true",
                          help="check every cataloged configuration")
    p_verify.add_argument("--gradcheck", action="store_true")
    p_verify.add_argument("--gradcheck-trials", type=int, default=100)
    p_verify.add_argument("--spec", help="verify a model-spec JSON file")
    p_verify.add_argument("--frames", type=int, default=FRAMES_3S)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--json", action="store_true", dest="as_json")

    p_metrics = sub.add_parser("metrics", help="EER and minDCF from a score file")
    p_metrics.add_argument("score_file")
    p_metrics.add_argument("--p-target", type=float, default=0.01)
    p_metrics.add_argument("--c-fa", type=float, default=1.0)
    p_metrics.add_argument("--c-miss", type=float, default=1.0)

    p_render = sub.add_parser("render", help="emit trellis diagrams as Graphviz DOT")
    p_render.add_argument("--highlight", help="comma-separated configuration names to overlay")
    p_render.add_argument("-o", "--output", help="output file (default: stdout)")

    return parser


def _parse_endpoint(text: str) -> tuple[int, int]:
    try:
        alpha, beta = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--endpoint expects 'alpha,beta', got {text!r}") from None
    return alpha, beta


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _resolve_request(args, path_override: str | TrellisPath | None = None):
    family = _FAMILIES[args.family]
    path = path_override if path_override is not None else getattr(args, "path", None)
    if getattr(args, "gemini", False):
        if path is not None:
            raise UsageError("--path and --gemini are mutually exclusive")
        path = PRINCIPAL_CONFIG
        if family is Family.MODIFIED_RESNET:
            family = Family.GEMINI_RESNET
    return make_request(
        family,
        args.depth,
        path=path,
        embedding_dim=args.embedding_dim,
        input_freq_bins=args.freq_bins,
        se_reduction=args.se,
        res2net_scale=args.res2net,
    )


def _path_row(path: TrellisPath) -> str:
    name = canonical_name(path)
    alpha, beta = final_factors(path)
    cls = classify_path(path).value
    time = ",".join(str(v) for v in path.time_strides)
    freq = ",".join(str(v) for v in path.freq_strides)
    flag = "catalog" if is_cataloged(path) else "extension"
    return f"{name:<8} {cls:<20} ({alpha},{beta})  time=[{time}] freq=[{freq}]  {flag}"


def _cmd_enumerate(args) -> int:
    if args.dot:
        sys.stdout.write(trellis_dot())
        return EXIT_OK
    wanted = _CLASSES[args.path_class] if args.path_class else None
    if args.endpoint:
        alpha, beta = _parse_endpoint(args.endpoint)
        try:
            family = paths_to_endpoint(alpha, beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for path in family:
            if wanted is not None and classify_path(path) is not wanted:
                continue
            print(_path_row(path))
        return EXIT_OK
    if args.paths:
        for path in iter_all_paths():
            if wanted is not None and classify_path(path) is not wanted:
                continue
            print(_path_row(path))
        return EXIT_OK
    golden = set(golden_gemini_endpoints())
    for endpoint in enumerate_endpoints():
        if wanted is not None and endpoint.path_class is not wanted:
            continue
        n_paths = len(enumerate_paths(endpoint).paths)
        marker = "  golden-gemini" if endpoint in golden else ""
        print(
            f"({endpoint.alpha5},{endpoint.beta5})  class={endpoint.path_class.value:<20} "
            f"paths={n_paths}{marker}"
        )
    return EXIT_OK


def _cmd_build(args) -> int:
    spec = build(_resolve_request(args))
    _write(model_to_json(spec) + "\n", args.output)
    return EXIT_OK


def _describe(spec, report_2s, report_3s):
    alpha, beta = final_factors(spec.path)
    lines = [
        f"config      {spec.path.label} ({classify_path(spec.path).value}, endpoint ({alpha},{beta}))",
        f"strides     time {list(spec.path.time_strides)} / freq {list(spec.path.freq_strides)}",
        f"model       {spec.display_name}, C={spec.base_channels}, "
        f"blocks {[s.num_blocks for s in spec.stages]}, embedding {spec.embedding_dim}",
        f"params      {report_2s.params_total} ({report_2s.params_millions:.2f} M)",
        f"flops 2s    {report_2s.flops_total} ({report_2s.flops_giga:.2f} G)",
        f"flops 3s    {report_3s.flops_total} ({report_3s.flops_giga:.2f} G)",
    ]
    for note in spec.notes:
        lines.append(f"note        {note}")
    return lines


def _analyze_one(args, path=None):
    spec = build(_resolve_request(args, path_override=path))
    shape_2s = TensorShape(1, args.freq_bins, FRAMES_2S)
    shape_3s = TensorShape(1, args.freq_bins, FRAMES_3S)
    return spec, count_flops(spec, shape_2s), count_flops(spec, shape_3s)


def _table_row(spec, report_2s, report_3s) -> TableRow:
    alpha, beta = final_factors(spec.path)
    return TableRow(
        index=spec.path.label or canonical_name(spec.path),
        path_class=classify_path(spec.path).value,
        alpha5=alpha,
        beta5=beta,
        time_strides=spec.path.time_strides,
        freq_strides=spec.path.freq_strides,
        params_millions=round(report_2s.params_millions, 2),
        flops_2s_giga=round(report_2s.flops_giga, 2),
        flops_3s_giga=round(report_3s.flops_giga, 2),
        cataloged=is_cataloged(spec.path),
    )


def _cmd_analyze(args) -> int:
    if args.catalog:
        if args.family != "resnet":
            raise UsageError("--catalog analyzes the resnet template; use 'analyze resnet DEPTH --catalog'")
        rows = []
        for name in CATALOG_NAMES:
            spec = catalog_spec(name, args.depth)
            row_2s = count_flops(spec, TensorShape(1, args.freq_bins, FRAMES_2S))
            row_3s = count_flops(spec, TensorShape(1, args.freq_bins, FRAMES_3S))
            rows.append(_table_row(spec, row_2s, row_3s))
        sys.stdout.write(format_table(rows))
        return EXIT_OK

    spec, report_2s, report_3s = _analyze_one(args)
    if args.as_csv:
        sys.stdout.write(format_table([_table_row(spec, report_2s, report_3s)]))
        return EXIT_OK
    if args.as_json:
        doc = {
            "index": spec.path.label,
            "family": spec.family.value,
            "depth": spec.depth_label,
            "params_total": report_2s.params_total,
            "flops": {"2s": report_2s.flops_total, "3s": report_3s.flops_total},
        }
        if args.per_layer:
            doc["params_by_layer"] = list(report_2s.params_by_layer)
            doc["flops_by_layer_3s"] = list(report_3s.flops_by_layer)
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    for line in _describe(spec, report_2s, report_3s):
        print(line)
    if args.per_layer:
        print("per-layer (params / 3s flops):")
        flops_map = dict(report_3s.flops_by_layer)
        for name, params in report_2s.params_by_layer:
            print(f"  {name:<32} {params:>12}  {flops_map.get(name, 0):>14}")
    if args.compare_with:
        other_spec, other_2s, other_3s = _analyze_one(args, path=args.compare_with)
        delta_2s = compare(report_2s, other_2s)
        delta_3s = compare(report_3s, other_3s)
        print(f"compare     {spec.path.label} -> {other_spec.path.label}")
        print(f"params      {delta_2s.params_pct:+.1f}%")
        print(f"flops 2s    {delta_2s.flops_pct:+.1f}%")
        print(f"flops 3s    {delta_3s.flops_pct:+.1f}%")
    return EXIT_OK


def _cmd_compare(args) -> int:
    base = make_request(_FAMILIES[args.family], args.depth, path=args.path_a,
                        input_freq_bins=args.freq_bins)
    other = make_request(_FAMILIES[args.family], args.depth, path=args.path_b,
                         input_freq_bins=args.freq_bins)
    spec_a, spec_b = build(base), build(other)
    for frames, tag in ((FRAMES_2S, "2s"), (FRAMES_3S, "3s")):
        shape = TensorShape(1, args.freq_bins, frames)
        delta = compare(count_flops(spec_a, shape), count_flops(spec_b, shape))
        if tag == "2s":
            print(f"params      {delta.params_pct:+.2f}%")
        print(f"flops {tag}    {delta.flops_pct:+.2f}%")
    return EXIT_OK


def _cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    checks = []
    grad_reports = []
    ran_anything = False

    if args.spec:
        ran_anything = True
        try:
            spec = model_from_json(Path(args.spec).read_text())
        except (OSError, SpecFormatError, ValueError) as exc:
            print(f"error: rejected spec {args.spec}: {exc}", file=sys.stderr)
            return EXIT_BUILD
        checks.append(verify_spec_numeric(spec, time=args.frames, seed=seed))

    table3 = CATALOG_NAMES[:18]
    if args.all_table3_configs:
        ran_anything = True
        checks.extend(verify_catalog_configs(table3, time=args.frames, seed=seed))
    if args.all_catalog_configs:
        ran_anything = True
        checks.extend(verify_catalog_configs(CATALOG_NAMES, time=args.frames, seed=seed))
    if args.gradcheck:
        ran_anything = True
        grad_reports = gradcheck_suite(trials=args.gradcheck_trials, seed=seed)
    if not ran_anything:
        checks.extend(verify_catalog_configs(("MOD", "T14c"), time=args.frames, seed=seed))
        grad_reports = gradcheck_suite(trials=10, seed=seed)

    failures = [c for c in checks if not c.ok]
    grad_failures = [r for r in grad_reports if not r.passed]
    if args.as_json:
        doc = {
            "seed": seed,
            "checks": [
                {
                    "name": c.name,
                    "ok": c.ok,
                    "layers": c.layers_checked,
                    "multiplies": c.multiplies,
                    "analytic_flops": c.analytic_flops,
                    "detail": c.detail,
                }
                for c in checks
            ],
            "gradcheck": {
                "trials": len(grad_reports),
                "max_rel_error": max((r.max_rel_error for r in grad_reports), default=0.0),
                "failures": len(grad_failures),
            },
            "failures": len(failures) + len(grad_failures),
        }
        print(json.dumps(doc, indent=2))
    else:
        for c in checks:
            status = "ok  " if c.ok else "FAIL"
            print(f"{status} {c.name:<8} layers={c.layers_checked} "
                  f"multiplies={c.multiplies} analytic={c.analytic_flops} {c.detail}")
        if grad_reports:
            worst = max(r.max_rel_error for r in grad_reports)
            status = "ok  " if not grad_failures else "FAIL"
            print(f"{status} gradcheck trials={len(grad_reports)} max_rel_err={worst:.3e}")
    if failures or grad_failures:
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_metrics(args) -> int:
    try:
        trials = TrialScoreSet.from_file(args.score_file)
        eer, eer_thr = compute_eer(trials)
        dcf, dcf_thr = compute_min_dcf(trials, args.p_target, args.c_fa, args.c_miss)
    except FileNotFoundError:
        print(f"error: no such file: {args.score_file}", file=sys.stderr)
        return EXIT_BUILD
    except (ScoreFileError, DegenerateScoresError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUILD
    n_target = len(trials.target_scores)
    n_nontarget = len(trials.nontarget_scores)
    print(f"trials     {len(trials.trials)} ({n_target} target / {n_nontarget} nontarget)")
    print(f"EER        {100.0 * eer:.3f}%  threshold {eer_thr:.6f}")
    print(
        f"minDCF     {dcf:.4f}  threshold {dcf_thr:.6f}  "
        f"(p_target={args.p_target:g}, c_fa={args.c_fa:g}, c_miss={args.c_miss:g})"
    )
    return EXIT_OK


def _cmd_render(args) -> int:
    paths = ()
    if args.highlight:
        paths = tuple(resolve_name(name) for name in args.highlight.split(","))
    _write(trellis_dot(paths=paths), args.output)
    return EXIT_OK


_COMMANDS = {
    "enumerate": _cmd_enumerate,
    "build": _cmd_build,
    "analyze": _cmd_analyze,
    "compare": _cmd_compare,
    "verify": _cmd_verify,
    "metrics": _cmd_metrics,
    "render": _cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUILD
    except (BuildError, AnalysisError, SpecFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUILD


if __name__ == "__main__":
    sys.exit(main())
