"""Command-line entry points.

Subcommands: eval (run methods over a manifest), metrics (score one image
pair), aggregate (medians plus average ranks from a results CSV), synth
(render a scene script to frames + manifest).  Exit codes: 0 success,
1 usage error, 2 data error.  SBI_DATA names the default dataset root.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench, synth
from .metrics import MetricConfig, MetricReport, compute_all
from .seqio import (ImageFormatError, ManifestError, default_manifest_path,
                    load_image, load_manifest, save_image)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbibench",
                     description="Background initialization benchmarking toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_eval = sub.add_parser("eval", help="run methods over a dataset manifest")
    p_eval.add_argument("--manifest", help="dataset manifest (default: bundled SBI "
                                           "manifest rooted at $SBI_DATA)")
    p_eval.add_argument("--methods", required=True,
                        help="comma list, e.g. median,ws2006:eps_stable=8,min_len=12")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--format", default="csv", choices=("csv", "markdown"))
    p_eval.add_argument("--tau", type=int, default=MetricConfig.tau)
    p_eval.set_defaults(handler=_cmd_eval)

    p_metrics = sub.add_parser("metrics", help="score one (reference, estimate) pair")
    p_metrics.add_argument("--gt", required=True)
    p_metrics.add_argument("--cb", required=True)
    p_metrics.add_argument("--tau", type=int, default=MetricConfig.tau)
    p_metrics.set_defaults(handler=_cmd_metrics)

    p_agg = sub.add_parser("aggregate", help="medians and average ranks from a results CSV")
    p_agg.add_argument("--table", required=True, help="CSV produced by eval")
    p_agg.add_argument("--format", default="markdown", choices=("csv", "markdown"))
    p_agg.set_defaults(handler=_cmd_aggregate)

    p_synth = sub.add_parser("synth", help="render a synthetic scene script")
    p_synth.add_argument("--script", required=True)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(handler=_cmd_synth)
    return parser


def report_line(report: MetricReport) -> str:
    cqm = "n/a" if report.cqm is None else f"{report.cqm:.4f}"
    return (f"AGE={report.age:.4f} EPs={report.eps} pEPs={report.p_eps:.6f} "
            f"CEPs={report.ceps} pCEPs={report.p_ceps:.6f} "
            f"MSSSIM={report.ms_ssim:.4f} PSNR={report.psnr:.4f} CQM={cqm}")


def _cmd_eval(args) -> int:
    try:
        methods = [bench.build_method(name, overrides)
                   for name, overrides in bench.parse_method_list(args.methods)]
        cfg = MetricConfig(tau=args.tau)
    except ValueError as exc:
        return _usage_error(str(exc))
    if args.manifest:
        specs = load_manifest(args.manifest)
    else:
        root = os.environ.get("SBI_DATA")
        if not root:
            return _usage_error("no --manifest given and SBI_DATA is not set")
        specs = load_manifest(default_manifest_path(), root=root)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    backgrounds = {}
    matrix = bench.run(specs, methods, cfg, backgrounds=backgrounds)
    for name, message in matrix.errors:
        print(f"warning: sequence {name!r} skipped: {message}", file=sys.stderr)
    if not matrix.rows:
        print("error: no sequence could be evaluated", file=sys.stderr)
        return EXIT_DATA
    for (seq_name, label), image in backgrounds.items():
        save_image(image, out_dir / f"{seq_name}__{label}.png", format="png")
    report_path = out_dir / ("report.csv" if args.format == "csv" else "report.md")
    report_path.write_text(bench.render(matrix, args.format), encoding="utf-8")
    print(report_path)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    try:
        cfg = MetricConfig(tau=args.tau)
    except ValueError as exc:
        return _usage_error(str(exc))
    gt = load_image(args.gt)
    cb = load_image(args.cb)
    print(report_line(compute_all(gt, cb, cfg)))
    return EXIT_OK


def _cmd_aggregate(args) -> int:
    text = Path(args.table).read_text(encoding="utf-8")
    matrix = bench.parse_matrix_csv(text)
    aggregates = bench.median_by_sequence(matrix)
    if len(aggregates) >= 2:
        aggregates = bench.rank_sequences(aggregates)
    sys.stdout.write(bench.render(aggregates, args.format))
    return EXIT_OK


def _cmd_synth(args) -> int:
    script_path = Path(args.script)
    script = synth.load_scene_script(script_path)
    name = script_path.stem
    seq, background = synth.generate(script, name=name)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in range(seq.num_frames):
        save_image(seq.frames[t], out_dir / ("in%06d.png" % t), format="png")
    save_image(background, out_dir / "gt.png", format="png")
    manifest = out_dir / "manifest.txt"
    manifest.write_text(
        "[sequence]\n"
        f"name = {name}\n"
        "dir = .\n"
        "pattern = in%06d.png\n"
        "first = 0\n"
        f"last = {seq.num_frames - 1}\n"
        "gt = gt.png\n", encoding="utf-8")
    print(manifest)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ImageFormatError, ManifestError, FileNotFoundError, NotADirectoryError,
            PermissionError, IsADirectoryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
