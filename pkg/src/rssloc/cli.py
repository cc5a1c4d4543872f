"""Command-line front end: dataset generation, pipeline runs, stand-alone
evaluation of externally produced coordinates, and static map renders.

Exit codes: 0 success, 1 usage error, 2 data error, 3 completed with
per-scenario failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset_io, pipeline, render
from .dataset_io import DatasetConfig
from .localize import ESTIMATORS
from .metrics import aggregate, evaluate_scenario
from .pipeline import PipelineConfig, PipelineConfigError
from .reconstruct import RECONSTRUCTORS

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _registry_epilog() -> str:
    return ("registered reconstructors: oracle, "
            + ", ".join(sorted(RECONSTRUCTORS))
            + "\nregistered estimators: " + ", ".join(sorted(ESTIMATORS)))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rssloc",
                     description="Multi-transmitter RSS localization toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="generate a dataset from a JSON config")
    gen.add_argument("--config", required=True, help="JSON config file")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--seed", type=int, default=None, help="override config seed")

    pipe = sub.add_parser("pipeline", help="run the localization pipeline",
                          epilog=_registry_epilog(),
                          formatter_class=argparse.RawDescriptionHelpFormatter)
    pipe.add_argument("--dataset", required=True)
    pipe.add_argument("--out", required=True)
    pipe.add_argument("--reconstructor", default="oracle")
    pipe.add_argument("--estimator", default="com")
    pipe.add_argument("--r", type=float, default=2.0)
    pipe.add_argument("--gamma", type=int, default=127)
    pipe.add_argument("--g", type=float, default=20.0)
    pipe.add_argument("--connectivity", type=int, default=8, choices=(4, 8))
    pipe.add_argument("--intervals", default=None,
                      help="comma-separated subset, e.g. 1,4,10")
    pipe.add_argument("--noise-sigma", type=float, default=0.0)
    pipe.add_argument("--noise-seed", type=int, default=0)
    pipe.add_argument("--delta-db", type=float, default=9.0)
    pipe.add_argument("--area-factor", type=float, default=1.6)
    pipe.add_argument("--local-map-dir", default=None,
                      help="drop-in directory of externally produced local maps")
    pipe.add_argument("--jobs", type=int, default=1)

    ev = sub.add_parser("evaluate",
                        help="evaluate externally produced prediction CSVs")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--predictions", required=True,
                    help="directory of <scenario>_<interval>.csv files")
    ev.add_argument("--out", default=None, help="report JSON path")
    ev.add_argument("--g", type=float, default=20.0)

    ren = sub.add_parser("render", help="render a map with truth/prediction marks")
    ren.add_argument("--map", required=True, help="bitmap PGM to render")
    ren.add_argument("--layout", required=True, help="building layout PGM")
    ren.add_argument("--scenario", default=None, help="scenario JSON for truths")
    ren.add_argument("--pred", default=None, help="predictions CSV")
    ren.add_argument("--out", required=True, help="output PPM path")
    return parser


def cmd_generate(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"config file not found: {config_path}", file=sys.stderr)
        return EXIT_DATA
    try:
        doc = json.loads(config_path.read_text())
        if args.seed is not None:
            doc["seed"] = args.seed
        config = DatasetConfig.from_dict(doc)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        index = dataset_io.generate_dataset(config, args.out)
    except Exception as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {len(index['entries'])} scenarios to {args.out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    intervals = None
    if args.intervals:
        intervals = tuple(part.strip() for part in args.intervals.split(","))
    try:
        config = PipelineConfig(
            reconstructor=args.reconstructor, estimator=args.estimator,
            r=args.r, gamma=args.gamma, g=args.g,
            connectivity=args.connectivity, intervals=intervals,
            noise_sigma=args.noise_sigma, noise_seed=args.noise_seed,
            delta_db=args.delta_db, area_factor=args.area_factor,
            local_map_dir=args.local_map_dir, jobs=args.jobs)
    except PipelineConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        report = pipeline.run_pipeline(args.dataset, config, out_dir=args.out)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    print(pipeline.format_report_table(report))
    if report["errors"]:
        for err in report["errors"]:
            print(f"failed: {err['id']} interval {err['interval']}: {err['error']}",
                  file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        index = dataset_io.read_dataset_index(args.dataset)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    pred_dir = Path(args.predictions)
    if not pred_dir.is_dir():
        print(f"predictions directory not found: {pred_dir}", file=sys.stderr)
        return EXIT_DATA
    rows = []
    evals = []
    for entry in sorted(index["entries"], key=lambda e: e["id"]):
        scenario = dataset_io.load_scenario(args.dataset, entry)
        truths = scenario.true_points()
        for csv_path in sorted(pred_dir.glob(f"{entry['id']}_*.csv")):
            interval = csv_path.stem[len(entry["id"]) + 1:]
            try:
                _, points, _ = dataset_io.predictions_from_csv(csv_path.read_text())
            except ValueError as exc:
                print(f"{csv_path}: {exc}", file=sys.stderr)
                return EXIT_DATA
            ev = evaluate_scenario(points, truths, args.g)
            evals.append(ev)
            rows.append({"id": entry["id"], "interval": interval, **ev.as_dict()})
    if not rows:
        print("no prediction files matched the dataset", file=sys.stderr)
        return EXIT_DATA
    agg = aggregate(evals)
    report = {"results": rows,
              "aggregate": {"mle": agg.mle, "ospa": agg.ospa, "far": agg.far,
                            "mdr": agg.mdr, "far_macro": agg.far_macro,
                            "mdr_macro": agg.mdr_macro,
                            "total_true": agg.total_true,
                            "total_pred": agg.total_pred}}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        bitmap = dataset_io.read_pgm(args.map)
        layout = dataset_io.read_pgm(args.layout)
        truths = []
        if args.scenario:
            doc = json.loads(Path(args.scenario).read_text())
            truths = [(s["x"], s["y"]) for s in doc["sources"]]
        preds = []
        if args.pred:
            _, preds, _ = dataset_io.predictions_from_csv(Path(args.pred).read_text())
        rgb = render.render_map(bitmap, layout, truths, preds)
    except (OSError, ValueError, KeyError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    Path(args.out).write_bytes(render.encode_ppm(rgb))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"generate": cmd_generate, "pipeline": cmd_pipeline,
               "evaluate": cmd_evaluate, "render": cmd_render}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
