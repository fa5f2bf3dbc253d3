"""Command-line front end.

Subcommands cover the whole workflow: simulate scenarios, train and run
the pixel classifier, process scenarios through the estimation pipeline,
re-evaluate stored runs, and render a cross-run report (CSV + SVG).

Exit codes: 0 success, 1 usage problem, 2 broken or missing data,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from . import nn
from .config import PipelineConfig, load_config
from .errors import DataError, RoadCourseError, UsageError
from .fusion import MODE_DIGITAL_ONLY, MODE_FUSED
from .labeling import read_labels, write_labels
from .pgm import read_pgm
from .pipeline import run_pipeline
from .sim.io import ScenarioDir, simulate_to_dir
from .sim.scenario import PRESET_ORDER, preset_config


def _cmd_simulate(args) -> int:
    config = preset_config(args.preset, seed=args.seed, n_frames=args.frames)
    simulate_to_dir(config, args.out)
    print(f"wrote preset {args.preset} seed {args.seed} "
          f"({args.frames} frames) to {args.out}")
    return 0


def _load_training_dir(root):
    """Pairs <name>_image.pgm / <name>_labels.pgm under one directory."""
    images = sorted(glob.glob(os.path.join(root, "*_image.pgm")))
    if not images:
        raise DataError(f"{root}: no *_image.pgm files")
    dataset = []
    for img_path in images:
        lbl_path = img_path[: -len("_image.pgm")] + "_labels.pgm"
        if not os.path.exists(lbl_path):
            raise DataError(f"{lbl_path}: missing label map for {img_path}")
        image = read_pgm(img_path).astype(np.float64)
        labels = read_labels(lbl_path)
        dataset.append((image, labels.labels))
    return dataset


def _cmd_train(args) -> int:
    dataset = _load_training_dir(args.data)
    topology = nn.parse_topology(args.topology, n_p=args.pooling)
    config = nn.TrainConfig(
        learn_rate=args.learn_rate, epochs=args.epochs, seed=args.seed
    )
    weights, trace = nn.train(dataset, topology, config)
    if args.tune_biases:
        weights = nn.tune_biases_mcc(weights, dataset)
    nn.save_weights(args.out, weights)
    print(f"trained {args.topology} for {args.epochs} epochs, "
          f"final loss {trace[-1]:.4f}, weights in {args.out}")
    return 0


def _cmd_infer(args) -> int:
    weights = nn.load_weights(args.weights)
    image = read_pgm(args.image).astype(np.float64)
    labels = nn.forward_dense(image, weights)
    write_labels(args.out, labels)
    print(f"labeled {args.image} ({labels.shape[0]}x{labels.shape[1]} "
          f"output) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    result = run_pipeline(
        ScenarioDir(args.scenario), config,
        use_optical=not args.no_optical,
        out_dir=args.out,
    )
    report = result.report
    mode = MODE_DIGITAL_ONLY if args.no_optical else MODE_FUSED
    if report is not None:
        print(f"{mode}: mean short-range error "
              f"{report.mean_short_range_error:.3f} m over "
              f"{report.n_frames} frames, optical availability "
              f"{report.optical_availability:.3f}")
    else:
        print(f"{mode}: processed {len(result.frames)} frames (no truth)")
    return 0


def _read_report_csv(path):
    values = {}
    try:
        with open(path, "r") as fh:
            header = fh.readline().strip()
            if header != "metric,value":
                raise DataError(f"{path}: not a report file")
            for line in fh:
                key, _, value = line.strip().partition(",")
                values[key] = value
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    for key in ("mode", "mean_short_range_error_m"):
        if key not in values:
            raise DataError(f"{path}: missing metric {key!r}")
    return values


def _collect_runs(runs_root):
    """(run dir, report dict) for every stored run under the root."""
    paths = sorted(glob.glob(os.path.join(runs_root, "**", "report.csv"),
                             recursive=True))
    if not paths:
        raise DataError(f"{runs_root}: no report.csv anywhere below")
    return [(os.path.dirname(p), _read_report_csv(p)) for p in paths]


def _read_profile_csv(path):
    try:
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    data = np.atleast_2d(data)
    if data.shape[1] != 2:
        raise DataError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]


def _cmd_evaluate(args) -> int:
    sdir = ScenarioDir(args.scenario)
    runs = _collect_runs(args.runs)
    print(f"scenario {args.scenario}: preset {sdir.config.preset}, "
          f"{sdir.n_frames} frames")
    for run_dir, rep in runs:
        print(f"  {run_dir}: mode {rep['mode']}, mean error "
              f"{float(rep['mean_short_range_error_m']):.3f} m")
    return 0


_SVG_W, _SVG_H, _SVG_PAD = 640, 400, 50
_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _svg_polyline_plot(curves, out_path):
    """Standalone SVG: one error-vs-distance polyline per labeled curve."""
    x_max = max(float(x.max()) for _, x, _ in curves)
    y_max = max(float(np.nanmax(y)) for _, _, y in curves)
    y_max = max(y_max, 1e-6) * 1.08
    inner_w = _SVG_W - 2 * _SVG_PAD
    inner_h = _SVG_H - 2 * _SVG_PAD

    def sx(x):
        return _SVG_PAD + inner_w * x / x_max

    def sy(y):
        return _SVG_H - _SVG_PAD - inner_h * y / y_max

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<line x1="{_SVG_PAD}" y1="{_SVG_H - _SVG_PAD}" '
        f'x2="{_SVG_W - _SVG_PAD}" y2="{_SVG_H - _SVG_PAD}" stroke="black"/>',
        f'<line x1="{_SVG_PAD}" y1="{_SVG_PAD}" '
        f'x2="{_SVG_PAD}" y2="{_SVG_H - _SVG_PAD}" stroke="black"/>',
        f'<text x="{_SVG_W / 2:.0f}" y="{_SVG_H - 12}" font-size="13" '
        f'text-anchor="middle">look-ahead distance (m)</text>',
        f'<text x="14" y="{_SVG_H / 2:.0f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 14 {_SVG_H / 2:.0f})">'
        f'mean lateral error (m)</text>',
    ]
    for i in range(5):
        yv = y_max * i / 4.0
        parts.append(
            f'<text x="{_SVG_PAD - 6}" y="{sy(yv) + 4:.1f}" font-size="11" '
            f'text-anchor="end">{yv:.2f}</text>'
        )
        xv = x_max * i / 4.0
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{_SVG_H - _SVG_PAD + 16}" '
            f'font-size="11" text-anchor="middle">{xv:.0f}</text>'
        )
    for i, (label, x, y) in enumerate(curves):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(xi):.1f},{sy(yi):.1f}"
                       for xi, yi in zip(x[ok], y[ok]))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        ly = _SVG_PAD + 16 * i + 4
        parts.append(f'<line x1="{_SVG_W - 190}" y1="{ly - 4}" '
                     f'x2="{_SVG_W - 170}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_SVG_W - 164}" y="{ly}" font-size="11">'
                     f'{label}</text>')
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _cmd_report(args) -> int:
    runs = _collect_runs(args.runs)

    # summary matrix: one row per preset, one error column per mode
    modes, presets = [], []
    table = {}
    for run_dir, rep in runs:
        preset = rep.get("preset", "?")
        mode = rep["mode"]
        if mode not in modes:
            modes.append(mode)
        if preset not in presets:
            presets.append(preset)
        table.setdefault((preset, mode), []).append(
            float(rep["mean_short_range_error_m"])
        )
    summary_path = args.csv or os.path.join(args.runs, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        fh.write("preset," + ",".join(f"{m}_error_m" for m in modes) + "\n")
        for preset in sorted(presets):
            cells = []
            for mode in modes:
                errs = table.get((preset, mode))
                cells.append("%.6f" % float(np.mean(errs)) if errs else "")
            fh.write(preset + "," + ",".join(cells) + "\n")

    curves = []
    for run_dir, rep in runs:
        profile_path = os.path.join(run_dir, "error_profile.csv")
        if not os.path.exists(profile_path):
            continue
        x, y = _read_profile_csv(profile_path)
        label = rep.get("preset", "?") + " " + rep["mode"]
        curves.append((label, x, y))
    if not curves:
        raise DataError(f"{args.runs}: no error_profile.csv in any run")
    _svg_polyline_plot(curves, args.svg)
    print(f"summary for {len(runs)} runs in {summary_path}, plot in {args.svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadcourse",
        description="Synthetic road-course estimation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--preset", required=True, choices=PRESET_ORDER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the pixel classifier")
    p.add_argument("--data", required=True,
                   help="directory of *_image.pgm / *_labels.pgm pairs")
    p.add_argument("--topology", required=True,
                   help="network name, e.g. mssn-3-1-8")
    p.add_argument("--pooling", type=int, default=2,
                   help="pooling layers per branch")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--learn-rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tune-biases", action="store_true",
                   help="post-tune output biases for MCC on the data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="label one image with stored weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("run", help="process a scenario through the pipeline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", default=None,
                   help="key=value pipeline config file")
    p.add_argument("--no-optical", action="store_true",
                   help="skip the camera path, digital map only")
    p.add_argument("--out", default=None, help="run output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="summarize stored runs")
    p.add_argument("--scenario", required=True)
    p.add_argument("--runs", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="cross-run summary CSV and SVG plot")
    p.add_argument("--runs", required=True)
    p.add_argument("--svg", required=True)
    p.add_argument("--csv", default=None,
                   help="summary path (default: <runs>/summary.csv)")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except RoadCourseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
