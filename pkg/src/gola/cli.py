"""Command-line entry point: ``gola generate | train | sweep``.

Runs are described by a JSON config with four sections::

    {"data":  {"path": "darcy.gola"},
     "model": {... GolaConfig fields ...},
     "train": {... TrainConfig fields ...},
     "sweep": {"densities": [50, 200], "models": ["gola", "gkn"], "jobs": 1}}

Unknown sections or keys are rejected before anything runs. Relative data
paths are resolved against the config file's directory.

Exit codes: 0 success, 2 usage or config error, 3 solver or training failure.
"""
import argparse
import json
import sys
import time
from dataclasses import fields
from pathlib import Path
from xml.etree import ElementTree as ET

from . import pdedata
from .model import MODEL_KINDS, GolaConfig, save_checkpoint
from .train import TrainConfig, TrainingError, density_sweep, fit, sweep_rows, write_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

SWEEP_KEYS = {"densities", "models", "jobs"}
DATA_KEYS = {"path"}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------- config

def _check_keys(section, given, allowed):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def load_config(path):
    """Read and validate a run config; returns ``(raw, data_path, GolaConfig, TrainConfig, sweep)``."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("config", raw, {"data", "model", "train", "sweep"})
    data = raw.get("data", {})
    _check_keys("data", data, DATA_KEYS)
    if "path" not in data:
        raise ConfigError("[data] needs a 'path' to a dataset file")
    model = raw.get("model", {})
    _check_keys("model", model, {f.name for f in fields(GolaConfig)})
    train = raw.get("train", {})
    _check_keys("train", train, {f.name for f in fields(TrainConfig)})
    sweep = raw.get("sweep", {})
    _check_keys("sweep", sweep, SWEEP_KEYS)
    try:
        gcfg = GolaConfig(**model)
        tcfg = TrainConfig(**train)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    data_path = Path(data["path"])
    if not data_path.is_absolute():
        data_path = path.parent / data_path
    return raw, data_path, gcfg, tcfg, sweep


def _load_dataset(path):
    if not path.exists():
        raise ConfigError(f"dataset not found: {path}")
    try:
        return pdedata.load(path)
    except pdedata.ContainerError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from None


def _parse_list(text, cast, what):
    try:
        items = [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None
    if not items:
        raise ConfigError(f"empty {what} list")
    return items


# --------------------------------------------------------------------- plot

def sweep_svg(rows, width=480, height=320):
    """Static line plot of test error against density, one polyline per model."""
    pad = 48
    kinds = sorted({r["kind"] for r in rows})
    xs = sorted({r["density"] for r in rows})
    ys = [r["test_rel_l2"] for r in rows]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = 0.0, max(ys) * 1.1 or 1.0

    def px(x):
        return pad + (width - 2 * pad) * ((x - x_lo) / (x_hi - x_lo) if x_hi > x_lo else 0.5)

    def py(y):
        return height - pad - (height - 2 * pad) * (y - y_lo) / (y_hi - y_lo)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height))
    axis = {"stroke": "black", "stroke-width": "1"}
    ET.SubElement(svg, "line", x1=str(pad), y1=str(height - pad), x2=str(width - pad), y2=str(height - pad), **axis)
    ET.SubElement(svg, "line", x1=str(pad), y1=str(pad), x2=str(pad), y2=str(height - pad), **axis)
    for x in xs:
        t = ET.SubElement(svg, "text", x=f"{px(x):.1f}", y=str(height - pad + 16), **{"text-anchor": "middle",
                                                                                    "font-size": "11"})
        t.text = str(x)
    for frac in (0.0, 0.5, 1.0):
        y = y_lo + frac * (y_hi - y_lo)
        t = ET.SubElement(svg, "text", x=str(pad - 6), y=f"{py(y):.1f}", **{"text-anchor": "end", "font-size": "11"})
        t.text = f"{y:.3g}"
    label = ET.SubElement(svg, "text", x=str(width // 2), y=str(height - 8), **{"text-anchor": "middle",
                                                                              "font-size": "12"})
    label.text = "sample density"
    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    for k, kind in enumerate(kinds):
        pts = sorted((r["density"], r["test_rel_l2"]) for r in rows if r["kind"] == kind)
        ET.SubElement(svg, "polyline", fill="none", stroke=colours[k % len(colours)], **{"stroke-width": "2"},
                      points=" ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts))
        t = ET.SubElement(svg, "text", x=str(width - pad), y=str(pad + 14 * k),
                          fill=colours[k % len(colours)], **{"text-anchor": "end", "font-size": "12"})
        t.text = kind
    return ET.tostring(svg, encoding="unicode")


# ----------------------------------------------------------------- commands

def cmd_generate(args):
    if args.n < 1 or args.grid < 3:
        raise ConfigError("--n must be at least 1 and --grid at least 3")
    ds = pdedata.generate(args.pde, args.n, grid_res=args.grid, seed=args.seed)
    pdedata.save(args.out, ds)
    print(f"wrote {args.out}: pde={ds.pde_tag} count={len(ds)} grid={ds.grid_res} seed={args.seed} "
          f"u_std={ds.metadata['u_std']:.4g}")


def _progress(kind):
    def log(epoch, loss):
        print(f"[{kind}] epoch {epoch + 1}: train rel-L2 {loss:.5f}", flush=True)
    return log


def cmd_train(args):
    raw, data_path, gcfg, tcfg, _ = load_config(args.config)
    ds = _load_dataset(data_path)
    report, params = fit(ds, args.model, gcfg, tcfg, log=_progress(args.model) if args.verbose else None,
                         return_params=True)
    report.config = raw
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    write_csv(report.csv_rows(), out.with_suffix(".csv"))
    save_checkpoint(out.with_suffix(".ckpt"), params,
                    {"kind": args.model, "model_config": gcfg.to_dict(), "config": raw})
    for d, err in sorted(report.test_rel_l2.items()):
        print(f"{args.model} density {d}: test rel-L2 {err:.5f}")
    print(f"wrote {out}, {out.with_suffix('.csv')}, {out.with_suffix('.ckpt')} "
          f"({report.param_count} parameters, {report.wall_clock:.1f}s)")


def cmd_sweep(args):
    raw, data_path, gcfg, tcfg, sweep = load_config(args.config)
    densities = _parse_list(args.densities, int, "density") if args.densities else sweep.get("densities")
    models = _parse_list(args.models, str, "model") if args.models else sweep.get("models", ["gola"])
    jobs = args.jobs if args.jobs is not None else sweep.get("jobs", 1)
    if not densities:
        raise ConfigError("no densities given (use --densities or [sweep] densities)")
    bad = [m for m in models if m not in MODEL_KINDS]
    if bad:
        raise ConfigError(f"unknown model(s) {bad}; expected {', '.join(MODEL_KINDS)}")
    ds = _load_dataset(data_path)
    t0 = time.perf_counter()
    reports = density_sweep(ds, models, densities, gcfg, tcfg, jobs=int(jobs))
    for r in reports:
        r.config = raw
    rows = sweep_rows(reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "sweep.csv")
    (out / "sweep.svg").write_text(sweep_svg(rows))
    (out / "reports.json").write_text("[\n" + ",\n".join(r.to_json() for r in reports) + "\n]\n")
    for r in rows:
        print(f"{r['kind']:>4} density {r['density']:>5}: test rel-L2 {r['test_rel_l2']:.5f}")
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep.svg'} in {time.perf_counter() - t0:.1f}s")


def build_parser():
    parser = argparse.ArgumentParser(prog="gola", description="Graph operator learning on scattered PDE samples.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a benchmark dataset file")
    gen.add_argument("--pde", required=True, choices=pdedata.PDE_TAGS, help="benchmark family")
    gen.add_argument("--n", type=int, required=True, help="number of input/solution pairs")
    gen.add_argument("--grid", type=int, default=128, help="grid resolution per side (default 128)")
    gen.add_argument("--seed", type=int, default=0, help="base seed; pair seeds are derived from it")
    gen.add_argument("--out", required=True, help="output dataset path")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="fit one model and write report JSON, CSV and checkpoint")
    tr.add_argument("--config", required=True, help="run config JSON with data/model/train sections")
    tr.add_argument("--model", default="gola", choices=MODEL_KINDS, help="model kind (default gola)")
    tr.add_argument("--out", required=True,
                    help="report JSON path; the CSV and checkpoint go next to it with .csv and .ckpt suffixes")
    tr.add_argument("--verbose", action="store_true", help="print the training loss every epoch")
    tr.set_defaults(func=cmd_train)

    sw = sub.add_parser("sweep", help="train and test each model at several densities; write CSV and SVG")
    sw.add_argument("--config", required=True, help="run config JSON")
    sw.add_argument("--densities", help="comma-separated densities (overrides [sweep] densities)")
    sw.add_argument("--models", help="comma-separated model kinds (overrides [sweep] models)")
    sw.add_argument("--jobs", type=int, help="independent fits to run in parallel processes (default 1)")
    sw.add_argument("--out", required=True, help="output directory for sweep.csv, sweep.svg and reports.json")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"gola {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (pdedata.SolverError, TrainingError, FloatingPointError) as exc:
        print(f"gola {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
