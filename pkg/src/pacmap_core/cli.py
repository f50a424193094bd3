"""Command-line front end.

    pacmap-core embed    --input X.csv --output Y.csv [...]
    pacmap-core metrics  --high X.csv --low Y.csv [--labels L.csv] --which knn,rt,ct
    pacmap-core gen      hierarchical|scurve-hole --out D.csv --seed S
    pacmap-core rainbow  --loss pacmap --out grid.csv [--audit]
    pacmap-core schedule --iters 450 --tau 1,101,201

Exit status is 0 only when every requested artifact was written.
"""
import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from ._util import THREADS_ENV, default_threads
from .datagen import (
    HierarchicalSpec,
    gen_hierarchical,
    gen_s_curve_with_hole,
    load_csv,
    save_csv,
)
from .metrics import DEFAULT_K_SET, centroid_triplet_accuracy, knn_accuracy, random_triplet_accuracy
from .objective import ScheduleConfig, weight_schedule
from .optimizer import FitConfig, fit_full
from .principles import SURFACE_NAMES, GridSpec, builtin_surface, check_principles, rainbow_grid

REPORT_FORMAT = 1


class CLIError(Exception):
    pass


def _num(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_kv(path, items):
    """Line-oriented ``key=value`` document headed by the format version."""
    with open(path, "w") as fh:
        fh.write(f"format={REPORT_FORMAT}\n")
        for k, v in items:
            fh.write(f"{k}={_num(v)}\n")


def read_kv(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                k, _, v = line.partition("=")
                out[k] = v
    return out


def _parse_tau(text):
    try:
        vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise CLIError(f"--tau must be three comma-separated integers, got {text!r}") from None
    if len(vals) != 3:
        raise CLIError(f"--tau must be three comma-separated integers, got {text!r}")
    return vals


def _schedule(iters, tau_text):
    t1, t2, t3 = _parse_tau(tau_text)
    try:
        return ScheduleConfig(t1, t2, t3, iters)
    except ValueError as e:
        raise CLIError(str(e)) from None


def _load(path, **kw):
    try:
        return load_csv(path, **kw)
    except FileNotFoundError:
        raise CLIError(f"input file not found: {path}") from None


# -- subcommands -------------------------------------------------------------


def cmd_embed(args):
    cfg = FitConfig(
        n_nb=args.n_neighbors,
        mn_ratio=args.mn_ratio,
        fp_ratio=args.fp_ratio,
        schedule=_schedule(args.iters, args.tau),
        init=args.init,
        seed=args.seed,
        d_out=args.d_out,
        n_threads=args.threads,
    )
    data = _load(args.input, label_col=args.label_col, n_label_cols=args.label_cols, header=args.header)
    start = time.perf_counter()
    result = fit_full(data.x, cfg)
    elapsed = time.perf_counter() - start
    save_csv(args.output, result.embedding)
    if args.pairs_out:
        with open(args.pairs_out, "w") as fh:
            for kind in ("nb", "mn", "fp"):
                for i, j in getattr(result.pairs, kind).tolist():
                    fh.write(f"{kind},{i},{j}\n")
    if args.labels_out and data.labels is not None:
        save_csv(args.labels_out, data.labels.astype(float), labels=None)
    manifest = args.manifest or args.output + ".manifest"
    write_kv(
        manifest,
        [
            ("command", "embed"),
            ("version", __version__),
            ("input", args.input),
            ("output", args.output),
            ("seed", args.seed),
            ("n_neighbors", cfg.n_nb),
            ("mn_ratio", cfg.mn_ratio),
            ("fp_ratio", cfg.fp_ratio),
            ("iters", cfg.schedule.n_iterations),
            ("tau", f"{cfg.schedule.tau1},{cfg.schedule.tau2},{cfg.schedule.tau3}"),
            ("init", cfg.init),
            ("d_out", cfg.d_out),
            ("lr", cfg.lr),
            ("beta1", cfg.beta1),
            ("beta2", cfg.beta2),
            ("eps", cfg.eps),
            ("label_col", args.label_col or "none"),
            ("rows", data.x.shape[0]),
            ("cols", data.x.shape[1]),
            ("final_loss", float(result.losses[-1])),
            ("wall_time_s", round(elapsed, 3)),
        ],
    )
    print(f"wrote {args.output} ({data.x.shape[0]} x {cfg.d_out}) and {manifest}")
    return 0


def _load_labels(path):
    ds = _load(path)
    if ds.x.shape[1] != 1:
        raise CLIError(f"{path}: expected one label column, found {ds.x.shape[1]}")
    lab = ds.x[:, 0]
    if not np.all(lab == np.round(lab)):
        raise CLIError(f"{path}: labels must be integers")
    return lab.astype(np.int64)


def cmd_metrics(args):
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    unknown = set(which) - {"knn", "rt", "ct"}
    if unknown or not which:
        raise CLIError(f"--which takes knn, rt, ct; got {args.which!r}")
    high = _load(args.high, header=args.header).x
    low = _load(args.low, header=args.header).x
    if high.shape[0] != low.shape[0]:
        raise CLIError(f"{args.high} has {high.shape[0]} rows but {args.low} has {low.shape[0]}")
    labels = _load_labels(args.labels) if args.labels else None
    if labels is not None and labels.shape[0] != high.shape[0]:
        raise CLIError(f"{args.labels} has {labels.shape[0]} labels for {high.shape[0]} points")
    if labels is None and ({"knn", "ct"} & set(which)):
        raise CLIError("knn and ct metrics need --labels")

    reports = []
    for w in which:
        try:
            if w == "knn":
                k_set = [int(k) for k in args.k_set.split(",")]
                reports.append(knn_accuracy(low, labels, k_set=k_set, n_threads=args.threads))
            elif w == "rt":
                reports.append(
                    random_triplet_accuracy(high, low, per_point=args.per_point, repeats=args.repeats, seed=args.seed)
                )
            else:
                reports.append(centroid_triplet_accuracy(high, low, labels))
        except ValueError as e:
            raise CLIError(f"{w}: {e}") from None

    items = [("command", "metrics"), ("version", __version__), ("high", args.high), ("low", args.low)]
    for r in reports:
        print(f"{r.name}: {r.mean:.3f} ± {r.std:.3f}")
        items += [(f"{r.name}.mean", r.mean), (f"{r.name}.std", r.std)]
        for k, v in r.params.items():
            if isinstance(v, dict):
                items += [(f"{r.name}.{k}.{kk}", vv) for kk, vv in v.items()]
            else:
                items.append((f"{r.name}.{k}", v))
    report = args.report or args.low + ".metrics"
    write_kv(report, items)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"format": REPORT_FORMAT, "metrics": [r.as_dict() for r in reports]}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_gen(args):
    if args.kind == "hierarchical":
        ds = gen_hierarchical(HierarchicalSpec(points_per_micro=args.points_per_micro), seed=args.seed)
        save_csv(args.out, ds.x, labels=ds.label_levels)
        print(f"wrote {args.out} ({ds.x.shape[0]} rows, {ds.x.shape[1]} features + 3 label columns)")
    else:
        x = gen_s_curve_with_hole(args.n, hole_radius=args.hole_radius, seed=args.seed)
        save_csv(args.out, x)
        print(f"wrote {args.out} ({x.shape[0]} rows)")
    return 0


def cmd_rainbow(args):
    try:
        surface = builtin_surface(args.loss)
        grid = GridSpec(args.grid_lo, args.grid_hi, args.grid_n)
    except ValueError as e:
        raise CLIError(str(e)) from None
    rg = rainbow_grid(surface, grid)
    rg.to_csv(args.out)
    print(f"wrote {args.out} ({grid.n}x{grid.n} cells, {rg.n_masked} masked)")
    if args.audit:
        try:
            report = check_principles(rg, grid)
        except ValueError as e:
            raise CLIError(str(e)) from None
        for line in report.lines():
            print(line)
    return 0


def cmd_schedule(args):
    cfg = _schedule(args.iters, args.tau)
    print("t,w_nb,w_mn,w_fp")
    for t in range(1, cfg.n_iterations + 1):
        w = weight_schedule(t, cfg)
        print(f"{t},{w.w_nb:.10g},{w.w_mn:.10g},{w.w_fp:.10g}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="pacmap-core", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("embed", help="embed a CSV matrix")
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--n-neighbors", type=int, default=10)
    e.add_argument("--mn-ratio", type=float, default=0.5)
    e.add_argument("--fp-ratio", type=float, default=2.0)
    e.add_argument("--iters", type=int, default=450)
    e.add_argument("--tau", default="1,101,201")
    e.add_argument("--init", choices=("pca", "random"), default="pca")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--d-out", type=int, default=2)
    e.add_argument("--label-col", choices=("last",), default=None)
    e.add_argument("--label-cols", type=int, default=1, help="number of trailing label columns")
    e.add_argument("--header", action="store_true", help="skip one header line")
    e.add_argument("--pairs-out", help="also write the pair set as kind,i,j rows")
    e.add_argument("--labels-out", help="also write the split-off labels")
    e.add_argument("--manifest", help="manifest path (default: OUTPUT.manifest)")
    e.add_argument("--threads", type=int, default=None, help=f"default from ${THREADS_ENV}")
    e.set_defaults(func=cmd_embed)

    m = sub.add_parser("metrics", help="score an embedding")
    m.add_argument("--high", required=True)
    m.add_argument("--low", required=True)
    m.add_argument("--labels")
    m.add_argument("--which", default="rt")
    m.add_argument("--k-set", default=",".join(str(k) for k in DEFAULT_K_SET))
    m.add_argument("--per-point", type=int, default=5)
    m.add_argument("--repeats", type=int, default=5)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--header", action="store_true")
    m.add_argument("--report", help="key=value report path (default: LOW.metrics)")
    m.add_argument("--json", help="also write a JSON report")
    m.add_argument("--threads", type=int, default=None)
    m.set_defaults(func=cmd_metrics)

    g = sub.add_parser("gen", help="generate a synthetic benchmark")
    g.add_argument("kind", choices=("hierarchical", "scurve-hole"))
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points-per-micro", type=int, default=500)
    g.add_argument("--n", type=int, default=9500)
    g.add_argument("--hole-radius", type=float, default=0.6)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("rainbow", help="tabulate (and audit) a triplet loss surface")
    r.add_argument("--loss", required=True, help=", ".join(SURFACE_NAMES))
    r.add_argument("--out", required=True)
    r.add_argument("--audit", action="store_true")
    r.add_argument("--grid-n", type=int, default=200)
    r.add_argument("--grid-lo", type=float, default=1e-2)
    r.add_argument("--grid-hi", type=float, default=1e2)
    r.set_defaults(func=cmd_rainbow)

    s = sub.add_parser("schedule", help="print the phase weights per iteration")
    s.add_argument("--iters", type=int, default=450)
    s.add_argument("--tau", default="1,101,201")
    s.set_defaults(func=cmd_schedule)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return args.func(args)
    except (CLIError, ValueError, OSError) as e:
        print(f"pacmap-core {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
