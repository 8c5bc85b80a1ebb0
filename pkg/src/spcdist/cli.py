"""Command-line interface.

Five subcommands wire the pipeline together: ``fit`` (per-subject smoothing
levels), ``dist`` (dissimilarity matrix), ``outliers`` (nearest-neighbor
scores), ``cluster`` (k-medoids on a matrix), and ``simulate`` (the
synthetic benchmark).  Every command is a pure function of its inputs,
flags and seed; outputs carry the resolved options as ``#`` header lines
so runs can be reproduced byte for byte.

Exit codes: 0 success, 2 validation or file error, 3 numerical failure.
``SPCDIST_THREADS`` caps replicate-level parallelism in ``simulate``
without changing any output.
"""

import argparse
import sys

import numpy as np

from spcdist import cluster as cl
from spcdist import distance as dist
from spcdist import simbench as sb
from spcdist import spline
from spcdist.dataset import read_long_csv
from spcdist.errors import NumericError, ValidationError


def _load_config(path):
    options = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(
                    f"{path}:{lineno}: expected key=value, got {text!r}"
                )
            key, value = text.split("=", 1)
            options[key.strip()] = value.strip()
    return options


def _resolve(args, spec_table):
    """Merge CLI values, config-file values and defaults.

    CLI flags win over the config file, which wins over defaults; every
    resolved option is echoed into output headers.
    """
    cfg = _load_config(args.config) if args.config else {}
    unknown = set(cfg) - {name for name, _, _ in spec_table}
    if unknown:
        raise ValidationError(
            f"unknown config keys: {', '.join(sorted(unknown))}"
        )
    resolved = {}
    for name, convert, default in spec_table:
        cli_value = getattr(args, name.replace("-", "_"))
        if cli_value is not None:
            resolved[name] = cli_value
        elif name in cfg:
            try:
                resolved[name] = convert(cfg[name])
            except ValueError:
                raise ValidationError(
                    f"config key {name!r}: bad value {cfg[name]!r}"
                ) from None
        else:
            resolved[name] = default
    return resolved


def _provenance(command, options):
    lines = [f"command={command}"]
    for key in sorted(options):
        value = options[key]
        if value is not None:
            lines.append(f"{key}={value}")
    return lines


def _write_with_header(path, lines, body):
    with open(path, "w", newline="") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        body(fh)


def cmd_fit(args):
    table = [
        ("lambda", str, "auto"),
        ("grid", int, None),
        ("out", str, None),
    ]
    opts = _resolve(args, table)
    if opts["out"] is None:
        raise ValidationError("fit: --out is required")
    lam_text = opts["lambda"]
    fixed_lam = None
    if lam_text != "auto":
        try:
            fixed_lam = float(lam_text)
        except ValueError:
            raise ValidationError(
                f"--lambda must be 'auto' or a number, got {lam_text!r}"
            ) from None
        if not fixed_lam > 0:
            raise ValidationError("--lambda must be positive")
    if opts["grid"] is not None and opts["grid"] < 2:
        raise ValidationError("--grid must be at least 2")

    dataset = read_long_csv(args.input)
    rows = []
    fits = []
    for s in dataset.subjects:
        if fixed_lam is None:
            sel = spline._select_lambda(
                s.times, s.values, dataset.t_lower, dataset.t_upper,
                who=f"subject {s.id!r}",
            )
            rows.append(
                (s.id, sel.lambda_hat, sel.sigma2_hat, sel.sigma_u2_hat)
            )
            lam = sel.lambda_hat
        else:
            rows.append((s.id, fixed_lam, None, None))
            lam = fixed_lam
        if opts["grid"] is not None:
            fits.append(spline.fit_given_lambda(s, lam, domain=dataset.domain))

    header = _provenance("fit", {**opts, "input": args.input})

    def body(fh):
        fh.write("subject,lambda_hat,sigma2_hat,sigma_u2_hat\n")
        for sid, lam, s2, su2 in rows:
            s2s = "" if s2 is None else f"{s2:.17g}"
            su2s = "" if su2 is None else f"{su2:.17g}"
            fh.write(f"{sid},{lam:.17g},{s2s},{su2s}\n")

    _write_with_header(opts["out"], header, body)

    if opts["grid"] is not None:
        grid_times = np.linspace(dataset.t_lower, dataset.t_upper, opts["grid"])

        def curves(fh):
            fh.write("subject,time,value\n")
            for fit in fits:
                values = spline.evaluate(fit, grid_times)
                for t, v in zip(grid_times, values):
                    fh.write(f"{fit.subject_id},{t:.17g},{v:.17g}\n")

        _write_with_header(opts["out"] + ".curves.csv", header, curves)
    return 0


def cmd_dist(args):
    table = [("method", str, None), ("out", str, None)]
    opts = _resolve(args, table)
    if opts["method"] is None:
        raise ValidationError("dist: --method is required (spc, ss or eucl)")
    if opts["out"] is None:
        raise ValidationError("dist: --out is required")
    dataset = read_long_csv(args.input)
    matrix = dist.distance_matrix(dataset, opts["method"])
    dist.write_matrix_csv(
        matrix, opts["out"],
        header_comments=_provenance("dist", {**opts, "input": args.input}),
    )
    return 0


def _parse_mode(text):
    if text == "gap":
        return "gap", None
    if text.startswith("threshold:"):
        try:
            return "threshold", float(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(
                f"--mode threshold:<t> needs a number, got {text!r}"
            ) from None
    raise ValidationError(
        f"--mode must be 'gap' or 'threshold:<t>', got {text!r}"
    )


def cmd_outliers(args):
    table = [("k", int, 3), ("mode", str, "gap"), ("out", str, None)]
    opts = _resolve(args, table)
    if opts["out"] is None:
        raise ValidationError("outliers: --out is required")
    mode, threshold = _parse_mode(opts["mode"])
    matrix = dist.read_matrix_csv(args.input)
    scores = cl.knn_outlier_scores(matrix, k_neighbors=opts["k"])
    report = cl.flag_outliers(
        scores, mode=mode, threshold=threshold, ids=matrix.ids
    )
    header = _provenance("outliers", {**opts, "input": args.input})
    _write_with_header(
        opts["out"], header, lambda fh: cl.write_outliers_csv(report, fh)
    )
    return 0


def cmd_cluster(args):
    table = [("k", int, None), ("exclude", str, ""), ("out", str, None)]
    opts = _resolve(args, table)
    if opts["k"] is None:
        raise ValidationError("cluster: --k is required")
    if opts["out"] is None:
        raise ValidationError("cluster: --out is required")
    matrix = dist.read_matrix_csv(args.input)
    excluded = [sid for sid in opts["exclude"].split(",") if sid]
    if excluded:
        unknown = set(excluded) - set(matrix.ids)
        if unknown:
            raise ValidationError(
                f"--exclude ids not in the matrix: {', '.join(sorted(unknown))}"
            )
        matrix = matrix.submatrix(
            [sid for sid in matrix.ids if sid not in set(excluded)]
        )
    clustering = cl.pam(matrix, opts["k"])
    header = _provenance("cluster", {**opts, "input": args.input})
    _write_with_header(
        opts["out"], header, lambda fh: cl.write_clusters_csv(clustering, fh)
    )
    return 0


def cmd_simulate(args):
    table = [
        ("replicates", int, 200),
        ("seed", int, 0),
        ("methods", str, "eucl,ss,spc"),
        ("out", str, None),
        ("raw-out", str, None),
    ]
    opts = _resolve(args, table)
    if opts["out"] is None:
        raise ValidationError("simulate: --out is required")
    methods = tuple(m for m in opts["methods"].split(",") if m)
    config = sb.SimConfig(replicates=opts["replicates"], seed=opts["seed"])
    report = sb.run_benchmark(
        config, methods=methods, keep_raw=opts["raw-out"] is not None
    )
    header = _provenance("simulate", opts)
    sb.write_report_csv(report, opts["out"], header_comments=header)
    if opts["raw-out"] is not None:
        sb.write_raw_csv(report, opts["raw-out"], header_comments=header)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spcdist",
        description=(
            "Dissimilarity toolkit for irregular longitudinal series: "
            "smoothing-spline fits, commutation distances, outlier "
            "scoring, k-medoids clustering and a simulation benchmark."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="per-subject smoothing levels via REML")
    p.add_argument("input", help="long-format CSV (subject,time,value)")
    p.add_argument("--lambda", dest="lambda_", default=None,
                   help="'auto' (REML, default) or a fixed positive value")
    p.add_argument("--grid", type=int, default=None,
                   help="also evaluate each fit at this many equispaced times")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("dist", help="full dissimilarity matrix")
    p.add_argument("input", help="long-format CSV (subject,time,value)")
    p.add_argument("--method", choices=dist.METHODS, default=None)
    p.add_argument("--out", default=None, help="output matrix CSV path")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("outliers", help="nearest-neighbor outlier scores")
    p.add_argument("input", help="matrix CSV from 'dist'")
    p.add_argument("--k", type=int, default=None, help="neighbors (default 3)")
    p.add_argument("--mode", default=None, help="'gap' or 'threshold:<t>'")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("cluster", help="k-medoids on a matrix")
    p.add_argument("input", help="matrix CSV from 'dist'")
    p.add_argument("--k", type=int, default=None, help="number of clusters")
    p.add_argument("--exclude", default=None,
                   help="comma-separated subject ids to drop before clustering")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("simulate", help="synthetic benchmark of the measures")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--methods", default=None,
                   help="comma-separated subset of spc,ss,eucl")
    p.add_argument("--out", default=None, help="per-cell report CSV path")
    p.add_argument("--raw-out", dest="raw_out", default=None,
                   help="optional per-replicate CSV")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "lambda_"):
        args.__dict__["lambda"] = args.lambda_
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
