"""Command-line experiment harness.

Subcommands: ``generate`` (synthetic dataset + truth), ``fit`` (run one of
the clustering methods on a dataset CSV), ``evaluate`` (score a result
against truth), ``bench`` (seeded sweep producing long-format and aggregated
metric tables). Every command is deterministic given its flags and seed, and
output files contain no timestamps, so reruns are byte-identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence when
``--strict`` was requested.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from .baseline import three_stage_kmeans
from .measures import GroupedDataset
from .metrics import cluster_agreement, w_to_truth
from .multilevel import MultilevelConfig, result_from_dict, result_to_dict
from .mwm import mwm_run
from .mwms import mwms_run
from .synthdata import (
    GenParams,
    generate_lc,
    generate_nc,
    read_grouped_csv,
    truth_from_dict,
    truth_to_dict,
    write_grouped_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class DataError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="wmeans", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset and its truth")
    gen.add_argument("--preset", choices=["nc", "lc"], required=True)
    gen.add_argument("--m", type=int, default=50, help="number of groups")
    gen.add_argument("--n-j", type=int, default=50, help="observations per group")
    gen.add_argument("--d", type=int, default=10)
    gen.add_argument("--n-global", type=int, default=5, help="global measures (M)")
    gen.add_argument("--global-atoms", type=int, default=6, help="atoms per global measure")
    gen.add_argument("--local-atoms", type=int, default=5, help="atoms per local measure")
    gen.add_argument("--shared-atoms", type=int, default=50, help="shared pool size (LC)")
    gen.add_argument("--variance", choices=["constant", "proportional"],
                     default="constant")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-data", required=True)
    gen.add_argument("--out-truth", required=True)

    fit = sub.add_parser("fit", help="fit a multilevel clustering to a dataset CSV")
    fit.add_argument("--method", choices=["mwm", "mwms", "tsk"], required=True)
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--local-atoms", type=int, default=5)
    fit.add_argument("--n-global", type=int, default=5)
    fit.add_argument("--global-support", type=int, default=10)
    fit.add_argument("--shared-atoms", type=int, default=50, help="K (mwms only)")
    fit.add_argument("--max-outer", type=int, default=100)
    fit.add_argument("--rel-tol", type=float, default=1e-6)
    fit.add_argument("--transport", choices=["auto", "exact", "sinkhorn"],
                     default="auto")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--strict", action="store_true",
                     help="exit 3 if the run did not converge")

    ev = sub.add_parser("evaluate", help="score a result JSON against a truth JSON")
    ev.add_argument("--result", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--seed", type=int, default=0, help="unused; for interface symmetry")

    bench = sub.add_parser("bench", help="seeded benchmark sweep from a config file")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out-dir", required=True)
    bench.add_argument("--seed", type=int, default=0,
                       help="base seed added to the per-run seeds")
    return parser


def _cmd_generate(args) -> int:
    try:
        params = GenParams(
            m=args.m,
            n_j=args.n_j,
            d=args.d,
            n_global=args.n_global,
            global_atoms=args.global_atoms,
            local_atoms=args.local_atoms,
            shared_atoms=args.shared_atoms,
            variance=args.variance,
            seed=args.seed,
        )
    except ValueError as exc:
        raise SystemExit2(str(exc)) from exc
    generator = generate_nc if args.preset == "nc" else generate_lc
    data, truth = generator(params)
    write_grouped_csv(data, args.out_data)
    _write_json(args.out_truth, truth_to_dict(truth))
    return EXIT_OK


def _fit_once(data: GroupedDataset, method: str, config: MultilevelConfig):
    if method == "mwm":
        return mwm_run(data, config)
    if method == "mwms":
        return mwms_run(data, config)
    return three_stage_kmeans(data, config)


def _cmd_fit(args) -> int:
    data = _read_data(args.data)
    try:
        config = MultilevelConfig(
            local_atoms=args.local_atoms,
            n_global=args.n_global,
            global_support=args.global_support,
            max_outer=args.max_outer,
            rel_tol=args.rel_tol,
            seed=args.seed,
            transport_method=args.transport,
            shared_atoms=args.shared_atoms if args.method == "mwms" else None,
        )
    except ValueError as exc:
        raise SystemExit2(str(exc)) from exc
    result = _fit_once(data, args.method, config)
    _write_json(args.out, result_to_dict(result))
    if args.strict and not result.converged:
        print(
            f"did not converge in {result.iterations} iterations", file=sys.stderr
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    result = result_from_dict(_read_json(args.result))
    truth = truth_from_dict(_read_json(args.truth))
    try:
        w = w_to_truth(result, truth)
        scores = {
            kind: cluster_agreement(result.state.assignments, truth.labels, kind)
            for kind in ("nmi", "ari", "ami")
        }
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["W", "NMI", "ARI", "AMI"])
    writer.writerow([repr(w)] + [repr(scores[k]) for k in ("nmi", "ari", "ami")])
    Path(args.out).write_text(buf.getvalue())
    return EXIT_OK


def _parse_bench_config(path) -> dict:
    """Flat key = value lines; '#' starts a comment. Lists are comma separated."""
    options = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read bench config: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        options[key.strip()] = value.strip()
    return options


def _intlist(raw: str) -> list[int]:
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def _cmd_bench(args) -> int:
    opts = _parse_bench_config(args.config)
    preset = opts.get("preset", "nc")
    if preset not in ("nc", "lc"):
        raise DataError(f"unknown preset {preset!r}")
    variance = opts.get("variance", "constant")
    methods = [m.strip() for m in opts.get("methods", "mwm,tsk").split(",")]
    for m in methods:
        if m not in ("mwm", "mwms", "tsk"):
            raise DataError(f"unknown method {m!r}")
    try:
        m_values = _intlist(opts.get("m", "50"))
        n_values = _intlist(opts.get("n_j", "50"))
        seeds = _intlist(opts.get("seeds", "0,1,2"))
        d = int(opts.get("d", "10"))
        n_global = int(opts.get("M", "5"))
        global_atoms = int(opts.get("K_i", "6"))
        local_atoms = int(opts.get("k_j", "5"))
        shared_atoms = int(opts.get("K", "50"))
        global_support = int(opts.get("L", "10"))
        max_outer = int(opts.get("max_outer", "100"))
    except ValueError as exc:
        raise DataError(f"bad bench config value: {exc}") from exc

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in m_values:
        for n in n_values:
            for seed in seeds:
                seed = seed + args.seed
                params = GenParams(
                    m=m, n_j=n, d=d, n_global=n_global,
                    global_atoms=global_atoms, local_atoms=local_atoms,
                    shared_atoms=shared_atoms, variance=variance, seed=seed,
                )
                generator = generate_nc if preset == "nc" else generate_lc
                data, truth = generator(params)
                for method in methods:
                    config = MultilevelConfig(
                        local_atoms=local_atoms,
                        n_global=n_global,
                        global_support=global_support,
                        max_outer=max_outer,
                        seed=seed,
                        shared_atoms=shared_atoms if method == "mwms" else None,
                    )
                    result = _fit_once(data, method, config)
                    name = f"run_{method}_m{m}_n{n}_s{seed}.json"
                    _write_json(out_dir / name, result_to_dict(result))
                    rows.append(
                        (method, m, n, variance, seed, w_to_truth(result, truth))
                    )

    runs = io.StringIO()
    writer = csv.writer(runs, lineterminator="\n")
    writer.writerow(["method", "m", "n", "variance_mode", "seed", "W"])
    for row in rows:
        writer.writerow(list(row[:5]) + [repr(row[5])])
    (out_dir / "runs.csv").write_text(runs.getvalue())

    summary = io.StringIO()
    writer = csv.writer(summary, lineterminator="\n")
    writer.writerow(["method", "m", "n", "variance_mode", "median_W"])
    keys = sorted({(r[0], r[1], r[2], r[3]) for r in rows},
                  key=lambda k: (k[1], k[2], k[0]))
    for key in keys:
        med = statistics.median(r[5] for r in rows if (r[0], r[1], r[2], r[3]) == key)
        writer.writerow(list(key) + [repr(med)])
    (out_dir / "summary.csv").write_text(summary.getvalue())
    return EXIT_OK


def _read_data(path) -> GroupedDataset:
    try:
        return read_grouped_csv(path)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit2 as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    handlers = {
        "generate": _cmd_generate,
        "fit": _cmd_fit,
        "evaluate": _cmd_evaluate,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except SystemExit2 as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
