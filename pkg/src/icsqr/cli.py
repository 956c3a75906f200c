"""Command-line interface.

Subcommands
-----------
run        ICS on a dataset; writes eigenvalues, unmixing matrix, scores,
           rank decision and diagnostics
gen        synthetic mixture or ICA data plus a JSON sidecar with ground truth
sweep      eigenvalues against condition number for both algorithms
distances  squared ICS distances from the first k invariant coordinates
bench      wall-clock comparison of the two algorithms

Exit codes: 0 success, 2 numerical failure (e.g. a singular covariance on
the eigen path), 3 usage or input errors. Errors are also written to stderr
as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    DatasetFile,
    Orientation,
    format_float,
    read_dataset,
    write_json,
    write_matrix,
    write_table,
)
from .errors import NumericalError, SingularCovariance, ZeroDistance
from .experiments import (
    DEFAULT_SEED,
    DEFAULT_GRID,
    IcaSpec,
    MixtureSpec,
    Source,
    benchmark,
    gen_ica,
    gen_mixture,
    ica_sources,
    mixture_labels,
    sweep,
)
from .ics import (
    Algorithm,
    IcsOptions,
    Reduction,
    center,
    detect_rank,
    ics_distances,
    ics_eigen,
    reduce_then_ics,
    unmixing_in_original_space,
)
from .linalg import RankCriterion
from .scatter import WeightSpec, ZeroPolicy

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_USAGE = 3

# JSON Schema documents shipped in icsqr/schemas, one per kind of JSON output
SCHEMA_NAMES = ("rank", "diagnostics", "result", "comparison", "sweep", "bench", "error", "gen")


def load_schema(name):
    """Return the JSON Schema (as a dict) for one of :data:`SCHEMA_NAMES`."""
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}; choose from {', '.join(SCHEMA_NAMES)}")
    text = resources.files("icsqr").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; 2 is reserved for numerical failures here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 1.0
    constant_weight: bool = False
    zero_policy: ZeroPolicy = ZeroPolicy.ERROR
    reduction: Reduction = Reduction.URV
    rank_epsilon: float = 1e-8
    rank_criterion: RankCriterion = RankCriterion.LEADING
    row_pivot: bool = True
    algorithm: str = "qr"  # qr, eigen or both
    components_k: int = 1
    seed: int = DEFAULT_SEED
    output_format: str = "csv"

    def weight(self):
        if self.constant_weight:
            return WeightSpec.constant()
        return WeightSpec.power(self.alpha, self.zero_policy)

    def ics_options(self):
        return IcsOptions(
            weight=self.weight(),
            row_pivot=self.row_pivot,
            rank_epsilon=self.rank_epsilon,
            rank_criterion=self.rank_criterion,
            reduction=self.reduction,
        )


def resolve_seed(flag):
    """Seed from the flag, else from ``ICS_SEED``, else the default."""
    if flag is not None:
        return flag
    env = os.environ.get("ICS_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    try:
        return int(env, 0)
    except ValueError:
        raise UsageError(f"ICS_SEED must be an integer, got {env!r}") from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text):
    """``a:b:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError(f"grid must be start:stop[:step], got {text!r}")
        try:
            start, stop = float(parts[0]), float(parts[1])
            step = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(max(count, 0))]
    else:
        values = _float_list(text)
    return [int(v) if float(v).is_integer() else v for v in values]


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_dataset_args(p):
    p.add_argument("data", type=Path, help="delimited text file with the data")
    p.add_argument(
        "--orientation",
        choices=[o.value for o in Orientation],
        default=Orientation.OBS_ROWS.value,
        help="obs-rows: one observation per line (default); vars-rows: one variable per line",
    )
    p.add_argument("--header", choices=["auto", "yes", "no"], default="auto")
    p.add_argument("--delimiter", default=",")


def _add_ics_args(p):
    p.add_argument("--alpha", type=float, default=1.0, help="weight power: w(d) = d^alpha (1: cov4, -1: covAxis)")
    p.add_argument("--constant-weight", action="store_true", help="use w(d) = 1 instead of a power")
    p.add_argument("--zero-policy", choices=[z.value for z in ZeroPolicy], default=ZeroPolicy.ERROR.value)
    p.add_argument("--reduction", choices=[r.value for r in Reduction], default=Reduction.URV.value)
    p.add_argument("--rank-epsilon", type=float, default=1e-8)
    p.add_argument(
        "--rank-criterion", choices=[c.value for c in RankCriterion], default=RankCriterion.LEADING.value
    )
    p.add_argument("--no-row-pivot", action="store_true", help="skip the row presort before the QR factorization")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="random seed (overrides ICS_SEED)")


def _config(args, **extra):
    if not 0.0 < args.rank_epsilon < 1.0:
        raise UsageError(f"--rank-epsilon must lie in (0, 1), got {args.rank_epsilon}")
    return RunConfig(
        alpha=args.alpha,
        constant_weight=args.constant_weight,
        zero_policy=ZeroPolicy(args.zero_policy),
        reduction=Reduction(args.reduction),
        rank_epsilon=args.rank_epsilon,
        rank_criterion=RankCriterion(args.rank_criterion),
        row_pivot=not args.no_row_pivot,
        seed=resolve_seed(args.seed),
        **extra,
    )


def _dataset(args):
    header = {"auto": None, "yes": True, "no": False}[args.header]
    return read_dataset(DatasetFile(args.data, Orientation(args.orientation), header, args.delimiter))


def _outdir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- run ----------------------------------------------------------------------


def _analyse(x, algorithm, opts):
    """Return ``(result, decision, basis)`` for one algorithm."""
    if algorithm is Algorithm.QR:
        return reduce_then_ics(x, opts)
    cd = center(x)
    decision, _, _ = detect_rank(cd, opts)
    return ics_eigen(cd, opts), decision, np.eye(cd.p_vars)


def _write_result(out, result, decision, basis, ds, cfg):
    q = result.eigenvalues.size
    unmixing = unmixing_in_original_space(result, basis)
    components = [f"ic{j + 1}" for j in range(q)]
    obs = np.arange(1, ds.n + 1)
    if cfg.output_format == "json":
        write_json(
            out / "result.json",
            {
                "variables": list(ds.names),
                "eigenvalues": result.eigenvalues,
                "unmixing": unmixing,
                "scores": result.scores.T,
            },
        )
    else:
        write_table(out / "eigenvalues.csv", ["index", "value"], [[j + 1, v] for j, v in enumerate(result.eigenvalues)])
        write_matrix(out / "unmixing.csv", unmixing, ds.names, row_label="component", row_ids=components)
        write_matrix(out / "scores.csv", result.scores.T, components, row_label="observation", row_ids=obs)
    write_json(out / "rank.json", decision.to_dict())
    write_json(
        out / "diagnostics.json",
        {
            "algorithm": result.algorithm,
            "n": ds.n,
            "p": ds.p,
            "rank_used": result.rank_used,
            "scatter_pair": cfg.weight().label,
            "alpha": None if cfg.constant_weight else cfg.alpha,
            "reduction": cfg.reduction,
            "col_perm": result.col_perm,
            **result.diagnostics.to_dict(),
        },
    )


def cmd_run(args):
    cfg = _config(args, algorithm=args.algorithm, output_format=args.format)
    ds = _dataset(args)
    opts = cfg.ics_options()
    out = _outdir(args.out)

    if cfg.algorithm != "both":
        alg = Algorithm(cfg.algorithm)
        result, decision, basis = _analyse(ds.x, alg, opts)
        _write_result(out, result, decision, basis, ds, cfg)
        _print_eigenvalues(alg.value, result.eigenvalues)
        return EXIT_OK

    results, failure = {}, None
    for alg in (Algorithm.QR, Algorithm.EIGEN):
        sub = _outdir(out / alg.value)
        try:
            result, decision, basis = _analyse(ds.x, alg, opts)
        except NumericalError as exc:
            write_json(sub / "error.json", _error_payload(exc, EXIT_NUMERICAL))
            failure = failure or exc
            continue
        results[alg] = result
        _write_result(sub, result, decision, basis, ds, cfg)
        _print_eigenvalues(alg.value, result.eigenvalues)
    if len(results) == 2:
        a, b = results[Algorithm.QR].eigenvalues, results[Algorithm.EIGEN].eigenvalues
        if a.size == b.size:
            rel = float(np.max(np.abs(a - b) / np.abs(a)))
            write_json(out / "comparison.json", {"max_relative_eigenvalue_difference": rel})
            print(f"max relative eigenvalue difference: {format_float(rel)}")
    if failure is not None:
        raise failure
    return EXIT_OK


def _print_eigenvalues(label, values):
    print(f"{label}: " + " ".join(f"{v:.10g}" for v in values))


# -- gen ----------------------------------------------------------------------


def cmd_gen(args):
    seed = resolve_seed(args.seed)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    try:
        if args.kind == "mixture":
            spec = MixtureSpec(n=args.n, p=args.p, epsilon=args.epsilon, delta=args.delta, seed=seed)
            x = gen_mixture(spec)
            truth = {"kind": "mixture", "spec": asdict(spec), "labels": mixture_labels(spec)}
        else:
            sources = [Source(s.strip()) for s in args.sources.split(",") if s.strip()]
            spec = IcaSpec(n=args.n, sources=tuple(sources), seed=seed, scales=args.scales)
            x, mixing = gen_ica(spec)
            truth = {
                "kind": "ica",
                "spec": {**asdict(spec), "sources": [s.value for s in spec.sources]},
                "mixing": mixing,
                "sources": ica_sources(spec),
            }
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    names = [f"x{j + 1}" for j in range(x.shape[0])]
    write_matrix(out, x.T, names)
    sidecar = out.with_suffix(".json")
    truth["generator"] = "numpy Philox4x64 keyed by (seed, purpose)"
    write_json(sidecar, truth)
    print(f"wrote {out} ({x.shape[1]} observations x {x.shape[0]} variables) and {sidecar}")
    return EXIT_OK


# -- sweep --------------------------------------------------------------------


def cmd_sweep(args):
    from .plotting import sweep_figure

    seed = resolve_seed(args.seed)
    if args.data is not None:
        header = {"auto": None, "yes": True, "no": False}[args.header]
        base = read_dataset(DatasetFile(args.data, Orientation(args.orientation), header, args.delimiter)).x
    else:
        try:
            base = MixtureSpec(n=args.n, p=args.p, epsilon=args.epsilon, delta=args.delta, seed=seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    pairs = [WeightSpec.power(a) for a in args.alphas]
    algorithms = [Algorithm(a) for a in args.algorithms]
    report = sweep(grid=args.grid, pairs=pairs, algorithms=algorithms, base=base)

    out = _outdir(args.out)
    header = ["k", "pair", "algorithm", "status"] + [f"eig_{j + 1}" for j in range(report.p)] + ["kappa"]
    rows = []
    for r in report.rows:
        eig = list(r.eigenvalues) if r.eigenvalues is not None else [""] * report.p
        rows.append([format_float(r.k), r.pair, r.algorithm.value, r.status.value] + [
            e if isinstance(e, str) else format_float(e) for e in eig
        ] + [format_float(r.kappa)])
    write_table(out / "sweep.csv", header, rows)
    write_json(out / "sweep.json", report.to_dict())
    sweep_figure(report, out / "sweep.svg")
    for pair in report.pairs:
        for alg in report.algorithms:
            k = report.first_failure(pair, alg)
            state = "no failures" if k is None else f"first failure at k={k:g}"
            print(f"{pair:16s} {alg.value:6s} {state}")
    return EXIT_OK


# -- distances ----------------------------------------------------------------


def cmd_distances(args):
    from .plotting import distances_figure

    cfg = _config(args, components_k=args.k)
    ds = _dataset(args)
    if args.k > ds.p:
        raise UsageError(f"-k must not exceed the number of variables ({ds.p}), got {args.k}")
    result, decision, _ = reduce_then_ics(ds.x, cfg.ics_options())
    if args.k > result.eigenvalues.size:
        raise UsageError(f"-k must not exceed the detected rank ({decision.q}), got {args.k}")
    d2 = ics_distances(result, args.k)

    out = _outdir(args.out)
    order = np.argsort(-d2, kind="stable")
    rank = np.empty(d2.size, dtype=int)
    rank[order] = np.arange(1, d2.size + 1)
    write_table(out / "distances.csv", ["observation", "icsd2", "rank"], [[i + 1, v, int(rank[i])] for i, v in enumerate(d2)])
    write_json(out / "rank.json", decision.to_dict())
    distances_figure(d2, out / "distances.svg", top=args.top, title=f"ICSD$^2$, k = {args.k}, {cfg.weight().label}")

    print(f"{'rank':>4}  {'observation':>11}  icsd2")
    for pos, i in enumerate(order[: args.top], start=1):
        print(f"{pos:>4}  {i + 1:>11}  {d2[i]:.6g}")
    return EXIT_OK


# -- bench --------------------------------------------------------------------


def cmd_bench(args):
    report = benchmark(n=args.n, p=args.p, reps=args.reps, seed=resolve_seed(args.seed))
    out = _outdir(args.out)
    rows = []
    for name, t in report.timings.items():
        flops = report.flops["ics_eigen"] if name == "eigen" else report.flops["ics_qr_tall"]
        rows.append([name, t["median_s"], t["min_s"], flops])
    write_table(out / "bench.csv", ["algorithm", "median_s", "min_s", "flops_estimate"], rows)
    write_json(out / "bench.json", report.to_dict())
    for name, med, best, flops in rows:
        print(f"{name:6s} median {med * 1e3:9.3f} ms   min {best * 1e3:9.3f} ms   ~{flops:.3g} flops")
    print(f"ratio qr/eigen (median): {report.ratio:.3f}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="icsqr", description="Invariant coordinate selection via pivoted QR.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run ICS on a dataset")
    _add_dataset_args(p)
    _add_ics_args(p)
    p.add_argument("--algorithm", choices=["qr", "eigen", "both"], default="qr")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="generate synthetic data")
    p.add_argument("kind", choices=["mixture", "ica"])
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--p", type=_positive_int, default=4, help="variables (mixture only)")
    p.add_argument("--epsilon", type=float, default=0.10, help="mixing proportion (mixture only)")
    p.add_argument("--delta", type=float, default=6.0, help="location shift of the second group (mixture only)")
    p.add_argument(
        "--sources",
        default=",".join(s.value for s in (Source.GAUSSIAN, Source.STUDENT_T5, Source.UNIFORM, Source.LAPLACE)),
        help="comma-separated source list from gaussian, t5, uniform, laplace (ica only)",
    )
    p.add_argument("--scales", type=_float_list, default=None, help="diagonal of the mixing matrix (ica only)")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    p.add_argument("--out", type=Path, required=True, help="CSV file to write; the sidecar gets a .json suffix")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep", help="eigenvalues against condition number")
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID), help="k values: start:stop[:step] or a,b,c")
    p.add_argument("--alphas", type=_float_list, default=[1.0, -1.0], help="weight powers (1: cov4, -1: covAxis)")
    p.add_argument(
        "--algorithms",
        type=lambda s: [a.strip() for a in s.split(",") if a.strip()],
        default=["eigen", "qr"],
    )
    p.add_argument("--data", type=Path, default=None, help="base data instead of the generated mixture")
    p.add_argument("--orientation", choices=[o.value for o in Orientation], default=Orientation.OBS_ROWS.value)
    p.add_argument("--header", choices=["auto", "yes", "no"], default="auto")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--p", type=_positive_int, default=4)
    p.add_argument("--epsilon", type=float, default=0.10)
    p.add_argument("--delta", type=float, default=6.0)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("distances", help="squared ICS distances")
    _add_dataset_args(p)
    _add_ics_args(p)
    p.add_argument("-k", "--k", type=_positive_int, default=1, help="number of leading components")
    p.add_argument("--top", type=_positive_int, default=10, help="rows of the printed table")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("bench", help="time both algorithms")
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--reps", type=int, default=7)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def _error_payload(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, SingularCovariance):
        payload.update(smallest_eigenvalue=exc.smallest_eigenvalue, rcond=exc.rcond, index=exc.index)
    elif isinstance(exc, ZeroDistance):
        payload.update(indices=exc.indices, floor=exc.floor)
    elif hasattr(exc, "decision"):
        payload["rank"] = exc.decision.to_dict()
    return payload


def _fail(exc, code):
    text = json.dumps(_error_payload(exc, code), allow_nan=False, default=str)
    print(text, file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "sweep":
            try:
                args.algorithms = [Algorithm(a).value for a in args.algorithms]
            except ValueError:
                raise UsageError(f"--algorithms must be drawn from eigen, qr; got {args.algorithms}") from None
        return args.func(args)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (ValueError, OSError) as exc:
        return _fail(exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
