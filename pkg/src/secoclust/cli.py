"""Command-line front end.

Every subcommand writes its outputs plus a ``manifest.json`` (resolved
parameters, seed, input checksums, package version) into ``--out``.
Parameters come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then command-line flags, later sources winning.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .clustering import (
    DEFAULT_GRID,
    DEFAULT_K_LOSS,
    LINKAGES,
    ClusteringError,
    Partition,
    caice,
    choose_k,
    hclust,
    kmedoids_fit,
    parse_grid,
    select_tau,
    silhouette,
)
from .data import DataError, load_dataset, rank_matrix, save_dataset
from .models import ModelError, load_specs, sample_ai_blocks, sample_nested_logistic
from .tail import EstimatorError, SecoMatrix, seco_matrix
from .validation import Report, ValidationError, ari, axiom_suite, bounds_experiment, coherence_levelsets

log = logging.getLogger("secoclust")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
DEFAULT_SEED = 0
COMMANDS = ("simulate", "seco", "cluster", "select-tau", "silhouette", "ari", "validate")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _read(loader, *args):
    """Run a file loader, turning unreadable or malformed files into I/O errors."""
    try:
        return loader(*args)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _int_range(text: str) -> list[int]:
    """``"2:10"`` -> [2, ..., 10]; a single integer is a one-element range."""
    try:
        parts = [int(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"expected start:end integers, got {text!r}") from None
    if len(parts) == 1:
        return parts
    if len(parts) == 2:
        return list(range(parts[0], parts[1] + 1))
    if len(parts) == 3:
        return list(range(parts[0], parts[2] + 1, parts[1]))
    raise UsageError(f"expected start:end or start:step:end, got {text!r}")


class Run:
    """Output directory bookkeeping for one subcommand invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"cannot create output directory {self.out}: {exc}") from exc
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.results: dict = {}

    def input(self, path):
        if path is not None:
            self.inputs[str(path)] = _sha256(path)
        return path

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(name)
        return p

    def plot(self, fn, *args, name: str, **kw):
        if self.args.no_plots:
            return
        from . import plotting

        getattr(plotting, fn)(*args, self.path(name), **kw)

    def finish(self):
        params = {k: v for k, v in vars(self.args).items() if k not in ("func", "config_path")}
        manifest = {
            "command": self.args.command,
            "version": __version__,
            "parameters": params,
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "results": self.results,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    run = Run(args)
    specs = _read(load_specs, run.input(args.spec))
    if args.n is None:
        raise UsageError("simulate needs --n")
    try:
        if len(specs) == 1 and not args.blocks:
            ds = sample_nested_logistic(args.n, specs[0], args.seed)
            truth = None
        else:
            ds, truth = sample_ai_blocks(args.n, specs, args.seed)
    except ModelError as exc:
        raise UsageError(str(exc)) from exc
    save_dataset(ds, run.path("data.csv"), run.path("layout.json"))
    if truth is not None:
        truth.save(run.path("truth.json"))
        run.results["n_blocks"] = truth.n_clusters
    run.results.update({"n": ds.n, "q": ds.q, "d": ds.d})
    run.finish()
    print(f"wrote {ds.n}x{ds.q} dataset with {ds.d} groups to {run.out}")
    return EXIT_OK


def cmd_seco(args) -> int:
    run = Run(args)
    if args.k is None:
        raise UsageError("seco needs --k (number of top order statistics per column)")
    ds = _read(load_dataset, run.input(args.data), run.input(args.layout))
    theta = seco_matrix(rank_matrix(ds), ds.layout, args.k, threads=args.threads)
    theta.save(run.path("seco.csv"), run.path("seco.json"))
    run.plot("plot_seco_matrix", theta.entries, name="seco.png")
    run.results.update({"d": theta.dim, "n": ds.n})
    run.finish()
    print(f"wrote {theta.dim}x{theta.dim} SECO matrix to {run.out / 'seco.csv'}")
    return EXIT_OK


def _load_matrix(run, path) -> SecoMatrix:
    return _read(SecoMatrix.load, run.input(path))


def cmd_cluster(args) -> int:
    run = Run(args)
    theta = _load_matrix(run, args.matrix)
    if args.method == "caice":
        if args.tau is None:
            raise UsageError("caice needs --tau")
        part = caice(theta, args.tau)
    else:
        if args.K is None:
            raise UsageError(f"{args.method} needs --K (an integer or 'auto')")
        dm = theta.dissimilarity()
        if args.K == "auto":
            krange = _int_range(args.K_range) if args.K_range else list(range(2, min(theta.dim, 20) + 1))
            K, table = choose_k(dm, krange, args.method, args.seed, args.linkage)
            source = "silhouette"
            run.results["silhouette"] = table
        else:
            try:
                K = int(args.K)
            except ValueError:
                raise UsageError(f"--K must be an integer or 'auto', got {args.K!r}") from None
            source = "user"
        if args.method == "hclust":
            part = hclust(dm, K, args.linkage)
        else:
            fit = kmedoids_fit(dm, K, args.seed)
            part = fit.partition
            part.params["surrogate_for"] = "quantization"
            run.results["objective"] = fit.objective
        part.params["K_source"] = source
    part.save(run.path("partition.json"))
    run.plot("plot_seco_matrix", theta.entries, name="partition.png", partition=part)
    run.results["n_clusters"] = part.n_clusters
    run.finish()
    print(f"{part.algorithm}: {part.n_clusters} clusters")
    return EXIT_OK


def cmd_select_tau(args) -> int:
    run = Run(args)
    ds = _read(load_dataset, run.input(args.data), run.input(args.layout))
    theta = _load_matrix(run, args.matrix)
    try:
        grid = parse_grid(args.grid)
    except ClusteringError as exc:
        raise UsageError(str(exc)) from exc
    curve = select_tau(rank_matrix(ds), ds.layout, theta, grid, args.k_loss, threads=args.threads)
    curve.save_csv(run.path("tau_curve.csv"))
    best = curve.best_partition
    best.save(run.path("partition.json"))
    run.path("best_tau.json").write_text(
        json.dumps({"best_tau": curve.best_tau, "n_clusters": best.n_clusters, "k_loss": args.k_loss}) + "\n",
        encoding="utf-8",
    )
    run.plot("plot_tau_curve", curve, name="tau_curve.png")
    run.plot("plot_seco_matrix", theta.entries, name="partition.png", partition=best)
    run.results.update({"best_tau": curve.best_tau, "n_clusters": best.n_clusters, "grid_size": len(grid)})
    run.finish()
    print(f"best tau = {curve.best_tau:g} ({best.n_clusters} clusters)")
    return EXIT_OK


def cmd_silhouette(args) -> int:
    run = Run(args)
    theta = _load_matrix(run, args.matrix)
    dm = theta.dissimilarity()
    if args.partition:
        part = _read(Partition.load, run.input(args.partition))
        values, avg = silhouette(dm, part)
        with run.path("silhouette.csv").open("w", encoding="utf-8") as fh:
            fh.write("group,cluster,silhouette\n")
            for g, (lab, s) in enumerate(zip(part.labels(), values)):
                fh.write(f"{g + 1},{lab + 1},{s!r}\n")
        run.results["average"] = avg
        print(f"average silhouette = {avg:.6f}")
    else:
        krange = _int_range(args.K_range) if args.K_range else list(range(2, min(theta.dim, 20) + 1))
        K, table = choose_k(dm, krange, args.method, args.seed, args.linkage)
        with run.path("silhouette.csv").open("w", encoding="utf-8") as fh:
            fh.write("K,average_silhouette\n")
            for k, s in table:
                fh.write(f"{k},{s!r}\n")
        run.plot("plot_silhouette", table, name="silhouette.png")
        run.results.update({"best_K": K})
        print(f"best K = {K}")
    run.finish()
    return EXIT_OK


def cmd_ari(args) -> int:
    run = Run(args)
    p1 = _read(Partition.load, run.input(args.p1))
    p2 = _read(Partition.load, run.input(args.p2))
    value = ari(p1, p2)
    run.path("ari.json").write_text(json.dumps({"ari": value}) + "\n", encoding="utf-8")
    run.results["ari"] = value
    run.finish()
    print(f"ARI = {value!r}")
    return EXIT_OK


def _ari_report(args, run) -> Report:
    if not (args.p1 and args.p2):
        raise UsageError("validate ari needs --p1 and --p2")
    p1 = _read(Partition.load, run.input(args.p1))
    p2 = _read(Partition.load, run.input(args.p2))
    rep = Report("ari")
    a, b = ari(p1, p2), ari(p2, p1)
    rep.rows.append({"p1": args.p1, "p2": args.p2, "ari": a})
    rep.check("ARI symmetric", a == b, f"{a} vs {b}")
    rep.check("ARI <= 1", a <= 1.0, f"{a}")
    print(f"ARI = {a!r}")
    return rep


def cmd_validate(args) -> int:
    run = Run(args)
    if args.suite == "bounds":
        ngrid = _int_range(args.n_grid)
        rep = bounds_experiment(ngrid, args.exponent, args.k or 50, args.m, args.seed)
        run.plot("plot_bounds", rep.rows, name="bounds.png")
    elif args.suite == "axioms":
        if not (args.data and args.layout and args.k):
            raise UsageError("validate axioms needs --data, --layout and --k")
        ds = _read(load_dataset, run.input(args.data), run.input(args.layout))
        rep = axiom_suite(ds, ds.layout, args.k, args.seed)
    elif args.suite == "coherence":
        rep = coherence_levelsets(args.family, thin=args.thin)
        run.plot("plot_levelsets", rep.rows, name=f"{rep.name}.png")
    else:
        rep = _ari_report(args, run)
    table, summary = rep.write(run.out, rep.name)
    run.outputs += [table.name, summary.name]
    run.results.update(rep.summary())
    run.finish()
    for label, ok, detail in rep.checks:
        if not ok:
            print(f"FAIL {label} {detail}", file=sys.stderr)
    print(f"{rep.name}: {rep.passed} passed, {rep.failed} failed")
    return EXIT_OK if rep.ok else EXIT_FAIL


def _common(p: argparse.ArgumentParser, out: str) -> None:
    p.add_argument("--config", dest="config_path", help="key=value file; flags override it")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=out, help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secoclust", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a (nested) logistic model or AI block model")
    _common(p, "sim")
    p.add_argument("--spec", required=True, help="model spec JSON (object, or array for blocks)")
    p.add_argument("--n", type=int)
    p.add_argument("--blocks", action="store_true", help="treat a single spec as one AI block")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("seco", help="normalised SECO matrix")
    _common(p, "seco")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--k", type=int, help="number of largest observations per column; typical values 100, 50 or 30")
    p.set_defaults(func=cmd_seco)

    p = sub.add_parser("cluster", help="partition groups from a SECO matrix")
    _common(p, "cluster")
    p.add_argument("--matrix", required=True, help="SECO matrix CSV (sidecar JSON alongside)")
    p.add_argument("--method", choices=("caice", "hclust", "kmedoids"), default="caice")
    p.add_argument("--tau", type=float)
    p.add_argument("--K", help="number of clusters, or 'auto' for silhouette selection")
    p.add_argument("--K-range", dest="K_range", help="start:end for --K auto")
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("select-tau", help="choose the CAICE threshold by partition SECO")
    _common(p, "select_tau")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--grid", default=DEFAULT_GRID, help="start:step:end")
    p.add_argument("--k-loss", dest="k_loss", type=int, default=DEFAULT_K_LOSS)
    p.set_defaults(func=cmd_select_tau)

    p = sub.add_parser("silhouette", help="silhouette of a partition, or K selection")
    _common(p, "silhouette")
    p.add_argument("--matrix", required=True)
    p.add_argument("--partition")
    p.add_argument("--method", choices=("hclust", "kmedoids"), default="hclust")
    p.add_argument("--K-range", dest="K_range")
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    p.set_defaults(func=cmd_silhouette)

    p = sub.add_parser("ari", help="adjusted Rand index of two partitions")
    _common(p, "ari")
    p.add_argument("--p1", required=True)
    p.add_argument("--p2", required=True)
    p.set_defaults(func=cmd_ari)

    p = sub.add_parser("validate", help="run a validation suite")
    _common(p, "validate")
    p.add_argument("suite", choices=("bounds", "axioms", "coherence", "ari"))
    p.add_argument("--n-grid", dest="n_grid", default="100:50:1000")
    p.add_argument("--exponent", type=float, default=1.25)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--family", default="logistic")
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--data")
    p.add_argument("--layout")
    p.add_argument("--p1")
    p.add_argument("--p2")
    p.set_defaults(func=cmd_validate)
    return parser


def read_config(path) -> list[str]:
    """Turn ``key=value`` lines into flag tokens; ``#`` starts a comment."""
    tokens = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [flag, value]
    return tokens


def _with_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", dest="config_path")
    known, _ = pre.parse_known_args(argv)
    if not known.config_path:
        return argv
    try:
        tokens = read_config(known.config_path)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    # config tokens go right after the subcommand so explicit flags, parsed later, win
    for i, tok in enumerate(argv):
        if tok in COMMANDS:
            return argv[: i + 1] + tokens + argv[i + 1:]
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _with_config(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, DataError, EstimatorError, ClusteringError, ModelError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
