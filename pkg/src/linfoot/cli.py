"""Command line front end.

Exit status is 0 when the requested output was fully produced. Failures map
to one status per error family (see ``linfoot.errors``); usage errors exit
with 64 and I/O failures with 74.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    CorpusConfig,
    GridSpec,
    bootstrap_ci,
    make_training_corpus,
    model_inputs,
    network_estimate,
    run_grid,
    write_report,
)
from .copula import (
    MAX_LINFOOT_TARGET,
    ArchimedeanGenerator,
    CopulaKind,
    CopulaSpec,
    archimedean_linfoot_oracle,
    clayton_mi,
    gaussianize,
    linfoot_to_mi,
    param_from_linfoot,
    read_xy_csv,
    sample,
)
from .errors import LinfootError
from .estimators import EstimatorConfig, Method, MineConfig, estimate
from .features import featurize, read_bundles, write_bundles
from .neural.io import load_model, save_model
from .neural.model import BUILDERS, TrainConfig, train
from .numerics import RngStream, derive_stream_id

EXIT_USAGE = 64
EXIT_IO = 74

CORPUS_PRESETS = {"small": 50, "desk": 800, "full": 4000}
# mini-batches per epoch of the full protocol (4000 datasets x 8 cells / 1000)
_STEPS_PER_EPOCH = 32
NEURAL_METHODS = ("pretrained", "model")


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _emit(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(h, "") for h in header])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _check_input(path):
    if not Path(path).is_file():
        raise OSError(f"input file not found: {path}")


def _check_output(path):
    if path and not Path(path).resolve().parent.is_dir():
        raise OSError(f"output directory does not exist: {Path(path).parent}")


def pretrained_model_path() -> Path:
    return Path(str(resources.files("linfoot") / "data" / "model3.linf"))


def load_pretrained():
    return load_model(pretrained_model_path())


# -- truth ---------------------------------------------------------------------


def cmd_truth(args):
    _check_output(args.out)
    kind = CopulaKind(args.copula)
    given = [a for a in (args.rho, args.theta, args.linfoot) if a is not None]
    if kind is CopulaKind.INDEPENDENCE:
        if given:
            raise UsageError("independence takes no parameter")
        spec = CopulaSpec.independence()
    else:
        if len(given) != 1:
            raise UsageError("give exactly one of --rho/--theta or --linfoot")
        if args.linfoot is not None:
            spec = param_from_linfoot(kind, args.linfoot)
        elif kind is CopulaKind.GAUSSIAN:
            if args.theta is not None:
                raise UsageError("--theta applies to the clayton copula")
            spec = CopulaSpec.gaussian(args.rho)
        else:
            if args.rho is not None:
                raise UsageError("--rho applies to the gaussian copula")
            spec = CopulaSpec.clayton(args.theta)
    value = spec.linfoot()
    row = {
        "copula": spec.kind.value,
        "param": _fmt(spec.param if spec.param is not None else 0.0),
        "linfoot": _fmt(value),
        "mi": _fmt(linfoot_to_mi(value) if spec.kind is not CopulaKind.CLAYTON else clayton_mi(spec.param)),
    }
    header = ["copula", "param", "linfoot", "mi"]
    if args.oracle:
        if spec.kind is CopulaKind.GAUSSIAN:
            raise UsageError("--oracle needs an Archimedean copula (clayton or independence)")
        gen = (ArchimedeanGenerator.clayton(spec.param) if spec.kind is CopulaKind.CLAYTON
               else ArchimedeanGenerator.independence())
        oracle = archimedean_linfoot_oracle(gen)
        row["oracle"] = _fmt(oracle)
        row["delta"] = f"{abs(oracle - value):.3g}"
        header += ["oracle", "delta"]
    _emit([row], header, args.out)
    return 0


# -- simulate / featurize --------------------------------------------------------


def _spec_from_args(args):
    kind = CopulaKind(args.copula)
    if kind is CopulaKind.INDEPENDENCE:
        if args.linfoot not in (None, 0.0) or args.param is not None:
            raise UsageError("independence takes no parameter")
        return CopulaSpec.independence()
    if (args.linfoot is None) == (args.param is None):
        raise UsageError("give exactly one of --linfoot or --param")
    if args.linfoot is not None:
        return param_from_linfoot(kind, args.linfoot)
    return CopulaSpec(kind, args.param)


def cmd_simulate(args):
    _check_output(args.out)
    spec = _spec_from_args(args)
    data = sample(spec, args.n, RngStream(args.seed, derive_stream_id("simulate")))
    if args.out:
        data.to_csv(args.out)
    else:
        sys.stdout.write("x,y\n")
        for a, b in zip(data.x, data.y):
            sys.stdout.write(f"{a:.17g},{b:.17g}\n")
    return 0


def cmd_featurize(args):
    for p in args.inputs:
        _check_input(p)
    _check_output(args.out)
    bundles = []
    for p in args.inputs:
        data, dropped = read_xy_csv(p)
        if dropped:
            print(f"{p}: {data.n} rows used, {dropped} dropped", file=sys.stderr)
        bundles.append(featurize(data))
    write_bundles(args.out or sys.stdout, bundles)
    return 0


# -- train -------------------------------------------------------------------------


def _corpus(args, which, per_cell_override=None, seed=None, label="train"):
    if which in CORPUS_PRESETS:
        per_cell = per_cell_override or CORPUS_PRESETS[which]
        cfg = CorpusConfig(per_cell=per_cell, seed=seed)
        progress = None
        if args.verbose:
            progress = lambda c, n: print(f"{label} corpus: {c} n={n} done", file=sys.stderr)  # noqa: E731
        corpus = make_training_corpus(cfg, progress=progress)
        return corpus.bundles, corpus.targets
    _check_input(which)
    bundles, targets = read_bundles(which)
    if targets is None:
        raise UsageError(f"{which} has no target column")
    return bundles, targets


def cmd_train(args):
    _check_output(args.out)
    if not args.out:
        raise UsageError("train needs --out for the model file")
    bundles, targets = _corpus(args, args.corpus, args.per_cell, args.seed)
    if args.save_corpus:
        write_bundles(args.save_corpus, bundles, targets)
    if args.validation:
        vb, vt = _corpus(args, args.validation, args.validation_per_cell,
                         derive_stream_id("validation", args.seed), label="validation")
    else:
        vb, vt = None, None
    model = BUILDERS[f"model{args.model}"](args.seed)
    batch = args.batch_size or max(1, round(len(bundles) / _STEPS_PER_EPOCH))
    cfg = TrainConfig(epochs=args.epochs, batch_size=batch, learning_rate=args.lr, seed=args.seed)
    inputs = model_inputs(model, bundles)
    validation = (model_inputs(model, vb), vt) if vb is not None else None
    log_fn = None
    if args.verbose:
        log_fn = lambda row: print(  # noqa: E731
            " ".join(f"{k}={_fmt(v)}" for k, v in row.items()), file=sys.stderr, flush=True)
    model, history = train(model, inputs, targets, cfg, validation=validation, log=log_fn)
    save_model(model, args.out)
    header = ["epoch", "train_loss"] + (["val_loss"] if validation is not None else [])
    _emit([{k: _fmt(v) for k, v in row.items()} for row in history], header, args.out + ".loss.csv")
    return 0


# -- estimate / bootstrap ------------------------------------------------------------


def _resolve_estimator(args):
    """Estimator object plus its display label."""
    method = args.method
    if args.model and method not in NEURAL_METHODS:
        raise UsageError(f"--model cannot be combined with --method {method}")
    if method == "model":
        if not args.model:
            raise UsageError("--method model needs --model PATH")
        _check_input(args.model)
        return load_model(args.model), "model"
    if method == "pretrained":
        return (load_model(args.model) if args.model else load_pretrained()), "pretrained"
    m = Method(method)
    mine = MineConfig(seed=args.seed) if m is Method.MINE else None
    return EstimatorConfig(m, k=args.k, bandwidth=args.bandwidth, mine=mine), m.value


def _run_estimate(est, data):
    if isinstance(est, EstimatorConfig):
        r = estimate(data, est)
        return r.linfoot, r.mi_raw, r.tuning
    value = network_estimate(est, data)
    return value, (linfoot_to_mi(value) if value < 1.0 else math.inf), None


def cmd_estimate(args):
    _check_input(args.input)
    _check_output(args.out)
    est, label = _resolve_estimator(args)
    data, dropped = read_xy_csv(args.input)
    print(f"{data.n} rows used, {dropped} dropped", file=sys.stderr)
    variants = [("none", data)]
    if args.gaussianize:
        variants.append(("gaussianize", gaussianize(data)))
    rows = []
    for name, d in variants:
        value, mi, tuning = _run_estimate(est, d)
        rows.append({"transform": name, "method": label, "linfoot": _fmt(value), "mi_raw": _fmt(mi),
                     "tuning": _fmt(tuning), "rows_used": data.n, "rows_dropped": dropped})
    header = ["transform", "method", "linfoot", "mi_raw", "tuning", "rows_used", "rows_dropped"]
    _emit(rows, header, args.out)
    return 0


def cmd_bootstrap(args):
    _check_input(args.input)
    _check_output(args.out)
    est, label = _resolve_estimator(args)
    data, dropped = read_xy_csv(args.input)
    print(f"{data.n} rows used, {dropped} dropped", file=sys.stderr)
    if args.gaussianize:
        data = gaussianize(data)
    res = bootstrap_ci(data, est, B=args.B, alpha=args.alpha, seed=args.seed)
    _emit([{"method": label, "estimate": _fmt(res.estimate), "lower": _fmt(res.lower),
            "upper": _fmt(res.upper), "B": args.B, "alpha": _fmt(args.alpha), "redraws": res.redraws}],
          ["method", "estimate", "lower", "upper", "B", "alpha", "redraws"], args.out)
    return 0


# -- benchmark ---------------------------------------------------------------------


def _csv_list(text, conv=str):
    return tuple(conv(t) for t in text.split(",") if t.strip())


def cmd_benchmark(args):
    _check_output(args.out)
    methods = _csv_list(args.methods)
    extra = {}
    for m in methods:
        if m == "pretrained":
            extra[m] = load_model(args.model) if args.model else load_pretrained()
        elif m == "model":
            if not args.model:
                raise UsageError("method 'model' needs --model PATH")
            extra[m] = load_model(args.model)
        elif m not in {k.value for k in Method}:
            raise UsageError(f"unknown method {m!r}")
    copulas = _csv_list(args.copulas)
    for c in copulas:
        if c not in {k.value for k in CopulaKind}:
            raise UsageError(f"unknown copula {c!r}")
    if args.model and not any(m in NEURAL_METHODS for m in methods):
        raise UsageError("--model given but no 'model'/'pretrained' method selected")
    spec = GridSpec(copulas=copulas, linfoot_levels=_csv_list(args.levels, float),
                    sample_sizes=_csv_list(args.sizes, int), replications=args.reps,
                    base_seed=args.seed, methods=methods)
    progress = None
    if args.verbose:
        progress = lambda c, l, n: print(f"cell {c} L={l:g} n={n} done", file=sys.stderr)  # noqa: E731
    results = run_grid(spec, extra, progress=progress)
    write_report(results, args.out or sys.stdout)
    return 0


# -- parser --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, seed_help="random seed"):
    p.add_argument("--seed", type=int, default=0, help=f"{seed_help} (default 0)")
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on standard error")


def _estimator_flags(p):
    p.add_argument("--method", default="fnn",
                   choices=[m.value for m in Method] + list(NEURAL_METHODS),
                   help="estimator (default fnn); 'pretrained' uses the bundled Model-3 weights")
    p.add_argument("--model", default=None, help="model file for --method model/pretrained")
    p.add_argument("--k", type=int, default=None, help="neighbour count for fnn/knn/knn_trunc")
    p.add_argument("--bandwidth", type=float, default=None, help="bandwidth for kde_mr/kde_beta")
    p.add_argument("--gaussianize", action="store_true",
                   help="replace both margins by their normal scores before estimating")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="linfoot", description="Linfoot informational correlation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("truth", help="exact Linfoot value of a copula, or invert a target")
    p.add_argument("copula", choices=[k.value for k in CopulaKind])
    p.add_argument("--rho", type=float, help="Gaussian correlation in [0, 1)")
    p.add_argument("--theta", type=float, help="Clayton parameter > 0")
    p.add_argument("--linfoot", type=float, help=f"target Linfoot value in [0, {MAX_LINFOOT_TARGET}]")
    p.add_argument("--oracle", action="store_true", help="also integrate the MI numerically and report the gap")
    _common(p, "unused; accepted for uniformity")
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("simulate", help="sample a dataset with standard normal margins")
    p.add_argument("--copula", required=True, choices=[k.value for k in CopulaKind])
    p.add_argument("--linfoot", type=float, help="target Linfoot value")
    p.add_argument("--param", type=float, help="copula parameter (rho or theta) instead of --linfoot")
    p.add_argument("--n", type=int, required=True, help="number of observations")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("featurize", help="56 features + 50x50 heatmap per input CSV")
    p.add_argument("inputs", nargs="+", help="x,y CSV files")
    _common(p, "unused; accepted for uniformity")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train Model 1, 2 or 3 and write the model file plus <out>.loss.csv")
    p.add_argument("--model", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--corpus", default="desk",
                   help="small | desk | full (50/800/4000 datasets per cell) or an interchange file with targets")
    p.add_argument("--per-cell", type=int, default=None, help="override the preset's datasets per cell")
    p.add_argument("--validation", default="small",
                   help="validation corpus: preset name or interchange file; 'none' to skip")
    p.add_argument("--validation-per-cell", type=int, default=None)
    p.add_argument("--save-corpus", default=None, help="also write the training corpus interchange file")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=None,
                   help="default: corpus size / 32 (the full protocol's 32 batches of 1000 per epoch)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="estimate the Linfoot correlation of an x,y CSV")
    p.add_argument("input")
    _estimator_flags(p)
    _common(p, "seed for stochastic methods (mine)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="simulation grid report (mean, sd, bias per cell)")
    p.add_argument("--methods", default="fnn", help="comma list of methods (may include model, pretrained)")
    p.add_argument("--model", default=None, help="model file for the 'model' method")
    p.add_argument("--copulas", default="gaussian,clayton")
    p.add_argument("--levels", default="0,0.2,0.4,0.6,0.8,0.99")
    p.add_argument("--sizes", default="100,200,500,1000")
    p.add_argument("--reps", type=int, default=200, help="replications per cell")
    _common(p, "base seed of the grid")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("bootstrap", help="percentile bootstrap interval for an x,y CSV")
    p.add_argument("input")
    _estimator_flags(p)
    p.add_argument("--B", type=int, default=1000, help="number of resamples (>= 100)")
    p.add_argument("--alpha", type=float, default=0.05, help="1 - confidence level")
    _common(p, "resampling seed")
    p.set_defaults(func=cmd_bootstrap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "validation", None) == "none":
        args.validation = None
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"linfoot: error: {exc}\n")
    except LinfootError as exc:
        print(f"linfoot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"linfoot: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
