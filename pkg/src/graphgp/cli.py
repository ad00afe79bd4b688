"""Command-line driver: ``graphgp {synth,fit,predict,eval,spectrum,graph}``.

Every option can also be given in a flat ``key = value`` file passed with
``--config``; command-line flags take precedence. Exit codes: 0 success,
2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import DegenerateError, FileFormatError, GraphGPError, ValidationError
from .gp import TrainingSet, posterior_predict, test_log_likelihood
from .graph import Graph, knn_graph, random_graph, threshold_graph
from .io import (
    ModelArtifact,
    atomic_write,
    fmt,
    keyvalue_text,
    load_model,
    read_coords,
    read_edge_list,
    read_inputs,
    read_keyvalue,
    read_matrix,
    read_signals,
    save_model,
    write_edge_list,
    write_inputs,
    write_matrix,
    write_signals,
)
from .kernels import (
    BaselineGraphKernel,
    InputKernel,
    evaluate_spectrum,
    scale_polynomial,
)
from .learner import FitReport, OptimizerConfig, fit_baseline, fit_polynomial, nll_gradient
from .synth import GroundTruthFilter, generate_filtered_signals, generate_wishart_dataset

log = logging.getLogger("graphgp")

_OPT_KEYS = {
    "lr_beta": float, "lr_lagrange": float, "lr_lengthscale": float, "lr_noise": float,
    "lr_alpha": float, "lr_variance": float, "max_outer": int, "inner_steps": int,
    "max_iter": int, "tol": float, "patience": int, "max_halvings": int,
    "grid_max_candidates": int,
}


# ---------------------------------------------------------------------------
# graph specs


def parse_graph_spec(spec: str, seed: int = 0) -> Graph:
    """Build a graph from a source string.

    ``sensor[:n[,k]]``, ``ba[:n,m0,m]``, ``edgelist:PATH``, ``knn:PATH:k`` or
    ``threshold:PATH:distance``.
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "sensor":
            vals = [int(v) for v in rest.split(",") if v]
            params = dict(zip(("n", "k"), vals))
            return random_graph("sensor", params, seed)
        if kind in ("ba", "barabasi_albert"):
            vals = [int(v) for v in rest.split(",") if v]
            params = dict(zip(("n", "m0", "m"), vals))
            return random_graph("barabasi_albert", params, seed)
        if kind == "edgelist":
            return read_edge_list(rest)
        if kind in ("knn", "threshold"):
            path, _, param = rest.rpartition(":")
            if not path:
                raise ValidationError(f"{kind} source needs PATH:{'k' if kind == 'knn' else 'distance'}")
            coords = read_coords(path)
            if kind == "knn":
                return knn_graph(coords, int(param))
            return threshold_graph(coords, float(param))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad graph spec {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown graph source {spec!r}")


# ---------------------------------------------------------------------------
# evaluation helpers


def fold_indices(num_test: int, folds: int | None = None, fold_size: int | None = None):
    """Contiguous folds over the test signals.

    ``folds`` splits into that many near-equal blocks; ``fold_size`` makes
    blocks of exactly that many signals and drops any remainder.
    """
    if (folds is None) == (fold_size is None):
        raise ValidationError("give exactly one of folds and fold_size")
    if folds is not None:
        if folds < 1:
            raise ValidationError("fold count must be at least 1")
        if folds > num_test:
            raise ValidationError(f"{folds} folds but only {num_test} test signals")
        return [np.asarray(f) for f in np.array_split(np.arange(num_test), folds)]
    if fold_size < 1 or fold_size > num_test:
        raise ValidationError(f"fold size must lie in 1..{num_test}")
    n = num_test // fold_size
    return [np.arange(k * fold_size, (k + 1) * fold_size) for k in range(n)]


def score_folds(h, training: TrainingSet, graph: Graph, X_test, Y_test, folds) -> dict:
    """Joint posterior log-likelihood per fold, with mean and standard error.

    The standard error is the sample standard deviation across folds over
    sqrt(number of folds); a single fold reports 0 and a warning.
    """
    values = []
    for idx in folds:
        post = posterior_predict(h, training, graph, X_test[idx])
        values.append(test_log_likelihood(post, Y_test[idx]))
    values = np.array(values)
    k = values.size
    if k > 1:
        stderr, warning = float(np.std(values, ddof=1) / np.sqrt(k)), ""
    else:
        stderr, warning = 0.0, "single fold: standard error undefined, reported as 0"
    return {"values": values, "sizes": [len(f) for f in folds], "mean": float(values.mean()),
            "stderr": stderr, "warning": warning}


def spectrum_table(h, graph: Graph, grid_step: float = 0.01) -> np.ndarray:
    """Rows ``(lambda, g, g_scaled, is_eigenvalue)`` on a grid plus the graph eigenvalues.

    Polynomial models use the scaled Laplacian on [0, 1]. Spectral baselines
    report ``sqrt`` of their Gram transfer function over their own
    Laplacian's eigenvalue range, so that ``g**2`` is always the Gram spectrum.
    """
    if not 0 < grid_step <= 1:
        raise ValidationError("grid step must lie in (0, 1]")
    n = int(round(1.0 / grid_step))
    if h.is_polynomial:
        sd = graph.spectrum("scaled")
        grid = np.minimum(np.arange(n + 1) * grid_step, 1.0)
        lam = np.concatenate([grid, sd.eigenvalues])
        g = evaluate_spectrum(h.output, lam)
        _, c = scale_polynomial(h.output)
        scaled = g / c
    else:
        b = h.output
        if b.laplacian_variant is None:
            raise ValidationError(f"{b.kind} kernel has no spectral transfer function to export")
        sd = graph.spectrum(b.laplacian_variant)
        top = sd.eigenvalues[-1]
        grid = np.minimum(np.arange(n + 1) * grid_step, 1.0) * top
        lam = np.concatenate([grid, sd.eigenvalues])
        g = np.sqrt(np.clip(b.transfer(lam), 0.0, None))
        peak = g.max()
        if not peak > 0:
            raise DegenerateError("baseline spectrum is identically zero")
        scaled = g / peak
    flag = np.concatenate([np.zeros(n + 1), np.ones(sd.size)])
    return np.column_stack([lam, g, scaled, flag])


def fit_report_text(report: FitReport | None, h, lml: float, extra: dict) -> str:
    lines = ["# fit report"]
    for k, v in extra.items():
        lines.append(f"{k} = {v}")
    lines.append(f"log_marginal_likelihood = {fmt(lml)}")
    lines.append(f"noise = {fmt(h.noise)}")
    lines.append(f"input_kernel = {h.input.kind}")
    lines.append(f"lengthscale = {fmt(h.input.lengthscale)}")
    lines.append(f"input_variance = {fmt(h.input.variance)}")
    if h.is_polynomial:
        lines.append("beta = " + ",".join(fmt(b) for b in h.output.coefficients))
    else:
        lines.append(f"baseline = {h.output.kind}")
        lines.append(f"alpha = {fmt(h.output.alpha)}")
        lines.append(f"p = {h.output.p}")
    if report is not None:
        lines.append(f"constrained = {str(report.constrained).lower()}")
        lines.append(f"feasible = {str(report.feasible).lower()}")
        lines.append(f"converged = {str(report.converged).lower()}")
        lines.append(f"min_spectrum = {fmt(report.min_spectrum)}")
        lines.append(f"repair_shift = {fmt(report.repair_shift)}")
        if not report.feasible:
            lines.append("warning = spectrum is negative at some eigenvalues; "
                         "B is not a valid graph filter")
        init = report.initialization
        if init is not None:
            lines.append("")
            lines.append("# initialization")
            lines.append(f"init_lengthscale = {fmt(init.lengthscale)}")
            lines.append(f"init_signal_variance = {fmt(init.signal_variance)}")
            lines.append(f"grid_candidates = {init.log_likelihoods.size}")
            lines.append(f"grid_exhaustive = {str(init.exhaustive).lower()}")
            lines.append("# grid_rank = beta;...,noise,log_likelihood")
            for r, (beta, noise, ll) in enumerate(init.top(10)):
                lines.append(f"grid_{r} = " + ";".join(fmt(b) for b in beta)
                             + f",{fmt(noise)},{fmt(ll)}")
        lines.append("")
        lines.append("# trace: iteration = lagrangian,neg_log_likelihood,max_violation")
        for row in report.trace:
            lines.append(f"trace_{int(row[0])} = {fmt(row[1])},{fmt(row[2])},{fmt(row[3])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def _write_manifest(out: Path, args, config: dict) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items())
                if k != "func" and not k.startswith("_")}
    blob = json.dumps(resolved, sort_keys=True, default=str)
    manifest = {
        "command": ["graphgp"] + list(args._argv),
        "config": resolved,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "config_file": config,
        "seed": getattr(args, "seed", None),
        "versions": {"graphgp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True,
                                                   default=str) + "\n")


def cmd_synth(args) -> int:
    out = Path(args.out)
    graph = parse_graph_spec(args.graph, args.graph_seed if args.graph_seed is not None
                             else args.seed)
    theta = GroundTruthFilter.parse(args.filter)
    snr = None if str(args.snr).lower() == "none" else float(args.snr)
    if args.mode == "wishart":
        ds = generate_wishart_dataset(graph, theta, args.n, args.seed, snr)
    else:
        ds = generate_filtered_signals(graph, theta, args.n, snr, args.seed)
    hold = args.holdout
    if not 0 <= hold < ds.num_signals:
        raise ValidationError(f"holdout must lie in 0..{ds.num_signals - 1}")
    cut = ds.num_signals - hold
    write_signals(out / "signals.csv", ds.Y[:cut])
    write_inputs(out / "inputs.csv", ds.X[:cut])
    if hold:
        write_signals(out / "signals_test.csv", ds.Y[cut:])
        write_inputs(out / "inputs_test.csv", ds.X[cut:])
    if ds.input_covariance is not None:
        write_matrix(out / "input_cov.csv", ds.input_covariance, "c")
    write_edge_list(out / "graph.edges", graph)
    prov = ds.provenance()
    prov.update(graph=args.graph, holdout=hold)
    atomic_write(out / "provenance.txt", keyvalue_text(prov))
    return 0


def _optimizer_config(args) -> OptimizerConfig:
    kw = {k: getattr(args, k) for k in _OPT_KEYS if getattr(args, k, None) is not None}
    return OptimizerConfig(seed=args.seed, **kw)


def _input_kernel(args, n_train: int) -> InputKernel:
    kind = args.input_kernel or ("se" if args.inputs else "identity")
    if kind == "precomputed":
        if not args.input_cov:
            raise ValidationError("--input-cov is required for the precomputed input kernel")
        return InputKernel("precomputed", matrix=read_matrix(args.input_cov, "c"))
    return InputKernel(kind)


def _training_set(args) -> TrainingSet:
    Y = read_signals(args.signals)
    X = read_inputs(args.inputs) if args.inputs else np.arange(Y.shape[0], dtype=float)[:, None]
    return TrainingSet(X, Y)


def cmd_fit(args) -> int:
    out = Path(args.out)
    graph = parse_graph_spec(args.graph, args.seed)
    data = _training_set(args)
    if data.num_nodes != graph.num_nodes:
        raise ValidationError(f"signals have {data.num_nodes} nodes, graph has {graph.num_nodes}")
    cfg = _optimizer_config(args)
    inp = _input_kernel(args, data.num_signals)
    learn_noise = {"auto": None, "yes": True, "no": False}[args.learn_noise]
    extra = {}
    if args.kernel:
        kernel = BaselineGraphKernel(args.kernel, args.alpha if args.alpha else 1.0, args.p)
        h = fit_baseline(data, graph, kernel, cfg, inp)
        report = None
        extra["model"] = f"baseline:{h.output.kind}"
    else:
        report = fit_polynomial(data, graph, args.degree, cfg, args.spectrum_hint, inp,
                                constrained=not args.unconstrained, learn_noise=learn_noise)
        h = report.hyperparameters
        extra["model"] = f"polynomial:{args.degree}"
    lml = -nll_gradient(h, data, graph, names=[])[0]
    info = {"model": extra["model"], "log_marginal_likelihood": lml}
    if report is not None:
        info.update(feasible=report.feasible, converged=report.converged,
                    constrained=report.constrained)
    save_model(out / "model.json", ModelArtifact(h, data, graph.fingerprint(), info=info))
    atomic_write(out / "fit_report.txt", fit_report_text(report, h, lml, extra))
    return 0


def _load_for_prediction(args):
    art = load_model(args.model)
    graph = parse_graph_spec(args.graph, args.seed)
    art.check_graph(graph)
    return art, graph


def cmd_predict(args) -> int:
    out = Path(args.out)
    art, graph = _load_for_prediction(args)
    X = read_inputs(args.inputs)
    post = posterior_predict(art.hyperparameters, art.training, graph, X)
    write_signals(out / "predictions.csv", post.mean)
    var = np.array([np.diag(post.covariance(t)) for t in range(post.num_test)])
    write_signals(out / "predictive_variance.csv", var)
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    art, graph = _load_for_prediction(args)
    Y = read_signals(args.signals)
    X = read_inputs(args.inputs) if args.inputs else np.arange(Y.shape[0], dtype=float)[:, None]
    if X.shape[0] != Y.shape[0]:
        raise ValidationError(f"{X.shape[0]} test inputs but {Y.shape[0]} test signals")
    folds = fold_indices(Y.shape[0], None if args.fold_size else args.folds, args.fold_size)
    res = score_folds(art.hyperparameters, art.training, graph, X, Y, folds)
    rows = ["fold,num_signals,log_likelihood"]
    rows += [f"{k},{n},{fmt(v)}" for k, (n, v) in enumerate(zip(res["sizes"], res["values"]))]
    atomic_write(out / "metrics.csv", "\n".join(rows) + "\n")
    summary = {"folds": len(folds), "mean": fmt(res["mean"]), "stderr": fmt(res["stderr"]),
               "warning": res["warning"] or "none"}
    atomic_write(out / "metrics_summary.txt", keyvalue_text(summary))
    return 0


def cmd_spectrum(args) -> int:
    out = Path(args.out)
    art, graph = _load_for_prediction(args)
    table = spectrum_table(art.hyperparameters, graph, args.grid_step)
    lines = ["lambda,g,g_scaled,is_eigenvalue"]
    lines += [f"{fmt(a)},{fmt(b)},{fmt(c)},{int(d)}" for a, b, c, d in table]
    atomic_write(out / "spectrum.csv", "\n".join(lines) + "\n")
    return 0


def cmd_graph(args) -> int:
    graph = parse_graph_spec(args.graph, args.seed)
    sd = graph.spectrum("scaled")
    comb = graph.spectrum("combinatorial")
    summary = {
        "nodes": graph.num_nodes,
        "edges": graph.num_edges,
        "connected": str(graph.is_connected()).lower(),
        "lambda_max_combinatorial": fmt(comb.eigenvalues[-1]),
        "scaled_eigenvalues": ",".join(fmt(v) for v in sd.eigenvalues),
        "fingerprint": graph.fingerprint(),
    }
    text = keyvalue_text(summary)
    if args.out:
        out = Path(args.out)
        write_edge_list(out / "graph.edges", graph)
        atomic_write(out / "graph_summary.txt", text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphgp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="flat key = value file supplying defaults")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=False, default=None,
                       help="output directory" + (" (required)" if out_required else ""))
        p.set_defaults(_out_required=out_required)

    p = sub.add_parser("synth", help="generate a synthetic filtered-signal dataset")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--graph-seed", type=int, default=None)
    p.add_argument("--filter", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--snr", default=None)
    p.add_argument("--mode", choices=["independent", "wishart"], default=None)
    p.add_argument("--holdout", type=int, default=None)
    p.set_defaults(func=cmd_synth, _defaults=dict(graph="sensor:30", filter="lowpass-taylor",
                                                  n=50, snr="10", mode="independent",
                                                  holdout=0, seed=0))

    p = sub.add_parser("fit", help="learn a polynomial spectral kernel or fit a baseline")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--signals", default=None)
    p.add_argument("--inputs", default=None)
    p.add_argument("--input-kernel", choices=["se", "identity", "precomputed"], default=None)
    p.add_argument("--input-cov", default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--kernel", default=None, help="baseline kernel kind instead of a polynomial")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--unconstrained", action="store_const", const=True, default=None)
    p.add_argument("--spectrum-hint", choices=["lowpass", "general"], default=None)
    p.add_argument("--learn-noise", choices=["auto", "yes", "no"], default=None)
    for key, typ in _OPT_KEYS.items():
        p.add_argument("--" + key.replace("_", "-"), type=typ, default=None)
    p.set_defaults(func=cmd_fit, _defaults=dict(degree=3, p=1, unconstrained=False,
                                                spectrum_hint="lowpass", learn_noise="auto",
                                                seed=0))

    for name, func, helptext in (("predict", cmd_predict, "posterior mean and variances"),
                                 ("eval", cmd_eval, "per-fold posterior log-likelihoods"),
                                 ("spectrum", cmd_spectrum, "export the learnt spectrum")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--model", default=None)
        p.add_argument("--graph", default=None)
        defaults = dict(seed=0)
        if name in ("predict", "eval"):
            p.add_argument("--inputs", default=None)
        if name == "eval":
            p.add_argument("--signals", default=None)
            p.add_argument("--folds", type=int, default=None)
            p.add_argument("--fold-size", type=int, default=None)
            defaults["folds"] = 10
        if name == "spectrum":
            p.add_argument("--grid-step", type=float, default=None)
            defaults["grid_step"] = 0.01
        p.set_defaults(func=func, _defaults=defaults)

    p = sub.add_parser("graph", help="build and inspect a graph")
    common(p, out_required=False)
    p.add_argument("--graph", default=None)
    p.set_defaults(func=cmd_graph, _defaults=dict(seed=0))
    return parser


_REQUIRED = {
    "fit": ("graph", "signals"),
    "predict": ("model", "graph", "inputs"),
    "eval": ("model", "graph", "signals"),
    "spectrum": ("model", "graph"),
    "graph": ("graph",),
}


def resolve(args, parser) -> dict:
    """Fill unset options from the config file, then from built-in defaults."""
    config = read_keyvalue(args.config) if args.config else {}
    actions = {a.dest: a for sp in parser._subparsers._group_actions
               for a in sp.choices[args.command]._actions}
    for key, raw in config.items():
        if key not in actions or key in ("config", "help"):
            raise ValidationError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, key) is None:
            a = actions[key]
            if a.const is not None and a.nargs == 0:
                value = raw.lower() in ("1", "true", "yes")
            else:
                value = a.type(raw) if a.type else raw
                if a.choices and value not in a.choices:
                    raise ValidationError(f"config {key} must be one of {a.choices}")
            setattr(args, key, value)
    for key, value in args._defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    if args._out_required and not args.out:
        raise ValidationError("--out is required")
    for key in _REQUIRED.get(args.command, ()):
        if getattr(args, key) is None:
            raise ValidationError(f"--{key.replace('_', '-')} is required")
    return config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve(args, parser)
        args._argv = argv
        code = args.func(args)
        if args.out:
            _write_manifest(Path(args.out), args, config)
        return code
    except GraphGPError as exc:
        log.error("%s", exc)
        sys.stderr.write(f"graphgp: error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"graphgp: error: {exc}\n")
        return FileFormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
