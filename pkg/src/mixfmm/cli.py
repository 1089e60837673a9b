"""Command-line interface.

Subcommands cover the full pipeline: simulate, detect, segment, fit,
cluster, select-k, baseline, score, run. Every command exits 0 on
success; on failure a single JSON line with the error type and message
goes to stderr and the exit code is nonzero. Identical flags and seeds
always produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io as mio
from .baselines import pca_kmeans
from .exceptions import MixFMMError
from .fit import FitConfig
from .metrics import accuracy, ball_hall, davies_bouldin, silhouette
from .mixture import EMConfig, fit_em, hard_labels, save_model
from .pipeline import (DEFAULT_ALIGN_AT, DEFAULT_THRESHOLD_C, DEFAULT_WINDOW,
                       GeneratorSpec, Recording, SpikeSet, detect_spikes,
                       fit_single_curve, generate, run_experiment, segment)
from .presets import benchmark_spec
from .selection import select_k
from .waves import FMMModel, FMMWave


def _add_em_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--starts", type=int, default=10, help="EM restarts (default 10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--homoscedastic", action=argparse.BooleanOptionalAction,
                   default=True, help="share one noise level across clusters")
    p.add_argument("--backfit-passes", type=int, default=10,
                   help="max backfitting passes of each inner wave fit")


def _em_config(args) -> EMConfig:
    return EMConfig(max_iter=args.max_iter, n_starts=args.starts, seed=args.seed,
                    homoscedastic=args.homoscedastic)


def _fit_config(args) -> FitConfig:
    return FitConfig(backfit_max_passes=args.backfit_passes)


def _templates_from_json(doc: dict) -> list[FMMModel]:
    return [
        FMMModel(intercept=t.get("intercept", 0.0),
                 waves=tuple(FMMWave(amplitude=w["amplitude"], alpha=w["alpha"],
                                     beta=w["beta"], omega=w["omega"])
                             for w in t["waves"]))
        for t in doc["templates"]
    ]


def _cmd_simulate(args) -> int:
    if args.spec:
        with open(args.spec) as fh:
            doc = json.load(fh)
        spec = GeneratorSpec(
            templates=_templates_from_json(doc),
            counts=[int(c) for c in doc["counts"]],
            noise_sigma=float(doc["noise_sigma"]),
            jitter=float(doc.get("jitter", 0.0)),
            amplitude_scatter=float(doc.get("amplitude_scatter", 0.0)),
            seed=args.seed, n_points=int(doc.get("n_points", DEFAULT_WINDOW)))
    else:
        spec = benchmark_spec(n_per_class=tuple(args.n_per_class),
                              noise_sigma=args.noise, jitter=args.jitter,
                              amplitude_scatter=args.scatter, seed=args.seed)
    spikes = generate(spec)
    mio.write_signals(args.out, spikes.values(), labels=spikes.true_labels)
    print(f"wrote {spikes.n} labeled signals to {args.out}")
    return 0


def _cmd_detect(args) -> int:
    rec = Recording(samples=mio.read_trace_samples(args.input))
    peaks = detect_spikes(rec, c=args.threshold_c, window=args.window)
    mio.write_peaks(args.out, peaks)
    print(f"detected {peaks.size} peak(s); wrote {args.out}")
    return 0


def _cmd_segment(args) -> int:
    rec = Recording(samples=mio.read_trace_samples(args.input))
    peaks = mio.read_peaks(args.peaks)
    spikes = segment(rec, peaks, window=args.window, align_at=args.align_at)
    mio.write_signals(args.out, spikes.values())
    print(f"wrote {spikes.n} signal(s) to {args.out} ({spikes.provenance})")
    return 0


def _cmd_fit(args) -> int:
    X, _ = mio.read_signals(args.input, labeled=args.labeled)
    if not 0 <= args.row < X.shape[0]:
        raise ValueError(f"--row {args.row} out of range for {X.shape[0]} signals")
    result = fit_single_curve(X[args.row], m=args.m,
                              fit_cfg=FitConfig(backfit_max_passes=args.backfit_passes))
    doc = {
        "intercept": result.model.intercept,
        "waves": [{"amplitude": w.amplitude, "alpha": w.alpha,
                   "beta": w.beta, "omega": w.omega} for w in result.model.waves],
        "rss": result.rss,
        "r_squared": result.r_squared,
        "passes_used": result.passes_used,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"fit m={args.m} r_squared={result.r_squared:.6f} -> {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    X, true_labels = mio.read_signals(args.input, labeled=args.labeled)
    spikes = SpikeSet.from_matrix(X, labels=true_labels)
    model, tau = fit_em(X, spikes.grid, args.k, args.m,
                        _em_config(args), _fit_config(args))
    labels = hard_labels(tau)
    os.makedirs(args.out_dir, exist_ok=True)
    mio.write_labels(os.path.join(args.out_dir, "labels.csv"), labels)
    save_model(model, os.path.join(args.out_dir, "model.json"))
    metrics = {}
    if true_labels is not None:
        metrics["accuracy"] = accuracy(labels, true_labels)
    metrics["ball_hall"] = ball_hall(X, labels)
    if args.k >= 2:
        metrics["davies_bouldin"] = davies_bouldin(X, labels)
        metrics["asw"] = silhouette(X, labels)[0]
    mio.write_metrics_table(os.path.join(args.out_dir, "metrics.csv"), metrics)
    mio.write_templates(os.path.join(args.out_dir, "templates.csv"),
                        spikes.grid, model.mean_curves(spikes.grid))
    print(f"clustered n={X.shape[0]} into k={args.k} "
          f"(logL={model.log_likelihood:.3f}) -> {args.out_dir}")
    return 0


def _cmd_select_k(args) -> int:
    X, _ = mio.read_signals(args.input, labeled=args.labeled)
    spikes = SpikeSet.from_matrix(X)
    trace, _ = select_k(X, spikes.grid, args.m, args.k_max,
                        _em_config(args), _fit_config(args), rho=args.rho,
                        asw_tiebreak=args.asw_tiebreak)
    mio.write_selection_trace(args.out, trace)
    note = " (fallback to k_max; no elbow found)" if trace.fallback else ""
    print(f"chosen k = {trace.chosen_k}{note}; trace -> {args.out}")
    return 0


def _cmd_baseline(args) -> int:
    X, true_labels = mio.read_signals(args.input, labeled=args.labeled)
    labels, _, wss = pca_kmeans(X, args.k, q=args.q,
                                n_starts=args.starts, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    mio.write_labels(os.path.join(args.out_dir, "labels.csv"), labels)
    metrics = {}
    if true_labels is not None:
        metrics["accuracy"] = accuracy(labels, true_labels)
    metrics["ball_hall"] = ball_hall(X, labels)
    if args.k >= 2:
        metrics["davies_bouldin"] = davies_bouldin(X, labels)
        metrics["asw"] = silhouette(X, labels)[0]
    mio.write_metrics_table(os.path.join(args.out_dir, "metrics.csv"), metrics)
    print(f"pca+km k={args.k} within_ss={wss:.6g} -> {args.out_dir}")
    return 0


def _cmd_score(args) -> int:
    X, embedded = mio.read_signals(args.input, labeled=args.labeled)
    labels = mio.read_labels(args.labels)
    true_labels = embedded
    if args.true_labels:
        true_labels = mio.read_labels(args.true_labels)
    metrics = {}
    if true_labels is not None:
        metrics["accuracy"] = accuracy(labels, true_labels)
    metrics["ball_hall"] = ball_hall(X, labels)
    if len(set(labels.tolist())) >= 2:
        metrics["davies_bouldin"] = davies_bouldin(X, labels)
        metrics["asw"] = silhouette(X, labels)[0]
    mio.write_metrics_table(args.out, metrics)
    for name, value in metrics.items():
        print(f"{name} = {value:.6f}")
    return 0


def _cmd_run(args) -> int:
    X, true_labels = mio.read_signals(args.input, labeled=args.labeled)
    spikes = SpikeSet.from_matrix(X, labels=true_labels)
    k = "auto" if args.k == "auto" else int(args.k)
    report = run_experiment(spikes, args.method, k=k, out_dir=args.out_dir,
                            em_cfg=_em_config(args), fit_cfg=_fit_config(args),
                            rho=args.rho, k_max=args.k_max, q=args.q)
    summary = ", ".join(f"{k_}={v:.4f}" for k_, v in report.metrics.items())
    print(f"method={report.method} k={report.k_used} {summary} -> {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixfmm",
        description="Wave-mixture clustering of oscillatory signals and a "
                    "spike-sorting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled synthetic spike set")
    p.add_argument("--spec", help="generator spec JSON (overrides the preset)")
    p.add_argument("--n-per-class", type=int, nargs="+", default=[100, 100, 100])
    p.add_argument("--noise", type=float, default=None,
                   help="per-sample noise sigma (default: 20%% of template RMS)")
    p.add_argument("--jitter", type=float, default=0.04)
    p.add_argument("--scatter", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="find spike peaks in a raw trace")
    p.add_argument("--input", required=True, help="trace file, one sample per line")
    p.add_argument("--threshold-c", type=float, default=DEFAULT_THRESHOLD_C)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("segment", help="cut aligned windows around peaks")
    p.add_argument("--input", required=True)
    p.add_argument("--peaks", required=True)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--align-at", type=int, default=DEFAULT_ALIGN_AT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("fit", help="fit a wave model to one curve")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true",
                   help="input has a trailing label column")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--backfit-passes", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("cluster", help="mixture-model clustering")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=3)
    _add_em_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("select-k", help="choose the number of clusters")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--asw-tiebreak", action="store_true")
    _add_em_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select_k)

    p = sub.add_parser("baseline", help="PCA + k-means clustering")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--q", type=int, default=4, help="number of principal components")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("score", help="validity indices for an existing labeling")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true",
                   help="take true labels from the input's trailing column")
    p.add_argument("--labels", required=True, help="predicted labels file")
    p.add_argument("--true-labels", help="true labels file (overrides --labeled)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("run", help="full experiment: cluster, score, export")
    p.add_argument("--input", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--method", choices=["mixfmm1", "mixfmm3", "pca_km"],
                   required=True)
    p.add_argument("--k", default="auto", help="cluster count or 'auto'")
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--q", type=int, default=4)
    _add_em_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MixFMMError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
