"""Command-line entry point: train, predict, simulate, analyze, gen-trace."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .cache import POLICIES, CacheConfig, checkpoint_interval, stats_document
from .dataset import DatasetError, distinct_labels, format_number, load_libsvm
from .kernels import KERNELS, KernelParams
from .model import ModelFormatError, OneVsAllModel, load_model, save_model
from .simulator import SIM_POLICIES, comparison_csv, compare_strategies
from .solver import SolverConfig, make_cache, train_binary, train_multioutput
from .trace import (
    AccessTrace,
    TraceError,
    cdf_csv,
    diff_csv,
    frequency_difference_by_stage,
    load_trace,
    reuse_interval_cdf_by_stage,
    save_trace,
)
from .workloads import round_robin_trace, two_phase_trace, zipf_trace

log = logging.getLogger("kcache")

# LIBSVM numeric kernel codes that have a counterpart here
_KERNEL_CODES = {"0": "linear", "2": "gaussian", "rbf": "gaussian", "3": "sigmoid"}


class CliError(Exception):
    pass


def _kernel_kind(text: str) -> str:
    kind = _KERNEL_CODES.get(text, text)
    if kind not in KERNELS:
        raise argparse.ArgumentTypeError(f"unknown kernel {text!r} (choose from {', '.join(KERNELS)})")
    return kind


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return val


def resolve_workers(flag: int | None) -> int:
    """--workers, else KCACHE_WORKERS, else 1."""
    if flag is not None:
        return flag
    env = os.environ.get("KCACHE_WORKERS")
    if env is None or env == "":
        return 1
    try:
        val = int(env)
    except ValueError:
        raise CliError(f"KCACHE_WORKERS is not an integer: {env!r}") from None
    if val < 1:
        raise CliError(f"KCACHE_WORKERS must be >= 1, got {val}")
    return val


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _add_cache_flags(p: argparse.ArgumentParser, policies, default_policy: str) -> None:
    p.add_argument("--cache", default=default_policy, help=f"policy: {', '.join(policies)}")
    p.add_argument("-m", dest="capacity", type=_positive_int, default=512, help="cache capacity in kernel rows")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0, help="checkpoint spacing factor for hcst")
    p.add_argument("--workers", type=_positive_int, default=None, help="replacement workers p (env KCACHE_WORKERS)")
    p.add_argument("--reuse-unit", choices=("iterations", "accesses"), default="iterations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcache", description="SMO training with a policy-driven kernel-row cache.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train a binary or one-vs-all model")
    tr.add_argument("data")
    tr.add_argument("model")
    tr.add_argument("-t", dest="kernel", type=_kernel_kind, default="gaussian", help="linear|gaussian|sigmoid (or 0|2|3)")
    tr.add_argument("-g", dest="gamma", type=float, default=None, help="gamma (default 1/d)")
    tr.add_argument("-r", dest="coef0", type=float, default=0.0, help="coef0 for the sigmoid kernel")
    tr.add_argument("-c", dest="C", type=float, default=1.0, help="box constraint C")
    tr.add_argument("-e", dest="eps", type=float, default=1e-3, help="termination tolerance")
    tr.add_argument("-q", type=int, default=64, help="new violators per iteration (even)")
    tr.add_argument("--max-outer", type=_positive_int, default=None)
    tr.add_argument("--max-inner", type=_positive_int, default=10000)
    tr.add_argument("--dim", type=_positive_int, default=None, help="feature dimension (never lowers the inferred one)")
    tr.add_argument("--multilabel", action="store_true", help="comma-separated label sets")
    tr.add_argument("--stages", type=_positive_int, default=4)
    tr.add_argument("--trace", default=None, help="write the access trace here")
    tr.add_argument("--stats", default=None, help="write the stats JSON here")
    _add_cache_flags(tr, POLICIES, "hcst")

    pr = sub.add_parser("predict", help="predict with a trained model")
    pr.add_argument("data")
    pr.add_argument("model")
    pr.add_argument("output")
    pr.add_argument("--dim", type=_positive_int, default=None)
    pr.add_argument("--multilabel", action="store_true")

    sm = sub.add_parser("simulate", help="replay a trace under cache policies and OPT")
    sm.add_argument("--trace", required=True)
    sm.add_argument("-o", "--output", default=None, help="comparison CSV (default stdout)")
    _add_cache_flags(sm, ("all",) + SIM_POLICIES, "all")

    an = sub.add_parser("analyze", help="reuse-interval and frequency statistics of a trace")
    an.add_argument("--trace", required=True)
    an.add_argument("--stages", type=_positive_int, default=4)
    an.add_argument("-m", dest="capacity", type=_positive_int, default=512, help="cache capacity s for the interval levels")
    an.add_argument("--unit", choices=("iterations", "accesses"), default="iterations")
    an.add_argument("--cdf", default=None, help="stage CDF CSV (default stdout)")
    an.add_argument("--diff", default=None, help="frequency-difference CSV (default stdout)")

    gt = sub.add_parser("gen-trace", help="write a synthetic trace")
    gt.add_argument("kind", choices=("zipf", "two-phase", "round-robin"))
    gt.add_argument("-o", "--output", required=True)
    gt.add_argument("--items", type=_positive_int, default=10000)
    gt.add_argument("--accesses", type=_positive_int, default=100000)
    gt.add_argument("--alpha", type=float, default=1.2)
    gt.add_argument("--batch", type=_positive_int, default=1)
    gt.add_argument("--rounds", type=_positive_int, default=10)
    gt.add_argument("-m", dest="capacity", type=_positive_int, default=1000, help="cache size the two-phase trace targets")
    gt.add_argument("--seed", type=int, default=0)
    return parser


def _effective_config(args, params: KernelParams, workers: int, n: int, d: int, labels) -> dict:
    return {
        "kernel": params.kind,
        "gamma": params.gamma,
        "coef0": params.coef0,
        "C": params.C,
        "eps": args.eps,
        "q": args.q,
        "n": n,
        "d": d,
        "labels": [format_number(v) for v in labels],
        "policy": args.cache,
        "capacity": args.capacity,
        "lambda": args.lam,
        "workers": workers,
        "reuse_unit": args.reuse_unit,
        "checkpoint_interval": checkpoint_interval(args.lam, args.capacity, args.q),
    }


def cmd_train(args) -> int:
    if args.cache not in POLICIES:
        raise CliError(f"unknown cache policy {args.cache!r} (choose from {', '.join(POLICIES)})")
    workers = resolve_workers(args.workers)
    ds = load_libsvm(args.data, d=args.dim, multilabel=args.multilabel)
    gamma = args.gamma if args.gamma is not None else 1.0 / max(ds.d, 1)
    try:
        params = KernelParams(args.kernel, gamma, args.coef0, args.C)
        cfg = SolverConfig(params, q=args.q, eps=args.eps, max_outer=args.max_outer, max_inner=args.max_inner, workers=workers)
        cache = make_cache(ds.n, cfg, args.cache, args.capacity, args.lam, workers, args.reuse_unit)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    labels = distinct_labels(ds)
    print(json.dumps(_effective_config(args, params, workers, ds.n, ds.d, labels)))

    try:
        if ds.label_sets is None and len(labels) == 2:
            # first-appearing label is the positive side
            y = np.where(ds.labels == labels[0], 1.0, -1.0)
            res = train_binary(ds, y, cfg, cache, labels=(labels[0], labels[1]))
            model, stats, trace = res.model, res.stats, res.trace
            converged = res.converged
            iterations = trace.T
        else:
            multi = train_multioutput(ds, cfg, cache)
            model, stats = multi.model, multi.stats
            trace = _concat_traces(multi.results, ds.n, cfg.q)
            converged = all(r.converged for r in multi.results)
            iterations = trace.T
    finally:
        cache.close()

    save_model(model, args.model)
    if args.trace:
        save_trace(trace, args.trace)
    doc = stats_document(stats, CacheConfig(args.capacity, args.cache, args.lam, workers, args.q, args.reuse_unit), args.stages)
    if args.stats:
        _write_text(args.stats, _dump_json(doc))
    n_sv = len(model.sv) if not isinstance(model, OneVsAllModel) else len({i for m in model.models for i in m.sv_indices.tolist()})
    print(
        f"iterations={iterations} converged={str(converged).lower()} total_sv={n_sv} "
        f"accesses={stats.accesses} hits={stats.hits} hit_ratio={stats.hit_ratio:.6f} switches={stats.switches}"
    )
    return 0


def _concat_traces(results, n: int, q: int) -> AccessTrace:
    """One trace on the shared cache clock across sequential solvers."""
    out = AccessTrace(n=n, q=q)
    for r in results:
        t = r.trace
        out.iterations.extend(it + t.origin for it in t.iterations)
        out.rows.extend(t.rows)
    out.total_iterations = results[-1].trace.origin + results[-1].trace.T if results else 0
    return out


def cmd_predict(args) -> int:
    ds = load_libsvm(args.data, d=args.dim, multilabel=args.multilabel)
    model = load_model(args.model)
    if args.multilabel:
        if not isinstance(model, OneVsAllModel):
            raise CliError("--multilabel needs a one-vs-all model")
        sets = model.predict_label_sets(ds)
        _write_text(args.output, "".join(",".join(format_number(v) for v in s) + "\n" for s in sets))
        truth = ds.label_sets or [()] * ds.n
        correct = sum(set(a) == set(b) for a, b in zip(sets, truth))
    else:
        pred = model.predict(ds)
        _write_text(args.output, "".join(format_number(v) + "\n" for v in pred))
        correct = int((pred == ds.labels).sum())
    print(f"accuracy={correct / ds.n:.6f} ({correct}/{ds.n})")
    return 0


def cmd_simulate(args) -> int:
    if args.cache != "all" and args.cache not in SIM_POLICIES:
        raise CliError(f"unknown cache policy {args.cache!r} (choose from all, {', '.join(SIM_POLICIES)})")
    workers = resolve_workers(args.workers)
    trace = load_trace(args.trace)
    policies = SIM_POLICIES if args.cache == "all" else (args.cache,)
    N_c = checkpoint_interval(args.lam, args.capacity, max(trace.q, 1))
    print(
        json.dumps(
            {
                "trace": args.trace,
                "policies": list(policies) + ["opt"],
                "capacity": args.capacity,
                "lambda": args.lam,
                "workers": workers,
                "reuse_unit": args.reuse_unit,
                "checkpoint_interval": N_c,
            }
        ),
        file=sys.stderr if args.output in (None, "-") else sys.stdout,
    )
    rows = compare_strategies(trace, args.capacity, args.lam, workers, policies, reuse_unit=args.reuse_unit)
    _write_text(args.output, comparison_csv(rows))
    return 0


def cmd_analyze(args) -> int:
    trace = load_trace(args.trace)
    cdfs = reuse_interval_cdf_by_stage(trace, args.stages, args.capacity, args.unit)
    text = cdf_csv(cdfs)
    diff = diff_csv(frequency_difference_by_stage(trace, args.stages)) if args.stages >= 2 else None
    if args.cdf is None and args.diff is None:
        sys.stdout.write(text)
        if diff is not None:
            sys.stdout.write("\n" + diff)
        return 0
    _write_text(args.cdf, text)
    if diff is not None:
        _write_text(args.diff, diff)
    return 0


def cmd_gen_trace(args) -> int:
    if args.kind == "zipf":
        trace = zipf_trace(args.items, args.accesses, args.alpha, args.seed, args.batch)
    elif args.kind == "two-phase":
        trace = two_phase_trace(args.capacity, alpha=args.alpha, seed=args.seed)
    else:
        trace = round_robin_trace(args.items, args.rounds, args.batch, seed=args.seed)
    save_trace(trace, args.output)
    print(f"wrote {len(trace)} accesses over {trace.T} iterations (n={trace.n}, q={trace.q}) to {args.output}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "gen-trace": cmd_gen_trace,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"kcache: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DatasetError, TraceError, ModelFormatError, ValueError) as exc:
        print(f"kcache: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
