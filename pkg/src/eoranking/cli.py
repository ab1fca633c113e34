"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 semantic or constraint error,
4 numerical failure (including a failed certificate check).
"""

from __future__ import annotations

import argparse
import contextlib
import sys

import numpy as np

from . import io as eio
from .core import delta_trace
from .errors import BadParams, EORError, InputError
from .policies import KINDS, PolicySpec, eor_ranking, rank

EXIT_OK, EXIT_INPUT, EXIT_SEMANTIC, EXIT_NUMERIC = 0, 2, 3, 4


@contextlib.contextmanager
def _open_in(path):
    if path in (None, "-"):
        yield sys.stdin
    else:
        try:
            fh = open(path, newline="")
        except OSError as e:
            raise InputError(f"cannot read {path}: {e.strerror}") from None
        with fh:
            yield fh


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as e:
            raise InputError(f"cannot write {path}: {e.strerror}") from None
        with fh:
            yield fh


def _load_pool(args):
    with _open_in(args.input) as fh:
        return eio.read_pool(fh)


def _policy(args, kind=None) -> PolicySpec:
    kind = kind or args.policy
    seed = args.seed if kind in ("uniform", "ts", "exp") else None
    return PolicySpec(kind, protected=args.protected, alpha=args.alpha, seed=seed, threshold=args.threshold)


def _emit(args, header, rows, payload=None):
    with _open_out(args.out) as fh:
        if getattr(args, "format", "csv") == "json":
            eio.dump_json(payload if payload is not None else [dict(zip(header, r)) for r in rows], fh)
        else:
            eio.write_rows(fh, header, rows)


def cmd_rank(args) -> int:
    pool = _load_pool(args)
    order = rank(pool, _policy(args), args.mode)
    if args.k is not None:
        _check_k(args.k, pool.n)
        order = order[: args.k]
    rows = [(r + 1, pool.ids[i], pool.group_names[pool.groups[i]], float(pool.probs[i])) for r, i in enumerate(order)]
    _emit(args, ["rank", "id", "group", "prob"], rows)
    return EXIT_OK


def _check_k(k, n):
    if not 1 <= k <= n:
        raise BadParams(f"--k {k} outside [1, {n}]")


def _trace_rows(pool, order, mode):
    tr = delta_trace(pool, order, mode)
    names = [eio.sanitize(g) for g in pool.group_names]
    header = ["k", "id", "group", "delta", "total_cost"] + [f"cost_{g}" for g in names]
    rows = []
    for j, i in enumerate(order):
        rows.append([j + 1, pool.ids[i], pool.group_names[pool.groups[i]], tr.delta[j], tr.total_cost[j], *tr.group_cost[j]])
    return header, rows


def cmd_trace(args) -> int:
    pool = _load_pool(args)
    order = rank(pool, _policy(args), args.mode)
    header, rows = _trace_rows(pool, order, args.mode)
    if args.k is not None:
        _check_k(args.k, pool.n)
        rows = rows[: args.k]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_audit(args) -> int:
    with _open_in(args.input) as fh:
        queries = eio.read_logged(fh)
    per_query, skipped = [], []
    for q, pool, order in queries:
        if pool.n_groups < 2:
            skipped.append({"query_id": q, "reason": "fewer than two groups"})
            continue
        logged = np.abs(delta_trace(pool, order, args.mode).delta)
        eor = np.abs(delta_trace(pool, eor_ranking(pool, args.mode), args.mode).delta)
        per_query.append({"query_id": q, "n": pool.n, "abs_delta_logged": logged, "abs_delta_eor": eor})
    if not per_query:
        raise BadParams("no query has at least two groups")
    # average over the queries that are long enough to have prefix k
    kmax = max(p["n"] for p in per_query)
    mean_logged, mean_eor, counts = [], [], []
    for k in range(kmax):
        have = [p for p in per_query if p["n"] > k]
        counts.append(len(have))
        mean_logged.append(float(np.mean([p["abs_delta_logged"][k] for p in have])))
        mean_eor.append(float(np.mean([p["abs_delta_eor"][k] for p in have])))
    report = {
        "query_count": len(per_query),
        "mean_abs_delta_logged": mean_logged,
        "mean_abs_delta_eor": mean_eor,
        "queries_at_k": counts,
        "skipped": skipped,
        "queries": per_query if args.per_query else [],
    }
    with _open_out(args.out) as fh:
        eio.dump_json(report, fh)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .optim.certificate import certify_prefix

    pool = _load_pool(args)
    if args.mode != "probs":
        raise BadParams("certificates are defined on probabilities; use --mode probs")
    order = eor_ranking(pool)
    if args.k is not None:
        _check_k(args.k, pool.n)
        ks = [args.k]
    else:
        ks = range(1, pool.n + 1)
    reports = [certify_prefix(pool, order, k) for k in ks]
    with _open_out(args.out) as fh:
        eio.dump_json(reports[0] if args.k is not None else reports, fh)
    return EXIT_OK if all(r["feasible"] for r in reports) else EXIT_NUMERIC


def _policies(args):
    from .synth import TABLE_POLICIES

    if not args.policies:
        return TABLE_POLICIES
    out = [p.strip().lower() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in out if p not in KINDS]
    if bad:
        raise BadParams(f"unknown policy {', '.join(bad)}")
    return out


def cmd_simulate(args) -> int:
    from .core import n_rel
    from .synth import scenario_run

    rows = []

    def record(run, policy, u, e, pool):
        nr = n_rel(pool)
        sizes = np.bincount(pool.groups, minlength=2)
        rows.append([run, policy, u, e, sizes[0], sizes[1], nr[0], nr[1]])

    scenario_run(args.scenario, args.runs, args.seed, _policies(args), per_run=record)
    _emit(args, ["run", "policy", "unfairness", "effectiveness", "size_a", "size_b", "nrel_a", "nrel_b"], rows)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .synth import scenario_run

    res = scenario_run(args.scenario, args.runs, args.seed, _policies(args))
    header = ["policy", "unfairness_mean", "unfairness_se", "effectiveness_mean", "effectiveness_se"]
    rows = [[p] + [s[h] for h in header[1:]] for p, s in res.items()]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    import csv

    from .metrics import calibration_curve, platt_apply, platt_fit

    with _open_in(args.input) as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        reader.fieldnames = fields
        col = "score" if "score" in fields else ("prob" if "prob" in fields else None)
        if col is None or "label" not in fields:
            raise InputError("line 1: need columns label and score (or prob)")
        x, y = [], []
        for line, rec in enumerate(reader, start=2):
            try:
                x.append(float(rec[col]))
            except (TypeError, ValueError):
                raise InputError(f"line {line}: {col} {rec[col]!r} is not a number") from None
            if rec["label"] not in ("0", "1"):
                raise InputError(f"line {line}: label {rec['label']!r} must be 0 or 1")
            y.append(int(rec["label"]))
    x, y = np.array(x), np.array(y)
    if x.size == 0:
        raise InputError("no rows")
    report = {}
    if col == "score":
        params = platt_fit(x, y)
        probs = platt_apply(params, x)
        report["platt"] = {"a": params.a, "b": params.b, "iterations": params.iterations, "converged": params.converged}
    else:
        probs = x
    curve = calibration_curve(probs, y, args.bins, args.strategy)
    report["calibration"] = {
        "mean_pred": curve.mean_pred,
        "frac_pos": curve.frac_pos,
        "count": curve.counts,
        "max_deviation": curve.max_deviation,
    }
    with _open_out(args.out) as fh:
        eio.dump_json(report, fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eor", description="Equal-opportunity ranking under disparate uncertainty.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, policy=True, pool=True):
        if pool:
            p.add_argument("--input", "-i", default="-", help="input CSV (default: stdin)")
        p.add_argument("--out", "-o", default="-", help="output path (default: stdout)")
        p.add_argument("--mode", choices=("probs", "labels"), default="probs")
        p.add_argument("--seed", type=int, default=0)
        if policy:
            p.add_argument("--policy", choices=KINDS, default="eor")
            p.add_argument("--protected", type=int, default=None, help="protected group index for prr/fairstar (default 1)")
            p.add_argument("--alpha", type=float, default=0.1)
            p.add_argument("--threshold", type=float, default=0.95)

    p = sub.add_parser("rank", help="rank a pool")
    common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("trace", help="per-prefix slack and costs")
    common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("audit", help="compare logged rankings against EOR")
    common(p, policy=False)
    p.add_argument("--per-query", action="store_true", help="include per-query traces")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("verify", help="certificate report for EOR prefixes")
    common(p, policy=False)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_verify)

    for name, func, helptext in (("simulate", cmd_simulate, "per-run synthetic results"),
                                 ("compare", cmd_compare, "per-policy mean and SE on a synthetic scenario")):
        p = sub.add_parser(name, help=helptext)
        common(p, policy=False, pool=False)
        p.add_argument("--scenario", choices=("high", "medium", "low"), default="high")
        p.add_argument("--runs", type=int, default=100)
        p.add_argument("--policies", default=None, help="comma-separated policy names")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate", help="Platt scaling and reliability curve")
    common(p, policy=False)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--strategy", choices=("quantile", "uniform"), default="quantile")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EORError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
