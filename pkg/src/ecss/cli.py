"""Command-line driver and acceptance-suite runner.

Exit codes: 0 all requested audits pass, 1 an audit failed, 2 usage error,
3 unreadable or malformed input, 4 input not 2-edge-connected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Optional

from .congest import DEFAULT_ROUND_CAP, CongestError, Runtime, boruvka_mst, log2_ceil, sqrt_ceil
from .decomposition import build_segments, check_layers, check_segments, compute_layers
from .graph import (DisconnectedGraphError, EdgeSet, GraphError, WeightedGraph, generate,
                    is_two_edge_connected, parse_graph)
from .oracles import (BudgetExceeded, DEFAULT_BUDGET, audit_dual, coverage_counts, exact_2ecss,
                      exact_tap, mis_violations)
from .primal_dual import (COVER_FACTOR, NotTwoEdgeConnectedError, epsilon_prime_for,
                          run_approximation, unweighted_tap)
from .shortcut import run_shortcut_log
from .tree import root_tree
from .virtual import build_virtual_graph, project_to_original

SCHEMA = "ecss-results/1"
ALGOS = ("base4", "improved2", "unweighted", "shortcut-log")
PROVIDERS = ("tree-native", "bfs-star")
CHECKS = ("none", "invariants", "oracle")

EXIT_OK, EXIT_AUDIT, EXIT_USAGE, EXIT_INPUT, EXIT_NOT_2EC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# --------------------------------------------------------------------------- helpers


def parse_gen(text: str) -> tuple[str, dict[str, int]]:
    """'grid:rows=4,cols=5' -> ('grid', {'rows': 4, 'cols': 5})."""
    family, _, rest = text.partition(":")
    params: dict[str, int] = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"bad generator parameter {item!r}")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            raise UsageError(f"generator parameter {key!r} must be an integer") from None
    return family.strip(), params


def parse_epsilon(text: Any) -> Fraction:
    try:
        eps = Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad epsilon {text!r}") from None
    if eps <= 0:
        raise UsageError("epsilon must be positive")
    return eps


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(to_jsonable(v) for v in obj)
    return obj


def dumps(doc: Any) -> str:
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_instance(spec: dict) -> tuple[WeightedGraph, dict]:
    if spec.get("graph"):
        path = spec["graph"]
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise InputError(f"cannot read {path}: {err.strerror}") from None
        try:
            g = parse_graph(text)
        except GraphError as err:
            raise InputError(f"{path}: {err}") from None
        return g, {"family": "file", "source": path}
    family, params = parse_gen(spec["gen"])
    try:
        g = generate(family, params, int(spec.get("seed", 0)))
    except GraphError as err:
        raise UsageError(str(err)) from None
    return g, {"family": family, "params": params}


# --------------------------------------------------------------------------- one run


def _ratio_bound(algo: str, eps: Fraction, n: int) -> Optional[float]:
    if algo == "improved2":
        return float(5 + eps)
    if algo == "base4":
        return float(9 + eps)
    if algo == "shortcut-log":
        return 4 * math.log(n) if n >= 3 else None
    return None


def _audit_primal_dual(res, algo: str, eps: Fraction, fault: Optional[str]) -> dict[str, list[str]]:
    inst, ds, rev = res.instance, res.dual, res.reverse
    c = COVER_FACTOR[algo]
    eps_p = epsilon_prime_for(eps, algo)
    if fault == "dual-doubling":
        positive = sorted(t for t, val in ds.y.items() if val > 0)
        if positive:
            ds.y[positive[0]] *= 2
    out: dict[str, list[str]] = {}
    out["dual"] = audit_dual(ds, inst, eps_p, rev.B, c).violations
    cnt = coverage_counts(inst, rev.B)
    out["coverage"] = [f"tree edge {t} covered {cnt.get(t, 0)} times (bound {c})"
                       for t, val in sorted(ds.y.items()) if val > 0 and cnt.get(t, 0) > c]
    out["coverage"] += [f"tree edge {t} uncovered" for t, k in sorted(cnt.items()) if k == 0]
    mis = []
    for it in rev.trace:
        for v in mis_violations(inst, it.X, it.H_tilde, it.anchors):
            mis.append(f"epoch {it.epoch} layer {it.layer}: {v}")
    out["mis"] = mis
    out["layers"] = check_layers(res.layering)
    out["segments"] = check_segments(res.segments)
    return out


def run_one(spec: dict) -> dict:
    """Execute one run description and return its result record (never raises on audits)."""
    algo = spec.get("algo", "improved2")
    eps = parse_epsilon(spec.get("epsilon", "1/4"))
    seed = int(spec.get("seed", 0))
    check = spec.get("check", "none")
    provider = spec.get("provider", "tree-native")
    verbosity = int(spec.get("verbosity", 0))
    round_cap = int(spec.get("round_cap", DEFAULT_ROUND_CAP))
    fault = spec.get("fault")
    g, desc = load_instance(spec)
    if not is_two_edge_connected(g):
        raise NotTwoEdgeConnectedError("input graph is not 2-edge-connected")
    rt = Runtime(g, round_cap=round_cap)
    started = time.perf_counter()
    trace: dict[str, Any] = {}
    audits: dict[str, list[str]] = {}
    keep = check != "none" or verbosity >= 1
    if algo in ("base4", "improved2"):
        res = run_approximation(g, eps, algo, rt, keep_trace=keep)
        edges = res.edges
        if verbosity >= 1:
            trace["epochs"] = res.layering.layer_count
            trace["forward_iterations"] = res.dual.iterations
            trace["cleaned"] = len(res.reverse.cleaned)
            trace["dual_value"] = res.dual.dual_value()
        if check != "none":
            audits.update(_audit_primal_dual(res, algo, eps, fault))
    elif algo == "unweighted":
        mst, _ = boruvka_mst(rt)
        tree = root_tree(g, mst, 0)
        inst = build_virtual_graph(g, tree)
        lay = compute_layers(tree, rt)
        seg = build_segments(tree, rt)
        ures = unweighted_tap(inst, lay, seg, rt)
        aug = project_to_original(inst, ures.cover)
        edges = EdgeSet.of(g, mst.member_ids | aug.member_ids)
        if verbosity >= 1:
            trace["mis_size"] = len(ures.mis)
        if check != "none":
            audits["mis"] = [v for it in ures.trace
                             for v in mis_violations(inst, it.X, it.H_tilde, it.anchors)]
            if check == "oracle":
                try:
                    opt_tap, _ = exact_tap(inst, DEFAULT_BUDGET, unit_weights=True)
                    if len(ures.cover) > 2 * opt_tap:
                        audits["unweighted-bound"] = [
                            f"|cover| = {len(ures.cover)} exceeds 2*OPT_TAP = {2 * opt_tap}"]
                    else:
                        audits["unweighted-bound"] = []
                except BudgetExceeded:
                    pass
    elif algo == "shortcut-log":
        if provider not in PROVIDERS:
            raise UsageError(f"unknown provider {provider!r}")
        sres = run_shortcut_log(g, eps, provider, seed, rt)
        edges = sres.edges
        if verbosity >= 1:
            trace["accepted"] = sres.trace.accepted
            trace["rejected"] = sres.trace.rejected
            trace["repetitions"] = sres.trace.repetitions
            trace["shortcut"] = {"alpha": sres.quality.alpha, "beta": sres.quality.beta,
                                 "gamma": sres.quality.gamma}
        if check != "none":
            audits["good-sets"] = [
                f"accepted set with ratio {a['newly']}/{a['weight']} below {a['delta']}/100"
                for a in sres.trace.accepted
                if Fraction(a["newly"], a["weight"]) * 100 < a["delta"]]
    else:
        raise UsageError(f"unknown algorithm {algo!r}")
    wall = time.perf_counter() - started

    if check != "none":
        sub = g.subgraph(edges.member_ids)
        audits["two-edge-connected"] = [] if is_two_edge_connected(sub) else ["output has a bridge"]
    opt = ratio = None
    if check == "oracle":
        try:
            opt, _ = exact_2ecss(g, DEFAULT_BUDGET)
        except BudgetExceeded:
            opt = None
        if opt is not None:
            ratio = Fraction(edges.total_weight, opt)
            bound = _ratio_bound(algo, eps, g.n)
            if bound is not None:
                audits["ratio"] = [] if ratio <= bound else [f"ratio {ratio} exceeds {bound:.6g}"]
    ledger = rt.ledger
    record = {
        "key": spec.get("key", ""),
        "instance": {**desc, "n": g.n, "m": g.m, "D": rt.diameter, "seed": seed},
        "algorithm": {"id": algo, "epsilon": eps,
                      **({"provider": provider} if algo == "shortcut-log" else {})},
        "weight": edges.total_weight,
        "edges": sorted(edges.member_ids),
        "opt": opt,
        "ratio": ratio,
        "ratio_float": None if ratio is None else round(float(ratio), 6),
        "ledger": {"rounds": ledger.total_rounds, "tier0_rounds": ledger.tier0_rounds,
                   "messages": ledger.messages, "by_primitive": ledger.by_primitive()},
        "audit": {"requested": check, "checks": {k: len(v) == 0 for k, v in sorted(audits.items())},
                  "violations": {k: v for k, v in sorted(audits.items()) if v},
                  "ok": all(not v for v in audits.values())},
    }
    if verbosity >= 1:
        record["trace"] = trace
    if verbosity >= 2:
        record["ledger"]["entries"] = ledger.to_json()
    record["_wall_seconds"] = wall
    return record


def _strip_wall(rec: dict) -> tuple[dict, float]:
    rec = dict(rec)
    return rec, rec.pop("_wall_seconds", 0.0)


# --------------------------------------------------------------------------- tables


def summary_table(records: list[dict], walls: Optional[list[float]] = None) -> str:
    head = f"{'key':<28} {'algo':<13} {'n':>5} {'m':>6} {'D':>4} {'weight':>8} {'opt':>6} " \
           f"{'ratio':>8} {'rounds':>8} {'audit':>6}"
    if walls is not None:
        head += f" {'wall_s':>8}"
    lines = [head, "-" * len(head)]
    for i, r in enumerate(records):
        ratio = "-" if r["ratio_float"] is None else f"{r['ratio_float']:.4f}"
        opt = "-" if r["opt"] is None else str(r["opt"])
        audit = "-" if r["audit"]["requested"] == "none" else ("pass" if r["audit"]["ok"] else "FAIL")
        inst = r["instance"]
        line = (f"{str(r['key'])[:28]:<28} {r['algorithm']['id']:<13} {inst['n']:>5} {inst['m']:>6} "
                f"{inst['D']:>4} {r['weight']:>8} {opt:>6} {ratio:>8} {r['ledger']['rounds']:>8} "
                f"{audit:>6}")
        if walls is not None:
            line += f" {walls[i]:>8.3f}"
        lines.append(line)
    return "\n".join(lines)


# --------------------------------------------------------------------------- suite


def _expand(config: dict) -> list[dict]:
    specs = []
    for idx, entry in enumerate(config.get("runs", [])):
        name = entry.get("name", f"run{idx}")
        seeds = entry.get("seeds")
        if seeds is None:
            lo, hi = entry.get("seed_range", [entry.get("seed", 0), entry.get("seed", 0) + 1])
            seeds = list(range(lo, hi))
        algos = entry.get("algos", [entry.get("algo", "improved2")])
        gens = entry.get("gens", [entry["gen"]] if "gen" in entry else [None])
        for gen in gens:
            for algo in algos:
                for s in seeds:
                    spec = {k: v for k, v in entry.items()
                            if k not in ("seeds", "seed_range", "algos", "gens", "name")}
                    spec.update({"algo": algo, "seed": s})
                    if gen is not None:
                        spec["gen"] = gen
                    spec["key"] = f"{name}/{gen or spec.get('graph')}/{algo}/{s:05d}"
                    specs.append(spec)
    return specs


def _safe_run(spec: dict) -> dict:
    try:
        return run_one(spec)
    except Exception as err:  # recorded, never fatal for the suite
        return {"key": spec.get("key", ""), "error": f"{type(err).__name__}: {err}",
                "_wall_seconds": 0.0}


def scaling_regression(cfg: dict, workers: int = 1) -> dict:
    algo = cfg.get("algo", "improved2")
    eps = cfg.get("epsilon", "1/4")
    sides = cfg.get("grid_sides", [8, 16, 32])
    specs = [{"gen": f"grid:rows={s},cols={s}", "algo": algo, "epsilon": eps, "seed": 0,
              "key": f"scaling/{s}x{s}"} for s in sides]
    records = _map(specs, workers)
    points = []
    for rec in records:
        rec, _ = _strip_wall(rec)
        if "error" in rec:
            points.append({"key": rec["key"], "error": rec["error"]})
            continue
        n, D = rec["instance"]["n"], rec["instance"]["D"]
        norm = (D + sqrt_ceil(n)) * log2_ceil(n) ** 2
        points.append({"n": n, "D": D, "rounds": rec["ledger"]["rounds"],
                       "normaliser": norm, "ratio": Fraction(rec["ledger"]["rounds"], norm)})
    ratios = [p["ratio"] for p in points if "ratio" in p]
    spread = max(ratios) / min(ratios) if ratios and len(ratios) == len(points) else None
    limit = Fraction(str(cfg.get("max_spread", 3)))
    # slope of log(rounds) against log((D+sqrt n) log^2 n), least squares
    slope = None
    if spread is not None and len(points) >= 2:
        xs = [math.log(p["normaliser"]) for p in points]
        ys = [math.log(p["rounds"]) for p in points]
        mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
        den = sum((x - mx) ** 2 for x in xs)
        slope = round(sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / den, 6) if den else None
    return {"points": points, "spread": spread, "max_spread": limit, "loglog_slope": slope,
            "ok": spread is not None and spread <= limit}


def _map(specs: list[dict], workers: int) -> list[dict]:
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_safe_run, specs, chunksize=max(1, len(specs) // (4 * workers))))
    else:
        out = [_safe_run(s) for s in specs]
    return sorted(out, key=lambda r: r["key"])


def run_suite(config: dict, workers: int = 1) -> tuple[dict, list[float], int]:
    """Run every configured instance; returns (document, wall times, exit code)."""
    specs = _expand(config)
    records = _map(specs, workers)
    runs, walls = [], []
    failed = 0
    for rec in records:
        rec, wall = _strip_wall(rec)
        runs.append(rec)
        walls.append(wall)
        if "error" in rec or not rec["audit"]["ok"]:
            failed += 1
    doc: dict[str, Any] = {"schema": SCHEMA, "runs": runs,
                           "summary": {"runs": len(runs), "failed": failed}}
    if config.get("scaling"):
        doc["scaling"] = scaling_regression(config["scaling"], workers)
        if not doc["scaling"]["ok"]:
            failed += 1
    doc["summary"]["ok"] = failed == 0
    return doc, walls, EXIT_OK if failed == 0 else EXIT_AUDIT


# --------------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecss", description="Distributed 2-ECSS approximation harness.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--graph", metavar="FILE", help="edge-list file ('n m' then 'u v w' lines)")
    src.add_argument("--gen", metavar="FAMILY:params", help="e.g. grid:rows=8,cols=8")
    src.add_argument("--suite", metavar="CONFIG", help="JSON suite configuration")
    p.add_argument("--algo", choices=ALGOS, default="improved2")
    p.add_argument("--epsilon", default="1/4", help="rational, e.g. 0.25 or 1/4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--provider", choices=PROVIDERS, default="tree-native")
    p.add_argument("--check", choices=CHECKS, default="none")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--verbosity", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--round-cap", type=int, default=DEFAULT_ROUND_CAP)
    return p


def _emit(doc: dict, out: Optional[str]) -> None:
    text = dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.suite:
            try:
                with open(args.suite, encoding="utf-8") as fh:
                    config = json.load(fh)
            except OSError as err:
                raise InputError(f"cannot read {args.suite}: {err.strerror}") from None
            except json.JSONDecodeError as err:
                raise InputError(f"{args.suite}: {err}") from None
            doc, walls, code = run_suite(config, max(1, args.workers))
            _emit(doc, args.out)
            print(summary_table(doc["runs"], walls))
            for rec in doc["runs"]:
                if "error" in rec:
                    print(f"error {rec['key']}: {rec['error']}")
            if "scaling" in doc:
                sc = doc["scaling"]
                print(f"scaling spread {float(sc['spread'] or 0):.3f} (limit {sc['max_spread']}): "
                      f"{'pass' if sc['ok'] else 'FAIL'}")
            print(f"{doc['summary']['runs']} runs, {doc['summary']['failed']} failed")
            return code
        if not args.graph and not args.gen:
            raise UsageError("one of --graph, --gen or --suite is required")
        parse_epsilon(args.epsilon)
        spec = {"graph": args.graph, "gen": args.gen, "algo": args.algo, "epsilon": args.epsilon,
                "seed": args.seed, "provider": args.provider, "check": args.check,
                "verbosity": args.verbosity, "round_cap": args.round_cap,
                "key": args.graph or args.gen}
        rec, wall = _strip_wall(run_one(spec))
        _emit({"schema": SCHEMA, "runs": [rec]}, args.out)
        print(summary_table([rec], [wall]))
        for name, items in rec["audit"]["violations"].items():
            for v in items:
                print(f"audit {name}: {v}")
        if args.verbosity >= 1 and "trace" in rec:
            print(json.dumps(to_jsonable(rec["trace"]), sort_keys=True))
        return EXIT_OK if rec["audit"]["ok"] else EXIT_AUDIT
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (NotTwoEdgeConnectedError, DisconnectedGraphError) as err:
        print(f"infeasible input: {err}", file=sys.stderr)
        return EXIT_NOT_2EC
    except CongestError as err:
        # the simulation itself failed (round cap or message budget): nothing to audit
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
