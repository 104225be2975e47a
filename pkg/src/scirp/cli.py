"""Command-line front end.

Subcommands compose the library: generate instances, enumerate the
cluster pool, solve the tactical selection, price and inspect the
purchasing policy, simulate, run the penalty searches, sweep supply
multipliers, and summarize stored runs. Artifacts are JSON (structured
results) and CSV (tables meant for plotting); instance and cluster
files are byte-reproducible, run artifacts carry a timestamp field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional

from . import mdp as mdp_mod
from . import search as search_mod
from . import simulate as sim_mod
from .clustergen import enumerate_clusters, pool_to_jsonl
from .instance import (generate, instance_to_json, load_instance, scale,
                       validate)
from .setpart import PenaltyParams, selection_to_json, solve as solve_selection

EXIT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        json.dump({"error": message, "type": "ArgumentError"}, sys.stderr)
        sys.stderr.write("\n")
        raise SystemExit(EXIT_ERROR)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _load(args) -> "Instance":
    inst = load_instance(args.instance)
    problems = validate(inst)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    return inst


def _float_list(text: str) -> List[float]:
    vals = [float(x) for x in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _record_doc(rec) -> dict:
    return {
        "eta1": rec.eta1,
        "eta2": rec.eta2,
        "tactical_cost": rec.tactical_cost,
        "mdp_cycle_cost": rec.mdp_cycle_cost,
        "total": rec.total,
        "cluster_ids": list(rec.selection.cluster_ids),
        "tactical_seconds": rec.tactical_seconds,
        "mdp_seconds": rec.mdp_seconds,
    }


def _evaluator(pool, inst, args) -> search_mod.Evaluator:
    return search_mod.Evaluator(pool, inst, step=args.step,
                                tail_mass=args.tail_mass,
                                epsilon=args.epsilon)


def cmd_gen(args) -> int:
    params = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            params = json.load(fh)
    n = args.n if args.n is not None else int(params.pop("n_customers", 10))
    T = args.T if args.T is not None else int(params.pop("T", 7))
    level = args.level if args.level is not None else params.pop("level", "L")
    inst = generate(args.seed, n, T, level, params=params or None)
    _write(args.out, "instance.json", instance_to_json(inst))
    return 0


def cmd_clusters(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    _write(args.out, "clusters.jsonl", pool_to_jsonl(pool))
    return 0


def cmd_solve(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    sel = solve_selection(pool, PenaltyParams(args.eta1, args.eta2))
    doc = json.loads(selection_to_json(pool, sel))
    doc.update({"timestamp": _timestamp(), "eta1": args.eta1,
                "eta2": args.eta2, "objective": sel.objective_value})
    _write(args.out, "selection.json", json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_mdp(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    ev = _evaluator(pool, inst, args)
    rec = ev.evaluate(args.eta1, args.eta2)
    policy, _ = ev.solve_policy(rec.selection)
    doc = json.loads(mdp_mod.policy_to_json(policy))
    doc["timestamp"] = _timestamp()
    doc["record"] = _record_doc(rec)
    _write(args.out, "policy.json", json.dumps(doc, indent=2) + "\n")
    _write(args.out, "sS.csv", mdp_mod.shape_table_to_csv(mdp_mod.extract_sS(policy)))
    return 0


def cmd_simulate(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    ev = _evaluator(pool, inst, args)
    rec = ev.evaluate(args.eta1, args.eta2)
    policy, _ = ev.solve_policy(rec.selection)
    if args.mode == "aggregate":
        report = sim_mod.simulate_aggregate(rec.selection, inst, policy,
                                            args.periods, args.seed)
    else:
        report = sim_mod.simulate_full(pool, rec.selection, inst, policy,
                                       args.periods, args.seed)
    doc = json.loads(sim_mod.report_to_json(report))
    doc["timestamp"] = _timestamp()
    doc["record"] = _record_doc(rec)
    _write(args.out, "simulation.json", json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_search(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    ev = _evaluator(pool, inst, args)
    best, history = search_mod.line_search(pool, inst, zeta=tuple(args.zeta),
                                           ub=tuple(args.ub),
                                           eps_init=args.eps_init,
                                           evaluator=ev)
    policy, _ = ev.solve_policy(best.selection)
    doc = {
        "timestamp": _timestamp(),
        "best": _record_doc(best),
        "step_by_step": _record_doc(history[0]),
        "history": [_record_doc(r) for r in history],
        "gain": policy.gain,
        "shape_table": [
            {"t": s.t, "shape": s.shape, "s": s.s, "S": s.S}
            for s in mdp_mod.extract_sS(policy)
        ],
    }
    _write(args.out, "search.json", json.dumps(doc, indent=2) + "\n")
    _write(args.out, "history.csv", search_mod.records_to_csv(history))
    _write(args.out, "sS.csv", mdp_mod.shape_table_to_csv(mdp_mod.extract_sS(policy)))
    return 0


def cmd_grid(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    ev = _evaluator(pool, inst, args)
    eta1_list = _float_list(args.grid_eta1) if args.grid_eta1 else search_mod.DEFAULT_GRID_ETA1
    eta2_list = _float_list(args.grid_eta2) if args.grid_eta2 else search_mod.DEFAULT_GRID_ETA2
    best, records = search_mod.grid_search(pool, inst, eta1_list, eta2_list,
                                           evaluator=ev)
    doc = {
        "timestamp": _timestamp(),
        "best": _record_doc(best),
        "grid": [_record_doc(r) for r in records],
    }
    _write(args.out, "grid.json", json.dumps(doc, indent=2) + "\n")
    _write(args.out, "grid.csv", search_mod.records_to_csv(records))
    return 0


def _multipliers(lo: float, hi: float, step: float) -> List[float]:
    if step <= 0:
        raise ValueError("multiplier step must be positive")
    count = int(round((hi - lo) / step))
    vals = [round(lo + k * step, 10) for k in range(count + 1)]
    return [v for v in vals if v <= hi + 1e-9]


def cmd_sweep(args) -> int:
    inst = _load(args)
    pool = enumerate_clusters(inst)
    ev = _evaluator(pool, inst, args)
    base, _ = search_mod.line_search(pool, inst, zeta=tuple(args.zeta),
                                     ub=tuple(args.ub),
                                     eps_init=args.eps_init, evaluator=ev)
    rows = []
    for m in _multipliers(args.mult_from, args.mult_to, args.step_mult):
        if abs(m - 1.0) < 1e-12:
            tactical, purchasing = base.tactical_cost, base.mdp_cycle_cost
        elif args.which in ("m_s", "m_p"):
            scaled = scale(inst, m if args.which == "m_s" else 1.0,
                           m if args.which == "m_p" else 1.0, 1.0)
            outflow = mdp_mod.build_outflow(base.selection, scaled, args.step,
                                            args.tail_mass)
            model = mdp_mod.build_model(scaled, outflow)
            policy = mdp_mod.solve(model, outflow, args.epsilon)
            tactical, purchasing = base.tactical_cost, policy.cycle_cost
        else:
            scaled = scale(inst, 1.0, 1.0, m)
            spool = enumerate_clusters(scaled)
            sbest, _ = search_mod.line_search(
                spool, scaled, zeta=tuple(args.zeta), ub=tuple(args.ub),
                eps_init=args.eps_init, step=args.step,
                tail_mass=args.tail_mass, epsilon=args.epsilon)
            tactical, purchasing = sbest.tactical_cost, sbest.mdp_cycle_cost
        ratio = purchasing / base.mdp_cycle_cost if base.mdp_cycle_cost else float("nan")
        rows.append({"which": args.which, "multiplier": m, "tactical": tactical,
                     "purchasing": purchasing, "total": tactical + purchasing,
                     "ratio": ratio})
    lines = ["which,multiplier,tactical,purchasing,total,ratio"]
    for r in rows:
        lines.append(f"{r['which']},{r['multiplier']},{r['tactical']},"
                     f"{r['purchasing']},{r['total']},{r['ratio']}")
    _write(args.out, "sweep.csv", "\n".join(lines) + "\n")
    doc = {"timestamp": _timestamp(), "which": args.which, "rows": rows,
           "base": _record_doc(base)}
    _write(args.out, "sweep.json", json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    search_path = os.path.join(args.out, "search.json")
    if not os.path.exists(search_path):
        raise FileNotFoundError("no search.json in the output directory; "
                                "run the search command first")
    with open(search_path, encoding="utf-8") as fh:
        search_doc = json.load(fh)
    best = search_doc["best"]
    sbs = search_doc["step_by_step"]
    delta_pct = 100.0 * (sbs["total"] - best["total"]) / best["total"]
    doc = {
        "timestamp": _timestamp(),
        "step_by_step_total": sbs["total"],
        "line_search_total": best["total"],
        "delta_pct": delta_pct,
    }
    grid_path = os.path.join(args.out, "grid.json")
    if os.path.exists(grid_path):
        with open(grid_path, encoding="utf-8") as fh:
            grid_doc = json.load(fh)
        gbest = grid_doc["best"]["total"]
        doc["grid_best_total"] = gbest
        doc["line_vs_grid_gap_pct"] = 100.0 * (best["total"] - gbest) / gbest
    _write(args.out, "report.json", json.dumps(doc, indent=2) + "\n")
    lines = ["metric,value"]
    for key, val in doc.items():
        if key != "timestamp":
            lines.append(f"{key},{val}")
    _write(args.out, "report.csv", "\n".join(lines) + "\n")
    sys.stdout.write("step-by-step total: %.4f\n" % sbs["total"])
    sys.stdout.write("line-search total:  %.4f\n" % best["total"])
    sys.stdout.write("improvement: %.2f%%\n" % delta_pct)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="scirp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, instance=True):
        if instance:
            p.add_argument("--instance", required=True,
                           help="instance file path or packaged fixture name")
        p.add_argument("--out", default=".", help="output directory")

    def add_mdp_opts(p):
        p.add_argument("--step", type=int, default=search_mod.DEFAULT_STEP)
        p.add_argument("--tail-mass", type=float, dest="tail_mass",
                       default=mdp_mod.DEFAULT_TAIL_MASS)
        p.add_argument("--epsilon", type=float, default=mdp_mod.DEFAULT_EPSILON)

    def add_eta(p):
        p.add_argument("--eta1", type=float, default=0.0)
        p.add_argument("--eta2", type=float, default=0.0)

    def add_search_opts(p):
        p.add_argument("--zeta", type=float, nargs=2, metavar=("Z1", "Z2"),
                       default=list(search_mod.DEFAULT_ZETA))
        p.add_argument("--ub", type=float, nargs=2, metavar=("U1", "U2"),
                       default=list(search_mod.DEFAULT_UB))
        p.add_argument("--eps-init", type=float, dest="eps_init",
                       default=search_mod.DEFAULT_EPS_INIT)

    p = sub.add_parser("gen", help="generate a random instance")
    add_common(p, instance=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=None, help="number of customers")
    p.add_argument("--T", type=int, default=None, help="cycle length")
    p.add_argument("--level", choices=["L", "H"], default=None,
                   help="demand uncertainty level")
    p.add_argument("--config", default=None, help="JSON parameter overrides")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("clusters", help="enumerate the cluster pool")
    add_common(p)
    p.set_defaults(func=cmd_clusters)

    p = sub.add_parser("solve", help="solve the tactical selection")
    add_common(p)
    add_eta(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mdp", help="solve the purchasing policy")
    add_common(p)
    add_eta(p)
    add_mdp_opts(p)
    p.set_defaults(func=cmd_mdp)

    p = sub.add_parser("simulate", help="simulate a solved policy")
    add_common(p)
    add_eta(p)
    add_mdp_opts(p)
    p.add_argument("--periods", type=int, default=10 ** 6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=["aggregate", "full"], default="aggregate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("search", help="line search over penalty weights")
    add_common(p)
    add_mdp_opts(p)
    add_search_opts(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("grid", help="grid search over penalty weights")
    add_common(p)
    add_mdp_opts(p)
    p.add_argument("--grid-eta1", dest="grid_eta1", default=None,
                   help="comma-separated weight list")
    p.add_argument("--grid-eta2", dest="grid_eta2", default=None,
                   help="comma-separated weight list")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sweep", help="supply multiplier sensitivity sweep")
    add_common(p)
    add_mdp_opts(p)
    add_search_opts(p)
    p.add_argument("--which", choices=["m_s", "m_p", "m_d"], required=True)
    p.add_argument("--from", type=float, dest="mult_from", required=True)
    p.add_argument("--to", type=float, dest="mult_to", required=True)
    p.add_argument("--step-mult", type=float, dest="step_mult", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize stored search artifacts")
    add_common(p, instance=False)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
