"""Command-line interface: solve, pareto, validate, convert.

Exit codes: 0 success, 1 usage error, 2 infeasible, 3 time limit reached,
4 internal error. All outputs are byte-stable for identical inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__, bcp, master, oracle
from .errors import (
    InfeasibleRequestError,
    ParseError,
    RdarpError,
    RouteInfeasible,
    ValidationError,
)
from .instance import (
    EDARP,
    Instance,
    derive_benchmark_risk,
    edarp_transform,
    emit_realworld,
    parse_cordeau,
    parse_realworld,
    preprocess,
)

INF = math.inf

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_TIME_LIMIT = 3
EXIT_INTERNAL = 4


def load_instance(path: str, benchmark_risk: bool = True) -> Instance:
    """Read a Cordeau text file or the JSON format (detected by content).

    Cordeau files carry no risk scores; by default each pick-up's score is set
    to its passenger count (disable with --raw-risk)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_realworld(text, name=Path(path).stem)
    inst = parse_cordeau(text, name=Path(path).stem)
    if benchmark_risk:
        inst = derive_benchmark_risk(inst)
    return inst


def _parse_eps(value: str) -> float:
    if value.lower() in ("inf", "infinity", "none"):
        return INF
    return float(value)


def _round6(x: float):
    if x == INF:
        return "inf"
    return round(x + 0.0, 6)


def report_to_json(inst: Instance, rep: bcp.SolveReport) -> str:
    routes = []
    for r in rep.routes:
        routes.append({
            "sequence": list(r.sequence),
            "schedule": [_round6(v) for v in r.schedule],
            "cost": _round6(r.cost),
            "H": {str(i): _round6(h) for i, h in sorted(r.exposure.items())},
            "Q": _round6(r.q_terminal),
        })
    doc = {
        "status": rep.status,
        "objective": None if rep.objective == INF else _round6(rep.objective),
        "bound": None if abs(rep.bound) == INF else _round6(rep.bound),
        "gap": None if rep.gap == INF else _round6(rep.gap),
        "routes": routes,
        "stats": {
            "nodes": rep.nodes_explored,
            "columns": rep.columns,
            "cuts": rep.cuts,
            "t_master_s": round(rep.t_master, 3),
            "t_pricing_s": round(rep.t_pricing, 3),
        },
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def routes_from_json(doc: dict) -> list[oracle.Route]:
    routes = []
    for r in doc.get("routes", []):
        routes.append(oracle.Route(
            sequence=tuple(int(v) for v in r["sequence"]),
            schedule=tuple(float(v) for v in r["schedule"]),
            cost=float(r["cost"]),
            exposure={int(k): float(v) for k, v in r["H"].items()},
            q_terminal=float(r["Q"]),
        ))
    return routes


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdarp", description=__doc__)
    p.add_argument("--version", action="version", version=f"rdarp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("instance")
        sp.add_argument("--raw-risk", action="store_true",
                        help="keep zero risk scores from Cordeau files")
        sp.add_argument("--edarp", action="store_true", help="equity mode transform")

    sp = sub.add_parser("solve", help="exact single-objective solve")
    common(sp)
    sp.add_argument("--mode", choices=["cost", "risk"], default="cost")
    sp.add_argument("--eps-risk", type=_parse_eps, default=INF)
    sp.add_argument("--eps-cost", type=_parse_eps, default=INF)
    sp.add_argument("--eps-dt", type=_parse_eps, default=INF)
    sp.add_argument("--time-limit", type=float, default=None)
    sp.add_argument("--cuts", default="ipec,2pc,rc",
                    help="comma list from {ipec,2pc,rc}; empty disables cuts")
    sp.add_argument("--no-heuristic-pricing", action="store_true")
    sp.add_argument("--certify-risk", action="store_true",
                    help="re-minimize peak risk at the optimal cost")
    sp.add_argument("--engine", choices=["py", "cy"], default=None)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("pareto", help="exact bi-objective front")
    common(sp)
    sp.add_argument("--step", type=float, default=master.DEFAULT_PARETO_STEP)
    sp.add_argument("--time-limit", type=float, default=None,
                    help="per-point time limit in seconds")
    sp.add_argument("--cuts", default="ipec,2pc,rc")
    sp.add_argument("--no-heuristic-pricing", action="store_true")
    sp.add_argument("--engine", choices=["py", "cy"], default=None)
    sp.add_argument("--out", default=None, help="CSV path (default stdout)")
    sp.add_argument("--json", dest="json_out", default=None)

    sp = sub.add_parser("validate", help="check a solution file against an instance")
    common(sp)
    sp.add_argument("solution")
    sp.add_argument("--eps-risk", type=_parse_eps, default=INF)
    sp.add_argument("--eps-dt", type=_parse_eps, default=INF)

    sp = sub.add_parser("convert", help="convert between instance formats")
    sp.add_argument("instance")
    sp.add_argument("output")
    sp.add_argument("--raw-risk", action="store_true")
    return p


def _prepare(args) -> Instance:
    inst = load_instance(args.instance, benchmark_risk=not args.raw_risk)
    if args.edarp:
        if inst.mode != EDARP:
            inst = edarp_transform(inst)
    return inst


def _solve_options(args, eps_risk=INF, eps_cost=INF, eps_dt=INF, time_limit=None):
    families = tuple(f for f in args.cuts.split(",") if f) if args.cuts else ()
    return bcp.SolveOptions(
        eps_risk=eps_risk, eps_cost=eps_cost, eps_dt=eps_dt,
        time_limit=time_limit, cut_families=families,
        use_heuristic_pricing=not args.no_heuristic_pricing,
        engine=args.engine,
    )


def cmd_solve(args) -> int:
    inst = preprocess(_prepare(args))
    rep = bcp.solve(inst, args.mode, _solve_options(
        args, args.eps_risk, args.eps_cost, args.eps_dt, args.time_limit))
    if args.certify_risk and rep.status == master.OPTIMAL_STATUS and args.mode == "cost":
        certified = bcp.solve(inst, "risk", _solve_options(
            args, eps_cost=rep.objective + 1e-6, eps_dt=args.eps_dt,
            time_limit=args.time_limit))
        if certified.status == master.OPTIMAL_STATUS:
            rep = bcp.SolveReport(
                rep.status, rep.objective, rep.bound, rep.gap, certified.routes,
                rep.nodes_explored + certified.nodes_explored,
                rep.columns + certified.columns, rep.cuts + certified.cuts,
                rep.t_master + certified.t_master, rep.t_pricing + certified.t_pricing,
                rep.used_fallback_branching)
    payload = report_to_json(inst, rep)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    if rep.status == master.INFEASIBLE_STATUS:
        return EXIT_INFEASIBLE
    if rep.status == master.TIME_LIMIT_STATUS:
        return EXIT_TIME_LIMIT
    return EXIT_OK


def pareto_csv(points: list[master.ParetoPoint]) -> str:
    lines = ["epsilon_risk,cost,max_risk,n_routes,t_master_s,t_pricing_s"]
    for p in points:
        eps = "inf" if p.eps_risk == INF else f"{p.eps_risk:.6f}"
        lines.append(
            f"{eps},{p.cost:.6f},{p.max_risk:.6f},{len(p.routes)},"
            f"{p.t_master:.3f},{p.t_pricing:.3f}"
        )
    return "\n".join(lines) + "\n"


def cmd_pareto(args) -> int:
    inst = preprocess(_prepare(args))

    def solve_fn(mode, eps_risk, eps_cost, time_limit):
        return bcp.solve(inst, mode, _solve_options(args, eps_risk, eps_cost, INF, time_limit))

    points = master.pareto_front(solve_fn, step=args.step,
                                 time_limit_per_point=args.time_limit)
    certified = [p for p in points if p.certified]
    csv = pareto_csv(certified)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    if args.json_out:
        doc = [
            {
                "epsilon_risk": "inf" if p.eps_risk == INF else _round6(p.eps_risk),
                "cost": _round6(p.cost),
                "max_risk": _round6(p.max_risk),
                "n_routes": len(p.routes),
            }
            for p in certified
        ]
        Path(args.json_out).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    if len(certified) < len(points):
        return EXIT_TIME_LIMIT
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = preprocess(_prepare(args))
    doc = json.loads(Path(args.solution).read_text())
    routes = routes_from_json(doc)
    covered: list[int] = []
    edarp = inst.mode == EDARP
    try:
        for r in routes:
            oracle.validate_route(inst, r)
            covered.extend(r.requests)
            for i, h in r.exposure.items():
                cap = args.eps_dt if edarp else args.eps_risk
                measure = h / inst.detour_weight[i - 1] if edarp else h
                if measure > cap + 1e-6:
                    print(f"request {i}: exposure {measure:.6g} > cap {cap:.6g}", file=sys.stderr)
                    return EXIT_INFEASIBLE
    except RouteInfeasible as exc:
        for node, desc, lhs, rhs in exc.violations:
            print(f"node {node}: {desc}: {lhs:.6g} vs {rhs:.6g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if sorted(covered) != list(inst.pickups()):
        print(f"coverage mismatch: served {sorted(covered)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if len(routes) > inst.fleet_size:
        print(f"{len(routes)} routes exceed fleet size {inst.fleet_size}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print("feasible")
    return EXIT_OK


def cmd_convert(args) -> int:
    text = Path(args.instance).read_text()
    if text.lstrip().startswith("{"):
        inst = parse_realworld(text, name=Path(args.instance).stem)
        if inst.coords is None:
            print("cannot emit Cordeau format without coordinates", file=sys.stderr)
            return EXIT_USAGE
        out = _emit_cordeau(inst)
    else:
        inst = parse_cordeau(text, name=Path(args.instance).stem)
        if not args.raw_risk:
            inst = derive_benchmark_risk(inst)
        out = emit_realworld(inst) + "\n"
    Path(args.output).write_text(out)
    return EXIT_OK


def _emit_cordeau(inst: Instance) -> str:
    horizon = inst.late[inst.end_depot]
    ride = inst.max_ride[0]
    lines = [f"{inst.fleet_size} {inst.n} {horizon:g} {inst.capacity:g} {ride:g}"]
    for i in range(inst.n_nodes):
        x, y = inst.coords[i]
        lines.append(
            f"{i} {x:.3f} {y:.3f} {inst.service[i]:g} {inst.load[i]:g} "
            f"{inst.early[i]:g} {inst.late[i]:g}"
        )
    return "\n".join(lines) + "\n"


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "pareto":
            return cmd_pareto(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "convert":
            return cmd_convert(args)
        return EXIT_USAGE
    except RouteInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleRequestError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
