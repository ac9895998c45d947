"""Restricted master problems, column generation, and the Pareto driver."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from . import oracle
from .errors import RdarpError
from .instance import EDARP, Instance
from .lp import EQ, GE, LE, OPTIMAL, LinearModel, solve_lp
from .pricing import (
    COST,
    RISK,
    Column,
    DualValues,
    PricingRestrictions,
    solve_pricing,
)

INF = math.inf
INTEGRALITY_TOL = 1e-6
ARTIFICIAL_TOL = 1e-6

OPTIMAL_STATUS = "Optimal"
INFEASIBLE_STATUS = "Infeasible"
TIME_LIMIT_STATUS = "TimeLimit"


class ColumnPool:
    """Deduplicated columns keyed by node sequence; every insert re-validates
    the route against the oracle."""

    def __init__(self, inst: Instance, validate: bool = True):
        self.inst = inst
        self.validate = validate
        self.columns: list[Column] = []
        self._index: dict[tuple[int, ...], int] = {}

    def __len__(self) -> int:
        return len(self.columns)

    def add(self, col: Column) -> bool:
        if col.sequence in self._index:
            return False
        if self.validate:
            oracle.validate_route(
                self.inst,
                oracle.Route(col.sequence, col.schedule, col.cost, col.exposure, col.q_terminal),
            )
        self._index[col.sequence] = len(self.columns)
        self.columns.append(col)
        return True

    def index_of(self, sequence: tuple[int, ...]) -> int | None:
        return self._index.get(tuple(sequence))


@dataclass(frozen=True)
class ExtraRow:
    """A cut or branching row over column variables.

    A column's coefficient is ``route_constant`` plus the sum over its arcs of
    ``arc_coefs``; duals fold into pricing through the same decomposition.
    """

    name: str
    sense: str
    rhs: float
    arc_coefs: tuple[tuple[tuple[int, int], float], ...] = ()
    route_constant: float = 0.0

    def coefficient(self, col: Column) -> float:
        value = self.route_constant
        if self.arc_coefs:
            counts: dict[tuple[int, int], int] = {}
            for a in col.arcs():
                counts[a] = counts.get(a, 0) + 1
            for arc, coef in self.arc_coefs:
                c = counts.get(arc)
                if c:
                    value += coef * c
        return value


def big_cost(inst: Instance) -> float:
    return max(1000.0, 10.0 * sum(inst.late[i] for i in inst.pickups()))


@dataclass
class MasterSolution:
    objective: float
    lambdas: dict[int, float]           # pool index -> value
    duals: DualValues
    artificial_total: float
    peak_variable: float | None
    columns_used: list[tuple[Column, float]]

    @property
    def integral(self) -> bool:
        return all(
            v <= INTEGRALITY_TOL or abs(v - 1.0) <= INTEGRALITY_TOL
            for v in self.lambdas.values()
        )

    def vehicle_count(self) -> float:
        return sum(self.lambdas.values())

    def arc_flows(self) -> dict[tuple[int, int], float]:
        flows: dict[tuple[int, int], float] = {}
        for col, value in self.columns_used:
            if value <= 1e-9:
                continue
            for a in col.arcs():
                flows[a] = flows.get(a, 0.0) + value
        return flows


def build_rlmp(
    pool: ColumnPool,
    inst: Instance,
    mode: str = COST,
    eps_risk: float = INF,
    eps_cost: float = INF,
    eps_dt: float = INF,
    extra_rows: tuple[ExtraRow, ...] = (),
    fixed_zero: frozenset[int] = frozenset(),
) -> tuple[LinearModel, dict]:
    """Assemble the restricted master LP over the pool.

    Partitioning rows carry artificial variables so the model is always
    feasible; >= extra rows get artificials as well. In equity mode the
    per-request rows bound detour rates instead of raw exposures.
    """
    model = LinearModel(f"rlmp-{mode}")
    big = big_cost(inst)
    edarp = inst.mode == EDARP
    lam = []
    for k, col in enumerate(pool.columns):
        ub = 0.0 if k in fixed_zero else INF
        obj = col.cost if mode == COST else 0.0
        lam.append(model.add_var(f"l{k}", lb=0.0, ub=ub, obj=obj))
    peak = model.add_var("peak", lb=0.0, obj=1.0) if mode == RISK else None
    art = {}
    meta: dict = {"lam": lam, "peak": peak}

    for i in inst.pickups():
        coefs = {}
        for k, col in enumerate(pool.columns):
            if i in col.exposure:
                coefs[lam[k]] = 1.0
        art[i] = model.add_var(f"art{i}", lb=0.0, obj=big)
        coefs[art[i]] = 1.0
        model.add_row(f"part{i}", coefs, EQ, 1.0)
    meta["art"] = art

    model.add_row("fleet", {lam[k]: 1.0 for k in range(len(lam))}, LE, float(inst.fleet_size))

    def exposure_coef(col: Column, i: int) -> float:
        h = col.exposure.get(i)
        if h is None:
            return 0.0
        if edarp:
            return h / inst.detour_weight[i - 1]
        return h

    risk_cap = eps_dt if edarp else eps_risk
    meta["risk_rows"] = []
    if mode == RISK:
        for i in inst.pickups():
            coefs = {lam[k]: exposure_coef(col, i) for k, col in enumerate(pool.columns)
                     if exposure_coef(col, i) != 0.0}
            coefs[peak] = -1.0
            model.add_row(f"risk{i}", coefs, LE, 0.0)
            meta["risk_rows"].append(i)
        if eps_cost < INF:
            model.add_row("costcap", {lam[k]: col.cost for k, col in enumerate(pool.columns)}, LE, eps_cost)
            meta["cost_row"] = True
    elif risk_cap < INF:
        for i in inst.pickups():
            coefs = {lam[k]: exposure_coef(col, i) for k, col in enumerate(pool.columns)
                     if exposure_coef(col, i) != 0.0}
            model.add_row(f"risk{i}", coefs, LE, risk_cap)
            meta["risk_rows"].append(i)

    meta["big"] = big
    meta["extra"] = []
    for r, row in enumerate(extra_rows):
        coefs = {}
        for k, col in enumerate(pool.columns):
            v = row.coefficient(col)
            if v != 0.0:
                coefs[lam[k]] = v
        if row.sense == GE:
            a = model.add_var(f"xart{r}", lb=0.0, obj=big)
            coefs[a] = 1.0
        model.add_row(f"x{r}:{row.name}", coefs, row.sense, row.rhs)
        meta["extra"].append(row)
    return model, meta


def add_edarp_constraints(
    model: LinearModel,
    pool: ColumnPool,
    inst: Instance,
    lam: list[int],
    eps_dt: float | None = None,
    peak_var: int | None = None,
) -> list[int]:
    """Append detour-rate rows to an existing model: one row per request with
    coefficients exposure/weight, bounded by eps_dt or an existing variable."""
    if inst.detour_weight is None:
        raise RdarpError("instance has no detour weights; run edarp_transform first")
    rows = []
    for i in inst.pickups():
        coefs = {}
        for k, col in enumerate(pool.columns):
            h = col.exposure.get(i)
            if h:
                coefs[lam[k]] = h / inst.detour_weight[i - 1]
        if peak_var is not None:
            coefs[peak_var] = -1.0
            rows.append(model.add_row(f"dt{i}", coefs, LE, 0.0))
        elif coefs:
            rows.append(model.add_row(f"dt{i}", coefs, LE, eps_dt))
    return rows


def extract_duals(inst: Instance, sol, meta, mode: str) -> DualValues:
    duals = DualValues()
    for i in inst.pickups():
        duals.pi[i] = sol.dual(f"part{i}")
    duals.mu = min(sol.dual("fleet"), 0.0)
    edarp = inst.mode == EDARP
    for i in meta["risk_rows"]:
        y = min(sol.dual(f"risk{i}"), 0.0)
        if y != 0.0:
            duals.rho[i] = y / inst.detour_weight[i - 1] if edarp else y
    if meta.get("cost_row"):
        duals.xi = min(sol.dual("costcap"), 0.0)
    for r, row in enumerate(meta["extra"]):
        y = sol.dual(f"x{r}:{row.name}")
        if row.sense == LE:
            y = min(y, 0.0)
        elif row.sense == GE:
            y = max(y, 0.0)
        if y == 0.0:
            continue
        duals.mu += y * row.route_constant
        for arc, coef in row.arc_coefs:
            duals.arc_adjust[arc] = duals.arc_adjust.get(arc, 0.0) + y * coef
    return duals


@dataclass
class CGResult:
    status: str
    objective: float
    solution: MasterSolution | None
    bound: float
    iterations: int
    t_master: float
    t_pricing: float
    columns_added: int


class RestrictedMaster:
    """Incrementally extended master LP with warm-started resolves."""

    def __init__(self, pool: ColumnPool, inst: Instance, mode, eps_risk, eps_cost,
                 eps_dt, extra_rows, fixed_zero):
        self.pool = pool
        self.inst = inst
        self.args = (mode, eps_risk, eps_cost, eps_dt, extra_rows, fixed_zero)
        self.model, self.meta = build_rlmp(pool, inst, mode, eps_risk, eps_cost,
                                           eps_dt, extra_rows, fixed_zero)
        self.built_upto = len(pool)
        self.warm = None
        self.mode = mode

    def _append_new_columns(self):
        mode, eps_risk, eps_cost, eps_dt, extra_rows, fixed_zero = self.args
        inst = self.inst
        edarp = inst.mode == EDARP
        risk_cap = eps_dt if edarp else eps_risk
        model, meta = self.model, self.meta
        for k in range(self.built_upto, len(self.pool)):
            col = self.pool.columns[k]
            ub = 0.0 if k in fixed_zero else INF
            j = model.add_var(f"l{k}", lb=0.0, ub=ub,
                              obj=col.cost if mode == COST else 0.0)
            meta["lam"].append(j)
            for i in col.requests:
                model.rows[i - 1].append((j, 1.0))
            model.rows[inst.n].append((j, 1.0))  # fleet row follows partitioning
            row_offset = inst.n + 1
            if meta["risk_rows"]:
                for slot, i in enumerate(meta["risk_rows"]):
                    h = col.exposure.get(i)
                    if h:
                        coef = h / inst.detour_weight[i - 1] if edarp else h
                        model.rows[row_offset + slot].append((j, coef))
                row_offset += len(meta["risk_rows"])
            if meta.get("cost_row"):
                model.rows[row_offset].append((j, col.cost))
                row_offset += 1
            for slot, row in enumerate(meta["extra"]):
                v = row.coefficient(col)
                if v != 0.0:
                    model.rows[row_offset + slot].append((j, v))
        self.built_upto = len(self.pool)

    def solve(self):
        from .lp import solve_lp_warm

        self._append_new_columns()
        sol, warm = solve_lp_warm(self.model, self.warm)
        self.warm = warm
        return sol, self.meta


def seed_pool(pool: ColumnPool, inst: Instance) -> list[int]:
    """Single-request round trips; returns requests with no feasible trip."""
    bad = []
    for i in inst.pickups():
        seq = (0, i, i + inst.n, inst.end_depot)
        route, _ = oracle.replay_route(inst, seq)
        if route is None:
            bad.append(i)
            continue
        pool.add(Column(route.sequence, route.schedule, route.cost, route.exposure,
                        route.q_terminal, 0.0))
    return bad


def column_generation(
    inst: Instance,
    pool: ColumnPool,
    mode: str = COST,
    eps_risk: float = INF,
    eps_cost: float = INF,
    eps_dt: float = INF,
    extra_rows: tuple[ExtraRow, ...] = (),
    restrictions: PricingRestrictions | None = None,
    fixed_zero: frozenset[int] = frozenset(),
    use_heuristic_pricing: bool = True,
    column_limit: int = 200,
    deadline: float | None = None,
    engine: str | None = None,
) -> CGResult:
    """Alternate master LP solves and pricing until no negative column exists.

    The returned objective is a valid lower bound for the node's integer
    problem over the allowed column set. Infeasibility is reported only after
    exact pricing is exhausted with artificials still active."""
    t_master = t_pricing = 0.0
    iterations = 0
    added_total = 0
    restrictions = restrictions or PricingRestrictions()
    heuristic_active = use_heuristic_pricing
    rmaster = RestrictedMaster(pool, inst, mode, eps_risk, eps_cost, eps_dt,
                               extra_rows, fixed_zero)
    while True:
        iterations += 1
        t0 = time.perf_counter()
        sol, meta = rmaster.solve()
        t_master += time.perf_counter() - t0
        if sol.status != OPTIMAL:
            raise RdarpError(f"master LP unexpectedly {sol.status}")
        duals = extract_duals(inst, sol, meta, mode)
        art_total = sum(float(sol.x[v]) for v in meta["art"].values())
        for r, row in enumerate(meta["extra"]):
            if row.sense == GE:
                art_total += float(sol.value(f"xart{r}"))
        lam_vals = {k: float(sol.x[meta["lam"][k]]) for k in range(len(pool.columns))}
        msol = MasterSolution(
            # artificial activity is certified tiny at optimality; strip its
            # big-M contribution so bounds are not inflated by tolerance dust
            objective=float(sol.objective) - meta["big"] * art_total,
            lambdas={k: v for k, v in lam_vals.items() if v > 1e-12},
            duals=duals,
            artificial_total=art_total,
            peak_variable=float(sol.x[meta["peak"]]) if meta["peak"] is not None else None,
            columns_used=[(pool.columns[k], v) for k, v in lam_vals.items() if v > 1e-12],
        )
        if deadline is not None and time.perf_counter() > deadline:
            return CGResult(TIME_LIMIT_STATUS, msol.objective, msol, -INF,
                            iterations, t_master, t_pricing, added_total)

        t0 = time.perf_counter()
        cols = solve_pricing(inst, duals, mode, heuristic=heuristic_active,
                             limit=column_limit, restrictions=restrictions, engine=engine)
        added = 0
        for col in cols:
            if pool.add(col):
                added += 1
        t_pricing += time.perf_counter() - t0
        added_total += added
        if added:
            continue
        if heuristic_active:
            # heuristic run found nothing new: confirm with full dominance
            heuristic_active = False
            t0 = time.perf_counter()
            cols = solve_pricing(inst, duals, mode, heuristic=False,
                                 limit=column_limit, restrictions=restrictions, engine=engine)
            added = 0
            for col in cols:
                if pool.add(col):
                    added += 1
            t_pricing += time.perf_counter() - t0
            added_total += added
            heuristic_active = use_heuristic_pricing
            if added:
                continue
        if art_total > ARTIFICIAL_TOL:
            return CGResult(INFEASIBLE_STATUS, INF, msol, INF,
                            iterations, t_master, t_pricing, added_total)
        return CGResult(OPTIMAL_STATUS, msol.objective, msol, msol.objective,
                        iterations, t_master, t_pricing, added_total)


# ---------------------------------------------------------------------------
# Exact Pareto front
# ---------------------------------------------------------------------------

@dataclass
class ParetoPoint:
    eps_risk: float
    cost: float
    max_risk: float
    routes: list[oracle.Route]
    t_master: float
    t_pricing: float
    certified: bool = True


DEFAULT_PARETO_STEP = 0.01


def pareto_front(
    solve_fn,
    step: float = DEFAULT_PARETO_STEP,
    time_limit_per_point: float | None = None,
) -> list[ParetoPoint]:
    """Exact bi-objective sweep.

    ``solve_fn(mode, eps_risk, eps_cost, time_limit)`` must return a solver
    report (integer-optimal). Each iteration minimizes cost under the current
    risk cap, then re-minimizes peak risk at that cost to certify the point;
    the cap then steps below the certified risk."""
    if step <= 0:
        raise ValueError("step must be positive")
    points: list[ParetoPoint] = []
    eps = INF
    while True:
        rep_cost = solve_fn(COST, eps, INF, time_limit_per_point)
        if rep_cost.status == INFEASIBLE_STATUS:
            break
        if rep_cost.status != OPTIMAL_STATUS:
            points.append(ParetoPoint(eps, rep_cost.objective, INF, rep_cost.routes,
                                      rep_cost.t_master, rep_cost.t_pricing, certified=False))
            break
        f_cost = rep_cost.objective
        rep_risk = solve_fn(RISK, INF, f_cost + 1e-6, time_limit_per_point)
        if rep_risk.status != OPTIMAL_STATUS:
            points.append(ParetoPoint(eps, f_cost, INF, rep_cost.routes,
                                      rep_cost.t_master + rep_risk.t_master,
                                      rep_cost.t_pricing + rep_risk.t_pricing, certified=False))
            break
        f_risk = rep_risk.objective
        points.append(ParetoPoint(
            eps, f_cost, f_risk, rep_risk.routes,
            rep_cost.t_master + rep_risk.t_master,
            rep_cost.t_pricing + rep_risk.t_pricing,
        ))
        eps = f_risk - step
        if eps < 0:
            break
    return points
