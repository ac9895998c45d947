"""Ground truth independent of the column-generation machinery.

Validates routes against the full constraint set from a given schedule,
computes minimum-peak-exposure schedules for fixed sequences via an LP over
start-of-service times, and exhaustively solves tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from . import calibration as cal
from .errors import RouteInfeasible
from .instance import EDARP, Instance
from .lp import GE, INFEASIBLE, LE, OPTIMAL, LinearModel, solve_lp

INF = math.inf
SCHED_TOL = 1e-6
BRUTE_FORCE_LIMIT = 5


@dataclass(frozen=True)
class Route:
    """A node sequence with a committed schedule and its risk bookkeeping."""

    sequence: tuple[int, ...]
    schedule: tuple[float, ...]
    cost: float
    exposure: dict[int, float]  # per covered request
    q_terminal: float

    @property
    def requests(self) -> tuple[int, ...]:
        return tuple(sorted(self.exposure))

    @property
    def max_exposure(self) -> float:
        return max(self.exposure.values(), default=0.0)

    def arcs(self) -> list[tuple[int, int]]:
        return list(zip(self.sequence[:-1], self.sequence[1:]))

    def arc_multiset(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for a in self.arcs():
            out[a] = out.get(a, 0) + 1
        return out


@dataclass
class ExposureBreakdown:
    onboard_risk: list[float]  # after each visited node's service starts
    cumulative: list[float]    # risk-minutes accrued through each visit
    exposure: dict[int, float]
    detour_rate: dict[int, float] = field(default_factory=dict)


def route_cost(inst: Instance, sequence) -> float:
    return sum(inst.t(i, j) for i, j in zip(sequence[:-1], sequence[1:]))


# ---------------------------------------------------------------------------
# Schedule-based evaluation (pure recomputation, no pricing machinery)
# ---------------------------------------------------------------------------

def exposure_from_schedule(inst: Instance, sequence, schedule) -> ExposureBreakdown:
    """Exposure bookkeeping for a fixed schedule.

    A rider is onboard from start of service at their pick-up to start of
    service at their drop-off; co-ride exposure is the co-rider's score times
    the interval overlap (travel, service, and waiting all count). In equity
    mode a virtual unit-risk rider spans the whole route.
    """
    pos = {node: p for p, node in enumerate(sequence)}
    requests = [i for i in sequence if inst.is_pickup(i)]
    intervals = {i: (schedule[pos[i]], schedule[pos[i + inst.n]]) for i in requests}
    onboard = 0.0
    onboard_risk = []
    for node in sequence:
        onboard += inst.risk[node]
        onboard_risk.append(onboard + (1.0 if inst.mode == EDARP else 0.0))
    cumulative = [0.0]
    for p in range(1, len(sequence)):
        cumulative.append(cumulative[-1] + onboard_risk[p - 1] * (schedule[p] - schedule[p - 1]))
    exposure = {}
    for i in requests:
        si, ei = intervals[i]
        total = 0.0
        for jj in requests:
            if jj == i:
                continue
            sj, ej = intervals[jj]
            overlap = min(ei, ej) - max(si, sj)
            if overlap > 0:
                total += inst.risk[jj] * overlap
        if inst.mode == EDARP:
            total += ei - si  # virtual rider, unit risk, always onboard
        exposure[i] = total
    breakdown = ExposureBreakdown(onboard_risk, cumulative, exposure)
    if inst.mode == EDARP and inst.detour_weight is not None:
        breakdown.detour_rate = {
            i: exposure[i] / inst.detour_weight[i - 1] for i in requests
        }
    return breakdown


def validate_route(inst: Instance, route: Route, tol: float = SCHED_TOL) -> ExposureBreakdown:
    """Check every route invariant; raises RouteInfeasible listing each
    violated inequality with its two sides."""
    seq, sched = route.sequence, route.schedule
    violations = []
    if not seq or seq[0] != 0 or seq[-1] != inst.end_depot:
        raise RouteInfeasible([(seq[0] if seq else -1, "route must run depot to depot", 0, 0)])
    if len(sched) != len(seq):
        raise RouteInfeasible([(-1, "schedule length mismatch", len(sched), len(seq))])
    seen = {}
    for p, node in enumerate(seq):
        if node in seen:
            violations.append((node, "node visited twice", p, seen[node]))
        seen[node] = p
    for i in inst.pickups():
        pi, di = seen.get(i), seen.get(i + inst.n)
        if (pi is None) != (di is None):
            violations.append((i, "pick-up and drop-off must ride together", pi or -1, di or -1))
        elif pi is not None and pi > di:
            violations.append((i, "drop-off precedes pick-up", pi, di))
    if violations:
        raise RouteInfeasible(violations)

    load = 0.0
    for p, node in enumerate(seq):
        t = sched[p]
        if t < inst.early[node] - tol or t > inst.late[node] + tol:
            violations.append((node, "time window", t, inst.early[node] if t < inst.early[node] else inst.late[node]))
        if p > 0:
            prev = seq[p - 1]
            lower = sched[p - 1] + inst.service[prev] + inst.t(prev, node)
            if t < lower - tol:
                violations.append((node, "start before arrival", t, lower))
        load += inst.load[node]
        if load < -tol or load > inst.capacity + tol:
            violations.append((node, "capacity", load, inst.capacity))
    for i in inst.pickups():
        if i not in seen:
            continue
        ride = sched[seen[i + inst.n]] - (sched[seen[i]] + inst.service[i])
        if ride > inst.max_ride[i - 1] + tol:
            violations.append((i, "max ride time", ride, inst.max_ride[i - 1]))
        if ride < inst.direct_time(i) - tol:
            violations.append((i, "ride below direct time", ride, inst.direct_time(i)))
    breakdown = exposure_from_schedule(inst, seq, sched)
    if breakdown.cumulative[-1] > inst.q_max + tol:
        violations.append((seq[-1], "cumulative risk cap", breakdown.cumulative[-1], inst.q_max))
    if inst.mode == EDARP:
        pos = {node: p for p, node in enumerate(seq)}
        for i, h in breakdown.exposure.items():
            onboard = sched[pos[i + inst.n]] - sched[pos[i]]
            if abs(h - onboard) > tol:
                violations.append((i, "equity exposure must equal onboard time", h, onboard))
    if violations:
        raise RouteInfeasible(violations)
    return breakdown


# ---------------------------------------------------------------------------
# Fixed-sequence optimal schedules
# ---------------------------------------------------------------------------

def mmr_schedule(inst: Instance, sequence) -> tuple[Route, float] | None:
    """Minimize the peak individual exposure over feasible schedules of a
    fixed sequence; None when no feasible schedule exists.

    For a fixed visit order every pairwise overlap is a difference of two
    start-of-service variables with known endpoints, so the problem is an LP.
    """
    seq = tuple(sequence)
    if seq[0] != 0 or seq[-1] != inst.end_depot:
        raise ValueError("sequence must run depot to depot")
    pos = {node: p for p, node in enumerate(seq)}
    requests = [i for i in seq if inst.is_pickup(i)]
    for i in requests:
        if i + inst.n not in pos or pos[i + inst.n] < pos[i]:
            raise ValueError("sequence violates pairing or precedence")

    model = LinearModel("schedule")
    tvar = [model.add_var(f"t{p}", lb=inst.early[node], ub=inst.late[node])
            for p, node in enumerate(seq)]
    hbar = model.add_var("peak", lb=0.0, obj=1.0)
    for p in range(1, len(seq)):
        prev = seq[p - 1]
        model.add_row(
            f"chain{p}", {tvar[p]: 1.0, tvar[p - 1]: -1.0}, GE,
            inst.service[prev] + inst.t(prev, seq[p]),
        )
    for i in requests:
        pi, di = pos[i], pos[i + inst.n]
        model.add_row(f"ride_hi{i}", {tvar[di]: 1.0, tvar[pi]: -1.0}, LE,
                      inst.service[i] + inst.max_ride[i - 1])
        model.add_row(f"ride_lo{i}", {tvar[di]: 1.0, tvar[pi]: -1.0}, GE,
                      inst.service[i] + inst.direct_time(i))
    for i in requests:
        coeffs: dict[int, float] = {hbar: -1.0}
        pi, di = pos[i], pos[i + inst.n]
        for jj in requests:
            if jj == i:
                continue
            pj, dj = pos[jj], pos[jj + inst.n]
            s_p, e_p = max(pi, pj), min(di, dj)
            if s_p >= e_p:
                continue
            r = inst.risk[jj]
            if r == 0.0:
                continue
            coeffs[tvar[e_p]] = coeffs.get(tvar[e_p], 0.0) + r
            coeffs[tvar[s_p]] = coeffs.get(tvar[s_p], 0.0) - r
        if inst.mode == EDARP:
            coeffs[tvar[di]] = coeffs.get(tvar[di], 0.0) + 1.0
            coeffs[tvar[pi]] = coeffs.get(tvar[pi], 0.0) - 1.0
        if len(coeffs) > 1:
            model.add_row(f"peak{i}", coeffs, LE, 0.0)
    sol = solve_lp(model)
    if sol.status == INFEASIBLE:
        return None
    if sol.status != OPTIMAL:
        raise RouteInfeasible([(-1, f"schedule LP {sol.status}", 0, 0)])
    schedule = tuple(float(sol.x[v]) for v in tvar)
    breakdown = exposure_from_schedule(inst, seq, schedule)
    route = Route(
        sequence=seq, schedule=schedule, cost=route_cost(inst, seq),
        exposure=breakdown.exposure, q_terminal=breakdown.cumulative[-1],
    )
    return route, float(sol.objective)


def replay_route(inst: Instance, sequence) -> tuple[Route, str | None]:
    """Canonical route data via the greedy minimal-delay extension semantics.

    This is the same evaluation pricing labels perform, replayed over a fixed
    sequence; emitted columns carry exactly these schedules and exposures.
    """
    st = cal.initial_state(inst)
    for j in sequence[1:]:
        ext, reason = cal.extend(inst, st, j)
        if ext is None:
            return None, reason
        st = ext.state
    route = Route(
        sequence=tuple(sequence), schedule=st.times,
        cost=route_cost(inst, sequence),
        exposure=st.request_h(), q_terminal=st.q_cum,
    )
    return route, None


# ---------------------------------------------------------------------------
# Exhaustive tiny-instance solver
# ---------------------------------------------------------------------------

def _orderings(inst: Instance, group: tuple[int, ...]):
    """All depot-to-depot sequences over a request group respecting pairing
    and precedence."""
    n = inst.n
    items = []
    for i in group:
        items.extend([i, i + n])

    def rec(remaining, onboard, prefix):
        if not remaining and not onboard:
            yield (0, *prefix, inst.end_depot)
            return
        seen = set()
        for x in remaining:
            if x in seen:
                continue
            seen.add(x)
            if inst.is_pickup(x):
                yield from rec([y for y in remaining if y != x], onboard | {x}, prefix + [x])
            elif (x - n) in onboard:
                yield from rec([y for y in remaining if y != x], onboard - {x - n}, prefix + [x])

    yield from rec(items, set(), [])


def _partitions(requests: tuple[int, ...], max_blocks: int):
    if not requests:
        yield []
        return
    first, rest = requests[0], requests[1:]
    for sub in _partitions(rest, max_blocks):
        if len(sub) < max_blocks:
            yield [[first]] + [list(b) for b in sub]
        for k in range(len(sub)):
            out = [list(b) for b in sub]
            out[k] = [first] + out[k]
            yield out


@dataclass
class BruteForceResult:
    status: str  # "Optimal" | "Infeasible"
    objective: float
    routes: list[Route]


def brute_force_solve(
    inst: Instance,
    eps_risk: float = INF,
    objective: str = "cost",
    eps_cost: float = INF,
) -> BruteForceResult:
    """Enumerate every partition of requests into at most K routes and every
    feasible sequence per route; exact for n <= 5.

    ``eps_risk`` caps each request's exposure (detour rate in equity mode);
    ``objective`` is "cost" or "risk" (peak exposure / detour rate)."""
    if inst.n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force guarded to n <= {BRUTE_FORCE_LIMIT}")
    if objective not in ("cost", "risk"):
        raise ValueError("objective must be 'cost' or 'risk'")
    weights = None
    if inst.mode == EDARP:
        weights = {i: inst.detour_weight[i - 1] for i in inst.pickups()}

    option_cache: dict[tuple[int, ...], list[tuple[float, float, Route]]] = {}

    def options(group: tuple[int, ...]) -> list[tuple[float, float, Route]]:
        """Pareto-undominated (cost, peak) routes serving exactly ``group``."""
        key = tuple(sorted(group))
        if key in option_cache:
            return option_cache[key]
        candidates = []
        for seq in _orderings(inst, key):
            route, _ = replay_route(inst, seq)
            if route is None:
                continue
            measure = route.exposure if weights is None else {
                i: route.exposure[i] / weights[i] for i in route.exposure
            }
            if any(v > eps_risk + 1e-9 for v in measure.values()):
                continue
            peak = max(measure.values(), default=0.0)
            candidates.append((route.cost, peak, route))
        candidates.sort(key=lambda c: (c[0], c[1], c[2].sequence))
        frontier: list[tuple[float, float, Route]] = []
        for cand in candidates:
            if not any(f[0] <= cand[0] + 1e-12 and f[1] <= cand[1] + 1e-12 for f in frontier):
                frontier.append(cand)
        option_cache[key] = frontier
        return frontier

    requests = tuple(inst.pickups())
    best_key = None
    best_routes: list[Route] = []
    for part in _partitions(requests, inst.fleet_size):
        opts = [options(tuple(block)) for block in part]
        if any(not o for o in opts):
            continue
        if objective == "cost":
            routes = [o[0][2] for o in opts]  # frontier is cost-sorted
            total = sum(r.cost for r in routes)
            key = (total,)
        else:
            # Minimize the peak subject to the total-cost cap: scan candidate
            # peaks ascending, taking each block's cheapest option within.
            peaks = sorted({p for o in opts for _, p, _ in o})
            key = None
            for cap in peaks:
                chosen = []
                total = 0.0
                for o in opts:
                    fitting = [c for c in o if c[1] <= cap + 1e-12]
                    if not fitting:
                        chosen = None
                        break
                    pick = min(fitting, key=lambda c: (c[0], c[1], c[2].sequence))
                    chosen.append(pick[2])
                    total += pick[0]
                if chosen is not None and total <= eps_cost + 1e-9:
                    achieved = max(
                        (max((r.exposure[i] / (weights[i] if weights else 1.0))
                             for i in r.exposure) if r.exposure else 0.0)
                        for r in chosen
                    )
                    key = (achieved, total)
                    routes = chosen
                    break
            if key is None:
                continue
        if best_key is None or key < best_key:
            best_key = key
            best_routes = routes
    if best_key is None:
        return BruteForceResult("Infeasible", INF, [])
    return BruteForceResult("Optimal", best_key[0], best_routes)
