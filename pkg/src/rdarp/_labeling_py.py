"""Pure-Python labeling engine: the semantic reference for pricing."""

from __future__ import annotations

import heapq
import itertools

from . import calibration as cal
from .calibration import DUMMY, PathState
from .instance import Instance
from .oracle import route_cost

TOL = 1e-9
NEGATIVE_TOL = 1e-6


class _Label:
    __slots__ = ("state", "rcost", "counter", "alive")

    def __init__(self, state: PathState, rcost: float, counter: int):
        self.state = state
        self.rcost = rcost
        self.counter = counter
        self.alive = True


def dominates(l1: _Label, l2: _Label, heuristic: bool) -> bool:
    """Resource-wise dominance; True only when every condition holds.

    Exact mode compares: reduced cost, earliest start, load, cumulative risk,
    served/open/associated set inclusion, per-open drop-off windows, and
    per-member delay buffers and accrued exposures. Heuristic mode drops the
    served-set inclusion, which discards more labels but loses completeness.
    """
    s1, s2 = l1.state, l2.state
    if l1.rcost > l2.rcost + TOL:
        return False
    if s1.a_cur > s2.a_cur + TOL:
        return False
    if s1.load > s2.load + TOL:
        return False
    if s1.q_cum > s2.q_cum + TOL:
        return False
    if not heuristic and not s1.served <= s2.served:
        return False
    open1 = set(s1.onboard)
    if not open1 <= set(s2.onboard):
        return False
    assoc1 = set(s1.assoc)
    if not assoc1 <= set(s2.assoc):
        return False
    for o in s1.onboard:
        if o == DUMMY:
            continue
        if s1.do_a[o] - s1.a_cur < s2.do_a[o] - s2.a_cur - TOL:
            return False
        if s1.do_b[o] < s2.do_b[o] - TOL:
            return False
    for x in itertools.chain(s1.onboard, s1.assoc):
        if x == DUMMY:
            continue
        if s1.d[x] < s2.d[x] - TOL:
            return False
        if s1.h[x] > s2.h[x] + TOL:
            return False
    return True


def run_labeling(inst: Instance, duals, mode, heuristic, limit, restrictions, trace):
    from .pricing import Column

    n = inst.n
    end = inst.end_depot
    banned = set(inst.banned_arcs) | set(restrictions.banned_arcs)
    rho = duals.rho
    xi = duals.xi
    pi = duals.pi
    adjust = duals.arc_adjust
    risk_mode = mode == "risk"

    def arc_cost(i: int, j: int) -> float:
        t = inst.t(i, j)
        value = -xi * t if risk_mode else t
        if 1 <= i <= n:
            value -= pi.get(i, 0.0)
        adj = adjust.get((i, j))
        if adj is not None:
            value -= adj
        return value

    counter = itertools.count()
    root = _Label(cal.initial_state(inst), -duals.mu, next(counter))
    queue: list[tuple[float, int, _Label]] = [(root.rcost, root.counter, root)]
    stores: dict[int, list[_Label]] = {i: [] for i in range(inst.n_nodes)}
    finished: list[tuple[float, int, Column]] = []

    while queue:
        _, _, label = heapq.heappop(queue)
        if not label.alive:
            continue
        st = label.state
        eta = st.current
        for j in range(1, inst.n_nodes):
            if j == eta or (eta, j) in banned:
                continue
            ext, _reason = cal.extend(inst, st, j)
            if ext is None:
                continue
            rcost = label.rcost + arc_cost(eta, j)
            for x, dh in ext.delta_h.items():
                r = rho.get(x)
                if r is not None and dh != 0.0:
                    rcost -= r * dh
            if j == end:
                if rcost < -NEGATIVE_TOL and ext.state.served:
                    seq = ext.state.nodes
                    if restrictions.allows(seq, list(zip(seq[:-1], seq[1:]))):
                        col = Column(
                            sequence=seq, schedule=ext.state.times,
                            cost=route_cost(inst, seq),
                            exposure=ext.state.request_h(),
                            q_terminal=ext.state.q_cum, reduced_cost=rcost,
                        )
                        finished.append((rcost, next(counter), col))
                continue
            new = _Label(ext.state, rcost, next(counter))
            store = stores[j]
            if any(dominates(old, new, heuristic) for old in store):
                continue
            survivors = []
            for old in store:
                if dominates(new, old, heuristic):
                    old.alive = False
                else:
                    survivors.append(old)
            survivors.append(new)
            stores[j] = survivors
            heapq.heappush(queue, (new.rcost, new.counter, new))
            if trace is not None:
                trace(
                    f"label node={j} rc={rcost:.6f} A={ext.state.a_cur:.3f} "
                    f"B={ext.state.b_cur:.3f} open={sum(1 for o in ext.state.onboard if o != DUMMY)} "
                    f"Q={ext.state.q_cum:.6f}"
                )

    finished.sort(key=lambda item: (item[0], item[1]))
    return [col for _, _, col in finished[:limit]]
