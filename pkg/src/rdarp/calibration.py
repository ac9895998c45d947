"""Partial-route state and extension semantics.

One extension step appends a node to a partial route, maintaining: earliest
and latest feasible start-of-service, per-open-request dynamic drop-off
windows, per-request delay buffers, exposure bookkeeping, and a committed
schedule. Waiting discovered at the new node is absorbed by retroactively
delaying earlier pick-ups, balancing the exposure of onboard riders against
riders already dropped off whose trips would shift with them.

The pure-Python pricing engine and the oracle's fixed-sequence replay share
these semantics; the compiled engine mirrors them and is tested for equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .instance import EDARP, Instance

TOL = 1e-9
INF = math.inf

DUMMY = 0  # virtual ever-onboard rider used in equity mode

PDPTW_PRECEDENCE = "pdptw:precedence"
PDPTW_WINDOW = "pdptw:window"
PDPTW_CAPACITY = "pdptw:capacity"
DARP_LATEST = "darp:latest-start"
DARP_RIDETIME = "darp:ride-time"
RISK_QMAX = "rdarp:qmax"


@dataclass
class Extension:
    """Result of one accepted extension step."""

    state: "PathState"
    delta_h: dict[int, float]  # exposure increment per real request this step
    span: float = 0.0          # service + travel + residual wait on the arc
    assign: dict[int, float] | None = None  # delay committed per member

    def onboard_duration(self, rider: int) -> float:
        """Effective time the rider spent on this arc after calibration."""
        return self.span - (self.assign or {}).get(rider, 0.0)


class PathState:
    """Immutable partial-route state; extensions return fresh copies."""

    __slots__ = (
        "nodes", "times", "a_cur", "b_cur", "load", "onboard", "assoc",
        "served", "risk_sum", "q_cum", "h", "d", "bo", "do_a", "do_b",
        "pick_pos", "drop_pos",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])

    @property
    def current(self) -> int:
        return self.nodes[-1]

    def request_h(self) -> dict[int, float]:
        """Exposure per real request touched by the route so far."""
        return {r: v for r, v in self.h.items() if r != DUMMY}


def initial_state(inst: Instance) -> PathState:
    edarp = inst.mode == EDARP
    onboard = (DUMMY,) if edarp else ()
    return PathState(
        nodes=(0,), times=(inst.early[0],),
        a_cur=inst.early[0], b_cur=inst.late[0],
        load=0.0, onboard=onboard, assoc=(),
        served=frozenset(), risk_sum=(1.0 if edarp else 0.0), q_cum=0.0,
        h=({DUMMY: 0.0} if edarp else {}),
        d=({DUMMY: 0.0} if edarp else {}),
        bo={}, do_a={}, do_b={},
        pick_pos=({DUMMY: 0} if edarp else {}), drop_pos={},
    )


def rider_risk(inst: Instance, rider: int) -> float:
    return 1.0 if rider == DUMMY else inst.risk[rider]


def extend(inst: Instance, st: PathState, j: int):
    """Extend ``st`` to node ``j``.

    Returns (Extension, None) on success or (None, reason) on rejection,
    where ``reason`` names the stage and the violated quantity.
    """
    eta = st.current
    n = inst.n

    # ---- stage 1: pairing, precedence, window, capacity ----
    if inst.is_pickup(j):
        if j in st.served or j in st.pick_pos:
            return None, PDPTW_PRECEDENCE
    elif inst.is_dropoff(j):
        if (j - n) not in st.onboard:
            return None, PDPTW_PRECEDENCE
    elif j == inst.end_depot:
        if any(r != DUMMY for r in st.onboard):
            return None, PDPTW_PRECEDENCE
    else:
        return None, PDPTW_PRECEDENCE

    s_eta = inst.service[eta]
    t_arc = inst.t(eta, j)
    arrival = st.a_cur + s_eta + t_arc
    a_new = max(arrival, inst.early[j])
    if a_new > inst.late[j] + TOL:
        return None, PDPTW_WINDOW
    load_new = st.load + inst.load[j]
    if load_new > inst.capacity + TOL:
        return None, PDPTW_CAPACITY

    # ---- stage 2: latest starts and dynamic drop-off windows ----
    dropped = j - n if inst.is_dropoff(j) else None
    b_new = min(inst.late[j], st.do_b[dropped]) if dropped is not None else inst.late[j]
    if a_new > b_new + TOL:
        return None, DARP_LATEST

    wait = a_new - arrival
    bo_new: dict[int, float] = {}
    do_a_new: dict[int, float] = {}
    do_b_new: dict[int, float] = {}
    open_after = [o for o in st.onboard if o != DUMMY and o != dropped]
    if inst.is_pickup(j):
        open_after.append(j)
    for o in open_after:
        if o == j:
            ride = inst.max_ride[j - 1]
            bo = max(a_new, min(b_new, inst.late[j + n] - inst.service[j] - ride))
            da = min(a_new + inst.service[j] + ride, inst.late[j + n])
            db = min(bo + inst.service[j] + ride, inst.late[j + n])
        else:
            bo = max(a_new, min(st.bo[o] + s_eta + t_arc, b_new))
            da = st.do_a[o] + min(wait, max(0.0, st.bo[o] - st.a_cur))
            db = st.do_b[o] - max(0.0, st.bo[o] + s_eta + t_arc - b_new)
        if a_new > da + TOL:
            return None, DARP_RIDETIME
        bo_new[o], do_a_new[o], do_b_new[o] = bo, da, db
    if dropped is not None:
        # the request served at j must itself admit this drop-off time
        da = st.do_a[dropped] + min(wait, max(0.0, st.bo[dropped] - st.a_cur))
        if a_new > da + TOL:
            return None, DARP_RIDETIME

    # ---- stage 3: delay calibration and exposure accrual ----
    members = sorted(set(st.onboard) | set(st.assoc), key=lambda x: st.pick_pos[x])

    # A drop-off may force a minimum pick-up delay when the committed ride
    # would exceed its cap; the bump propagates forward through committed
    # waits (and the new node's wait) and rebaselines the bookkeeping.
    if dropped is not None:
        t_pick = st.times[st.pick_pos[dropped]]
        forced = a_new - (t_pick + inst.service[dropped]) - inst.max_ride[dropped - 1]
        if forced > TOL:
            st = _forced_repair(inst, st, members, st.pick_pos[dropped], forced, wait)
            if st is None:
                return None, DARP_RIDETIME
            arrival = st.times[-1] + s_eta + t_arc
            wait = a_new - arrival

    span = s_eta + t_arc + wait
    usable = _usable_buffers(inst, st, members)

    delta_star = 0.0
    if wait > TOL and members:
        cap = min(wait, max(usable.values()))
        if cap > TOL:
            if st.assoc:
                delta_star = _argmin_peak(inst, st, members, usable, span, cap)
            else:
                delta_star = cap
    assign = {x: min(delta_star, usable[x]) for x in members}

    delta_h = _pair_increments(inst, st, members, assign, span)

    shifts = _node_shifts(st, members, assign, len(st.times))
    q_new = st.q_cum
    for o in st.onboard:
        q_new += rider_risk(inst, o) * (span - assign.get(o, 0.0))
    for i in st.assoc:
        q_new += rider_risk(inst, i) * (shifts[st.drop_pos[i]] - assign[i])
    if q_new > inst.q_max + 1e-9:
        return None, RISK_QMAX

    # ---- commit: schedule shifts, membership, buffers ----
    if delta_star > 0.0:
        times = tuple(tv + sv for tv, sv in zip(st.times, shifts)) + (a_new,)
    else:
        times = st.times + (a_new,)

    h_new = dict(st.h)
    for x, dh in delta_h.items():
        h_new[x] = h_new.get(x, 0.0) + dh

    d_new = {}
    for x in members:
        d_new[x] = 0.0 if x == DUMMY else min(st.d[x] - assign[x], b_new - a_new)

    onboard_new = [o for o in st.onboard if o != dropped]
    assoc_new = list(st.assoc)
    served_new = st.served
    pick_pos_new = dict(st.pick_pos)
    drop_pos_new = dict(st.drop_pos)
    pos_new = len(times) - 1
    if inst.is_pickup(j):
        onboard_new.append(j)
        pick_pos_new[j] = pos_new
        d_new[j] = b_new - a_new
        h_new.setdefault(j, 0.0)
    elif dropped is not None:
        served_new = st.served | {dropped}
        drop_pos_new[dropped] = pos_new
        if any(o != DUMMY for o in onboard_new):
            assoc_new.append(dropped)
        else:
            # vehicle empties: no future delay can reach riders served so far
            for i in assoc_new:
                d_new.pop(i, None)
            assoc_new = []
            d_new.pop(dropped, None)

    state = PathState(
        nodes=st.nodes + (j,), times=times,
        a_cur=a_new, b_cur=b_new, load=load_new,
        onboard=tuple(onboard_new), assoc=tuple(assoc_new),
        served=served_new,
        risk_sum=st.risk_sum + inst.risk[j], q_cum=q_new,
        h=h_new, d=d_new, bo=bo_new, do_a=do_a_new, do_b=do_b_new,
        pick_pos=pick_pos_new, drop_pos=drop_pos_new,
    )
    return Extension(state, delta_h, span, assign), None


# ---------------------------------------------------------------------------
# calibration internals
# ---------------------------------------------------------------------------

def _usable_buffers(inst: Instance, st: PathState, members) -> dict[int, float]:
    """Per-member delay capacity: suffix-minimum of the raw buffers (shifts
    must be non-decreasing in boarding order), further capped so that a
    member's delay never stretches an already-served co-rider's committed
    ride beyond its cap (delay of x plus that rider's remaining ride slack)."""
    cap = {x: max(0.0, st.d[x]) if x != DUMMY else 0.0 for x in members}
    for _ in range(2 * len(members) + 2):
        changed = False
        running = INF
        for x in reversed(members):
            running = min(running, cap[x])
            if cap[x] > running:
                cap[x] = running
                changed = True
        for x in members:
            dpx = st.drop_pos.get(x)
            if dpx is None or x == DUMMY:
                continue
            slack = inst.max_ride[x - 1] - (
                st.times[dpx] - st.times[st.pick_pos[x]] - inst.service[x])
            bound = cap[x] + max(0.0, slack)
            for y in members:
                if st.pick_pos[x] < st.pick_pos[y] < dpx and cap[y] > bound + 1e-15:
                    cap[y] = bound
                    changed = True
        if not changed:
            break
    return cap


def _node_shifts(st: PathState, members, assign, n_positions: int) -> list[float]:
    """Shift per committed position: delay is idle inserted just before each
    member's pick-up, so a position shifts by the largest delay among pick-ups
    at or before it. Delays are non-decreasing in boarding order, making every
    shift pattern physically realizable."""
    shifts = [0.0] * n_positions
    cur = 0.0
    marks = sorted((st.pick_pos[x], assign[x]) for x in members)
    k = 0
    for pos in range(n_positions):
        while k < len(marks) and marks[k][0] <= pos:
            cur = max(cur, marks[k][1])
            k += 1
        shifts[pos] = cur
    return shifts


def _pair_increments(inst: Instance, st: PathState, members, assign, span):
    """Exposure increment per real rider for one extension.

    Open pairs gain the arc span (travel + service + residual wait) less the
    later rider's delay; pairs with a dropped rider change only through the
    induced shifts of their recorded endpoints.
    """
    if not members:
        return {}
    shifts = _node_shifts(st, members, assign, len(st.times))
    pos = st.pick_pos
    onboard = set(st.onboard)
    dh = {x: 0.0 for x in members}
    for ai in range(len(members)):
        x = members[ai]
        for bi in range(ai + 1, len(members)):
            y = members[bi]  # boarded after x
            if x in onboard and y in onboard:
                change = span - assign[y]
            else:
                if x in onboard:
                    end_pos = st.drop_pos[y]
                elif y in onboard:
                    end_pos = st.drop_pos[x]
                else:
                    end_pos = min(st.drop_pos[x], st.drop_pos[y])
                if pos[y] >= end_pos:
                    continue  # never co-rode
                change = shifts[end_pos] - assign[y]
            if change != 0.0:
                dh[x] += rider_risk(inst, y) * change
                dh[y] += rider_risk(inst, x) * change
    dh.pop(DUMMY, None)
    return dh


def _forced_repair(inst: Instance, st: PathState, members, q_pos: int, forced: float, wait: float):
    """Commit a mandatory pick-up delay of ``forced`` at position ``q_pos``.

    The bump propagates through committed waits; whatever reaches the current
    node must fit inside the new node's wait. Returns a rebaselined state
    (schedule, exposures, buffers, cumulative risk) or None when infeasible.
    """
    k = len(st.times)
    nodes = st.nodes
    gaps = [0.0] * k  # committed idle just before each position
    for pos in range(1, k):
        prev = nodes[pos - 1]
        gaps[pos] = max(0.0, st.times[pos] - (st.times[pos - 1] + inst.service[prev] + inst.t(prev, nodes[pos])))
    need = {q_pos: forced}
    shift = [0.0] * k
    # Least fixpoint: a bump that stretches an already-served ride beyond its
    # cap forces a cascading bump at that ride's own pick-up.
    for _ in range(k * k + 1):
        carry = 0.0
        for pos in range(k):
            carry = max(0.0, carry - gaps[pos]) if pos else 0.0
            carry = max(carry, need.get(pos, 0.0))
            shift[pos] = carry
            if st.times[pos] + carry > inst.late[nodes[pos]] + 1e-9:
                return None
        grew = False
        for x in members:
            dpx = st.drop_pos.get(x)
            if dpx is None or x == DUMMY:
                continue
            ppx = st.pick_pos[x]
            slack = inst.max_ride[x - 1] - (st.times[dpx] - st.times[ppx] - inst.service[x])
            required = shift[dpx] - slack
            if required > shift[ppx] + TOL:
                need[ppx] = max(need.get(ppx, 0.0), required)
                grew = True
        if not grew:
            break
    else:
        return None
    if shift[k - 1] > wait + 1e-6:
        return None

    times1 = tuple(tv + sv for tv, sv in zip(st.times, shift))
    h1 = dict(st.h)
    h1.update(_member_exposure(inst, st, times1, members))
    d1 = dict(st.d)
    for x in members:
        if x == DUMMY:
            continue
        dec = max(shift[st.pick_pos[x]:])
        if dec > 0.0:
            d1[x] = max(0.0, d1[x] - dec)
    running_risk = 1.0 if inst.mode == EDARP else 0.0
    q1 = 0.0
    for pos in range(1, k):
        running_risk += inst.risk[nodes[pos - 1]]
        q1 += running_risk * (times1[pos] - times1[pos - 1])
    return PathState(
        nodes=st.nodes, times=times1, a_cur=st.a_cur, b_cur=st.b_cur,
        load=st.load, onboard=st.onboard, assoc=st.assoc, served=st.served,
        risk_sum=st.risk_sum, q_cum=q1, h=h1, d=d1,
        bo=st.bo, do_a=st.do_a, do_b=st.do_b,
        pick_pos=st.pick_pos, drop_pos=st.drop_pos,
    )


def _member_exposure(inst: Instance, st: PathState, times, members) -> dict[int, float]:
    """Member exposures recomputed from a committed schedule; open intervals
    run to the current node's start of service."""
    end = times[-1]
    spans = {}
    for x in members:
        lo = times[st.pick_pos[x]]
        hi = times[st.drop_pos[x]] if x in st.drop_pos else end
        spans[x] = (lo, hi)
    if DUMMY in st.pick_pos and DUMMY not in spans:
        spans[DUMMY] = (times[0], end)
    out = {x: 0.0 for x in members if x != DUMMY}
    for x in out:
        lo, hi = spans[x]
        total = 0.0
        for y, (lo2, hi2) in spans.items():
            if y == x:
                continue
            overlap = min(hi, hi2) - max(lo, lo2)
            if overlap > 0:
                total += rider_risk(inst, y) * overlap
        out[x] = total
    return out


def _argmin_peak(inst: Instance, st: PathState, members, usable, span, cap) -> float:
    """Smallest global delay minimizing the post-extension peak exposure.

    Every rider's exposure is piecewise linear in the delay with kinks only at
    buffer saturations, so the peak is evaluated exactly at saturation points
    plus pairwise intersections of the rider lines within each segment.
    """

    def rider_values(delta: float) -> dict[int, float]:
        assign = {x: min(delta, usable[x]) for x in members}
        dh = _pair_increments(inst, st, members, assign, span)
        return {x: st.h[x] + dh.get(x, 0.0) for x in members if x != DUMMY}

    bps = {0.0, cap}
    for x in members:
        val = usable[x]
        if 0.0 < val < cap:
            bps.add(val)
    bps = sorted(bps)
    candidates = list(bps)
    for k in range(len(bps) - 1):
        lo, hi = bps[k], bps[k + 1]
        width = hi - lo
        if width <= TOL:
            continue
        vlo = rider_values(lo)
        vhi = rider_values(hi)
        riders = list(vlo)
        for i1 in range(len(riders)):
            x = riders[i1]
            sx = (vhi[x] - vlo[x]) / width
            for i2 in range(i1 + 1, len(riders)):
                y = riders[i2]
                sy = (vhi[y] - vlo[y]) / width
                if abs(sx - sy) < 1e-12:
                    continue
                cross = lo + (vlo[y] - vlo[x]) / (sx - sy)
                if lo + TOL < cross < hi - TOL:
                    candidates.append(cross)

    best_delta = 0.0
    best_peak = INF
    for delta in sorted(candidates):
        vals = rider_values(delta)
        peak = max(vals.values()) if vals else 0.0
        if peak < best_peak - 1e-12:
            best_peak = peak
            best_delta = delta
    return best_delta
