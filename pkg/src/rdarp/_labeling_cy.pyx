# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled labeling engine: same semantics as the pure-Python reference,
with bitmask request sets, per-member C arrays, and a precomputed arc
reduced-cost matrix. Emitted sequences are replayed through the reference
evaluator so column data is engine-independent."""

import heapq

from libc.stdlib cimport calloc, free, malloc
from libc.math cimport INFINITY

cimport cython

DEF TOL = 1e-9
DEF NEG_TOL = 1e-6


cdef class Ctx:
    cdef int m, n, end
    cdef bint edarp
    cdef double capacity, qmax
    cdef double* travel
    cdef double* service
    cdef double* early
    cdef double* late
    cdef double* loadv
    cdef double* riskv
    cdef double* ride
    cdef double* rho
    cdef double* arccost
    cdef unsigned char* allowed

    def __cinit__(self, inst, duals, mode, restrictions):
        cdef int m = inst.n_nodes
        cdef int n = inst.n
        cdef int i, j
        self.m = m
        self.n = n
        self.end = 2 * n + 1
        self.edarp = inst.mode == "EDARP"
        self.capacity = inst.capacity
        self.qmax = inst.q_max
        self.travel = <double*>malloc(m * m * sizeof(double))
        self.service = <double*>malloc(m * sizeof(double))
        self.early = <double*>malloc(m * sizeof(double))
        self.late = <double*>malloc(m * sizeof(double))
        self.loadv = <double*>malloc(m * sizeof(double))
        self.riskv = <double*>malloc(m * sizeof(double))
        self.ride = <double*>malloc((n + 1) * sizeof(double))
        self.rho = <double*>calloc(n + 1, sizeof(double))
        self.arccost = <double*>calloc(m * m, sizeof(double))
        self.allowed = <unsigned char*>calloc(m * m, sizeof(unsigned char))
        travel = inst.travel
        for i in range(m):
            row = travel[i]
            for j in range(m):
                self.travel[i * m + j] = row[j]
            self.service[i] = inst.service[i]
            self.early[i] = inst.early[i]
            self.late[i] = inst.late[i]
            self.loadv[i] = inst.load[i]
            self.riskv[i] = inst.risk[i]
        for i in range(1, n + 1):
            self.ride[i] = inst.max_ride[i - 1]
        for i, v in duals.rho.items():
            self.rho[i] = v
        banned = set(inst.banned_arcs) | set(restrictions.banned_arcs)
        cdef double xi = duals.xi
        cdef bint risk_mode = mode == "risk"
        pi = duals.pi
        adjust = duals.arc_adjust
        cdef double base
        for i in range(m):
            for j in range(m):
                if i == j or (i, j) in banned:
                    continue
                self.allowed[i * m + j] = 1
                base = -xi * self.travel[i * m + j] if risk_mode else self.travel[i * m + j]
                if 1 <= i <= n:
                    base -= pi.get(i, 0.0)
                self.arccost[i * m + j] = base
        for (i, j), v in adjust.items():
            if self.allowed[i * m + j]:
                self.arccost[i * m + j] -= v

    def __dealloc__(self):
        free(self.travel); free(self.service); free(self.early); free(self.late)
        free(self.loadv); free(self.riskv); free(self.ride); free(self.rho)
        free(self.arccost); free(self.allowed)


cdef class Label:
    cdef public int eta, counter, pathlen, nm
    cdef public double rcost, a_cur, b_cur, load, q_cum, q_frozen
    cdef public unsigned long long served, onboard, assoc
    cdef public Label parent
    cdef public bint alive
    cdef public tuple frozen  # (req, h, pick_o, pick_t, drop_o, drop_t) per retired rider
    # member arrays in boarding order; drop_o < 0 marks an open request
    cdef int* req
    cdef int* pick_o
    cdef int* drop_o
    cdef double* h
    cdef double* d
    cdef double* pick_t
    cdef double* drop_t
    cdef double* bo
    cdef double* doa
    cdef double* dob

    def __cinit__(self, int nm):
        self.nm = nm
        if nm > 0:
            self.req = <int*>malloc(nm * sizeof(int))
            self.pick_o = <int*>malloc(nm * sizeof(int))
            self.drop_o = <int*>malloc(nm * sizeof(int))
            self.h = <double*>malloc(nm * sizeof(double))
            self.d = <double*>malloc(nm * sizeof(double))
            self.pick_t = <double*>malloc(nm * sizeof(double))
            self.drop_t = <double*>malloc(nm * sizeof(double))
            self.bo = <double*>malloc(nm * sizeof(double))
            self.doa = <double*>malloc(nm * sizeof(double))
            self.dob = <double*>malloc(nm * sizeof(double))

    def __dealloc__(self):
        if self.nm > 0:
            free(self.req); free(self.pick_o); free(self.drop_o)
            free(self.h); free(self.d); free(self.pick_t); free(self.drop_t)
            free(self.bo); free(self.doa); free(self.dob)

    def __lt__(self, other):
        return self.counter < (<Label>other).counter

    def members_py(self):
        """Member tuples (req, h, pick_order, pick_time, drop_order, drop_time)."""
        out = []
        cdef int k
        for k in range(self.nm):
            out.append((self.req[k], self.h[k], self.pick_o[k], self.pick_t[k],
                        self.drop_o[k], self.drop_t[k]))
        return out

    cdef int find(self, int request) nogil:
        cdef int k
        for k in range(self.nm):
            if self.req[k] == request:
                return k
        return -1


cdef Label make_root(Ctx ctx):
    cdef Label lab
    if ctx.edarp:
        lab = Label(1)
        lab.req[0] = 0
        lab.pick_o[0] = 0
        lab.drop_o[0] = -1
        lab.h[0] = 0.0
        lab.d[0] = 0.0
        lab.pick_t[0] = ctx.early[0]
        lab.drop_t[0] = INFINITY
        lab.bo[0] = INFINITY
        lab.doa[0] = INFINITY
        lab.dob[0] = INFINITY
        lab.onboard = 1
    else:
        lab = Label(0)
        lab.onboard = 0
    lab.eta = 0
    lab.counter = 0
    lab.pathlen = 1
    lab.rcost = 0.0
    lab.a_cur = ctx.early[0]
    lab.b_cur = ctx.late[0]
    lab.load = 0.0
    lab.q_cum = 0.0
    lab.q_frozen = 0.0
    lab.served = 0
    lab.assoc = 0
    lab.parent = None
    lab.alive = True
    lab.frozen = ()
    return lab


cdef double rider_risk(Ctx ctx, int rider) nogil:
    if rider == 0:
        return 1.0
    return ctx.riskv[rider]


@cython.cdivision(True)
cdef Label extend(Ctx ctx, Label lab, int j, double* out_rcost_delta):
    """One extension step; returns the new label or None on rejection."""
    cdef int n = ctx.n, m = ctx.m
    cdef int eta = lab.eta
    cdef int dropped = -1
    cdef unsigned long long bit
    cdef int k, k2, mi
    # ---- stage 1 ----
    if 1 <= j <= n:
        bit = (<unsigned long long>1) << j
        if (lab.served | lab.onboard | lab.assoc) & bit:
            return None
    elif n + 1 <= j <= 2 * n:
        dropped = j - n
        bit = (<unsigned long long>1) << dropped
        if not (lab.onboard & bit):
            return None
    elif j == ctx.end:
        if lab.onboard & ~(<unsigned long long>1):
            return None
    else:
        return None
    cdef double s_eta = ctx.service[eta]
    cdef double t_arc = ctx.travel[eta * m + j]
    cdef double arrival = lab.a_cur + s_eta + t_arc
    cdef double a_new = arrival if arrival > ctx.early[j] else ctx.early[j]
    if a_new > ctx.late[j] + TOL:
        return None
    cdef double load_new = lab.load + ctx.loadv[j]
    if load_new > ctx.capacity + TOL:
        return None
    # ---- stage 2 ----
    cdef int drop_idx = -1
    cdef double b_new = ctx.late[j]
    if dropped > 0:
        drop_idx = lab.find(dropped)
        if lab.dob[drop_idx] < b_new:
            b_new = lab.dob[drop_idx]
    if a_new > b_new + TOL:
        return None
    cdef double wait = a_new - arrival
    cdef double bo_j = 0.0, doa_j = 0.0, dob_j = 0.0
    cdef double credit, bo_new_v, doa_new_v, dob_new_v
    # DTW updates for surviving open members are staged in temporaries
    cdef int nm_old = lab.nm
    cdef double* tmp_bo = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double* tmp_doa = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double* tmp_dob = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef bint reject = False
    for k in range(nm_old):
        if lab.req[k] == 0:
            tmp_bo[k] = INFINITY; tmp_doa[k] = INFINITY; tmp_dob[k] = INFINITY
            continue
        if lab.drop_o[k] >= 0:
            continue
        credit = lab.bo[k] - lab.a_cur
        if credit < 0.0:
            credit = 0.0
        if credit > wait:
            credit = wait
        doa_new_v = lab.doa[k] + credit
        if lab.req[k] != dropped:
            if a_new > doa_new_v + TOL:
                reject = True
                break
            bo_new_v = lab.bo[k] + s_eta + t_arc
            if bo_new_v > b_new:
                bo_new_v = b_new
            if bo_new_v < a_new:
                bo_new_v = a_new
            dob_new_v = lab.dob[k] - max2(0.0, lab.bo[k] + s_eta + t_arc - b_new)
        else:
            if a_new > doa_new_v + TOL:
                reject = True
                break
            bo_new_v = 0.0
            dob_new_v = 0.0
        tmp_bo[k] = bo_new_v
        tmp_doa[k] = doa_new_v
        tmp_dob[k] = dob_new_v
    if reject:
        if nm_old:
            free(tmp_bo); free(tmp_doa); free(tmp_dob)
        return None
    cdef double ride_j
    if 1 <= j <= n:
        ride_j = ctx.ride[j]
        bo_j = ctx.late[j + n] - ctx.service[j] - ride_j
        if bo_j > b_new:
            bo_j = b_new
        if bo_j < a_new:
            bo_j = a_new
        doa_j = a_new + ctx.service[j] + ride_j
        if doa_j > ctx.late[j + n]:
            doa_j = ctx.late[j + n]
        dob_j = bo_j + ctx.service[j] + ride_j
        if dob_j > ctx.late[j + n]:
            dob_j = ctx.late[j + n]

    # ---- stage 3: forced ride repair, then delay calibration ----
    cdef double* pick_t1 = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double* drop_t1 = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double* d1 = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double* h1 = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    for k in range(nm_old):
        pick_t1[k] = lab.pick_t[k]
        drop_t1[k] = lab.drop_t[k]
        d1[k] = lab.d[k]
        h1[k] = lab.h[k]
    cdef double q_base = lab.q_cum
    cdef double forced = 0.0
    if dropped > 0:
        forced = a_new - (lab.pick_t[drop_idx] + ctx.service[dropped]) - ctx.ride[dropped]
        if forced > TOL:
            if not _forced_repair(ctx, lab, drop_idx, forced, wait,
                                  pick_t1, drop_t1, d1, h1, &q_base, &wait):
                free(tmp_bo); free(tmp_doa); free(tmp_dob)
                free(pick_t1); free(drop_t1); free(d1); free(h1)
                return None
    cdef double span = s_eta + t_arc + wait
    # usable buffers: suffix minimum in boarding order (shifts non-decreasing
    # along the path), capped by served co-riders' remaining ride slack
    cdef double* usable = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    cdef double running
    cdef int rounds2
    cdef double boundv, slackv
    cdef bint changed
    for k in range(nm_old):
        usable[k] = d1[k] if (d1[k] > 0.0 and lab.req[k] != 0) else 0.0
    for rounds2 in range(2 * nm_old + 2):
        changed = False
        running = INFINITY
        for k in range(nm_old - 1, -1, -1):
            if usable[k] < running:
                running = usable[k]
            elif usable[k] > running:
                usable[k] = running
                changed = True
        for k in range(nm_old):
            if lab.req[k] == 0 or lab.drop_o[k] < 0:
                continue
            slackv = ctx.ride[lab.req[k]] - (drop_t1[k] - pick_t1[k] - ctx.service[lab.req[k]])
            if slackv < 0.0:
                slackv = 0.0
            boundv = usable[k] + slackv
            for k2 in range(nm_old):
                if lab.pick_o[k] < lab.pick_o[k2] < lab.drop_o[k] and usable[k2] > boundv + 1e-15:
                    usable[k2] = boundv
                    changed = True
        if not changed:
            break
    cdef double delta_star = 0.0
    cdef double cap = 0.0
    cdef bint has_assoc = lab.assoc != 0
    if wait > TOL and nm_old > 0:
        for k in range(nm_old):
            if usable[k] > cap:
                cap = usable[k]
        if cap > wait:
            cap = wait
        if cap > TOL:
            if has_assoc:
                delta_star = _argmin_peak(ctx, lab, usable, h1, pick_t1, drop_t1, span, cap)
            else:
                delta_star = cap
    cdef double* assign = <double*>malloc(nm_old * sizeof(double)) if nm_old else NULL
    for k in range(nm_old):
        assign[k] = delta_star if delta_star < usable[k] else usable[k]
        if lab.req[k] == 0:
            assign[k] = 0.0
    # pair increments and reduced-cost delta
    cdef double rd = ctx.arccost[eta * m + j]
    cdef double dh_total = _apply_pairs(ctx, lab, assign, span, h1, pick_t1, drop_t1, &rd)
    # cumulative risk
    cdef double q_new = q_base
    cdef double shift_d
    for k in range(nm_old):
        if lab.drop_o[k] < 0:
            q_new += rider_risk(ctx, lab.req[k]) * (span - assign[k])
        else:
            shift_d = _shift_at(lab, assign, lab.drop_o[k])
            q_new += rider_risk(ctx, lab.req[k]) * (shift_d - assign[k])
    if q_new > ctx.qmax + 1e-9:
        free(tmp_bo); free(tmp_doa); free(tmp_dob)
        free(pick_t1); free(drop_t1); free(d1); free(h1); free(usable); free(assign)
        return None
    # commit member times under the chosen delays
    cdef double sh
    for k in range(nm_old):
        sh = _shift_at(lab, assign, lab.pick_o[k])
        pick_t1[k] += sh
        if lab.drop_o[k] >= 0:
            drop_t1[k] += _shift_at(lab, assign, lab.drop_o[k])
    # ---- build the successor label ----
    cdef bint is_pick = 1 <= j <= n
    cdef bint resets = False
    if dropped > 0:
        resets = not (lab.onboard & ~((<unsigned long long>1 << dropped) | <unsigned long long>1))
    cdef int nm_new = 0
    for k in range(nm_old):
        if resets and (lab.req[k] == dropped or (lab.assoc >> lab.req[k]) & 1):
            continue
        nm_new += 1
    if is_pick:
        nm_new += 1
    cdef Label out = Label(nm_new)
    mi = 0
    cdef double dk
    retired = None
    for k in range(nm_old):
        if resets and (lab.req[k] == dropped or (lab.assoc >> lab.req[k]) & 1):
            if retired is None:
                retired = []
            retired.append((
                lab.req[k], h1[k], lab.pick_o[k], pick_t1[k],
                lab.pathlen if lab.req[k] == dropped else lab.drop_o[k],
                a_new if lab.req[k] == dropped else drop_t1[k],
            ))
            continue
        out.req[mi] = lab.req[k]
        out.pick_o[mi] = lab.pick_o[k]
        out.pick_t[mi] = pick_t1[k]
        out.h[mi] = h1[k]
        if lab.req[k] == 0:
            out.d[mi] = 0.0
        else:
            dk = d1[k] - assign[k]
            if b_new - a_new < dk:
                dk = b_new - a_new
            out.d[mi] = dk if dk > 0.0 else 0.0
        if lab.req[k] == dropped:
            out.drop_o[mi] = lab.pathlen
            out.drop_t[mi] = a_new
            out.bo[mi] = 0.0; out.doa[mi] = 0.0; out.dob[mi] = 0.0
        elif lab.drop_o[k] >= 0:
            out.drop_o[mi] = lab.drop_o[k]
            out.drop_t[mi] = drop_t1[k]
            out.bo[mi] = 0.0; out.doa[mi] = 0.0; out.dob[mi] = 0.0
        else:
            out.drop_o[mi] = -1
            out.drop_t[mi] = INFINITY
            out.bo[mi] = tmp_bo[k]; out.doa[mi] = tmp_doa[k]; out.dob[mi] = tmp_dob[k]
        mi += 1
    if is_pick:
        out.req[mi] = j
        out.pick_o[mi] = lab.pathlen
        out.pick_t[mi] = a_new
        out.drop_o[mi] = -1
        out.drop_t[mi] = INFINITY
        out.h[mi] = 0.0
        out.d[mi] = b_new - a_new
        out.bo[mi] = bo_j; out.doa[mi] = doa_j; out.dob[mi] = dob_j
    if nm_old:
        free(tmp_bo); free(tmp_doa); free(tmp_dob)
        free(pick_t1); free(drop_t1); free(d1); free(h1); free(usable); free(assign)

    out.eta = j
    out.pathlen = lab.pathlen + 1
    out.rcost = lab.rcost + rd
    out.a_cur = a_new
    out.b_cur = b_new
    out.load = load_new
    out.q_cum = q_new
    out.q_frozen = lab.q_frozen
    out.served = lab.served
    out.onboard = lab.onboard
    out.assoc = lab.assoc
    out.frozen = lab.frozen
    if is_pick:
        out.onboard = lab.onboard | ((<unsigned long long>1) << j)
    elif dropped > 0:
        out.onboard = lab.onboard & ~((<unsigned long long>1) << dropped)
        out.served = lab.served | ((<unsigned long long>1) << dropped)
        if resets:
            out.assoc = 0
            out.q_frozen = q_new
            if retired is not None:
                out.frozen = lab.frozen + tuple(retired)
        else:
            out.assoc = lab.assoc | ((<unsigned long long>1) << dropped)
    out.parent = lab
    out.alive = True
    out_rcost_delta[0] = rd
    return out


cdef inline double max2(double a, double b) nogil:
    return a if a > b else b


cdef double _shift_at(Label lab, double* assign, int order) nogil:
    """Largest committed delay among member pick-ups at or before a position."""
    cdef double best = 0.0
    cdef int k
    for k in range(lab.nm):
        if lab.pick_o[k] <= order and assign[k] > best:
            best = assign[k]
    return best


cdef double _pair_change(Label lab, double* assign, double span, int x, int y) nogil:
    """Overlap change for member pair (x boarded before y)."""
    cdef int end_o
    if lab.drop_o[x] < 0 and lab.drop_o[y] < 0:
        return span - assign[y]
    if lab.drop_o[x] < 0:
        end_o = lab.drop_o[y]
    elif lab.drop_o[y] < 0:
        end_o = lab.drop_o[x]
    else:
        end_o = lab.drop_o[x] if lab.drop_o[x] < lab.drop_o[y] else lab.drop_o[y]
    if lab.pick_o[y] >= end_o:
        return 0.0
    return _shift_at(lab, assign, end_o) - assign[y]


cdef double _apply_pairs(Ctx ctx, Label lab, double* assign, double span,
                         double* h1, double* pick_t1, double* drop_t1, double* rd):
    """Accrue pairwise exposure changes into h1 and the reduced cost."""
    cdef int a, b
    cdef double change, dha, dhb
    cdef double total = 0.0
    for a in range(lab.nm):
        for b in range(a + 1, lab.nm):
            change = _pair_change(lab, assign, span, a, b)
            if change == 0.0:
                continue
            if lab.req[a] != 0:
                dha = rider_risk(ctx, lab.req[b]) * change
                h1[a] += dha
                rd[0] -= ctx.rho[lab.req[a]] * dha
            if lab.req[b] != 0:
                dhb = rider_risk(ctx, lab.req[a]) * change
                h1[b] += dhb
                rd[0] -= ctx.rho[lab.req[b]] * dhb
    return total


cdef double _peak_at(Ctx ctx, Label lab, double* usable, double* h1,
                     double* pick_t1, double* drop_t1, double span, double delta):
    cdef double* assign = <double*>malloc(lab.nm * sizeof(double))
    cdef int k, a, b
    cdef double change, best = -INFINITY, v
    cdef double* vals = <double*>malloc(lab.nm * sizeof(double))
    for k in range(lab.nm):
        assign[k] = delta if delta < usable[k] else usable[k]
        if lab.req[k] == 0:
            assign[k] = 0.0
        vals[k] = h1[k]
    for a in range(lab.nm):
        for b in range(a + 1, lab.nm):
            change = _pair_change(lab, assign, span, a, b)
            if change != 0.0:
                vals[a] += rider_risk(ctx, lab.req[b]) * change
                vals[b] += rider_risk(ctx, lab.req[a]) * change
    for k in range(lab.nm):
        if lab.req[k] != 0 and vals[k] > best:
            best = vals[k]
    free(assign); free(vals)
    return best if best > -INFINITY else 0.0


cdef double _argmin_peak(Ctx ctx, Label lab, double* usable, double* h1,
                         double* pick_t1, double* drop_t1, double span, double cap):
    """Exact piecewise-linear minimization of the peak over the delay."""
    cdef list bps = [0.0, cap]
    cdef int k
    for k in range(lab.nm):
        if 0.0 < usable[k] < cap:
            bps.append(usable[k])
    bps = sorted(set(bps))
    cdef list candidates = list(bps)
    cdef double lo, hi, width, cross, sa, sb
    cdef int seg, a, b
    cdef int nm = lab.nm
    cdef double* vlo = <double*>malloc(nm * sizeof(double))
    cdef double* vhi = <double*>malloc(nm * sizeof(double))
    cdef double* assign = <double*>malloc(nm * sizeof(double))
    for seg in range(len(bps) - 1):
        lo = bps[seg]; hi = bps[seg + 1]
        width = hi - lo
        if width <= TOL:
            continue
        _rider_values(ctx, lab, usable, h1, span, lo, assign, vlo)
        _rider_values(ctx, lab, usable, h1, span, hi, assign, vhi)
        for a in range(nm):
            if lab.req[a] == 0:
                continue
            for b in range(a + 1, nm):
                if lab.req[b] == 0:
                    continue
                sa = (vhi[a] - vlo[a]) / width
                sb = (vhi[b] - vlo[b]) / width
                if sa - sb > 1e-12 or sb - sa > 1e-12:
                    cross = lo + (vlo[b] - vlo[a]) / (sa - sb)
                    if lo + TOL < cross < hi - TOL:
                        candidates.append(cross)
    free(vlo); free(vhi); free(assign)
    cdef double best_delta = 0.0, best_peak = INFINITY, peak
    for delta in sorted(candidates):
        peak = _peak_at(ctx, lab, usable, h1, pick_t1, drop_t1, span, delta)
        if peak < best_peak - 1e-12:
            best_peak = peak
            best_delta = delta
    return best_delta


cdef void _rider_values(Ctx ctx, Label lab, double* usable, double* h1,
                        double span, double delta, double* assign, double* vals):
    cdef int k, a, b
    cdef double change
    for k in range(lab.nm):
        assign[k] = delta if delta < usable[k] else usable[k]
        if lab.req[k] == 0:
            assign[k] = 0.0
        vals[k] = h1[k]
    for a in range(lab.nm):
        for b in range(a + 1, lab.nm):
            change = _pair_change(lab, assign, span, a, b)
            if change != 0.0:
                vals[a] += rider_risk(ctx, lab.req[b]) * change
                vals[b] += rider_risk(ctx, lab.req[a]) * change


cdef bint _forced_repair(Ctx ctx, Label lab, int drop_idx, double forced, double wait_in,
                         double* pick_t1, double* drop_t1, double* d1, double* h1,
                         double* q_base, double* wait_out):
    """Mandatory pick-up delay propagated through committed waits; every node
    at or after the bump is a member pick-up or drop-off event."""
    cdef int nm = lab.nm
    cdef int nev = 0, k, e
    cdef int* ev_order = <int*>malloc(2 * nm * sizeof(int))
    cdef int* ev_node = <int*>malloc(2 * nm * sizeof(int))
    cdef int* ev_member = <int*>malloc(2 * nm * sizeof(int))
    cdef unsigned char* ev_pick = <unsigned char*>malloc(2 * nm * sizeof(unsigned char))
    cdef double* ev_time = <double*>malloc(2 * nm * sizeof(double))
    for k in range(nm):
        ev_order[nev] = lab.pick_o[k]
        ev_node[nev] = 0 if lab.req[k] == 0 else lab.req[k]
        ev_member[nev] = k; ev_pick[nev] = 1; ev_time[nev] = lab.pick_t[k]
        nev += 1
        if lab.req[k] != 0 and lab.drop_o[k] >= 0:
            ev_order[nev] = lab.drop_o[k]; ev_node[nev] = lab.req[k] + ctx.n
            ev_member[nev] = k; ev_pick[nev] = 0; ev_time[nev] = lab.drop_t[k]
            nev += 1
    cdef int i2, j2, o_, n_, m_
    cdef unsigned char p_
    cdef double t_
    for i2 in range(1, nev):  # insertion sort by path order
        o_ = ev_order[i2]; n_ = ev_node[i2]; m_ = ev_member[i2]; p_ = ev_pick[i2]; t_ = ev_time[i2]
        j2 = i2 - 1
        while j2 >= 0 and ev_order[j2] > o_:
            ev_order[j2 + 1] = ev_order[j2]; ev_node[j2 + 1] = ev_node[j2]
            ev_member[j2 + 1] = ev_member[j2]; ev_pick[j2 + 1] = ev_pick[j2]
            ev_time[j2 + 1] = ev_time[j2]
            j2 -= 1
        ev_order[j2 + 1] = o_; ev_node[j2 + 1] = n_; ev_member[j2 + 1] = m_
        ev_pick[j2 + 1] = p_; ev_time[j2 + 1] = t_
    cdef int q_ev = -1
    cdef int* pick_ev = <int*>malloc(nm * sizeof(int))
    cdef int* drop_ev = <int*>malloc(nm * sizeof(int))
    for k in range(nm):
        pick_ev[k] = -1
        drop_ev[k] = -1
    for e in range(nev):
        if ev_pick[e]:
            pick_ev[ev_member[e]] = e
        else:
            drop_ev[ev_member[e]] = e
    q_ev = pick_ev[drop_idx]
    cdef double* need = <double*>calloc(nev, sizeof(double))
    cdef double* shift = <double*>calloc(nev, sizeof(double))
    need[q_ev] = forced
    cdef double carry, gap, slack, required
    cdef bint grew
    cdef int rounds = 0
    cdef bint ok = True
    while True:
        rounds += 1
        if rounds > nev * nev + 2:
            ok = False
            break
        carry = 0.0
        for e in range(nev):
            if e > 0:
                gap = ev_time[e] - (ev_time[e - 1] + ctx.service[ev_node[e - 1]]
                                    + ctx.travel[ev_node[e - 1] * ctx.m + ev_node[e]])
                if gap < 0.0:
                    gap = 0.0
                carry -= gap
                if carry < 0.0:
                    carry = 0.0
            if need[e] > carry:
                carry = need[e]
            shift[e] = carry
            if ev_time[e] + carry > ctx.late[ev_node[e]] + 1e-9:
                ok = False
                break
        if not ok:
            break
        # a stretched ride of an already-served member forces a cascading
        # bump at its own pick-up, possibly before the original one
        grew = False
        for k in range(nm):
            if lab.req[k] == 0 or drop_ev[k] < 0:
                continue
            slack = ctx.ride[lab.req[k]] - (lab.drop_t[k] - lab.pick_t[k] - ctx.service[lab.req[k]])
            required = shift[drop_ev[k]] - slack
            if required > shift[pick_ev[k]] + TOL:
                if required > need[pick_ev[k]] + TOL:
                    need[pick_ev[k]] = required
                    grew = True
        if not grew:
            break
    if ok and shift[nev - 1] > wait_in + 1e-6:
        ok = False
    if not ok:
        free(ev_order); free(ev_node); free(ev_member); free(ev_pick); free(ev_time)
        free(pick_ev); free(drop_ev); free(need); free(shift)
        return False
    # apply shifts to member times and decrement buffers conservatively
    cdef double dec
    for e in range(nev):
        k = ev_member[e]
        if shift[e] == 0.0:
            continue
        if ev_pick[e]:
            pick_t1[k] = ev_time[e] + shift[e]
        else:
            drop_t1[k] = ev_time[e] + shift[e]
    for k in range(nm):
        if lab.req[k] == 0:
            continue
        dec = 0.0
        for e in range(nev):
            if ev_order[e] >= lab.pick_o[k] and shift[e] > dec:
                dec = shift[e]
        if dec > 0.0:
            d1[k] -= dec
            if d1[k] < 0.0:
                d1[k] = 0.0
    # rebaseline member exposures from the shifted intervals
    cdef double end_t = -INFINITY
    for k in range(nm):
        if lab.req[k] == 0:
            continue
        if lab.drop_o[k] >= 0 and drop_t1[k] > end_t:
            end_t = drop_t1[k]
        if pick_t1[k] > end_t:
            end_t = pick_t1[k]
    cdef double lo1, hi1, lo2, hi2, ov, total
    for k in range(nm):
        if lab.req[k] == 0:
            continue
        lo1 = pick_t1[k]
        hi1 = drop_t1[k] if lab.drop_o[k] >= 0 else end_t
        total = 0.0
        for i2 in range(nm):
            if i2 == k:
                continue
            if lab.req[i2] == 0:
                lo2 = -INFINITY; hi2 = INFINITY
            else:
                lo2 = pick_t1[i2]
                hi2 = drop_t1[i2] if lab.drop_o[i2] >= 0 else end_t
            ov = (hi1 if hi1 < hi2 else hi2) - (lo1 if lo1 > lo2 else lo2)
            if ov > 0.0:
                total += rider_risk(ctx, lab.req[i2]) * ov
        h1[k] = total
    # rebaseline cumulative risk over the member era
    cdef double q1 = lab.q_frozen
    cdef double running_risk = 0.0
    cdef double prev_t = 0.0
    cdef bint first = True
    for e in range(nev):
        t_ = ev_time[e] + (shift[e] if e >= q_ev else 0.0)
        if not first:
            q1 += running_risk * (t_ - prev_t)
        if ev_node[e] == 0:
            running_risk += 1.0  # virtual rider boards at the depot
        else:
            running_risk += ctx.riskv[ev_node[e]]
        prev_t = t_
        first = False
    q_base[0] = q1
    wait_out[0] = wait_in - shift[nev - 1]
    free(ev_order); free(ev_node); free(ev_member); free(ev_pick); free(ev_time)
    free(pick_ev); free(drop_ev); free(need); free(shift)
    return True


# ---------------------------------------------------------------------------

def dominates_py(Label l1, Label l2, bint heuristic):
    return _dominates(l1, l2, heuristic)


cdef bint _dominates(Label l1, Label l2, bint heuristic):
    cdef int k, k2
    if l1.rcost > l2.rcost + TOL:
        return False
    if l1.a_cur > l2.a_cur + TOL:
        return False
    if l1.load > l2.load + TOL:
        return False
    if l1.q_cum > l2.q_cum + TOL:
        return False
    if not heuristic and (l1.served & ~l2.served):
        return False
    if l1.onboard & ~l2.onboard:
        return False
    if l1.assoc & ~l2.assoc:
        return False
    for k in range(l1.nm):
        if l1.req[k] == 0:
            continue
        k2 = l2.find(l1.req[k])
        if k2 < 0:
            return False
        if l1.drop_o[k] < 0:
            if l1.doa[k] - l1.a_cur < l2.doa[k2] - l2.a_cur - TOL:
                return False
            if l1.dob[k] < l2.dob[k2] - TOL:
                return False
        if l1.d[k] < l2.d[k2] - TOL:
            return False
        if l1.h[k] > l2.h[k2] + TOL:
            return False
    return True


def _column_from_label(inst, Label lab, Column):
    """Assemble the column directly from label bookkeeping."""
    seq = _sequence_of(lab)
    times = [0.0] * lab.pathlen
    seen = [False] * lab.pathlen
    times[0] = inst.early[0]
    seen[0] = True
    times[lab.pathlen - 1] = lab.a_cur
    seen[lab.pathlen - 1] = True
    exposure = {}
    for req, h, po, pt, do_, dt_ in lab.frozen:
        exposure[req] = h
        times[po] = pt; seen[po] = True
        times[do_] = dt_; seen[do_] = True
    for req, h, po, pt, do_, dt_ in lab.members_py():
        if req == 0:
            continue
        exposure[req] = h
        times[po] = pt; seen[po] = True
        if do_ >= 0:
            times[do_] = dt_; seen[do_] = True
    if not all(seen):
        raise RuntimeError(f"incomplete schedule reconstruction for {seq}")
    cost = 0.0
    for a, b in zip(seq[:-1], seq[1:]):
        cost += inst.travel[a][b]
    return Column(sequence=seq, schedule=tuple(times), cost=cost,
                  exposure=exposure, q_terminal=lab.q_cum, reduced_cost=lab.rcost)


def run_labeling(inst, duals, mode, heuristic, limit, restrictions, trace):
    """Best-first labeling; columns are assembled from label bookkeeping."""
    from .pricing import Column

    cdef Ctx ctx = Ctx(inst, duals, mode, restrictions)
    cdef Label root = make_root(ctx)
    root.rcost = -duals.mu
    cdef int counter = 1
    cdef list queue = [(root.rcost, 0, root)]
    stores = {i: [] for i in range(ctx.m)}
    finished = []
    cdef Label lab, new
    cdef int j
    cdef double rd
    cdef bint dominated
    while queue:
        _, _, lab = heapq.heappop(queue)
        if not lab.alive:
            continue
        for j in range(1, ctx.m):
            if j == lab.eta or not ctx.allowed[lab.eta * ctx.m + j]:
                continue
            new = extend(ctx, lab, j, &rd)
            if new is None:
                continue
            new.counter = counter
            counter += 1
            if j == ctx.end:
                if new.rcost < -NEG_TOL and new.served:
                    seq = _sequence_of(new)
                    arcs = list(zip(seq[:-1], seq[1:]))
                    if restrictions.allows(seq, arcs):
                        finished.append((new.rcost, new.counter, new))
                continue
            store = stores[j]
            dominated = False
            for old in store:
                if _dominates(<Label>old, new, heuristic):
                    dominated = True
                    break
            if dominated:
                continue
            survivors = []
            for old in store:
                if _dominates(new, <Label>old, heuristic):
                    (<Label>old).alive = False
                else:
                    survivors.append(old)
            survivors.append(new)
            stores[j] = survivors
            heapq.heappush(queue, (new.rcost, new.counter, new))
            if trace is not None:
                nopen = bin(new.onboard & ~<unsigned long long>1).count("1")
                trace(f"label node={j} rc={new.rcost:.6f} A={new.a_cur:.3f} "
                      f"B={new.b_cur:.3f} open={nopen} Q={new.q_cum:.6f}")
    finished.sort(key=lambda item: (item[0], item[1]))
    return [_column_from_label(inst, flab, Column) for _, _, flab in finished[:limit]]


cdef tuple _sequence_of(Label lab):
    nodes = []
    cdef Label cur = lab
    while cur is not None:
        nodes.append(cur.eta)
        cur = cur.parent
    nodes.reverse()
    return tuple(nodes)
