import itertools
import math
import random

import pytest

from rdarp import calibration as cal
from rdarp._labeling_py import _Label, dominates
from rdarp.fixtures import random_instance
from rdarp.instance import edarp_transform, preprocess
from rdarp.oracle import Route, _orderings, mmr_schedule, replay_route, validate_route
from rdarp.pricing import (
    Column,
    DualValues,
    PricingRestrictions,
    arc_reduced_cost,
    solve_pricing,
)

INF = math.inf


def enumerate_min_rc(inst, duals, mode):
    """Exhaustive minimum reduced cost over all feasible routes."""
    best = None
    n = inst.n
    for size in range(1, n + 1):
        for group in itertools.combinations(range(1, n + 1), size):
            for seq in _orderings(inst, group):
                if any(a in inst.banned_arcs for a in zip(seq[:-1], seq[1:])):
                    continue
                route, _ = replay_route(inst, seq)
                if route is None:
                    continue
                rc = -duals.mu
                for a, b in zip(seq[:-1], seq[1:]):
                    t = inst.t(a, b)
                    rc += (-duals.xi * t) if mode == "risk" else t
                    if inst.is_pickup(a):
                        rc -= duals.pi.get(a, 0.0)
                    rc -= duals.arc_adjust.get((a, b), 0.0)
                for i, h in route.exposure.items():
                    rc -= duals.rho.get(i, 0.0) * h
                if best is None or rc < best[0]:
                    best = (rc, seq)
    return best


def test_arc_reduced_cost_modes():
    inst = random_instance(0, n=2)
    duals = DualValues(pi={1: inst.t(1, 2)})
    d = inst.dropoff_of(1)
    # drop-off source keeps the raw travel time
    assert arc_reduced_cost(inst, duals, d, 2, "cost") == pytest.approx(inst.t(d, 2))
    # pick-up source subtracts its coverage dual
    assert arc_reduced_cost(inst, duals, 1, 2, "cost") == pytest.approx(0.0)
    # risk mode scales travel by the cost-cap dual
    duals = DualValues(xi=-1.0)
    assert arc_reduced_cost(inst, duals, d, 2, "risk") == pytest.approx(inst.t(d, 2))
    pre = preprocess(inst)
    banned = sorted(pre.banned_arcs)[0]
    with pytest.raises(ValueError):
        arc_reduced_cost(pre, duals, banned[0], banned[1], "cost")


def test_zero_duals_yield_no_columns(engine):
    inst = preprocess(random_instance(3, n=3))
    assert solve_pricing(inst, DualValues(), "cost", engine=engine) == []


def test_huge_dual_covers_that_request(engine):
    inst = preprocess(random_instance(3, n=3))
    cols = solve_pricing(inst, DualValues(pi={2: 500.0}), "cost", engine=engine)
    assert cols and 2 in cols[0].exposure


def test_precedence_rejection():
    inst = random_instance(0, n=2)
    st = cal.initial_state(inst)
    ext, reason = cal.extend(inst, st, inst.dropoff_of(1))
    assert ext is None and reason == cal.PDPTW_PRECEDENCE


def test_extension_reject_reasons_carry_stage():
    inst = random_instance(0, n=2)
    st = cal.initial_state(inst)
    ext, _ = cal.extend(inst, st, 1)
    assert ext is not None
    # revisiting the same pick-up
    _, reason = cal.extend(inst, ext.state, 1)
    assert reason == cal.PDPTW_PRECEDENCE


@pytest.mark.parametrize("mode", ["cost", "risk"])
def test_min_reduced_cost_matches_enumeration(mode, engine):
    rng = random.Random(17)
    for seed in range(8):
        inst = preprocess(random_instance(seed, n=3))
        duals = DualValues(
            pi={i: rng.uniform(-20.0, 120.0) for i in inst.pickups()},
            mu=-rng.uniform(0.0, 8.0),
            rho={i: -rng.uniform(0.0, 2.5) for i in inst.pickups()},
            xi=-rng.uniform(0.1, 2.0) if mode == "risk" else 0.0,
        )
        best = enumerate_min_rc(inst, duals, mode)
        cols = solve_pricing(inst, duals, mode, limit=500, engine=engine)
        if best and best[0] < -1e-6:
            assert cols, (seed, best)
            assert cols[0].reduced_cost == pytest.approx(best[0], abs=1e-6)
        else:
            assert cols == []


def test_dominance_pruning_preserves_minimum(engine):
    """Pruned and unpruned runs agree on the best reduced cost: simulated by
    comparing the engine against exhaustive enumeration on random duals."""
    rng = random.Random(5)
    for trial in range(25):
        inst = preprocess(random_instance(trial % 12, n=2 + trial % 2))
        duals = DualValues(
            pi={i: rng.uniform(0.0, 150.0) for i in inst.pickups()},
            rho={i: -rng.uniform(0.0, 3.0) for i in inst.pickups()},
        )
        best = enumerate_min_rc(inst, duals, "cost")
        cols = solve_pricing(inst, duals, "cost", limit=1000, engine=engine)
        lab_best = cols[0].reduced_cost if cols else 0.0
        enum_best = best[0] if best and best[0] < -1e-6 else 0.0
        assert lab_best == pytest.approx(enum_best, abs=1e-6)


def test_dominates_reflexive_and_cost_condition():
    inst = random_instance(0, n=2)
    st = cal.initial_state(inst)
    ext, _ = cal.extend(inst, st, 1)
    l1 = _Label(ext.state, 5.0, 0)
    l2 = _Label(ext.state, 5.0, 1)
    assert dominates(l1, l2, heuristic=False)
    worse = _Label(ext.state, 5.0 + 1e-6, 2)
    assert dominates(l1, worse, False)
    assert not dominates(worse, l1, False)


def test_emitted_columns_pass_oracle(engine):
    rng = random.Random(11)
    for seed in (2, 5, 9):
        inst = preprocess(random_instance(seed, n=4))
        duals = DualValues(pi={i: rng.uniform(40.0, 120.0) for i in inst.pickups()},
                           rho={i: -rng.uniform(0.0, 1.0) for i in inst.pickups()})
        for col in solve_pricing(inst, duals, "cost", limit=300, engine=engine):
            route = Route(col.sequence, col.schedule, col.cost, col.exposure, col.q_terminal)
            validate_route(inst, route)
            lp = mmr_schedule(inst, col.sequence)
            assert max(col.exposure.values(), default=0.0) == pytest.approx(lp[1], abs=1e-6)


def test_engines_agree_on_best_column(engine):
    if engine == "py":
        pytest.skip("comparison runs once, from the compiled side")
    rng = random.Random(23)
    for seed in range(10):
        inst = preprocess(random_instance(seed, n=3))
        duals = DualValues(pi={i: rng.uniform(0.0, 150.0) for i in inst.pickups()},
                           rho={i: -rng.uniform(0.0, 2.0) for i in inst.pickups()})
        py = solve_pricing(inst, duals, "cost", limit=50, engine="py")
        cy = solve_pricing(inst, duals, "cost", limit=50, engine="cy")
        assert bool(py) == bool(cy)
        if py:
            assert py[0].reduced_cost == pytest.approx(cy[0].reduced_cost, abs=1e-7)
            assert py[0].sequence == cy[0].sequence


def test_restrictions_filter_emissions():
    inst = preprocess(random_instance(3, n=2))
    duals = DualValues(pi={i: 400.0 for i in inst.pickups()})
    all_cols = solve_pricing(inst, duals, "cost", limit=100)
    assert all_cols
    target = all_cols[0].sequence
    restricted = solve_pricing(
        inst, duals, "cost", limit=100,
        restrictions=PricingRestrictions(banned_sequences=frozenset({target})),
    )
    assert target not in {c.sequence for c in restricted}


def test_trace_emits_lines(engine):
    inst = preprocess(random_instance(1, n=2))
    lines = []
    solve_pricing(inst, DualValues(pi={1: 300.0, 2: 300.0}), "cost",
                  engine=engine, trace=lines.append)
    assert lines and all("rc=" in ln and "Q=" in ln for ln in lines)


def test_edarp_columns_satisfy_onboard_identity(engine):
    inst = preprocess(edarp_transform(random_instance(4, n=3, window=50.0)))
    duals = DualValues(pi={i: 200.0 for i in inst.pickups()},
                       rho={i: -0.5 for i in inst.pickups()})
    cols = solve_pricing(inst, duals, "cost", limit=200, engine=engine)
    assert cols
    for col in cols:
        pos = {node: k for k, node in enumerate(col.sequence)}
        for i, h in col.exposure.items():
            onboard = col.schedule[pos[i + inst.n]] - col.schedule[pos[i]]
            assert h == pytest.approx(onboard, abs=1e-9)
