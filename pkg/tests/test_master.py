import math

import pytest

from rdarp import bcp, oracle
from rdarp.errors import RouteInfeasible
from rdarp.fixtures import random_instance
from rdarp.instance import preprocess
from rdarp.lp import solve_lp
from rdarp.master import (
    ColumnPool,
    ExtraRow,
    OPTIMAL_STATUS,
    INFEASIBLE_STATUS,
    add_edarp_constraints,
    big_cost,
    build_rlmp,
    column_generation,
    pareto_front,
    seed_pool,
)
from rdarp.pricing import Column

INF = math.inf


def make_column(inst, seq):
    route, reason = oracle.replay_route(inst, seq)
    assert route is not None, reason
    return Column(route.sequence, route.schedule, route.cost, route.exposure,
                  route.q_terminal, 0.0)


def test_pool_rejects_duplicates_and_validates(two_rider_chain):
    pool = ColumnPool(two_rider_chain)
    col = make_column(two_rider_chain, (0, 1, 2, 3, 4, 5))
    assert pool.add(col)
    assert not pool.add(col)
    broken = Column(col.sequence, tuple(t + 500 for t in col.schedule), col.cost,
                    col.exposure, col.q_terminal, 0.0)
    with pytest.raises(RouteInfeasible):
        ColumnPool(two_rider_chain).add(broken)


def test_rlmp_single_feasible_column(two_rider_chain):
    pool = ColumnPool(two_rider_chain)
    pool.add(make_column(two_rider_chain, (0, 1, 2, 3, 4, 5)))
    model, meta = build_rlmp(pool, two_rider_chain, "cost")
    sol = solve_lp(model)
    assert sol.status == "Optimal"
    assert sol.value("l0") == pytest.approx(1.0)
    assert all(sol.value(f"art{i}") == pytest.approx(0.0) for i in (1, 2))


def test_rlmp_empty_pool_uses_artificials(two_rider_chain):
    pool = ColumnPool(two_rider_chain)
    pool.add(make_column(two_rider_chain, (0, 1, 3, 5)))  # covers request 1 only
    model, meta = build_rlmp(pool, two_rider_chain, "cost")
    sol = solve_lp(model)
    assert sol.value("art2") == pytest.approx(1.0)
    assert sol.objective >= big_cost(two_rider_chain)


def test_rlmp_infinite_cap_omits_risk_rows(two_rider_chain):
    pool = ColumnPool(two_rider_chain)
    pool.add(make_column(two_rider_chain, (0, 1, 2, 3, 4, 5)))
    model, meta = build_rlmp(pool, two_rider_chain, "cost", eps_risk=INF)
    assert meta["risk_rows"] == []
    assert all(not name.startswith("risk") for name in model.row_names)
    model, meta = build_rlmp(pool, two_rider_chain, "cost", eps_risk=10.0)
    assert meta["risk_rows"] == [1, 2]


def test_cg_single_request_converges_in_one_round():
    inst = preprocess(random_instance(0, n=1, fleet_size=1))
    pool = ColumnPool(inst)
    assert seed_pool(pool, inst) == []
    res = column_generation(inst, pool, "cost")
    assert res.status == OPTIMAL_STATUS
    assert res.iterations <= 2
    assert len(res.solution.lambdas) == 1


def test_cg_matches_brute_force_when_integral():
    inst0 = random_instance(4, n=2, fleet_size=2)
    inst = preprocess(inst0)
    pool = ColumnPool(inst)
    seed_pool(pool, inst)
    res = column_generation(inst, pool, "cost")
    assert res.status == OPTIMAL_STATUS
    bf = oracle.brute_force_solve(inst0)
    if res.solution.integral:
        assert res.objective == pytest.approx(bf.objective, abs=1e-6)
    else:
        assert res.objective <= bf.objective + 1e-6


def test_cg_detects_infeasibility_with_tight_cap():
    # pick-up deadlines force both riders onboard together, so every covering
    # has peak exposure at least 1.0; a cap below that is infeasible
    from dataclasses import replace

    from tests.test_oracle import corridor_instance

    inst0 = replace(
        corridor_instance(), fleet_size=1,
        late=(100.0, 3.0, 3.0, 100.0, 100.0, 100.0),
    )
    bf = oracle.brute_force_solve(inst0, eps_risk=0.5)
    assert bf.status == "Infeasible"
    assert oracle.brute_force_solve(inst0, eps_risk=1.5).status == "Optimal"
    inst = preprocess(inst0)
    pool = ColumnPool(inst)
    seed_pool(pool, inst)
    res = column_generation(inst, pool, "cost", eps_risk=0.5)
    assert res.status == INFEASIBLE_STATUS
    pool2 = ColumnPool(inst)
    seed_pool(pool2, inst)
    assert column_generation(inst, pool2, "cost", eps_risk=1.5).status == OPTIMAL_STATUS


def test_extra_row_coefficients(two_rider_chain):
    col = make_column(two_rider_chain, (0, 1, 2, 3, 4, 5))
    row = ExtraRow("veh", "<=", 2.0, route_constant=1.0)
    assert row.coefficient(col) == 1.0
    arc_row = ExtraRow("arc", ">=", 1.0, arc_coefs=(((1, 2), 1.0), ((4, 5), 2.0)))
    assert arc_row.coefficient(col) == pytest.approx(3.0)


def test_add_edarp_constraints_coefficients():
    from rdarp.instance import edarp_transform

    inst = preprocess(edarp_transform(random_instance(4, n=2, window=60.0)))
    pool = ColumnPool(inst)
    seed_pool(pool, inst)
    from rdarp.lp import LinearModel

    model = LinearModel()
    lam = [model.add_var(f"l{k}", obj=c.cost) for k, c in enumerate(pool.columns)]
    rows = add_edarp_constraints(model, pool, inst, lam, eps_dt=4.0)
    assert rows
    # coefficient is exposure over the floored direct time
    col = pool.columns[0]
    i = col.requests[0]
    expected = col.exposure[i] / inst.detour_weight[i - 1]
    row = model.rows[rows[0]]
    assert any(abs(v - expected) < 1e-12 for _, v in row)


def test_detour_coefficient_uses_floor(two_rider_chain):
    from rdarp.instance import edarp_transform

    inst = edarp_transform(two_rider_chain)
    pool = ColumnPool(inst)
    pool.add(make_column(inst, (0, 1, 2, 3, 4, 5)))
    col = pool.columns[0]
    # ride time 15 over direct 5 gives rate 1 under the 15-minute floor
    onboard = col.schedule[3] - col.schedule[1]
    assert col.exposure[1] / inst.detour_weight[0] == pytest.approx(onboard / 15.0)


def test_pareto_front_on_corridor():
    from tests.test_oracle import corridor_instance

    inst0 = corridor_instance()
    inst = preprocess(inst0)

    def solve_fn(mode, eps_risk, eps_cost, time_limit):
        return bcp.solve(inst, mode, bcp.SolveOptions(
            eps_risk=eps_risk, eps_cost=eps_cost, time_limit=time_limit))

    points = pareto_front(solve_fn, step=0.25)
    assert [round(p.cost, 6) for p in points] == [5.0, 7.0]
    assert [round(p.max_risk, 6) for p in points] == [1.0, 0.0]
    # mutual non-domination
    for a in points:
        for b in points:
            if a is not b:
                assert not (a.cost <= b.cost and a.max_risk <= b.max_risk)


def test_pareto_front_brute_force_equality():
    inst0 = random_instance(4, n=3, fleet_size=2)
    inst = preprocess(inst0)

    def solve_fn(mode, eps_risk, eps_cost, time_limit):
        return bcp.solve(inst, mode, bcp.SolveOptions(
            eps_risk=eps_risk, eps_cost=eps_cost, time_limit=time_limit))

    points = pareto_front(solve_fn, step=0.5)
    # exhaustive front: enumerate every solution, filter dominated
    all_solutions = []
    caps = sorted({round(p.max_risk, 6) for p in points} | {INF})
    for cap in caps:
        bf = oracle.brute_force_solve(inst0, eps_risk=cap)
        if bf.status != "Optimal":
            continue
        peak = max((r.max_exposure for r in bf.routes), default=0.0)
        all_solutions.append((bf.objective, peak))
    front = []
    for c, h in sorted(set((round(c, 6), round(h, 6)) for c, h in all_solutions)):
        if not any(oc <= c + 1e-9 and oh <= h + 1e-9 and (oc < c - 1e-9 or oh < h - 1e-9)
                   for oc, oh in all_solutions):
            front.append((c, h))
    got = sorted((round(p.cost, 6), round(p.max_risk, 6)) for p in points)
    assert got == sorted(front)


def test_pareto_step_larger_than_range():
    from tests.test_oracle import corridor_instance

    inst = preprocess(corridor_instance())

    def solve_fn(mode, eps_risk, eps_cost, time_limit):
        return bcp.solve(inst, mode, bcp.SolveOptions(
            eps_risk=eps_risk, eps_cost=eps_cost, time_limit=time_limit))

    points = pareto_front(solve_fn, step=50.0)
    assert 1 <= len(points) <= 2


def test_monotone_cost_in_cap():
    inst0 = random_instance(8, n=3, fleet_size=2)
    inst = preprocess(inst0)
    prev = None
    for eps in (2.0, 4.0, 8.0, 16.0, INF):
        rep = bcp.solve(inst, "cost", bcp.SolveOptions(eps_risk=eps))
        if rep.status != "Optimal":
            continue
        if prev is not None:
            assert rep.objective <= prev + 1e-6
        prev = rep.objective
