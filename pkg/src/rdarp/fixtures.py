"""Seeded synthetic instances for tests and benchmarks."""

from __future__ import annotations

import math
import random

from .instance import RDARP, Instance, euclidean_matrix

INF = math.inf


def benchmark_like_instance(seed: int, n: int = 16, fleet_size: int = 2) -> Instance:
    """Synthetic instance with classic benchmark geometry: planar ±10 grid,
    unit loads, capacity 3, ride cap 30, horizon 480, width-15 windows on the
    constrained end (drop-off for the first half, pick-up for the second)."""
    rng = random.Random(seed)
    m = 2 * n + 2
    pts = [(rng.uniform(-10, 10), rng.uniform(-10, 10)) for _ in range(m)]
    pts[0] = pts[m - 1] = (0.0, 0.0)
    travel = euclidean_matrix(pts)
    horizon = 480.0
    service = [0.0] + [3.0] * (m - 2) + [0.0]
    load = [0.0] * m
    risk = [0.0] * m
    early = [0.0] * m
    late = [horizon] * m
    for i in range(1, n + 1):
        load[i], load[i + n] = 1.0, -1.0
        risk[i], risk[i + n] = 1.0, -1.0
        start = round(rng.uniform(60, horizon - 120), 0)
        if i <= n // 2:
            early[i + n], late[i + n] = start, start + 15.0
        else:
            early[i], late[i] = start, start + 15.0
    inst = Instance(
        n=n, fleet_size=fleet_size, capacity=3.0, q_max=INF,
        service=tuple(service), load=tuple(load), risk=tuple(risk),
        early=tuple(early), late=tuple(late), travel=travel,
        max_ride=tuple([30.0] * n), mode=RDARP, coords=tuple(pts),
        name=f"synth-a{fleet_size}-{n}-{seed}",
    )
    inst.validate()
    return inst


def random_instance(
    seed: int,
    n: int = 3,
    fleet_size: int = 2,
    capacity: float = 3.0,
    window: float = 25.0,
    horizon: float = 240.0,
    q_max: float = INF,
    integer_times: bool = False,
) -> Instance:
    """A feasible planar instance: windows are cut around a random reference
    tour so every single-request round trip fits comfortably."""
    rng = random.Random(seed)
    m = 2 * n + 2
    pts = [(rng.uniform(0, 30), rng.uniform(0, 30)) for _ in range(m)]
    pts[m - 1] = pts[0]
    travel = euclidean_matrix(pts)
    if integer_times:
        travel = tuple(tuple(float(round(v)) for v in row) for row in travel)
    service = [0.0] + [float(rng.choice((0, 1, 2))) for _ in range(m - 2)] + [0.0]
    load = [0.0] * m
    risk = [0.0] * m
    early = [0.0] * m
    late = [horizon] * m
    max_ride = []
    for i in range(1, n + 1):
        load[i] = float(rng.choice((1, 1, 2)))
        load[i + n] = -load[i]
        risk[i] = rng.choice((0.4, 0.5, 0.6, 0.7, 0.8, 0.9))
        risk[i + n] = -risk[i]
        direct = travel[i][i + n]
        ride = max(direct * rng.uniform(1.6, 2.5), direct + 20.0)
        max_ride.append(float(round(ride, 1)))
        anchor = rng.uniform(10.0, horizon * 0.5)
        early[i] = round(anchor, 1)
        late[i] = round(anchor + window, 1)
        early[i + n] = round(anchor, 1)
        late[i + n] = round(anchor + service[i] + ride + window, 1)
    inst = Instance(
        n=n, fleet_size=fleet_size, capacity=capacity, q_max=q_max,
        service=tuple(service), load=tuple(load), risk=tuple(risk),
        early=tuple(early), late=tuple(late), travel=travel,
        max_ride=tuple(max_ride), mode=RDARP, coords=tuple(pts),
        name=f"rand-{seed}-n{n}k{fleet_size}",
    )
    inst.validate()
    return inst
