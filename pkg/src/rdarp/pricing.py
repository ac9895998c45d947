"""Pricing subproblem: elementary shortest paths with resource constraints
and minimum-peak-exposure schedules, solved by forward labeling.

The engine is selected at import: the compiled kernel (``rdarp._labeling_cy``)
when built, otherwise the pure-Python reference. Override with the environment
variable ``RDARP_PRICING`` set to ``py`` or ``cy``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .instance import EDARP, Instance

NEGATIVE_TOL = 1e-6
DEFAULT_COLUMN_LIMIT = 200

COST = "cost"
RISK = "risk"


@dataclass
class DualValues:
    """Master duals mapped to pricing terms.

    ``pi``: request coverage duals (free sign). ``mu``: sum of the fleet-size
    dual and any vehicle-count branching duals (route-constant). ``rho``:
    per-request exposure duals, already divided by detour weights in equity
    mode. ``xi``: cost-cap dual (risk objective only). ``arc_adjust``: folded
    per-arc duals from cuts and branching rows, subtracted from arc costs.
    """

    pi: dict[int, float] = field(default_factory=dict)
    mu: float = 0.0
    rho: dict[int, float] = field(default_factory=dict)
    xi: float = 0.0
    arc_adjust: dict[tuple[int, int], float] = field(default_factory=dict)

    def validate_signs(self) -> None:
        # mu aggregates the fleet dual with branching duals of either sign,
        # so only the pure-role duals carry sign conditions here.
        if self.xi > 1e-7:
            raise ValueError(f"cost-cap dual must be nonpositive, got {self.xi}")
        for i, v in self.rho.items():
            if v > 1e-7:
                raise ValueError(f"exposure dual for request {i} must be nonpositive, got {v}")


@dataclass(frozen=True)
class Column:
    """A priced route: the master's unit of work."""

    sequence: tuple[int, ...]
    schedule: tuple[float, ...]
    cost: float
    exposure: dict[int, float]
    q_terminal: float
    reduced_cost: float

    @property
    def requests(self) -> tuple[int, ...]:
        return tuple(sorted(self.exposure))

    def arcs(self) -> list[tuple[int, int]]:
        return list(zip(self.sequence[:-1], self.sequence[1:]))


def arc_reduced_cost(inst: Instance, duals: DualValues, i: int, j: int, mode: str = COST) -> float:
    """Arc-level reduced cost: travel (scaled by -xi in risk mode) minus the
    coverage dual when leaving a pick-up, minus folded cut/branch duals."""
    if not inst.arc_allowed(i, j):
        raise ValueError(f"arc ({i}, {j}) is eliminated")
    t = inst.t(i, j)
    value = t if mode == COST else -duals.xi * t
    if inst.is_pickup(i):
        value -= duals.pi.get(i, 0.0)
    value -= duals.arc_adjust.get((i, j), 0.0)
    return value


@dataclass
class PricingRestrictions:
    """Branch-node restrictions applied inside pricing."""

    banned_arcs: frozenset[tuple[int, int]] = frozenset()
    # (arc set, max crossings): sequences exceeding the cap are not emitted
    crossing_caps: tuple[tuple[frozenset[tuple[int, int]], int], ...] = ()
    banned_sequences: frozenset[tuple[int, ...]] = frozenset()

    def allows(self, sequence, arcs) -> bool:
        if tuple(sequence) in self.banned_sequences:
            return False
        for arc_set, cap in self.crossing_caps:
            if sum(1 for a in arcs if a in arc_set) > cap:
                return False
        return True


def _select_engine():
    choice = os.environ.get("RDARP_PRICING", "auto")
    if choice not in ("auto", "py", "cy"):
        raise ValueError(f"RDARP_PRICING must be auto, py, or cy; got {choice!r}")
    if choice in ("auto", "cy"):
        try:
            from . import _labeling_cy as engine

            return engine, "cy"
        except ImportError:
            if choice == "cy":
                raise
    from . import _labeling_py as engine

    return engine, "py"


_ENGINE, ENGINE_NAME = _select_engine()


def solve_pricing(
    inst: Instance,
    duals: DualValues,
    mode: str = COST,
    heuristic: bool = False,
    limit: int = DEFAULT_COLUMN_LIMIT,
    restrictions: PricingRestrictions | None = None,
    trace=None,
    engine: str | None = None,
) -> list[Column]:
    """Return up to ``limit`` columns with reduced cost below -1e-6, best
    first. A heuristic run weakens dominance (drops the served-set inclusion)
    and must be confirmed by an exact run before declaring LP optimality."""
    if mode not in (COST, RISK):
        raise ValueError(f"mode must be {COST!r} or {RISK!r}")
    duals.validate_signs()
    restrictions = restrictions or PricingRestrictions()
    if engine is None:
        eng = _ENGINE
    elif engine == "py":
        from . import _labeling_py as eng
    elif engine == "cy":
        from . import _labeling_cy as eng  # type: ignore[no-redef]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return eng.run_labeling(inst, duals, mode, heuristic, limit, restrictions, trace)
