"""The deterministic system seen as a network of contours.

A type-``i`` contour is the closed ring of cells sharing every coordinate
except ``i``; type-``i`` particles travel only on type-``i`` contours.  Every
cell is a node where one contour of each type meets.  Conflicts at a node are
settled by the sub-step order, type 1 first.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import Stepper
from .errors import BudgetExceededError, ParticleCountError
from .lattice import Cell, Configuration, LatticeShape, random_configuration
from .rng import make_rng

DEFAULT_CYCLE_BUDGET = 1_000_000


@dataclass(frozen=True)
class Contour:
    ctype: int
    anchor: tuple[int, ...]
    cells: tuple[Cell, ...]


def _contour(shape: LatticeShape, ctype: int, anchor: tuple[int, ...]) -> Contour:
    i = ctype - 1
    cells = tuple(anchor[:i] + (k,) + anchor[i:] for k in range(shape.dims[i]))
    return Contour(ctype, anchor, cells)


def contours(shape: LatticeShape) -> list[Contour]:
    """All contours, grouped by type; within a type, anchors in lattice order of their 0-th cell."""
    out = []
    for ctype in range(1, shape.n + 1):
        i = ctype - 1
        for lin in range(shape.cell_count):
            cell = shape.coords(lin)
            if cell[i] == 0:
                out.append(_contour(shape, ctype, cell[:i] + cell[i + 1:]))
    return out


@dataclass(frozen=True)
class NodeMembership:
    cell: Cell
    contours: tuple[Contour, ...]


def node_membership(cell, shape: LatticeShape) -> NodeMembership:
    cell = tuple(cell)
    shape.linear(cell)
    return NodeMembership(
        cell, tuple(_contour(shape, c, cell[:c - 1] + cell[c:]) for c in range(1, shape.n + 1))
    )


@dataclass(frozen=True)
class LimitCycle:
    transient: int
    period: int
    per_particle_velocity: tuple[Fraction, ...]
    mean_velocity: Fraction
    attractor: Configuration = field(compare=False)

    @property
    def free(self) -> bool:
        return self.mean_velocity == 1


def config_from_key(shape: LatticeShape, key: bytes) -> Configuration:
    grid = np.frombuffer(key, dtype=np.int8)
    pos = np.flatnonzero(grid)
    return Configuration(shape, pos, grid[pos], check=False)


def limit_cycle(config: Configuration, budget: int = DEFAULT_CYCLE_BUDGET) -> LimitCycle:
    """Transient, period and exact velocities of the q = 0 orbit through ``config``.

    Every visited state is hashed with its time; at the first recurrence the
    cycle is walked once more to count moves per particle.
    """
    stepper = Stepper(config)
    seen = {stepper.key(): 0}
    while True:
        stepper.advance()
        key = stepper.key()
        if key in seen:
            break
        if len(seen) >= budget:
            raise BudgetExceededError(f"no recurrence within {budget} states", required=None)
        seen[key] = stepper.t
    transient = seen[key]
    period = stepper.t - transient
    moves = np.zeros(config.m, dtype=np.int64)
    smallest = key
    for _ in range(period):
        moves += stepper.advance().moved
        k = stepper.key()
        if k < smallest:
            smallest = k
    per = tuple(Fraction(int(c), period) for c in moves)
    mean = Fraction(int(moves.sum()), config.m * period)
    return LimitCycle(transient, period, per, mean, config_from_key(config.shape, smallest))


@dataclass
class SpectrumReport:
    shape: str
    m: int
    mode: str
    states: int
    velocities: dict[Fraction, int]
    attractors: list[dict]
    seed: int | None = None
    sample_count: int | None = None

    @property
    def values(self) -> list[Fraction]:
        return sorted(self.velocities)

    @property
    def self_organizing(self) -> bool:
        return self.values == [Fraction(1)]

    def payload(self) -> dict:
        from .serialize import REPORT_SCHEMA

        return {
            "schema": REPORT_SCHEMA,
            "kind": "spectrum",
            "shape": self.shape,
            "m": self.m,
            "mode": self.mode,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "states": self.states,
            "velocity_set": [str(v) for v in self.values],
            "velocities": [{"velocity": str(v), "count": self.velocities[v]} for v in self.values],
            "self_organizing": self.self_organizing,
            "attractors": self.attractors,
        }


def spectrum(
    shape: LatticeShape,
    m: int,
    mode: str = "exhaustive",
    seed: int = 0,
    sample_count: int = 1000,
    *,
    workers: int = 1,
    budget: int | None = None,
) -> SpectrumReport:
    """Long-run velocity values over all (or sampled) initial states, with the attractors reached."""
    from .serialize import config_to_dict

    if not 1 <= m <= shape.cell_count:
        raise ParticleCountError(f"m={m} outside [1, {shape.cell_count}]")
    found: dict[bytes, dict] = {}
    velocities: Counter = Counter()
    if mode == "exhaustive":
        from . import statespace

        kw = {} if budget is None else {"budget": budget}
        graph = statespace.build_graph(shape, m, workers=workers, **kw)
        basins = Counter(graph.cycle_of.tolist())
        for cid, cyc in enumerate(graph.cycles):
            velocities[cyc.velocity] += basins[cid]
            key = graph.keys[cyc.states[0]]
            found[key] = {"period": cyc.period, "velocity": cyc.velocity, "basin": basins[cid]}
        states = graph.size
        seed_out, count_out = None, None
    elif mode == "sampled":
        for k in range(sample_count):
            config = random_configuration(shape, m, rng=make_rng(seed, k), allow_full=True)
            lc = limit_cycle(config, **({} if budget is None else {"budget": budget}))
            velocities[lc.mean_velocity] += 1
            key = lc.attractor.key()
            rec = found.setdefault(key, {"period": lc.period, "velocity": lc.mean_velocity, "basin": 0})
            rec["basin"] += 1
        states = sample_count
        seed_out, count_out = seed, sample_count
    else:
        raise ValueError(f"unknown spectrum mode {mode!r}")
    attractors = [
        {"state": config_to_dict(config_from_key(shape, k)), "period": v["period"],
         "velocity": str(v["velocity"]), "basin": v["basin"]}
        for k, v in sorted(found.items())
    ]
    return SpectrumReport(str(shape), m, mode, states, dict(velocities), attractors, seed_out, count_out)
