"""Exhaustive state graphs of the deterministic (q = 0) dynamics.

The step map sends the finite set of states with ``m`` particles into
itself, so every trajectory lives in one functional graph.  Computing the
successor of each state once (batched across all states) and then walking the
graph gives transients, cycles, velocities and free-movement onsets for every
initial state at the cost of a single step per state.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import BudgetExceededError
from .lattice import DEFAULT_ENUMERATION_BUDGET, VACANT, Configuration, LatticeShape, configuration_count

CHUNK = 1 << 15


def state_arrays(shape: LatticeShape, m: int) -> tuple[np.ndarray, np.ndarray]:
    """All states as ``(cells, types)`` arrays of shape ``(S, m)`` in canonical enumeration order."""
    combos = np.array(list(itertools.combinations(range(shape.cell_count), m)), dtype=np.int64).reshape(-1, m)
    kinds = np.array(list(itertools.product(range(1, shape.n + 1), repeat=m)), dtype=np.int8).reshape(-1, m)
    cells = np.repeat(combos, len(kinds), axis=0)
    types = np.tile(kinds, (len(combos), 1))
    return cells, types


def grids(shape: LatticeShape, cells: np.ndarray, types: np.ndarray) -> np.ndarray:
    out = np.zeros((cells.shape[0], shape.cell_count), dtype=np.int8)
    rows = np.arange(cells.shape[0])[:, None]
    out[rows, cells] = types
    return out


def batch_step(shape: LatticeShape, cells: np.ndarray, types: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One q = 0 step for a batch of states; returns new cells and moved flags, both ``(B, m)``."""
    B, m = cells.shape
    cells = cells.copy()
    occ = np.full((B, shape.cell_count), VACANT, dtype=np.int32)
    rows = np.arange(B)[:, None]
    occ[rows, cells] = np.arange(m, dtype=np.int32)[None, :]
    moved = np.zeros((B, m), dtype=bool)
    rr = np.broadcast_to(rows, (B, m))
    for i in range(1, shape.n + 1):
        tgt = shape.shift_tables[i - 1][cells]
        go = (types == i) & (occ[rr, tgt] == VACANT)
        b, p = np.nonzero(go)
        src, dst = cells[b, p], tgt[b, p]
        occ[b, src] = VACANT
        occ[b, dst] = p
        cells[b, p] = dst
        moved |= go
    return cells, moved


def batch_certificate(shape: LatticeShape, cells: np.ndarray) -> np.ndarray:
    d = shape.d
    ph = shape.coord_table.sum(axis=1)[cells] % d
    counts = np.zeros((cells.shape[0], d), dtype=np.int64)
    np.add.at(counts, (np.arange(cells.shape[0])[:, None], ph), 1)
    used = counts > 0
    return (counts.max(axis=1, initial=0) <= 1) & ~np.any(used & np.roll(used, -1, axis=1), axis=1)


def _successor_chunk(args):
    shape, cells, types = args
    new_cells, moved = batch_step(shape, cells, types)
    return grids(shape, new_cells, types), moved.sum(axis=1), batch_certificate(shape, cells)


@dataclass(frozen=True)
class Cycle:
    states: tuple[int, ...]
    moves: int
    m: int

    @property
    def period(self) -> int:
        return len(self.states)

    @property
    def velocity(self) -> Fraction:
        return Fraction(self.moves, self.m * self.period)


class StateGraph:
    """Functional graph of the deterministic step map on all states of (shape, m)."""

    def __init__(self, shape, m, cells, types, keys, succ, moved_count, certificate):
        self.shape = shape
        self.m = m
        self.cells = cells
        self.types = types
        self.keys = keys
        self.succ = succ
        self.moved_count = moved_count
        self.certificate = certificate
        self._analyse()

    @property
    def size(self) -> int:
        return int(self.succ.size)

    def configuration(self, index: int) -> Configuration:
        return Configuration(self.shape, self.cells[index], self.types[index], check=False)

    def _analyse(self) -> None:
        S = self.size
        succ = self.succ.tolist()
        all_moved = (self.moved_count == self.m).tolist()
        cert = self.certificate.tolist()
        state = [0] * S
        cycle_of = [-1] * S
        dist = [0] * S
        onset = [-1] * S
        cert_onset = [-1] * S
        cycles: list[Cycle] = []
        moved_count = self.moved_count.tolist()
        for root in range(S):
            if state[root]:
                continue
            path = []
            v = root
            while not state[v]:
                state[v] = 1
                path.append(v)
                v = succ[v]
            if state[v] == 1:
                # new cycle: v is on the current path
                k = path.index(v)
                members = path[k:]
                # rotate so the cycle is listed from its lexicographically smallest state
                start = min(range(len(members)), key=lambda j: self.keys[members[j]])
                members = members[start:] + members[:start]
                cid = len(cycles)
                cycles.append(Cycle(tuple(members), sum(moved_count[u] for u in members), self.m))
                free = all(all_moved[u] for u in members)
                has_cert = cert[members[0]]
                for u in members:
                    state[u] = 2
                    cycle_of[u] = cid
                    onset[u] = 0 if free else -1
                    cert_onset[u] = 0 if has_cert else -1
                path = path[:k]
            for u in reversed(path):
                w = succ[u]
                state[u] = 2
                cycle_of[u] = cycle_of[w]
                dist[u] = dist[w] + 1
                if onset[w] < 0:
                    onset[u] = -1
                elif onset[w] == 0 and all_moved[u]:
                    onset[u] = 0
                else:
                    onset[u] = onset[w] + 1
                if cert[u]:
                    cert_onset[u] = 0
                elif cert_onset[w] >= 0:
                    cert_onset[u] = cert_onset[w] + 1
        self.cycles = cycles
        self.cycle_of = np.array(cycle_of, dtype=np.int64)
        self.transient = np.array(dist, dtype=np.int64)
        self.onset = np.array(onset, dtype=np.int64)
        self.certificate_onset = np.array(cert_onset, dtype=np.int64)

    @cached_property
    def velocity(self) -> list[Fraction]:
        """Long-run mean velocity of every state (that of the cycle it falls into)."""
        per_cycle = [c.velocity for c in self.cycles]
        return [per_cycle[c] for c in self.cycle_of.tolist()]


def build_graph(shape: LatticeShape, m: int, budget: int = DEFAULT_ENUMERATION_BUDGET, workers: int = 1) -> StateGraph:
    if not 1 <= m <= shape.cell_count:
        raise ValueError(f"m={m} outside [1, {shape.cell_count}]")
    count = configuration_count(shape, m)
    if count > budget:
        raise BudgetExceededError(
            f"{count} configurations for {shape}, m={m} exceed budget {budget}", required=count
        )
    cells, types = state_arrays(shape, m)
    S = cells.shape[0]
    size = CHUNK if workers <= 1 else max(1, min(CHUNK, -(-S // workers)))
    jobs = [(shape, cells[a:a + size], types[a:a + size]) for a in range(0, S, size)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_successor_chunk, jobs))
    else:
        parts = [_successor_chunk(j) for j in jobs]
    all_grids = grids(shape, cells, types)
    keys = [row.tobytes() for row in all_grids]
    index = {k: i for i, k in enumerate(keys)}
    succ = np.fromiter(
        (index[row.tobytes()] for part in parts for row in part[0]), dtype=np.int64, count=S
    )
    moved = np.concatenate([p[1] for p in parts])
    cert = np.concatenate([p[2] for p in parts])
    return StateGraph(shape, m, cells, types, keys, succ, moved, cert)
