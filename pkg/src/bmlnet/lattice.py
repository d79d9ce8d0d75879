"""Toroidal lattice, particles and configurations.

Cells are addressed either by coordinate tuples ``(x_1, ..., x_n)`` with
``0 <= x_j < N_j`` or by a linear index in which coordinate 1 varies
fastest.  A :class:`Configuration` stores linear positions, particle types
(1-based axis numbers) and an occupancy array mapping each cell to the
0-based index of the particle sitting on it, or ``-1``.  Particle ``id`` is
that index plus one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceededError,
    CoordinateRangeError,
    DuplicateCellError,
    OccupancyMismatchError,
    ParticleCountError,
    ShapeError,
    TypeRangeError,
)

Cell = tuple[int, ...]

VACANT = -1
DEFAULT_ENUMERATION_BUDGET = 2_000_000


@dataclass(frozen=True)
class LatticeShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        if len(dims) < 1:
            raise ShapeError("a lattice needs at least one dimension")
        if any(v < 1 for v in dims):
            raise ShapeError(f"dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def parse(cls, text: str) -> "LatticeShape":
        """Parse ``"4x4"`` / ``"2x2x2"`` / ``"16"``."""
        parts = text.strip().split("x")
        try:
            dims = tuple(int(p) for p in parts)
        except ValueError:
            raise ShapeError(f"bad shape string {text!r}") from None
        if any(not p.isdigit() for p in parts):
            raise ShapeError(f"bad shape string {text!r}")
        return cls(dims)

    def __str__(self) -> str:
        return "x".join(str(v) for v in self.dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    @cached_property
    def cell_count(self) -> int:
        return math.prod(self.dims)

    @cached_property
    def d(self) -> int:
        return math.gcd(*self.dims)

    @cached_property
    def strides(self) -> tuple[int, ...]:
        out, acc = [], 1
        for v in self.dims:
            out.append(acc)
            acc *= v
        return tuple(out)

    def contains(self, cell: Sequence[int]) -> bool:
        return len(cell) == self.n and all(0 <= c < v for c, v in zip(cell, self.dims))

    def linear(self, cell: Sequence[int]) -> int:
        if not self.contains(cell):
            raise CoordinateRangeError(f"cell {tuple(cell)} outside lattice {self}")
        return sum(c * s for c, s in zip(cell, self.strides))

    def coords(self, index: int) -> Cell:
        return tuple((int(index) // s) % v for s, v in zip(self.strides, self.dims))

    @cached_property
    def coord_table(self) -> np.ndarray:
        """``(cell_count, n)`` array of coordinates for every linear index."""
        lin = np.arange(self.cell_count, dtype=np.int64)
        cols = [(lin // s) % v for s, v in zip(self.strides, self.dims)]
        table = np.stack(cols, axis=1)
        table.flags.writeable = False
        return table

    @cached_property
    def shift_tables(self) -> tuple[np.ndarray, ...]:
        """Per-axis successor map: ``shift_tables[i-1][c]`` is cell ``c`` moved one step along axis ``i``."""
        coords = self.coord_table
        lin = np.arange(self.cell_count, dtype=np.int64)
        tables = []
        for j, (s, v) in enumerate(zip(self.strides, self.dims)):
            tab = np.where(coords[:, j] == v - 1, lin - (v - 1) * s, lin + s)
            tab.flags.writeable = False
            tables.append(tab)
        return tuple(tables)


@dataclass(frozen=True)
class Particle:
    id: int
    cell: Cell
    ptype: int


def neighbor(cell: Sequence[int], ptype: int, shape: LatticeShape) -> Cell:
    """Cell reached by one step of a type-``ptype`` particle (axis ``ptype`` incremented mod N)."""
    if not shape.contains(cell):
        raise CoordinateRangeError(f"cell {tuple(cell)} outside lattice {shape}")
    if not 1 <= ptype <= shape.n:
        raise TypeRangeError(f"type {ptype} not in [1, {shape.n}]")
    out = list(cell)
    out[ptype - 1] = (out[ptype - 1] + 1) % shape.dims[ptype - 1]
    return tuple(out)


class Configuration:
    """Immutable snapshot of particle positions and types on a lattice."""

    __slots__ = ("shape", "positions", "types", "occupancy")

    def __init__(self, shape: LatticeShape, positions, types, occupancy=None, *, check: bool = True):
        self.shape = shape
        pos = np.array(positions, dtype=np.int64).reshape(-1)
        typ = np.array(types, dtype=np.int8).reshape(-1)
        if pos.shape != typ.shape:
            raise ParticleCountError("positions and types differ in length")
        if occupancy is None:
            occ = np.full(shape.cell_count, VACANT, dtype=np.int32)
            if check:
                _check_positions(shape, pos)
            occ[pos] = np.arange(pos.size, dtype=np.int32)
        else:
            occ = np.array(occupancy, dtype=np.int32).reshape(-1)
        for arr in (pos, typ, occ):
            arr.flags.writeable = False
        self.positions = pos
        self.types = typ
        self.occupancy = occ
        if check:
            validate(self)

    @classmethod
    def from_particles(cls, shape: LatticeShape, particles: Iterable[tuple[Sequence[int], int]]):
        """Build from ``(cell, type)`` pairs; ids follow the given order."""
        cells, types = [], []
        for cell, ptype in particles:
            cells.append(shape.linear(cell))
            types.append(ptype)
        return cls(shape, cells, types)

    @classmethod
    def empty(cls, shape: LatticeShape) -> "Configuration":
        return cls(shape, [], [])

    @property
    def m(self) -> int:
        return int(self.positions.size)

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(i + 1, self.shape.coords(p), int(t))
            for i, (p, t) in enumerate(zip(self.positions.tolist(), self.types.tolist()))
        ]

    def cells(self) -> list[Cell]:
        return [self.shape.coords(p) for p in self.positions.tolist()]

    def type_grid(self) -> np.ndarray:
        """Flat int8 array: 0 for vacant, particle type otherwise."""
        grid = np.zeros(self.shape.cell_count, dtype=np.int8)
        grid[self.positions] = self.types
        return grid

    def key(self) -> bytes:
        """Canonical state identity: which cell holds which type (ids ignored)."""
        return self.type_grid().tobytes()

    def canonical(self) -> "Configuration":
        """Same state with ids reassigned in ascending cell order."""
        order = np.argsort(self.positions, kind="stable")
        return Configuration(self.shape, self.positions[order], self.types[order], check=False)

    def with_types(self, types) -> "Configuration":
        return Configuration(self.shape, self.positions, types, self.occupancy, check=False)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.types, other.types)
        )

    def __hash__(self):
        return hash((self.shape, self.positions.tobytes(), self.types.tobytes()))

    def __repr__(self):
        body = ", ".join(f"{p.cell}:{p.ptype}" for p in self.particles[:8])
        more = ", ..." if self.m > 8 else ""
        return f"Configuration({self.shape}, m={self.m}, [{body}{more}])"


def _check_positions(shape: LatticeShape, pos: np.ndarray) -> None:
    if pos.size and (pos.min() < 0 or pos.max() >= shape.cell_count):
        bad = pos[(pos < 0) | (pos >= shape.cell_count)][0]
        raise CoordinateRangeError(f"linear cell {int(bad)} outside lattice {shape}")
    if pos.size != np.unique(pos).size:
        values, counts = np.unique(pos, return_counts=True)
        dup = shape.coords(int(values[counts > 1][0]))
        raise DuplicateCellError(f"more than one particle at cell {dup}")


def validate(config: Configuration, *, strict: bool = False) -> None:
    """Raise the error for the first violated invariant; return ``None`` if valid.

    ``strict`` additionally enforces ``1 <= m < cell_count`` (at least one
    particle and at least one vacancy).
    """
    shape = config.shape
    pos, typ, occ = config.positions, config.types, config.occupancy
    _check_positions(shape, pos)
    if typ.size and (typ.min() < 1 or typ.max() > shape.n):
        raise TypeRangeError(f"particle types must lie in [1, {shape.n}]")
    if occ.shape != (shape.cell_count,):
        raise OccupancyMismatchError("occupancy has wrong length")
    expected = np.full(shape.cell_count, VACANT, dtype=np.int32)
    expected[pos] = np.arange(pos.size, dtype=np.int32)
    if not np.array_equal(occ, expected):
        cell = shape.coords(int(np.flatnonzero(occ != expected)[0]))
        raise OccupancyMismatchError(f"occupancy disagrees with particle list at cell {cell}")
    if strict and not 1 <= pos.size < shape.cell_count:
        raise ParticleCountError(f"m={pos.size} outside [1, {shape.cell_count - 1}]")


def random_configuration(
    shape: LatticeShape, m: int, seed=None, *, rng: np.random.Generator | None = None, allow_full: bool = False
):
    """Uniform random state: ``m`` distinct cells, each type uniform on ``1..n``.

    ``allow_full`` admits the degenerate completely filled lattice.
    """
    top = shape.cell_count if allow_full else shape.cell_count - 1
    if not 1 <= m <= top:
        raise ParticleCountError(f"m={m} outside [1, {top}]")
    if rng is None:
        from .rng import make_rng

        rng = make_rng(seed)
    cells = np.sort(rng.choice(shape.cell_count, size=m, replace=False))
    types = rng.integers(1, shape.n + 1, size=m)
    return Configuration(shape, cells, types)


def configuration_count(shape: LatticeShape, m: int) -> int:
    return math.comb(shape.cell_count, m) * shape.n**m


def iter_state_arrays(shape: LatticeShape, m: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Yield ``(cells, types)`` tuples for every configuration, in canonical order."""
    type_choices = list(itertools.product(range(1, shape.n + 1), repeat=m))
    for cells in itertools.combinations(range(shape.cell_count), m):
        for types in type_choices:
            yield cells, types


def enumerate_configurations(shape: LatticeShape, m: int, budget: int = DEFAULT_ENUMERATION_BUDGET):
    """Every configuration of ``m`` particles exactly once (cell subsets x type assignments)."""
    if not 0 <= m <= shape.cell_count:
        raise ParticleCountError(f"m={m} outside [0, {shape.cell_count}]")
    count = configuration_count(shape, m)
    if count > budget:
        raise BudgetExceededError(
            f"{count} configurations for {shape}, m={m} exceed budget {budget}", required=count
        )
    return (Configuration(shape, c, t, check=False) for c, t in iter_state_arrays(shape, m))
