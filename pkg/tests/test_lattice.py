import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlnet.errors import (
    BudgetExceededError,
    CoordinateRangeError,
    DuplicateCellError,
    OccupancyMismatchError,
    ParticleCountError,
    ShapeError,
    TypeRangeError,
)
from bmlnet.lattice import (
    Configuration,
    LatticeShape,
    enumerate_configurations,
    neighbor,
    random_configuration,
    validate,
)

shapes = st.lists(st.integers(1, 5), min_size=1, max_size=3).map(lambda d: LatticeShape(tuple(d)))


def test_shape_derived_values():
    s = LatticeShape((6, 4))
    assert s.n == 2 and s.cell_count == 24 and s.d == 2
    assert LatticeShape((7,)).d == 7


@pytest.mark.parametrize("text,dims", [("4x4", (4, 4)), ("2x2x2", (2, 2, 2)), ("16", (16,))])
def test_shape_round_trip(text, dims):
    s = LatticeShape.parse(text)
    assert s.dims == dims and str(s) == text


@pytest.mark.parametrize("text", ["", "4X4", "4x", "0x3", "-2x2", "4x4.0", "a"])
def test_shape_rejects_bad_strings(text):
    with pytest.raises(ShapeError):
        LatticeShape.parse(text)


def test_linearization_coordinate_one_fastest():
    s = LatticeShape((4, 3))
    assert s.linear((1, 0)) == 1
    assert s.linear((0, 1)) == 4
    for k in range(s.cell_count):
        assert s.linear(s.coords(k)) == k


@pytest.mark.parametrize(
    "cell,ptype,dims,expected",
    [((0, 0), 1, (4, 4), (1, 0)), ((3, 2), 1, (4, 4), (0, 2)), ((1, 1, 1), 3, (2, 2, 2), (1, 1, 0))],
)
def test_neighbor(cell, ptype, dims, expected):
    assert neighbor(cell, ptype, LatticeShape(dims)) == expected


def test_neighbor_rejects_invalid():
    s = LatticeShape((4, 4))
    with pytest.raises(CoordinateRangeError):
        neighbor((4, 0), 1, s)
    with pytest.raises(TypeRangeError):
        neighbor((0, 0), 3, s)


@given(shapes, st.data())
def test_neighbor_cyclic(shape, data):
    cell = tuple(data.draw(st.integers(0, v - 1)) for v in shape.dims)
    i = data.draw(st.integers(1, shape.n))
    c = cell
    for _ in range(shape.dims[i - 1]):
        c = neighbor(c, i, shape)
    assert c == cell


def test_shift_tables_agree_with_neighbor():
    s = LatticeShape((3, 4, 2))
    for i in range(1, 4):
        for k in range(s.cell_count):
            assert s.coords(s.shift_tables[i - 1][k]) == neighbor(s.coords(k), i, s)


def test_validate_duplicate_cell():
    s = LatticeShape((4, 4))
    with pytest.raises(DuplicateCellError):
        Configuration.from_particles(s, [((0, 0), 1), ((0, 0), 2)])


def test_validate_out_of_range():
    s = LatticeShape((4, 4))
    with pytest.raises(CoordinateRangeError):
        Configuration.from_particles(s, [((0, 4), 1)])
    with pytest.raises(CoordinateRangeError):
        Configuration(s, [16], [1])


def test_validate_bad_type():
    with pytest.raises(TypeRangeError):
        Configuration.from_particles(LatticeShape((4, 4)), [((0, 0), 3)])


def test_validate_inconsistent_occupancy():
    s = LatticeShape((4, 4))
    occ = np.full(16, -1)
    occ[5] = 0
    with pytest.raises(OccupancyMismatchError):
        Configuration(s, [0], [1], occ)


def test_validate_full_lattice_strict():
    s = LatticeShape((2, 2))
    full = Configuration(s, range(4), [1, 2, 1, 2])
    validate(full)
    with pytest.raises(ParticleCountError):
        validate(full, strict=True)
    with pytest.raises(ParticleCountError):
        validate(Configuration.empty(s), strict=True)


def test_validate_accepts_valid():
    c = Configuration.from_particles(LatticeShape((4, 4)), [((0, 0), 1), ((2, 3), 2)])
    validate(c, strict=True)
    assert [p.id for p in c.particles] == [1, 2]
    assert c.particles[1].cell == (2, 3)


def test_configuration_is_immutable():
    c = Configuration.from_particles(LatticeShape((4, 4)), [((0, 0), 1)])
    with pytest.raises(ValueError):
        c.positions[0] = 3


def test_random_configuration_deterministic():
    s = LatticeShape((5, 5))
    assert random_configuration(s, 7, seed=3) == random_configuration(s, 7, seed=3)
    assert random_configuration(s, 7, seed=3) != random_configuration(s, 7, seed=4)


def test_random_configuration_one_vacancy():
    s = LatticeShape((3, 3))
    c = random_configuration(s, 8, seed=0)
    assert np.count_nonzero(c.occupancy == -1) == 1


def test_random_configuration_range():
    s = LatticeShape((2, 2))
    for m in (0, 4):
        with pytest.raises(ParticleCountError):
            random_configuration(s, m, seed=0)
    assert random_configuration(s, 4, seed=0, allow_full=True).m == 4


def test_random_configuration_type_frequencies():
    # 10^4 particle draws on a 3-type lattice; each type count ~ Binomial(10^4, 1/3)
    s = LatticeShape((4, 4, 4))
    counts = Counter()
    for seed in range(500):
        counts.update(random_configuration(s, 20, seed=seed).types.tolist())
    total = sum(counts.values())
    assert total == 10_000
    p = 1 / 3
    sigma = math.sqrt(total * p * (1 - p))
    for t in (1, 2, 3):
        assert abs(counts[t] - total * p) <= 3 * sigma


@given(shapes, st.integers(0, 10**6), st.data())
@settings(max_examples=50)
def test_random_configuration_validates(shape, seed, data):
    if shape.cell_count < 2:
        return
    m = data.draw(st.integers(1, shape.cell_count - 1))
    validate(random_configuration(shape, m, seed=seed), strict=True)


@pytest.mark.parametrize("dims,m,count", [((2, 2), 1, 8), ((4, 4), 2, 480), ((2, 2), 4, 16)])
def test_enumeration_counts(dims, m, count):
    configs = list(enumerate_configurations(LatticeShape(dims), m))
    assert len(configs) == count
    assert len({c.key() for c in configs}) == count


@pytest.mark.parametrize("dims,m", [((3,), 2), ((2, 3), 2), ((2, 2, 2), 2), ((3, 2), 3)])
def test_enumeration_exact_count_formula(dims, m):
    s = LatticeShape(dims)
    configs = list(enumerate_configurations(s, m))
    assert len(configs) == math.comb(s.cell_count, m) * s.n**m
    assert len(set(configs)) == len(configs)


def test_enumeration_budget():
    with pytest.raises(BudgetExceededError) as info:
        enumerate_configurations(LatticeShape((8, 8)), 4, budget=1000)
    assert info.value.required == math.comb(64, 4) * 16
