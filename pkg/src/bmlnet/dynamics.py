"""BML update rule.

One time step runs ``n`` sub-steps in type order.  In sub-step ``i`` every
type-``i`` particle whose forward cell (along axis ``i``) is vacant at the
start of that sub-step moves there; all those moves are committed together,
so within a type the rule is exactly ECA 184.  After the last sub-step each
particle switches type with probability ``q``.

Random draws per step, when ``q > 0`` and ``n > 1``: one uniform per particle
in ascending id order (switch decisions), then one integer per switching
particle in ascending id order (new type).  With ``q == 0`` nothing is drawn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyWindowError, ParticleCountError
from .lattice import VACANT, Configuration, LatticeShape
from .rng import make_rng

Observer = Callable[[int, Configuration, "StepStats"], object]


@dataclass(frozen=True)
class SwitchPolicy:
    """Type switching: probability ``q`` per particle per step.

    ``redraw="others"`` picks the new type uniformly among the ``n - 1``
    other types; ``"all"`` picks uniformly among all ``n`` (so a "switch" can
    keep the current type).
    """

    q: float = 0.0
    redraw: str = "others"

    def __post_init__(self):
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        if self.redraw not in ("others", "all"):
            raise ValueError(f"unknown redraw rule {self.redraw!r}")

    @property
    def deterministic(self) -> bool:
        return self.q == 0.0


@dataclass
class StepStats:
    t: int
    moved: np.ndarray
    moved_count: int
    type_changes: int

    @property
    def m(self) -> int:
        return int(self.moved.size)

    @property
    def velocity_instant(self) -> float:
        return self.moved_count / self.m


def _substep_inplace(pos: np.ndarray, types: np.ndarray, occ: np.ndarray, table: np.ndarray, i: int) -> np.ndarray:
    """Move every type-``i`` particle with a vacant target; return indices of movers."""
    idx = np.flatnonzero(types == i)
    tgt = table[pos[idx]]
    free = occ[tgt] == VACANT
    movers = idx[free]
    dest = tgt[free]
    occ[pos[movers]] = VACANT
    occ[dest] = movers
    pos[movers] = dest
    return movers


def substep(config: Configuration, i: int) -> tuple[Configuration, np.ndarray]:
    """Apply sub-step ``i`` alone; returns the new state and per-particle moved flags."""
    if not 1 <= i <= config.shape.n:
        raise ValueError(f"type {i} not in [1, {config.shape.n}]")
    pos = config.positions.copy()
    occ = config.occupancy.copy()
    movers = _substep_inplace(pos, config.types, occ, config.shape.shift_tables[i - 1], i)
    moved = np.zeros(config.m, dtype=bool)
    moved[movers] = True
    return Configuration(config.shape, pos, config.types, occ, check=False), moved


def _switch_inplace(types: np.ndarray, n: int, policy: SwitchPolicy, rng: np.random.Generator) -> int:
    if policy.q == 0.0 or n == 1 or types.size == 0:
        return 0
    switch = np.flatnonzero(rng.random(types.size) < policy.q)
    if switch.size == 0:
        return 0
    cur = types[switch].astype(np.int64)
    if policy.redraw == "others":
        new = rng.integers(1, n, size=switch.size)
        new[new >= cur] += 1
    else:
        new = rng.integers(1, n + 1, size=switch.size)
    types[switch] = new
    return int(np.count_nonzero(new != cur))


class Stepper:
    """Mutable working state advanced in place; the fast path behind :func:`step`."""

    def __init__(self, config: Configuration, policy: SwitchPolicy | None = None, rng=None):
        if config.m < 1:
            raise ParticleCountError("the dynamics needs at least one particle")
        self.shape = config.shape
        self.policy = policy or SwitchPolicy()
        self.rng = make_rng(rng)
        self.pos = config.positions.copy()
        self.types = config.types.copy()
        self.occ = config.occupancy.copy()
        self.t = 0

    def advance(self) -> StepStats:
        n = self.shape.n
        moved = np.zeros(self.pos.size, dtype=bool)
        for i in range(1, n + 1):
            movers = _substep_inplace(self.pos, self.types, self.occ, self.shape.shift_tables[i - 1], i)
            moved[movers] = True
        changes = _switch_inplace(self.types, n, self.policy, self.rng)
        stats = StepStats(self.t, moved, int(np.count_nonzero(moved)), changes)
        self.t += 1
        return stats

    def snapshot(self) -> Configuration:
        return Configuration(self.shape, self.pos, self.types, self.occ, check=False)

    def key(self) -> bytes:
        grid = np.zeros(self.shape.cell_count, dtype=np.int8)
        grid[self.pos] = self.types
        return grid.tobytes()


def step(config: Configuration, policy: SwitchPolicy | None = None, rng=None, t: int = 0):
    """One full time step; returns ``(new_config, StepStats)``."""
    stepper = Stepper(config, policy, rng)
    stepper.t = t
    stats = stepper.advance()
    return stepper.snapshot(), stats


@dataclass
class Trajectory:
    initial: Configuration
    policy: SwitchPolicy
    seed: object
    stats: list[StepStats] = field(default_factory=list)
    snapshots: dict[int, Configuration] = field(default_factory=dict)
    final: Configuration | None = None
    stop_reason: str = "t_max"

    @property
    def steps(self) -> int:
        return len(self.stats)

    def velocities(self) -> np.ndarray:
        return np.array([s.velocity_instant for s in self.stats])


def simulate(
    config: Configuration,
    policy: SwitchPolicy | None = None,
    t_max: int = 100,
    seed=0,
    observers: Sequence[Observer] = (),
    snapshot_stride: int = 0,
) -> Trajectory:
    """Run up to ``t_max`` steps.

    After each step every observer is called as ``obs(t, state, stats)``:
    ``stats`` describes the move from time ``t`` to ``t + 1`` and ``state`` is
    the configuration at time ``t + 1``.  A truthy return stops the run.
    Snapshots are kept for times ``0, stride, 2*stride, ...`` when
    ``snapshot_stride > 0``.
    """
    policy = policy or SwitchPolicy()
    stepper = Stepper(config, policy, make_rng(seed))
    traj = Trajectory(config, policy, seed)
    if snapshot_stride:
        traj.snapshots[0] = config
    for _ in range(t_max):
        stats = stepper.advance()
        traj.stats.append(stats)
        need_state = observers or (snapshot_stride and stepper.t % snapshot_stride == 0)
        state = stepper.snapshot() if need_state else None
        if snapshot_stride and stepper.t % snapshot_stride == 0:
            traj.snapshots[stepper.t] = state
        stop = False
        for obs in observers:
            if obs(stats.t, state, stats):
                stop = True
        if stop:
            traj.stop_reason = "observer"
            break
    traj.final = stepper.snapshot()
    return traj


class RepeatDetector:
    """Observer that stops at the first recurrence of a full state (meaningful for q = 0)."""

    def __init__(self, initial: Configuration):
        self.seen = {initial.key(): 0}
        self.transient: int | None = None
        self.period: int | None = None

    def __call__(self, t, state, stats):
        key = state.key()
        first = self.seen.get(key)
        if first is not None:
            self.transient, self.period = first, t + 1 - first
            return True
        self.seen[key] = t + 1
        return False


def mean_velocity(traj: Trajectory, window: Iterable[int] | slice | None = None) -> float:
    """Arithmetic mean of instantaneous velocity over step indices in ``window``."""
    if window is None:
        window = range(traj.steps)
    elif isinstance(window, slice):
        window = range(*window.indices(traj.steps))
    idx = list(window)
    if not idx:
        raise EmptyWindowError("empty velocity window")
    if idx[0] < 0 or max(idx) >= traj.steps or min(idx) < 0:
        raise EmptyWindowError(f"window {idx[0]}..{idx[-1]} outside trajectory of {traj.steps} steps")
    return float(np.mean([traj.stats[k].velocity_instant for k in idx]))
