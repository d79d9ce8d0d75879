"""Velocity-versus-density ensembles.

Grid points are ordered density-major, then q.  Trajectory ``k`` of point
``p`` draws its initial state from stream ``(seed, p, k, 0)`` and its
switching from stream ``(seed, p, k, 1)``, so a row depends only on the
master seed and its grid position.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .diagonal import FreeMovementMonitor
from .dynamics import Stepper, SwitchPolicy
from .errors import ParticleCountError
from .lattice import LatticeShape, random_configuration
from .rng import make_rng


def resolve_m(value, cell_count: int) -> int:
    """Integer particle count, or a density in (0, 1) rounded down to one."""
    if isinstance(value, str):
        value = float(value) if any(c in value for c in ".eE") else int(value)
    if isinstance(value, float):
        if not 0.0 < value < 1.0:
            raise ParticleCountError(f"density {value} outside (0, 1)")
        m = math.floor(value * cell_count)
        if m == 0:
            raise ParticleCountError(f"density {value} rounds to zero particles")
        return m
    return int(value)


@dataclass(frozen=True)
class SweepSpec:
    shape: LatticeShape
    m_values: tuple[int, ...]
    q_values: tuple[float, ...] = (0.0,)
    trajectories: int = 8
    t_max: int = 1000
    seed: int = 0
    tail_fraction: float = 0.25

    def __post_init__(self):
        cells = self.shape.cell_count
        for m in self.m_values:
            if not 1 <= m < cells:
                raise ParticleCountError(f"m={m} outside [1, {cells - 1}]")
        for q in self.q_values:
            SwitchPolicy(q)
        if self.trajectories < 1 or self.t_max < 1:
            raise ValueError("trajectories and t_max must be positive")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must lie in (0, 1]")

    def points(self) -> list[tuple[int, float]]:
        return [(m, q) for m in self.m_values for q in self.q_values]


def run_member(shape: LatticeShape, m: int, q: float, t_max: int, seed: int, point: int, k: int):
    """One ensemble trajectory: ``(velocities, onset or None)`` over exactly ``t_max`` steps.

    The run stops early once its future is known (a q = 0 recurrence, or the
    certificate); the remaining velocities are filled in exactly.
    """
    config = random_configuration(shape, m, rng=make_rng(seed, point, k, 0))
    policy = SwitchPolicy(q)
    stepper = Stepper(config, policy, make_rng(seed, point, k, 1))
    mon = FreeMovementMonitor(config, policy.deterministic, stop_on_certificate=True)
    vel = np.empty(t_max)
    t = 0
    while t < t_max:
        stats = stepper.advance()
        vel[t] = stats.velocity_instant
        done = mon(t, stepper.snapshot(), stats)
        t += 1
        if done:
            break
    if t < t_max:
        if mon.period is not None:
            idx = mon.transient + (np.arange(t, t_max) - mon.transient) % mon.period
            vel[t:] = vel[idx]
        else:
            vel[t:] = 1.0
    return vel, mon.onset


def _run_point(args):
    shape, m, q, spec_t, seed, tail, trajectories, point = args
    w = max(1, math.ceil(tail * spec_t))
    tails, onsets = [], []
    for k in range(trajectories):
        vel, onset = run_member(shape, m, q, spec_t, seed, point, k)
        tails.append(float(vel[-w:].mean()))
        if onset is not None:
            onsets.append(onset)
    return {
        "shape": str(shape),
        "m": m,
        "density": repr(m / shape.cell_count),
        "q": repr(float(q)),
        "trajectories": trajectories,
        "mean_velocity": repr(float(np.mean(tails))),
        "free_fraction": repr(len(onsets) / trajectories),
        "mean_onset": repr(float(np.mean(onsets))) if onsets else "",
    }


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    jobs = [
        (spec.shape, m, q, spec.t_max, spec.seed, spec.tail_fraction, spec.trajectories, p)
        for p, (m, q) in enumerate(spec.points())
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]
