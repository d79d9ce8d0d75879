"""Diagonal invariants modulo d = gcd(N_1, ..., N_n).

Diagonal ``k`` is the set of cells whose coordinate sum is ``k (mod d)``.
A moving particle advances one diagonal per step, so the shifted label
``phi = diagonal - t (mod d)`` stays put while it moves and drops by one
whenever it is delayed.  The occupancy vector ``x`` marks which ``phi``
values are in use; its runs of zeros control self-organization.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamics import Stepper, SwitchPolicy, Trajectory, simulate
from .errors import CounterexampleError, HypothesisError
from .lattice import Configuration, LatticeShape


def gcd_all(shape: LatticeShape) -> int:
    return math.gcd(*shape.dims)


def diagonal_index(cell: Sequence[int], d: int) -> int:
    return sum(cell) % d


def phi(cell: Sequence[int], t: int, d: int) -> int:
    return (diagonal_index(cell, d) - t) % d


def _coord_sums(shape: LatticeShape) -> np.ndarray:
    return shape.coord_table.sum(axis=1)


def phi_values(config: Configuration, t: int = 0) -> np.ndarray:
    d = config.shape.d
    return (_coord_sums(config.shape)[config.positions] - t) % d


@dataclass(frozen=True)
class DiagonalProfile:
    d: int
    t: int
    phi: tuple[int, ...]
    x: tuple[int, ...]

    @property
    def counts(self) -> tuple[int, ...]:
        c = [0] * self.d
        for v in self.phi:
            c[v] += 1
        return tuple(c)


def profile(config: Configuration, t: int = 0) -> DiagonalProfile:
    d = config.shape.d
    ph = phi_values(config, t)
    x = np.zeros(d, dtype=np.int64)
    x[ph] = 1
    return DiagonalProfile(d, t, tuple(ph.tolist()), tuple(x.tolist()))


@dataclass(frozen=True)
class ZeroCluster:
    start: int
    length: int


def zero_clusters(x: Sequence[int]) -> list[ZeroCluster]:
    """Maximal cyclic runs of zeros, ordered by start index.

    A run is identified by its first zero, i.e. the position right after a 1
    (its "left limit").  The all-zero vector is a single run starting at 0.
    """
    d = len(x)
    if d < 1:
        raise ValueError("empty occupancy vector")
    ones = [a for a in range(d) if x[a]]
    if not ones:
        return [ZeroCluster(0, d)]
    out = []
    for j, a in enumerate(ones):
        nxt = ones[(j + 1) % len(ones)]
        gap = (nxt - a - 1) % d
        if gap:
            out.append(ZeroCluster((a + 1) % d, gap))
    return sorted(out, key=lambda c: c.start)


def check_lemma1(before: tuple[Sequence[int], int], moved: bool, after: tuple[Sequence[int], int], d: int) -> bool:
    """phi is unchanged after a move and drops by one (mod d) after a delay."""
    (cell0, t0), (cell1, t1) = before, after
    p0, p1 = phi(cell0, t0, d), phi(cell1, t1, d)
    return p1 == p0 if moved else p1 == (p0 - 1) % d


def check_cluster_monotonicity(x_t: Sequence[int], x_t1: Sequence[int]) -> bool:
    """Long (>= 2) zero runs never multiply, and each one at t+1 keeps a left limit it had at t."""
    if len(x_t) != len(x_t1):
        raise ValueError("occupancy vectors differ in length")
    long_t = {c.start for c in zero_clusters(x_t) if c.length >= 2}
    long_t1 = [c.start for c in zero_clusters(x_t1) if c.length >= 2]
    return len(long_t1) <= len(long_t) and all(s in long_t for s in long_t1)


@dataclass(frozen=True)
class FreeMovementCertificate:
    holds: bool
    witness: tuple[int, int] | None = None


def certificate(prof: DiagonalProfile) -> FreeMovementCertificate:
    """Every used phi value holds one particle and the next value up is unused.

    Sufficient for every particle to move at every later step whatever the
    type assignments.  With ``d == 1`` and any particle it fails: the next
    diagonal is the particle's own.
    """
    d, counts = prof.d, prof.counts
    for a in range(d):
        if counts[a] > 1:
            return FreeMovementCertificate(False, (a, a))
        if counts[a] and counts[(a + 1) % d]:
            return FreeMovementCertificate(False, (a, (a + 1) % d))
    return FreeMovementCertificate(True)


def certificate_holds(config: Configuration) -> bool:
    """Fast check of :func:`certificate` on a configuration (time-shift invariant)."""
    d = config.shape.d
    counts = np.bincount(phi_values(config), minlength=d)
    return bool(counts.max(initial=0) <= 1 and not np.any((counts > 0) & (np.roll(counts, -1) > 0)))


class FreeMovementMonitor:
    """Observer recording the first certificate time and, for q = 0, the first state recurrence."""

    def __init__(
        self, initial: Configuration, deterministic: bool, stop_on_certificate: bool = False, stop: bool = True
    ):
        self.deterministic = deterministic
        self.stop = stop
        self.stop_on_certificate = stop_on_certificate
        self.certificate_onset: int | None = 0 if certificate_holds(initial) else None
        self.last_delay: int | None = None
        self.transient: int | None = None
        self.period: int | None = None
        self._cycle_all_move = False
        self._seen = {initial.key(): 0} if deterministic else None
        self._moved_all: list[bool] = []

    @property
    def done(self) -> bool:
        return self.period is not None or (self.stop_on_certificate and self.certificate_onset is not None)

    def __call__(self, t, state, stats):
        all_moved = stats.moved_count == stats.m
        self._moved_all.append(all_moved)
        if not all_moved:
            self.last_delay = t
        if self.certificate_onset is None and certificate_holds(state):
            self.certificate_onset = t + 1
        if self._seen is not None and self.period is None:
            key = state.key()
            first = self._seen.get(key)
            if first is None:
                self._seen[key] = t + 1
            else:
                self.transient, self.period = first, t + 1 - first
                self._cycle_all_move = all(self._moved_all[first:])
        return self.stop and self.done

    @property
    def cycle_onset(self) -> int | None:
        """q = 0: first time after which no delay ever occurs, once the recurring cycle is all-moving."""
        if self.period is None or not self._cycle_all_move:
            return None
        return 0 if self.last_delay is None else self.last_delay + 1

    @property
    def onset(self) -> int | None:
        cands = [v for v in (self.certificate_onset, self.cycle_onset) if v is not None]
        return min(cands) if cands else None


@dataclass(frozen=True)
class FreeMovement:
    onset: int | None
    certificate_onset: int | None
    last_delay: int | None
    transient: int | None = None
    period: int | None = None


def detect_free_movement(traj: Trajectory) -> FreeMovement:
    """Earliest observed time from which free movement is established.

    The trajectory is replayed from its initial state and seed.  A time
    qualifies if the certificate holds there, or (q = 0 only) if a state
    recurrence was reached and no delay occurs from that time onwards.
    """
    mon = FreeMovementMonitor(traj.initial, traj.policy.deterministic)
    if traj.steps:
        simulate(traj.initial, traj.policy, traj.steps, traj.seed, [mon])
    return FreeMovement(mon.onset, mon.certificate_onset, mon.last_delay, mon.transient, mon.period)


@dataclass
class VerificationReport:
    shape: str
    m: int
    d: int
    q: float
    mode: str
    states_enumerated: int
    realizations: int
    all_free: bool
    max_onset: int | None
    mean_onset: float | None
    max_certificate_onset: int | None
    certificate_never: int
    max_last_delay: int | None
    worst_state: dict | None
    counterexamples: list[dict] = field(default_factory=list)
    nonfree_states: int = 0
    within_hypothesis: bool = True
    runtime: float = 0.0
    t_max: int | None = None
    switch_samples: int | None = None
    seed: int | None = None

    def payload(self) -> dict:
        """Machine-readable content excluding wall-clock runtime."""
        out = dict(self.__dict__)
        out.pop("runtime")
        return out


def verify_theorem1(
    shape: LatticeShape,
    m: int,
    policy: SwitchPolicy | None = None,
    *,
    budget: int | None = None,
    override_hypothesis: bool = False,
    switch_samples: int = 16,
    t_max: int = 10_000,
    seed: int = 0,
    workers: int = 1,
    max_counterexamples: int = 20,
) -> VerificationReport:
    """Check that every initial state with ``m`` particles reaches free movement.

    ``q == 0``: exhaustive over all states via the deterministic state graph.
    ``q > 0``: every initial state is run under ``switch_samples`` independent
    switching streams for at most ``t_max`` steps, requiring the certificate.
    """
    from . import statespace
    from .serialize import config_to_dict

    policy = policy or SwitchPolicy()
    d = shape.d
    within = 1 <= m <= d // 2
    if not within and not override_hypothesis:
        raise HypothesisError(f"m={m} violates 1 <= m <= d/2 = {d / 2:g} for shape {shape}")
    start = time.perf_counter()
    kwargs = {} if budget is None else {"budget": budget}
    if policy.deterministic:
        graph = statespace.build_graph(shape, m, workers=workers, **kwargs)
        onset = graph.onset
        free = onset >= 0
        bad = np.flatnonzero(~free)
        counter = [config_to_dict(graph.configuration(int(i))) for i in bad[:max_counterexamples]]
        cert = graph.certificate_onset
        good = onset[free]
        worst = int(np.flatnonzero(free)[np.argmax(good)]) if good.size else None
        report = VerificationReport(
            shape=str(shape), m=m, d=d, q=policy.q, mode="exhaustive",
            states_enumerated=graph.size, realizations=graph.size, all_free=bool(free.all()),
            max_onset=int(good.max()) if good.size else None,
            mean_onset=float(Fraction(int(good.sum()), good.size)) if good.size else None,
            max_certificate_onset=int(cert[cert >= 0].max()) if np.any(cert >= 0) else None,
            certificate_never=int(np.count_nonzero(cert < 0)),
            max_last_delay=int(good.max()) - 1 if good.size and good.max() > 0 else None,
            worst_state=config_to_dict(graph.configuration(worst)) if worst is not None else None,
            counterexamples=counter, nonfree_states=int(bad.size), within_hypothesis=within,
        )
    else:
        report = _sampled_verification(
            shape, m, policy, switch_samples, t_max, seed, workers, max_counterexamples, **kwargs
        )
        report.within_hypothesis = within
    report.runtime = time.perf_counter() - start
    if not report.all_free and not override_hypothesis:
        raise CounterexampleError(
            f"{len(report.counterexamples)}+ initial states of {shape}, m={m} never reach free movement",
            report,
        )
    return report


def certificate_onset_run(config: Configuration, policy: SwitchPolicy, rng, t_max: int) -> int | None:
    """Run one stochastic realization until the certificate holds; ``None`` if it never does within ``t_max``."""
    sums = _coord_sums(config.shape)
    d = config.shape.d
    stepper = Stepper(config, policy, rng)

    def ok() -> bool:
        counts = np.bincount(sums[stepper.pos] % d, minlength=d)
        return bool(counts.max() <= 1 and not np.any((counts > 0) & (np.roll(counts, -1) > 0)))

    if ok():
        return 0
    for t in range(1, t_max + 1):
        stepper.advance()
        if ok():
            return t
    return None


def _sampled_chunk(args):
    from .rng import make_rng

    shape, policy, samples, t_max, seed, start, cells, types = args
    out = []
    for j in range(cells.shape[0]):
        config = Configuration(shape, cells[j], types[j], check=False)
        out.append([
            certificate_onset_run(config, policy, make_rng(seed, start + j, k), t_max)
            for k in range(samples)
        ])
    return out


def _sampled_verification(shape, m, policy, samples, t_max, seed, workers, max_counterexamples, **kwargs):
    from concurrent.futures import ProcessPoolExecutor

    from . import statespace
    from .lattice import configuration_count
    from .serialize import config_to_dict

    budget = kwargs.get("budget", statespace.DEFAULT_ENUMERATION_BUDGET)
    count = configuration_count(shape, m)
    if count * samples > budget:
        from .errors import BudgetExceededError

        raise BudgetExceededError(f"{count} states x {samples} samples exceed budget {budget}", required=count * samples)
    cells, types = statespace.state_arrays(shape, m)
    step = max(1, -(-cells.shape[0] // max(1, workers * 4)))
    jobs = [
        (shape, policy, samples, t_max, seed, a, cells[a:a + step], types[a:a + step])
        for a in range(0, cells.shape[0], step)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [row for part in pool.map(_sampled_chunk, jobs) for row in part]
    else:
        results = [row for job in jobs for row in _sampled_chunk(job)]
    onsets, counter, worst, worst_val = [], [], None, -1
    for i, row in enumerate(results):
        for k, v in enumerate(row):
            if v is None:
                if len(counter) < max_counterexamples:
                    rec = config_to_dict(Configuration(shape, cells[i], types[i], check=False))
                    rec["sample"] = k
                    counter.append(rec)
            else:
                onsets.append(v)
                if v > worst_val:
                    worst, worst_val = i, v
    total = len(results) * samples
    failures = total - len(onsets)
    return VerificationReport(
        shape=str(shape), m=m, d=shape.d, q=policy.q, mode="sampled",
        states_enumerated=len(results), realizations=total, all_free=failures == 0,
        max_onset=max(onsets) if onsets else None,
        mean_onset=float(Fraction(sum(onsets), len(onsets))) if onsets else None,
        max_certificate_onset=max(onsets) if onsets else None,
        certificate_never=failures,
        max_last_delay=None,
        worst_state=config_to_dict(Configuration(shape, cells[worst], types[worst], check=False)) if worst is not None else None,
        counterexamples=counter, nonfree_states=failures,
        t_max=t_max, switch_samples=samples, seed=seed,
    )
