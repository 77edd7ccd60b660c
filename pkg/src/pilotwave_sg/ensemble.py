"""Quantum-equilibrium sampling and Born-rule statistics for device chains.

The incident packet has constant amplitude across its width, so |psi|^2
initial positions are exactly uniform on [-w/2, w/2].  Random numbers come
from counter-based Philox streams keyed by ``(seed, stream)``; each chain
stage owns its own stream, so adding a stage never perturbs the draws of
the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .apparatus import ExperimentChain, OutcomeLabel, TransverseMode, stage_batch
from .spinor import born_probabilities, eigenspinor

FAIL_Z = 4.0


def generator(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=stream)))


def sample_initial(n: int, w: float, seed: int, stream: int = 0) -> np.ndarray:
    """``n`` initial heights uniform on the packet width."""
    if n <= 0:
        raise ValueError("n must be > 0")
    if w <= 0:
        raise ValueError("w must be > 0")
    return generator(seed, stream).uniform(-0.5 * w, 0.5 * w, n)


@dataclass
class ParticleOutcomes:
    """Per-particle record of an ensemble run.

    ``signs[i, j]`` is the outcome of particle ``i`` at stage ``j`` (0 when the
    stage was never reached); ``discarded_at[i]`` is -1 for survivors.
    """

    z0: np.ndarray
    signs: np.ndarray
    discarded_at: np.ndarray


@dataclass
class RunStats:
    counts: dict[tuple[OutcomeLabel, ...], int]
    n_total: int
    n_discarded: int
    seed: int
    particles: ParticleOutcomes | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if sum(self.counts.values()) + self.n_discarded != self.n_total:
            raise ValueError("counts and discards do not add up to n_total")


def simulate_chain(
    chain: ExperimentChain,
    n: int,
    seed: int,
    mode: TransverseMode = TransverseMode.RESAMPLE,
) -> ParticleOutcomes:
    """Push ``n`` particles through ``chain`` stage by stage.

    Every particle surviving a selection stage carries the same eigenspinor,
    so each stage is one vectorised pass over the survivors.
    """
    n_stages = len(chain.stages)
    signs = np.zeros((n, n_stages), dtype=np.int8)
    discarded_at = np.full(n, -1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    z = sample_initial(n, chain.stages[0].device.w, seed, 0)
    z0 = z.copy()
    state = chain.input_spinor
    for j, stage in enumerate(chain.stages):
        if j > 0 and mode is TransverseMode.RESAMPLE:
            z = sample_initial(n, stage.device.w, seed, j)
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        s, kept, z_next = stage_batch(state, z[idx], stage)
        signs[idx, j] = s
        discarded_at[idx[~kept]] = j
        alive[idx[~kept]] = False
        z[idx] = z_next
        if stage.kept_sign is not None:
            state = eigenspinor(stage.device.axis, stage.kept_sign)
    return ParticleOutcomes(z0, signs, discarded_at)


def run_ensemble(
    chain: ExperimentChain,
    n: int,
    seed: int,
    mode: TransverseMode = TransverseMode.RESAMPLE,
) -> RunStats:
    particles = simulate_chain(chain, n, seed, mode)
    survivors = particles.discarded_at < 0
    counts: dict[tuple[OutcomeLabel, ...], int] = {}
    if survivors.any():
        rows, freq = np.unique(particles.signs[survivors], axis=0, return_counts=True)
        for row, c in zip(rows, freq):
            key = tuple(OutcomeLabel(st.device.axis, int(s)) for st, s in zip(chain.stages, row))
            counts[key] = int(c)
    return RunStats(counts, n, int((~survivors).sum()), seed, particles)


def predicted_outcomes(chain: ExperimentChain) -> dict[tuple[OutcomeLabel, ...], float]:
    """Unconditional quantum probability of every surviving label sequence."""
    paths: list[tuple[tuple[OutcomeLabel, ...], float, object]] = [((), 1.0, chain.input_spinor)]
    for stage in chain.stages:
        d = stage.device
        grown = []
        for labels, p, state in paths:
            p_plus, p_minus = born_probabilities(state, d.axis)
            for sign, q in ((1, p_plus), (-1, p_minus)):
                if stage.kept_sign not in (None, sign):
                    continue
                grown.append((labels + (OutcomeLabel(d.axis, sign),), p * q, eigenspinor(d.axis, sign)))
        paths = grown
    return {labels: p for labels, p, _ in paths}


@dataclass(frozen=True)
class OutcomeRow:
    labels: tuple[OutcomeLabel, ...]
    count: int
    frequency: float
    predicted: float
    stderr: float
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) <= FAIL_Z

    @property
    def label_text(self) -> tuple[str, ...]:
        return tuple(str(lab) for lab in self.labels)


@dataclass(frozen=True)
class BornReport:
    rows: tuple[OutcomeRow, ...]
    survival: OutcomeRow | None

    @property
    def passed(self) -> bool:
        rows = self.rows + ((self.survival,) if self.survival is not None else ())
        return all(r.passed for r in rows)


def binomial_row(labels, count: int, n: int, p: float) -> OutcomeRow:
    """Frequency ``count/n`` against probability ``p`` with a binomial z-score."""
    freq = count / n
    se = math.sqrt(p * (1.0 - p) / n)
    if se > 0:
        z = (freq - p) / se
    else:
        z = 0.0 if freq == p else math.inf
    return OutcomeRow(tuple(labels), count, freq, p, se, z)


def compare_to_born(
    stats: RunStats,
    chain: ExperimentChain,
    predicted: dict[tuple[OutcomeLabel, ...], float] | None = None,
) -> BornReport:
    """Compare empirical frequencies with quantum predictions.

    Outcome rows are conditional on survival, so the predictions over
    surviving sequences sum to one; survival itself is reported separately
    as a fraction of all particles.  ``predicted`` overrides the unconditional
    probabilities computed from the chain.
    """
    if stats.n_total == 0:
        return BornReport((), None)
    raw = predicted_outcomes(chain) if predicted is None else dict(predicted)
    p_survive = sum(raw.values())
    n_survived = stats.n_total - stats.n_discarded
    survival = binomial_row((), n_survived, stats.n_total, min(p_survive, 1.0))
    rows = []
    if n_survived > 0:
        keys = list(raw) + [k for k in stats.counts if k not in raw]
        for key in keys:
            p = raw.get(key, 0.0) / p_survive if p_survive > 0 else 0.0
            rows.append(binomial_row(key, stats.counts.get(key, 0), n_survived, min(p, 1.0)))
    return BornReport(tuple(rows), survival)
