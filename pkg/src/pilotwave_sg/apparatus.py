"""Stern-Gerlach devices as measuring instruments, and chains of them.

A device's polarity decides which spin value is carried by the upper beam.
Reversed devices are simulated by feeding the canonical wave field with the
amplitudes swapped, then translating the geometric branch back into a label.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .spinor import MeasurementAxis, Spinor, decompose, eigenspinor
from .trajectory import (
    Branch,
    TrajectoryRecord,
    band_coordinate,
    default_span,
    exit_points,
    propagate_analytic,
)
from .wavefield import DeviceConfig, Polarity, WaveField


class Selection(enum.Enum):
    KEEP_UPPER = "keep_upper"
    KEEP_LOWER = "keep_lower"
    MEASURE_BOTH = "measure_both"


class TransverseMode(enum.Enum):
    """How the next stage's transverse coordinate is chosen.

    ``RESAMPLE`` draws a fresh uniform position; ``CARRY`` reuses the exit
    position measured across the selected beam.
    """

    RESAMPLE = "resample"
    CARRY = "carry"


@dataclass(frozen=True)
class OutcomeLabel:
    axis: MeasurementAxis
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("outcome sign must be +1 or -1")

    def __str__(self) -> str:
        return ("+" if self.sign > 0 else "-") + self.axis.name


def label_outcome(branch: Branch, d: DeviceConfig) -> OutcomeLabel:
    sign = 1 if branch is Branch.UPPER else -1
    if d.polarity is Polarity.REVERSED:
        sign = -sign
    return OutcomeLabel(d.axis, sign)


def branch_for_sign(sign: int, d: DeviceConfig) -> Branch:
    """The beam in which ``sign`` is recorded by device ``d``."""
    up = (sign > 0) == (d.polarity is Polarity.STANDARD)
    return Branch.UPPER if up else Branch.LOWER


def device_wavefield(s: Spinor, d: DeviceConfig) -> WaveField:
    """Canonical wave field for spinor ``s`` entering ``d``.

    The first amplitude always belongs to the upward-deflected component.
    """
    a_plus, a_minus = decompose(s, d.axis)
    if d.polarity is Polarity.REVERSED:
        a_plus, a_minus = a_minus, a_plus
    return WaveField(d, a_plus, a_minus)


class Passage(NamedTuple):
    branch: Branch
    label: OutcomeLabel
    post_spinor: Spinor
    record: TrajectoryRecord


def pass_device(s: Spinor, z0: float, d: DeviceConfig, span: tuple[float, float] | None = None) -> Passage:
    """Send one particle with spinor ``s`` and initial height ``z0`` through ``d``.

    The particle leaves guided by the eigenspinor of the beam it ends up in.
    """
    f = device_wavefield(s, d)
    y_start, y_end = span if span is not None else default_span(f)
    record = propagate_analytic(z0, f, y_start, y_end)
    label = label_outcome(record.exit_branch, d)
    return Passage(record.exit_branch, label, eigenspinor(d.axis, label.sign), record)


@dataclass(frozen=True)
class Stage:
    device: DeviceConfig
    selection: Selection = Selection.MEASURE_BOTH

    def keeps(self, branch: Branch) -> bool:
        if self.selection is Selection.MEASURE_BOTH:
            return True
        return branch is (Branch.UPPER if self.selection is Selection.KEEP_UPPER else Branch.LOWER)

    @property
    def kept_sign(self) -> int | None:
        """Spin value recorded in the kept port, or None for measure_both."""
        if self.selection is Selection.MEASURE_BOTH:
            return None
        branch = Branch.UPPER if self.selection is Selection.KEEP_UPPER else Branch.LOWER
        return label_outcome(branch, self.device).sign


@dataclass(frozen=True)
class ExperimentChain:
    stages: tuple[Stage, ...]
    input_spinor: Spinor

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ConfigError("a chain needs at least one stage")
        for i, stage in enumerate(stages[:-1]):
            if stage.selection is Selection.MEASURE_BOTH:
                raise ConfigError(f"stage {i}: measure_both is only allowed on the last stage")
        if not self.input_spinor.is_normalized:
            raise ConfigError("input spinor must be normalized")


@dataclass(frozen=True)
class Discarded:
    """The particle left the post-selected beam at ``stage``."""

    stage: int
    outcomes: tuple[tuple[int, OutcomeLabel], ...] = ()


def run_chain(
    chain: ExperimentChain,
    transverse_samples,
    mode: TransverseMode = TransverseMode.RESAMPLE,
) -> list[tuple[int, OutcomeLabel]] | Discarded:
    """Run one particle through every stage of ``chain``.

    ``transverse_samples`` holds one initial height per stage; in ``CARRY``
    mode only the first is used and later heights come from the exit
    position inside the selected beam.
    """
    z_samples = list(transverse_samples)
    needed = 1 if mode is TransverseMode.CARRY else len(chain.stages)
    if len(z_samples) < needed:
        raise ConfigError(f"need {needed} transverse samples, got {len(z_samples)}")
    state = chain.input_spinor
    z0 = z_samples[0]
    outcomes: list[tuple[int, OutcomeLabel]] = []
    for i, stage in enumerate(chain.stages):
        if i > 0 and mode is TransverseMode.RESAMPLE:
            z0 = z_samples[i]
        passage = pass_device(state, z0, stage.device)
        outcomes.append((i, passage.label))
        if not stage.keeps(passage.branch):
            return Discarded(i, tuple(outcomes))
        state = passage.post_spinor
        if mode is TransverseMode.CARRY:
            y_end, z_end = passage.record.final
            upper = passage.branch is Branch.UPPER
            z0 = float(band_coordinate(z_end, y_end, upper, stage.device))
            z0 = min(max(z0, -0.5 * stage.device.w), 0.5 * stage.device.w)
    return outcomes


def stage_batch(state: Spinor, z0, stage: Stage):
    """Vectorised single-stage pass for particles sharing one spinor.

    Returns ``(signs, kept, z_next)`` where ``z_next`` is the exit position
    across the beam (the ``CARRY`` coordinate for the following stage).
    """
    d = stage.device
    f = device_wavefield(state, d)
    upper, y_exit, z_exit = exit_points(z0, f)
    signs = np.where(upper, 1, -1)
    if d.polarity is Polarity.REVERSED:
        signs = -signs
    if stage.selection is Selection.MEASURE_BOTH:
        kept = np.ones(upper.shape, dtype=bool)
    else:
        kept = upper == (stage.selection is Selection.KEEP_UPPER)
    z_next = np.clip(band_coordinate(z_exit, y_exit, upper, d), -0.5 * d.w, 0.5 * d.w)
    return signs, kept, z_next
