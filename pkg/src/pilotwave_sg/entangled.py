"""Two-particle spin states, sequential measurement and EPR-Bohm correlations.

A joint spin state is a 2x2 matrix ``A`` with ``|psi> = sum A[i, j] |i>|j>``
in the sigma_z basis of both particles.  The particle measured first moves in
a field whose branch weights are its marginal Born weights.  Its exit beam
then fixes the conditional spinor of the partner, which is measured as an
ordinary single particle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .apparatus import OutcomeLabel, device_wavefield, label_outcome, pass_device
from .errors import NotProduct
from .spinor import NORM_TOL, MeasurementAxis, Spinor, eigenspinor, eigenspinors, fix_phase
from .trajectory import TrajectoryRecord, default_span, exits_upper, propagate_analytic
from .wavefield import DeviceConfig, Polarity, WaveField
from .ensemble import generator

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TwoParticleSpinState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.shape != (2, 2):
            raise ValueError("a two-particle spin state is a 2x2 amplitude matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"two-particle state not normalized (norm^2 = {norm!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, amplitudes) -> TwoParticleSpinState:
        a = np.array(amplitudes, dtype=complex)
        return cls(a / math.sqrt(float(np.sum(np.abs(a) ** 2))))

    @classmethod
    def product(cls, first: Spinor, second: Spinor) -> TwoParticleSpinState:
        return cls.normalized(np.outer(first.as_array(), second.as_array()))

    def __eq__(self, other):
        if not isinstance(other, TwoParticleSpinState):
            return NotImplemented
        return bool(np.array_equal(self.amplitudes, other.amplitudes))

    __hash__ = None


def singlet() -> TwoParticleSpinState:
    """(|+z>|-z> - |-z>|+z>) / sqrt(2)."""
    c = 1.0 / math.sqrt(2.0)
    return TwoParticleSpinState([[0.0, c], [-c, 0.0]])


def _basis_matrix(axis: MeasurementAxis) -> np.ndarray:
    up, down = eigenspinors(axis)
    return np.column_stack([up.as_array(), down.as_array()])


def in_device_bases(state: TwoParticleSpinState, axis1: MeasurementAxis, axis2: MeasurementAxis) -> np.ndarray:
    """Amplitudes ``<chi1_i| <chi2_j| psi>`` along the two measurement axes."""
    u1, u2 = _basis_matrix(axis1), _basis_matrix(axis2)
    return u1.conj().T @ state.amplitudes @ u2.conj()


def joint_probabilities(state: TwoParticleSpinState, axis1: MeasurementAxis, axis2: MeasurementAxis) -> np.ndarray:
    """``P[i, j]`` for outcome ``+`` (index 0) or ``-`` (index 1) on each particle."""
    return np.abs(in_device_bases(state, axis1, axis2)) ** 2


def quantum_correlation(state: TwoParticleSpinState, axis1: MeasurementAxis, axis2: MeasurementAxis) -> float:
    p = joint_probabilities(state, axis1, axis2)
    return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])


def _check_particle(particle: int):
    if particle not in (1, 2):
        raise ValueError("particle must be 1 or 2")


def marginal_weights(state: TwoParticleSpinState, particle: int, axis: MeasurementAxis) -> tuple[float, float]:
    """Born weights ``(W+, W-)`` of one particle measured alone along ``axis``."""
    _check_particle(particle)
    u = _basis_matrix(axis)
    a = state.amplitudes
    if particle == 1:
        w = np.sum(np.abs(u.conj().T @ a) ** 2, axis=1)
    else:
        w = np.sum(np.abs(a @ u.conj()) ** 2, axis=0)
    return float(w[0]), float(w[1])


def collapse(state: TwoParticleSpinState, particle: int, axis: MeasurementAxis, sign: int) -> TwoParticleSpinState:
    """Project ``particle`` onto the ``sign`` eigenspinor of ``axis`` and renormalize."""
    _check_particle(particle)
    chi = eigenspinor(axis, sign).as_array()
    a = state.amplitudes
    if particle == 1:
        partner = chi.conj() @ a
        projected = np.outer(chi, partner)
    else:
        partner = a @ chi.conj()
        projected = np.outer(partner, chi)
    if np.linalg.norm(partner) == 0.0:
        raise ValueError(f"outcome {sign:+d} has zero probability for particle {particle}")
    return TwoParticleSpinState.normalized(projected)


def conditional_spinor(state: TwoParticleSpinState, particle: int) -> Spinor:
    """Spinor of ``particle`` when ``state`` factorizes; raises NotProduct otherwise."""
    _check_particle(particle)
    a = state.amplitudes
    singular = np.linalg.svd(a, compute_uv=False)
    if singular[1] > RANK_TOL:
        raise NotProduct(f"state is entangled (second singular value {singular[1]:.3g})")
    # every nonzero row (column) of a rank-1 matrix is proportional to the factor
    lines = a if particle == 2 else a.T
    v = lines[int(np.argmax(np.linalg.norm(lines, axis=1)))]
    v = fix_phase(v / np.linalg.norm(v))
    return Spinor.from_array(v)


def first_wavefield(state: TwoParticleSpinState, particle: int, device: DeviceConfig) -> WaveField:
    """Wave field guiding the particle measured first.

    Its branch amplitudes are the square roots of the marginal weights, which
    fixes both the critical height and the exit probabilities.
    """
    w_plus, w_minus = marginal_weights(state, particle, device.axis)
    total = w_plus + w_minus
    a_plus, a_minus = math.sqrt(w_plus / total), math.sqrt(w_minus / total)
    if device.polarity is Polarity.REVERSED:
        a_plus, a_minus = a_minus, a_plus
    return WaveField(device, a_plus, a_minus)


class FirstMeasurement(NamedTuple):
    label: OutcomeLabel
    collapsed: TwoParticleSpinState
    record: TrajectoryRecord


def first_measurement(state: TwoParticleSpinState, device: DeviceConfig, z0: float, particle: int = 1) -> FirstMeasurement:
    f = first_wavefield(state, particle, device)
    record = propagate_analytic(z0, f, *default_span(f))
    label = label_outcome(record.exit_branch, device)
    return FirstMeasurement(label, collapse(state, particle, device.axis, label.sign), record)


class Order(enum.Enum):
    PARTICLE1_FIRST = "particle1_first"
    PARTICLE2_FIRST = "particle2_first"


@dataclass(frozen=True)
class ScenarioConfig:
    """One entangled pair.  ``device1 = None`` means particle 1 is never measured."""

    state: TwoParticleSpinState
    device1: DeviceConfig | None
    device2: DeviceConfig
    order: Order = Order.PARTICLE1_FIRST
    z0_1: float = 0.0
    z0_2: float = 0.0


class ScenarioResult(NamedTuple):
    outcome1: OutcomeLabel | None
    outcome2: OutcomeLabel
    records: dict[int, TrajectoryRecord]


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    if cfg.device1 is None:
        m = first_measurement(cfg.state, cfg.device2, cfg.z0_2, particle=2)
        return ScenarioResult(None, m.label, {2: m.record})
    if cfg.order is Order.PARTICLE1_FIRST:
        m = first_measurement(cfg.state, cfg.device1, cfg.z0_1, particle=1)
        p = pass_device(conditional_spinor(m.collapsed, 2), cfg.z0_2, cfg.device2)
        return ScenarioResult(m.label, p.label, {1: m.record, 2: p.record})
    m = first_measurement(cfg.state, cfg.device2, cfg.z0_2, particle=2)
    p = pass_device(conditional_spinor(m.collapsed, 1), cfg.z0_1, cfg.device1)
    return ScenarioResult(p.label, m.label, {1: p.record, 2: m.record})


def _signs(upper: np.ndarray, device: DeviceConfig) -> np.ndarray:
    s = np.where(upper, 1, -1).astype(np.int8)
    return -s if device.polarity is Polarity.REVERSED else s


def simulate_pairs(
    state: TwoParticleSpinState,
    device1: DeviceConfig | None,
    device2: DeviceConfig,
    z0_1: np.ndarray,
    z0_2: np.ndarray,
    order: Order = Order.PARTICLE1_FIRST,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`run_scenario`; returns outcome signs for both particles.

    Particle 1's signs are all zero when ``device1`` is None.
    """
    z0_1, z0_2 = np.asarray(z0_1, dtype=float), np.asarray(z0_2, dtype=float)
    if device1 is None:
        signs2 = _signs(exits_upper(z0_2, first_wavefield(state, 2, device2)), device2)
        return np.zeros_like(signs2), signs2
    if order is Order.PARTICLE1_FIRST:
        first, z_first, p_first = device1, z0_1, 1
        second, z_second = device2, z0_2
    else:
        first, z_first, p_first = device2, z0_2, 2
        second, z_second = device1, z0_1
    s_first = _signs(exits_upper(z_first, first_wavefield(state, p_first, first)), first)
    s_second = np.zeros_like(s_first)
    for sign in (1, -1):
        hit = s_first == sign
        if not hit.any():
            continue
        partner = conditional_spinor(collapse(state, p_first, first.axis, sign), 3 - p_first)
        f = device_wavefield(partner, second)
        s_second[hit] = _signs(exits_upper(z_second[hit], f), second)
    return (s_first, s_second) if p_first == 1 else (s_second, s_first)


def sample_pair_heights(n: int, w1: float, w2: float, seed: int, *key: int) -> tuple[np.ndarray, np.ndarray]:
    if n <= 0:
        raise ValueError("n must be > 0")
    z1 = generator(seed, *key, 0).uniform(-0.5 * w1, 0.5 * w1, n)
    z2 = generator(seed, *key, 1).uniform(-0.5 * w2, 0.5 * w2, n)
    return z1, z2


class SweepRow(NamedTuple):
    theta1: float
    theta2: float
    n: int
    E: float
    stderr: float


def correlation_sweep(
    theta1_list,
    theta2_list,
    n: int,
    seed: int,
    template: DeviceConfig | None = None,
    state: TwoParticleSpinState | None = None,
    order: Order = Order.PARTICLE1_FIRST,
) -> list[SweepRow]:
    """Empirical E(theta1, theta2) = <s1 s2> over the grid theta1 x theta2.

    Pair ``(i, j)`` draws its heights from its own Philox stream, so rows do
    not depend on the grid they were computed in.
    """
    template = template if template is not None else DeviceConfig()
    state = state if state is not None else singlet()
    rows = []
    for i, t1 in enumerate(theta1_list):
        for j, t2 in enumerate(theta2_list):
            d1 = _with_axis(template, t1)
            d2 = _with_axis(template, t2)
            z1, z2 = sample_pair_heights(n, d1.w, d2.w, seed, i, j)
            s1, s2 = simulate_pairs(state, d1, d2, z1, z2, order)
            e = float(np.mean(s1.astype(np.int64) * s2))
            rows.append(SweepRow(float(t1), float(t2), n, e, math.sqrt(max(1.0 - e * e, 0.0) / n)))
    return rows


def _with_axis(template: DeviceConfig, theta: float) -> DeviceConfig:
    return DeviceConfig(
        axis=MeasurementAxis(theta),
        polarity=template.polarity,
        w=template.w,
        k=template.k,
        kappa=template.kappa,
        packet_length=template.packet_length,
    )
