"""Spin-1/2 spinors, measurement axes in the x-z plane and Born weights.

Components are always stored in the sigma_z basis.  Axes are parametrised
by a single angle ``theta`` with ``n = cos(theta) z + sin(theta) x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-12
# components below this magnitude count as zero when fixing eigenspinor phases
_PHASE_TOL = 1e-14


@dataclass(frozen=True)
class Spinor:
    c_plus: complex
    c_minus: complex

    def __post_init__(self):
        object.__setattr__(self, "c_plus", complex(self.c_plus))
        object.__setattr__(self, "c_minus", complex(self.c_minus))
        for c in (self.c_plus, self.c_minus):
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError("spinor components must be finite")
        if self.norm_squared == 0.0:
            raise ValueError("spinor must have nonzero norm")

    @property
    def norm_squared(self) -> float:
        return abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm_squared - 1.0) <= NORM_TOL

    def normalized(self) -> Spinor:
        n = math.sqrt(self.norm_squared)
        return Spinor(self.c_plus / n, self.c_minus / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.c_plus, self.c_minus], dtype=complex)

    @classmethod
    def from_array(cls, v) -> Spinor:
        return cls(complex(v[0]), complex(v[1]))

    def to_reals(self) -> list[float]:
        """``[re(c+), im(c+), re(c-), im(c-)]``, the serialized form."""
        return [self.c_plus.real, self.c_plus.imag, self.c_minus.real, self.c_minus.imag]

    @classmethod
    def from_reals(cls, values) -> Spinor:
        if len(values) != 4:
            raise ValueError("a spinor serializes as exactly four reals")
        a, b, c, d = (float(v) for v in values)
        return cls(complex(a, b), complex(c, d))

    def __mul__(self, factor: complex) -> Spinor:
        return Spinor(self.c_plus * factor, self.c_minus * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class MeasurementAxis:
    theta: float = 0.0

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError("axis angle must be finite")
        theta = math.fmod(theta, TWO_PI)
        if theta < 0.0:
            theta += TWO_PI
        if theta >= TWO_PI:  # fmod of a tiny negative can round up to 2*pi
            theta = 0.0
        object.__setattr__(self, "theta", theta)

    @property
    def direction(self) -> tuple[float, float]:
        """(x, z) components of the unit vector."""
        return math.sin(self.theta), math.cos(self.theta)

    def sigma(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [s, -c]], dtype=complex)

    @property
    def name(self) -> str:
        for label, angle in (("z", 0.0), ("x", math.pi / 2), ("-z", math.pi), ("-x", 1.5 * math.pi)):
            if abs(self.theta - angle) < 1e-12:
                return label
        return f"theta={self.theta:.12g}"


Z_AXIS = MeasurementAxis(0.0)
X_AXIS = MeasurementAxis(math.pi / 2)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first nonzero component is real and >= 0."""
    for c in v:
        if abs(c) > _PHASE_TOL:
            return v * (abs(c) / c)
    return v


def eigenspinors(axis: MeasurementAxis) -> tuple[Spinor, Spinor]:
    """Return ``(chi_plus, chi_minus)`` for sigma_n, eigenvalues +1 and -1.

    Phases are fixed so the first nonzero component is real and nonnegative.
    """
    half = 0.5 * axis.theta
    c, s = math.cos(half), math.sin(half)
    up = fix_phase(np.array([c, s], dtype=complex))
    down = fix_phase(np.array([-s, c], dtype=complex))
    return Spinor.from_array(up), Spinor.from_array(down)


def eigenspinor(axis: MeasurementAxis, sign: int) -> Spinor:
    up, down = eigenspinors(axis)
    return up if sign > 0 else down


def inner(a: Spinor, b: Spinor) -> complex:
    """<a|b>."""
    return a.c_plus.conjugate() * b.c_plus + a.c_minus.conjugate() * b.c_minus


def decompose(s: Spinor, axis: MeasurementAxis) -> tuple[complex, complex]:
    """Amplitudes of ``s`` along the eigenspinors of ``axis``."""
    up, down = eigenspinors(axis)
    return inner(up, s), inner(down, s)


def recompose(amps: tuple[complex, complex], axis: MeasurementAxis) -> Spinor:
    up, down = eigenspinors(axis)
    return Spinor(
        amps[0] * up.c_plus + amps[1] * down.c_plus,
        amps[0] * up.c_minus + amps[1] * down.c_minus,
    )


def born_probabilities(s: Spinor, axis: MeasurementAxis) -> tuple[float, float]:
    a_plus, a_minus = decompose(s, axis)
    return abs(a_plus) ** 2, abs(a_minus) ** 2


def named_spinor(name: str) -> Spinor:
    """Eigenspinor by short name: ``+z``, ``-z``, ``+x`` or ``-x``."""
    table = {"z": Z_AXIS, "x": X_AXIS}
    if len(name) != 2 or name[0] not in "+-" or name[1] not in table:
        raise ValueError(f"unknown spinor name {name!r}")
    return eigenspinor(table[name[1]], +1 if name[0] == "+" else -1)
