"""Piecewise-analytic wave function for one Stern-Gerlach passage.

Units are hbar = m = 1, so group velocities equal wavenumbers.  The magnet
sits on the line y = 0; the incident top-hat packet occupies |z| <= w/2 for
y < 0.  Behind the magnet the two spin components travel with group
velocities (k', +kappa) and (k', -kappa) and initially coincide in the
triangular overlap region

    (kappa/k') y - w/2 <= z <= -(kappa/k') y + w/2.

Matching at y = 0 to first order in kappa*w gives A = C and a reflected
amplitude B = +-i kappa C; the reflected term is dropped here, and the
overall amplitude is fixed to 1.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ZeroAmplitude
from .spinor import NORM_TOL, MeasurementAxis, Spinor, decompose

ZERO_AMPLITUDE_TOL = 1e-30
CLOSED_FORM, FINITE_DIFFERENCE = 0, 1
# relative finite-difference step (in units of w) for the numeric velocity
FD_STEP = 1e-6


class Polarity(enum.Enum):
    STANDARD = "standard"
    REVERSED = "reversed"


class Region(enum.IntEnum):
    INCIDENT = 0
    OVERLAP = 1
    UPPER_BRANCH = 2
    LOWER_BRANCH = 3
    VACUUM = 4


@dataclass(frozen=True)
class DeviceConfig:
    """A single Stern-Gerlach apparatus.

    ``kappa`` is the transverse impulse wavenumber; use :meth:`from_physical`
    to derive it from mass, magnetic moment and field gradient.
    """

    axis: MeasurementAxis = field(default_factory=MeasurementAxis)
    polarity: Polarity = Polarity.STANDARD
    w: float = 1.0
    k: float = 100.0
    kappa: float = 5.0
    packet_length: float | None = None

    def __post_init__(self):
        for name in ("w", "k", "kappa"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.w <= 0:
            raise ValueError("w must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.kappa >= self.k:
            raise ValueError("kappa must be < k")
        if not isinstance(self.polarity, Polarity):
            object.__setattr__(self, "polarity", Polarity(self.polarity))

    @classmethod
    def from_physical(cls, m: float, mu: float, b: float, k: float, **kwargs) -> DeviceConfig:
        return cls(k=k, kappa=m * mu * b / k, **kwargs)

    @property
    def k_prime(self) -> float:
        return math.sqrt(self.k**2 - self.kappa**2)

    @property
    def edge_slope(self) -> float:
        """kappa / k', the slope of the deflected bands."""
        return self.kappa / self.k_prime

    @property
    def delta_y(self) -> float:
        """Distance from the magnet to the apex of the overlap triangle."""
        return self.w * self.k_prime / (2.0 * self.kappa)

    def validity_issues(self) -> list[str]:
        issues = []
        if self.kappa / self.k > 0.1:
            issues.append(f"kappa/k = {self.kappa / self.k:.3g} > 0.1: field not gentle")
        if self.kappa * self.w > 0.1:
            issues.append(f"kappa*w = {self.kappa * self.w:.3g} > 0.1: packet not narrow")
        return issues


# integer region codes used inside compiled kernels (same values as Region)
INCIDENT, OVERLAP, UPPER_BRANCH, LOWER_BRANCH, VACUUM = 0, 1, 2, 3, 4


@njit(cache=True)
def _region(y, z, half, r):
    if y < 0.0:
        return INCIDENT if abs(z) <= half else VACUUM
    shift = r * y
    in_upper = shift - half <= z <= shift + half
    in_lower = -shift - half <= z <= half - shift
    if in_upper and in_lower:
        return OVERLAP
    if in_upper:
        return UPPER_BRANCH
    if in_lower:
        return LOWER_BRANCH
    return VACUUM


def region_codes(y, z, d: DeviceConfig) -> np.ndarray:
    """Vectorised :func:`classify_region`, returning integer :class:`Region` codes."""
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    half, r = 0.5 * d.w, d.edge_slope
    out = np.empty(y.shape, dtype=np.int64)
    flat = out.reshape(-1)
    for i, (yy, zz) in enumerate(zip(y.reshape(-1), z.reshape(-1))):
        flat[i] = _region(float(yy), float(zz), half, r)
    return out


def classify_region(y: float, z: float, d: DeviceConfig) -> Region:
    """Region containing (y, z); ties on shared edges go to the overlap first."""
    return Region(_region(float(y), float(z), 0.5 * d.w, d.edge_slope))


@dataclass(frozen=True)
class WaveField:
    """Wave for one passage, with input amplitudes in the device basis."""

    device: DeviceConfig
    a_plus: complex
    a_minus: complex

    def __post_init__(self):
        object.__setattr__(self, "a_plus", complex(self.a_plus))
        object.__setattr__(self, "a_minus", complex(self.a_minus))
        norm = abs(self.a_plus) ** 2 + abs(self.a_minus) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"device-basis amplitudes not normalized (norm^2 = {norm!r})")

    @classmethod
    def from_spinor(cls, device: DeviceConfig, s: Spinor) -> WaveField:
        a_plus, a_minus = decompose(s, device.axis)
        return cls(device, a_plus, a_minus)

    @property
    def weight_plus(self) -> float:
        return abs(self.a_plus) ** 2

    @property
    def weight_minus(self) -> float:
        return abs(self.a_minus) ** 2

    @property
    def overlap_velocity(self) -> tuple[float, float]:
        d = self.device
        return d.k_prime, d.kappa * (self.weight_plus - self.weight_minus)


    def kernel_args(self) -> tuple:
        """Flat parameter tuple consumed by the compiled kernels."""
        d = self.device
        return (0.5 * d.w, d.edge_slope, d.k, d.k_prime, d.kappa, self.a_plus, self.a_minus)


@njit(cache=True)
def _psi_local(y, z, code, k, kp, kappa, ap, am):
    """The analytic expression valid in region ``code``, without support clipping.

    Finite differences use this so that a stencil straddling a sharp band
    edge still samples the smooth local expression.
    """
    if code == INCIDENT:
        carrier = cmath.exp(1j * k * y)
        return carrier * ap, carrier * am
    if code == VACUUM:
        return 0j, 0j
    carrier = cmath.exp(1j * kp * y)
    plus = ap * cmath.exp(1j * kappa * z) if code != LOWER_BRANCH else 0j
    minus = am * cmath.exp(-1j * kappa * z) if code != UPPER_BRANCH else 0j
    return carrier * plus, carrier * minus


@njit(cache=True)
def _velocity_closed(code, k, kp, kappa, ap, am):
    if code == INCIDENT:
        return k, 0.0
    if code == OVERLAP:
        return kp, kappa * (abs(ap) ** 2 - abs(am) ** 2)
    if code == UPPER_BRANCH:
        return kp, kappa
    return kp, -kappa


@njit(cache=True)
def _velocity_fd(y, z, code, h, k, kp, kappa, ap, am):
    # Im(psi^dag grad psi) / psi^dag psi; 4th-order central differences
    p0, m0 = _psi_local(y, z, code, k, kp, kappa, ap, am)
    rho = abs(p0) ** 2 + abs(m0) ** 2
    if rho < ZERO_AMPLITUDE_TOL:
        return np.nan, np.nan
    grad = np.empty(2)
    for axis in range(2):
        dy = h if axis == 0 else 0.0
        dz = h if axis == 1 else 0.0
        p1, m1 = _psi_local(y + dy, z + dz, code, k, kp, kappa, ap, am)
        p2, m2 = _psi_local(y + 2 * dy, z + 2 * dz, code, k, kp, kappa, ap, am)
        q1, n1 = _psi_local(y - dy, z - dz, code, k, kp, kappa, ap, am)
        q2, n2 = _psi_local(y - 2 * dy, z - 2 * dz, code, k, kp, kappa, ap, am)
        dp = (8.0 * (p1 - q1) - (p2 - q2)) / (12.0 * h)
        dm = (8.0 * (m1 - n1) - (m2 - n2)) / (12.0 * h)
        grad[axis] = (p0.conjugate() * dp + m0.conjugate() * dm).imag / rho
    return grad[0], grad[1]


@njit(cache=True)
def _velocity(y, z, code, method, h, k, kp, kappa, ap, am):
    """Guidance velocity in region ``code``; NaN where the wave vanishes."""
    if method == CLOSED_FORM:
        p0, m0 = _psi_local(y, z, code, k, kp, kappa, ap, am)
        if abs(p0) ** 2 + abs(m0) ** 2 < ZERO_AMPLITUDE_TOL:
            return np.nan, np.nan
        return _velocity_closed(code, k, kp, kappa, ap, am)
    return _velocity_fd(y, z, code, h, k, kp, kappa, ap, am)


def psi(y: float, z: float, f: WaveField) -> np.ndarray:
    """Two-component wave at (y, z), components in the device basis."""
    half, r, k, kp, kappa, ap, am = f.kernel_args()
    code = _region(float(y), float(z), half, r)
    return np.array(_psi_local(float(y), float(z), code, k, kp, kappa, ap, am))


METHODS = {"closed_form": CLOSED_FORM, "finite_difference": FINITE_DIFFERENCE}


def method_code(method: str) -> int:
    try:
        return METHODS[method]
    except KeyError:
        raise ValueError(f"unknown velocity method {method!r}") from None


def velocity(y: float, z: float, f: WaveField, method: str = "closed_form") -> tuple[float, float]:
    """Guidance velocity ``(v_y, v_z)`` at (y, z).

    ``closed_form`` uses the per-region constants; ``finite_difference``
    evaluates the spinor current from numerical derivatives of psi with step
    ``FD_STEP * w``.
    """
    half, r, k, kp, kappa, ap, am = f.kernel_args()
    y, z = float(y), float(z)
    code = _region(y, z, half, r)
    vy, vz = _velocity(y, z, code, method_code(method), FD_STEP * f.device.w, k, kp, kappa, ap, am)
    if math.isnan(vy):
        raise ZeroAmplitude(f"wave function vanishes at (y, z) = ({y!r}, {z!r})")
    return vy, vz
