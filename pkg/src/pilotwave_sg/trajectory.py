"""Particle trajectories through one device.

Inside every region the guidance velocity is constant, so exact paths are
polylines whose corners sit on region boundaries.  :func:`propagate_analytic`
builds them from boundary intersections; :func:`propagate_numeric` integrates
the guidance equation with RK4 as an independent check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OutsidePacket, ZeroAmplitude
from .wavefield import (
    FD_STEP,
    INCIDENT,
    LOWER_BRANCH,
    OVERLAP,
    UPPER_BRANCH,
    VACUUM,
    DeviceConfig,
    Region,
    WaveField,
    _region,
    _velocity,
    _velocity_closed,
    method_code,
)

# exits within this fraction of the apex distance are placed on the magnet line
EXIT_FOLD = 1e-12


class Branch(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"

    @property
    def region(self) -> Region:
        return Region.UPPER_BRANCH if self is Branch.UPPER else Region.LOWER_BRANCH


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Piecewise-linear path.

    ``path`` has rows ``(t, y, z)``; ``regions[i]`` is the region of the
    segment leaving row ``i`` (the last row carries the final region).
    """

    path: np.ndarray
    regions: tuple[Region, ...]
    exit_branch: Branch
    z0: float
    near_critical: bool = False

    def __eq__(self, other):
        if not isinstance(other, TrajectoryRecord):
            return NotImplemented
        return (
            self.path.shape == other.path.shape
            and self.path.tobytes() == other.path.tobytes()
            and self.regions == other.regions
            and self.exit_branch == other.exit_branch
            and self.z0 == other.z0
            and self.near_critical == other.near_critical
        )

    __hash__ = None

    @property
    def final(self) -> tuple[float, float]:
        return float(self.path[-1, 1]), float(self.path[-1, 2])


@dataclass(frozen=True)
class CriticalGeometry:
    delta_y: float
    slope: float
    z_critical: float
    p_plus_geometric: float


def critical_geometry(f: WaveField) -> CriticalGeometry:
    """Geometry of the trajectory that ends exactly on the overlap apex.

    The fraction of the incident width lying above it is the probability of
    an upward exit, which reproduces |a+|^2.
    """
    d = f.device
    delta_y = d.delta_y
    slope = (f.weight_plus - f.weight_minus) / (f.weight_plus + f.weight_minus) * d.edge_slope
    z_critical = -slope * delta_y
    p_plus = min(max(0.5 + slope * delta_y / d.w, 0.0), 1.0)
    if abs(p_plus - f.weight_plus) > 1e-12:
        raise AssertionError(f"critical geometry gives P+ = {p_plus!r}, |a+|^2 = {f.weight_plus!r}")
    return CriticalGeometry(delta_y, slope, z_critical, p_plus)


def exits_upper(z0, f: WaveField) -> np.ndarray:
    """Exit law: upper iff z0 > z_critical; the apex itself goes up.

    A branch carrying no amplitude is never selected, which keeps the
    measure-zero edge z0 = +-w/2 consistent with eigenstate inputs.
    """
    z0 = np.asarray(z0, dtype=float)
    if f.weight_minus == 0.0:
        return np.ones(z0.shape, dtype=bool)
    if f.weight_plus == 0.0:
        return np.zeros(z0.shape, dtype=bool)
    return z0 >= critical_geometry(f).z_critical


def exit_points(z0, f: WaveField):
    """Where each trajectory leaves the overlap region.

    Returns ``(upper, y_exit, z_exit)`` arrays.
    """
    d = f.device
    z0 = np.asarray(z0, dtype=float)
    upper = exits_upper(z0, f)
    half = 0.5 * d.w
    r = d.edge_slope
    s = critical_geometry(f).slope
    with np.errstate(divide="ignore", invalid="ignore"):
        y_up = (half - z0) / (s + r)
        y_low = (z0 + half) / (r - s)
    y_exit = np.where(upper, y_up, y_low)
    y_exit = np.clip(np.nan_to_num(y_exit, nan=0.0, posinf=0.0), 0.0, d.delta_y)
    z_exit = z0 + s * y_exit
    return upper, y_exit, z_exit


def band_coordinate(z, y, upper, d: DeviceConfig):
    """Transverse position measured from the centre of the exit band."""
    shift = d.edge_slope * np.asarray(y, dtype=float)
    return np.asarray(z, dtype=float) - np.where(upper, shift, -shift)


def _check_inside(z0, f: WaveField):
    if np.any(np.abs(np.asarray(z0, dtype=float)) > 0.5 * f.device.w):
        raise OutsidePacket("initial z lies outside the incident packet |z| <= w/2")


def _check_span(y_start: float, y_end: float, f: WaveField):
    if not y_start < 0.0:
        raise ValueError("y_start must be upstream of the magnet (y_start < 0)")
    if not y_end > f.device.delta_y:
        raise ValueError("y_end must lie beyond the overlap apex")


def propagate_analytic(z0: float, f: WaveField, y_start: float, y_end: float) -> TrajectoryRecord:
    _check_inside(z0, f)
    _check_span(y_start, y_end, f)
    d = f.device
    z0 = float(z0)
    upper, y_exit, z_exit = (v.item() for v in exit_points(z0, f))
    branch = Branch.UPPER if upper else Branch.LOWER
    vz_branch = d.kappa if upper else -d.kappa

    t_magnet = -y_start / d.k
    rows = [(0.0, y_start, z0), (t_magnet, 0.0, z0)]
    regions = [Region.INCIDENT, Region.OVERLAP]
    # exits closer to the magnet than rounding can resolve in t happen at y = 0
    if y_exit > EXIT_FOLD * d.delta_y:
        rows.append((t_magnet + y_exit / d.k_prime, y_exit, z_exit))
        regions.append(branch.region)
    else:
        regions[-1] = branch.region
    t_exit = rows[-1][0]
    dt = (y_end - y_exit) / d.k_prime
    rows.append((t_exit + dt, y_end, z_exit + vz_branch * dt))
    regions.append(branch.region)
    return TrajectoryRecord(np.array(rows, dtype=float), tuple(regions), branch, z0)


@njit(cache=True)
def _rk4_step(y, z, h, code, method, fd_h, k, kp, kappa, ap, am):
    k1y, k1z = _velocity(y, z, code, method, fd_h, k, kp, kappa, ap, am)
    k2y, k2z = _velocity(y + 0.5 * h * k1y, z + 0.5 * h * k1z, code, method, fd_h, k, kp, kappa, ap, am)
    k3y, k3z = _velocity(y + 0.5 * h * k2y, z + 0.5 * h * k2z, code, method, fd_h, k, kp, kappa, ap, am)
    k4y, k4z = _velocity(y + h * k3y, z + h * k3z, code, method, fd_h, k, kp, kappa, ap, am)
    return (
        h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
    )


@njit(cache=True)
def _settle(new, code, ap, am):
    """Rounding across a shared edge into a band with no amplitude lands in the overlap.

    Edges belong to the overlap, and an empty band can never hold the particle.
    """
    if (new == UPPER_BRANCH and ap == 0) or (new == LOWER_BRANCH and am == 0):
        return OVERLAP
    return new


@njit(cache=True)
def _integrate_one(z0, y_start, y_end, dt, h_min, method, fd_h, half, r, k, kp, kappa, ap, am, keep):
    """RK4 for one particle.

    Returns ``(status, y, z, code, path)``; status -1 means the field vanished
    along the path.  ``path`` rows are ``(t, y, z, code)`` when ``keep``.
    """
    cap = 16
    if keep:
        cap = int((y_end - y_start) / (dt * kp)) + 512
    path = np.empty((cap, 4))
    n = 0
    y, z, t, h = y_start, z0, 0.0, dt
    code = _region(y, z, half, r)
    if keep:
        path[0, 0], path[0, 1], path[0, 2], path[0, 3] = t, y, z, code
        n = 1
    apex_y = half / r
    apex_tol = 4.0 * h_min * k
    while True:
        committed = code == UPPER_BRANCH or code == LOWER_BRANCH
        to_end = (y_end - y) / (k if code == INCIDENT else kp)
        last = to_end <= h
        hs = to_end if last else h
        if not committed:
            vy, vz = _velocity_closed(code, k, kp, kappa, ap, am)
            mid = _settle(_region(y + 0.5 * hs * vy, z + 0.5 * hs * vz, half, r), code, ap, am)
            end = _settle(_region(y + hs * vy, z + hs * vz, half, r), code, ap, am)
            straddle = mid != code or end != code
            if straddle and hs > h_min:
                h = 0.5 * hs
                continue
        # a straddling step (by now tiny) uses the field of the start region
        dy, dz = _rk4_step(y, z, hs, code, method, fd_h, k, kp, kappa, ap, am)
        if dy != dy or dz != dz:
            return -1, y, z, code, path[:n]
        y += dy
        z += dz
        t += hs
        if not committed:
            new = _settle(_region(y, z, half, r), code, ap, am)
            if code == OVERLAP and new != OVERLAP:
                # leaving within one unresolvable step of the apex is a tie: it goes up
                if abs(y - apex_y) <= apex_tol and abs(z) <= apex_tol and ap != 0:
                    new = UPPER_BRANCH
            if new == VACUUM:
                new = UPPER_BRANCH
            if new != code:
                h = dt
            code = new
        if keep:
            if n == path.shape[0]:
                grown = np.empty((2 * n, 4))
                grown[:n] = path
                path = grown
            path[n, 0], path[n, 1], path[n, 2], path[n, 3] = t, y, z, code
            n += 1
        if last and hs == to_end:
            break
    return 0, y, z, code, path[:n]


@njit(cache=True)
def _integrate_many(z0s, y_start, y_end, dt, h_min, method, fd_h, half, r, k, kp, kappa, ap, am):
    n = z0s.size
    ys = np.empty(n)
    zs = np.empty(n)
    codes = np.empty(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        st, y, z, c, _ = _integrate_one(
            z0s[i], y_start, y_end, dt, h_min, method, fd_h, half, r, k, kp, kappa, ap, am, False
        )
        status[i], ys[i], zs[i], codes[i] = st, y, z, c
    return status, ys, zs, codes


@dataclass
class NumericResult:
    """Batch integration output, one entry per initial position."""

    z0: np.ndarray
    upper: np.ndarray
    y_final: np.ndarray
    z_final: np.ndarray
    near_critical: np.ndarray


def _numeric_setup(z0, f, dt, y_start, y_end, method, halvings):
    if not dt > 0:
        raise ValueError("dt must be > 0")
    _check_inside(z0, f)
    _check_span(y_start, y_end, f)
    half, r, k, kp, kappa, ap, am = f.kernel_args()
    return (
        float(y_start), float(y_end), float(dt), dt / 2.0**halvings,
        method_code(method), FD_STEP * f.device.w, half, r, k, kp, kappa, ap, am,
    )


def near_critical(z0, f: WaveField, dt: float) -> np.ndarray:
    """Initial positions too close to the critical line for a step of ``dt``."""
    z0 = np.asarray(z0, dtype=float)
    return np.abs(z0 - critical_geometry(f).z_critical) <= 10.0 * dt * f.device.k


def integrate_batch(
    z0,
    f: WaveField,
    dt: float,
    y_start: float,
    y_end: float,
    method: str = "finite_difference",
    halvings: int = 20,
) -> NumericResult:
    """RK4 integration of the guidance equation for many particles.

    Steps that would straddle a region boundary are halved until they no
    longer do or fall below ``dt / 2**halvings``, at which point the crossing
    step is accepted.  Once a particle enters a branch band it is committed
    to it.  A particle stepping from the overlap into the vacuum between the
    bands is sitting on the apex and follows the analytic tie rule (up).
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    args = _numeric_setup(z0, f, dt, y_start, y_end, method, halvings)
    status, ys, zs, codes = _integrate_many(z0, *args)
    if np.any(status < 0):
        raise ZeroAmplitude("trajectory left the support of the wave function")
    return NumericResult(z0, codes == Region.UPPER_BRANCH, ys, zs, near_critical(z0, f, dt))


def propagate_numeric(
    z0: float,
    f: WaveField,
    dt: float,
    y_start: float,
    y_end: float,
    method: str = "finite_difference",
    halvings: int = 20,
) -> TrajectoryRecord:
    """Single-particle RK4 trajectory with one row per accepted step."""
    args = _numeric_setup(z0, f, dt, y_start, y_end, method, halvings)
    status, _, _, code, path = _integrate_one(float(z0), *args, True)
    if status < 0:
        raise ZeroAmplitude("trajectory left the support of the wave function")
    branch = Branch.UPPER if code == Region.UPPER_BRANCH else Branch.LOWER
    regions = tuple(Region(int(c)) for c in path[:, 3])
    return TrajectoryRecord(
        np.ascontiguousarray(path[:, :3]), regions, branch, float(z0), bool(near_critical(z0, f, dt))
    )


def path_deviation(a: TrajectoryRecord, b: TrajectoryRecord) -> float:
    """Largest distance between ``a``'s points and ``b`` at the same time."""
    t = a.path[:, 0]
    yb = np.interp(t, b.path[:, 0], b.path[:, 1])
    zb = np.interp(t, b.path[:, 0], b.path[:, 2])
    return float(np.max(np.hypot(a.path[:, 1] - yb, a.path[:, 2] - zb)))


def default_span(f: WaveField) -> tuple[float, float]:
    """A ``(y_start, y_end)`` window that shows the whole passage."""
    d = f.device
    return -0.25 * d.delta_y, 1.5 * d.delta_y
