"""Experiment files: a strict TOML schema and its round-trip serializer.

Every section and key below is the complete vocabulary; anything else is
rejected with :class:`ValidationError`.  Angles are radians, given either as
numbers or as simple multiples of pi such as ``"pi/4"`` or ``"-3*pi/4"``.

Top level
    kind             single | chain | trajectories | entangled | sweep (required)
    n                ensemble size, default 100000
    seed             master seed, default 42
    out              output directory, default "out"
    plot             write an SVG, default false
    per_particle     write particles.csv, default false
    transverse_mode  resample | carry, default resample

[device]            shared geometry: w = 1, k = 100, kappa = 5,
                    theta = 0, polarity = "standard", packet_length (optional)
[input]             spinor = "+z" | "-z" | "+x" | "-x" | [re+, im+, re-, im-]
[[stage]]           theta, polarity, selection = keep_upper | keep_lower | measure_both,
                    w, k, kappa (optional, default to [device])
[trajectories]      count = 9, z0 = [...] (optional), method = analytic | numeric,
                    dt = 1e-4 (units of w/k), velocity = closed_form | finite_difference
[scenario]          state = "singlet" | [[re, im] x 4] ordered ++, +-, -+, --,
                    order = particle1_first | particle2_first, alice_present = true,
                    theta1 = 0, theta2 = 0, polarity1, polarity2, z0_1, z0_2 (optional)
[sweep]             theta1 = [...], theta2 = [...]
"""
from __future__ import annotations

import dataclasses
import math
import re
import sys
from dataclasses import dataclass, field

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .apparatus import ExperimentChain, Selection, Stage, TransverseMode
from .entangled import Order, TwoParticleSpinState, singlet
from .errors import ConfigError, ParseError, ValidationError
from .spinor import NORM_TOL, MeasurementAxis, Spinor, named_spinor
from .wavefield import DeviceConfig, Polarity

KINDS = ("single", "chain", "trajectories", "entangled", "sweep")
_PI_RE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


@dataclass(frozen=True)
class DeviceSpec:
    w: float = 1.0
    k: float = 100.0
    kappa: float = 5.0
    theta: float = 0.0
    polarity: str = "standard"
    packet_length: float | None = None

    def build(self, theta: float | None = None, polarity: str | None = None) -> DeviceConfig:
        return DeviceConfig(
            axis=MeasurementAxis(self.theta if theta is None else theta),
            polarity=Polarity(self.polarity if polarity is None else polarity),
            w=self.w,
            k=self.k,
            kappa=self.kappa,
            packet_length=self.packet_length,
        )


@dataclass(frozen=True)
class StageSpec:
    """One chain stage; unset geometry falls back to ``[device]``."""

    theta: float = 0.0
    polarity: str = "standard"
    selection: str = "measure_both"
    w: float | None = None
    k: float | None = None
    kappa: float | None = None

    def geometry(self, base: DeviceSpec) -> DeviceSpec:
        overrides = {key: getattr(self, key) for key in ("w", "k", "kappa") if getattr(self, key) is not None}
        return dataclasses.replace(base, **overrides)


@dataclass(frozen=True)
class TrajectorySpec:
    count: int = 9
    z0: tuple[float, ...] | None = None
    method: str = "analytic"
    dt: float = 1e-4
    velocity: str = "closed_form"

    def heights(self, w: float) -> np.ndarray:
        """Explicit heights, or ``count`` cell-centred points across the packet."""
        if self.z0 is not None:
            return np.array(self.z0, dtype=float)
        return -0.5 * w + (np.arange(self.count) + 0.5) * (w / self.count)


@dataclass(frozen=True)
class ScenarioSpec:
    state: tuple[complex, complex, complex, complex] = field(
        default_factory=lambda: tuple(complex(a) for a in singlet().amplitudes.reshape(-1))
    )
    order: str = "particle1_first"
    alice_present: bool = True
    theta1: float = 0.0
    theta2: float = 0.0
    polarity1: str = "standard"
    polarity2: str = "standard"
    z0_1: float | None = None
    z0_2: float | None = None

    def two_particle_state(self) -> TwoParticleSpinState:
        return TwoParticleSpinState(np.array(self.state).reshape(2, 2))


@dataclass(frozen=True)
class SweepSpec:
    theta1: tuple[float, ...]
    theta2: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 100_000
    seed: int = 42
    out: str = "out"
    plot: bool = False
    per_particle: bool = False
    transverse_mode: str = "resample"
    device: DeviceSpec = field(default_factory=DeviceSpec)
    input: Spinor | None = None
    stages: tuple[StageSpec, ...] = ()
    trajectories: TrajectorySpec | None = None
    scenario: ScenarioSpec | None = None
    sweep: SweepSpec | None = None

    def chain(self) -> ExperimentChain:
        """The device chain of a ``single``, ``chain`` or ``trajectories`` run."""
        if self.kind == "chain":
            stages = tuple(
                Stage(s.geometry(self.device).build(s.theta, s.polarity), Selection(s.selection)) for s in self.stages
            )
        else:
            stages = (Stage(self.device.build()),)
        return ExperimentChain(stages, self.input)

    @property
    def mode(self) -> TransverseMode:
        return TransverseMode(self.transverse_mode)


# ---------------------------------------------------------------- parsing


class _Section:
    """Typed, consuming view of one TOML table; leftovers are unknown keys."""

    def __init__(self, table, where: str):
        if not isinstance(table, dict):
            raise ValidationError(f"{where} must be a table", where)
        self.table = dict(table)
        self.where = where

    def _key(self, key: str) -> str:
        return f"{self.where}.{key}" if self.where else key

    def take(self, key, default, convert):
        if key not in self.table:
            return default
        value = self.table.pop(key)
        try:
            return convert(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{self._key(key)}: {exc}", self._key(key)) from None

    def finish(self):
        for key in self.table:
            raise ValidationError(f"unknown key {self._key(key)!r}", self._key(key))


def _number(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _positive_int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"expected an integer, got {value!r}")
    if value <= 0:
        raise ValueError("must be > 0")
    return value


def _seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {value!r}")
    return value


def _bool(value) -> bool:
    if not isinstance(value, bool):
        raise TypeError(f"expected true or false, got {value!r}")
    return value


def _string(value) -> str:
    if not isinstance(value, str):
        raise TypeError(f"expected a string, got {value!r}")
    return value


def _choice(*options):
    def convert(value):
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {value!r}")
        return value

    return convert


def parse_angle(value) -> float:
    """Radians from a number or a string like ``"3*pi/4"``."""
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if not m:
            raise ValueError(f"cannot read angle {value!r}")
        coeff = m.group(1)
        factor = float(coeff) if coeff not in ("", "+", "-") else (-1.0 if coeff == "-" else 1.0)
        divisor = float(m.group(2)) if m.group(2) else 1.0
        if divisor == 0.0:
            raise ValueError(f"angle {value!r} divides by zero")
        return factor * math.pi / divisor
    return _number(value)


def _angles(value) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ValueError("expected a nonempty list of angles")
    return tuple(parse_angle(v) for v in value)


def _heights(value) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ValueError("expected a nonempty list of heights")
    return tuple(_number(v) for v in value)


def _spinor(value) -> Spinor:
    if isinstance(value, str):
        return named_spinor(value)
    if not isinstance(value, list):
        raise TypeError("spinor must be a name or four reals")
    s = Spinor.from_reals([_number(v) for v in value])
    return s if s.is_normalized else s.normalized()


def _state(value) -> tuple[complex, ...]:
    if value == "singlet":
        amps = singlet().amplitudes
    elif isinstance(value, list) and len(value) == 4:
        pairs = []
        for pair in value:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ValueError("each amplitude is a [re, im] pair")
            pairs.append(complex(_number(pair[0]), _number(pair[1])))
        amps = np.array(pairs, dtype=complex)
        norm = float(np.sum(np.abs(amps) ** 2))
        if norm == 0.0:
            raise ValueError("state must have nonzero norm")
        if abs(norm - 1.0) > NORM_TOL:
            amps = amps / math.sqrt(norm)
    else:
        raise ValueError('state is "singlet" or four [re, im] pairs')
    return tuple(complex(a) for a in np.asarray(amps).reshape(-1))


_POLARITY = _choice("standard", "reversed")


def _device(table) -> DeviceSpec:
    s = _Section(table, "device")
    spec = DeviceSpec(
        w=s.take("w", 1.0, _number),
        k=s.take("k", 100.0, _number),
        kappa=s.take("kappa", 5.0, _number),
        theta=s.take("theta", 0.0, parse_angle),
        polarity=s.take("polarity", "standard", _POLARITY),
        packet_length=s.take("packet_length", None, _number),
    )
    s.finish()
    try:
        spec.build()
    except ValueError as exc:
        key = "device.kappa" if "kappa" in str(exc) else "device"
        raise ValidationError(str(exc), key) from None
    return spec


def _stages(value) -> tuple[StageSpec, ...]:
    if not isinstance(value, list):
        raise ValidationError("stage must be an array of tables ([[stage]])", "stage")
    out = []
    for i, table in enumerate(value):
        s = _Section(table, f"stage[{i}]")
        out.append(
            StageSpec(
                theta=s.take("theta", 0.0, parse_angle),
                polarity=s.take("polarity", "standard", _POLARITY),
                selection=s.take("selection", "measure_both", _choice(*(x.value for x in Selection))),
                w=s.take("w", None, _number),
                k=s.take("k", None, _number),
                kappa=s.take("kappa", None, _number),
            )
        )
        s.finish()
    return tuple(out)


def _trajectories(table) -> TrajectorySpec:
    s = _Section(table, "trajectories")
    spec = TrajectorySpec(
        count=s.take("count", 9, _positive_int),
        z0=s.take("z0", None, _heights),
        method=s.take("method", "analytic", _choice("analytic", "numeric")),
        dt=s.take("dt", 1e-4, _number),
        velocity=s.take("velocity", "closed_form", _choice("closed_form", "finite_difference")),
    )
    s.finish()
    if spec.dt <= 0:
        raise ValidationError("trajectories.dt: must be > 0", "trajectories.dt")
    return spec


def _scenario(table) -> ScenarioSpec:
    s = _Section(table, "scenario")
    spec = ScenarioSpec(
        state=s.take("state", ScenarioSpec().state, _state),
        order=s.take("order", "particle1_first", _choice(*(o.value for o in Order))),
        alice_present=s.take("alice_present", True, _bool),
        theta1=s.take("theta1", 0.0, parse_angle),
        theta2=s.take("theta2", 0.0, parse_angle),
        polarity1=s.take("polarity1", "standard", _POLARITY),
        polarity2=s.take("polarity2", "standard", _POLARITY),
        z0_1=s.take("z0_1", None, _number),
        z0_2=s.take("z0_2", None, _number),
    )
    s.finish()
    return spec


def _sweep(table) -> SweepSpec:
    s = _Section(table, "sweep")
    t1 = s.take("theta1", None, _angles)
    t2 = s.take("theta2", None, _angles)
    s.finish()
    if t1 is None or t2 is None:
        raise ValidationError("sweep needs both theta1 and theta2", "sweep")
    return SweepSpec(t1, t2)


_REQUIRED = {
    "single": ("input",),
    "chain": ("input", "stage"),
    "trajectories": ("input",),
    "entangled": (),
    "sweep": ("sweep",),
}
_ALLOWED = {
    "single": {"device", "input"},
    "chain": {"device", "input", "stage"},
    "trajectories": {"device", "input", "trajectories"},
    "entangled": {"device", "scenario"},
    "sweep": {"device", "scenario", "sweep"},
}


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        raise ParseError(msg, line, col) from None

    top = _Section(doc, "")
    kind = top.take("kind", None, _choice(*KINDS))
    if kind is None:
        raise ValidationError("missing required key 'kind'", "kind")
    for section in _REQUIRED[kind]:
        if section not in top.table:
            raise ValidationError(f"kind {kind!r} requires [{section}]", section)
    for section in ("device", "input", "stage", "trajectories", "scenario", "sweep"):
        if section in top.table and section not in _ALLOWED[kind]:
            raise ValidationError(f"[{section}] is not used by kind {kind!r}", section)

    n = top.take("n", 100_000, _positive_int)
    seed = top.take("seed", 42, _seed)
    out = top.take("out", "out", _string)
    plot = top.take("plot", False, _bool)
    per_particle = top.take("per_particle", False, _bool)
    transverse_mode = top.take("transverse_mode", "resample", _choice(*(m.value for m in TransverseMode)))
    device = _device(top.table.pop("device", {}))
    input_spinor = None
    if "input" in top.table:
        sec = _Section(top.table.pop("input"), "input")
        input_spinor = sec.take("spinor", None, _spinor)
        sec.finish()
        if input_spinor is None:
            raise ValidationError("input needs a spinor", "input.spinor")
    stages = _stages(top.table.pop("stage")) if "stage" in top.table else ()
    trajectories = _trajectories(top.table.pop("trajectories")) if "trajectories" in top.table else None
    if kind == "trajectories" and trajectories is None:
        trajectories = TrajectorySpec()
    scenario = _scenario(top.table.pop("scenario")) if "scenario" in top.table else None
    if kind in ("entangled", "sweep") and scenario is None:
        scenario = ScenarioSpec()
    sweep = _sweep(top.table.pop("sweep")) if "sweep" in top.table else None
    top.finish()

    cfg = ExperimentConfig(
        kind, n, seed, out, plot, per_particle, transverse_mode,
        device, input_spinor, stages, trajectories, scenario, sweep,
    )
    _check(cfg)
    return cfg


def _check(cfg: ExperimentConfig):
    """Cross-field checks that need the assembled config."""
    for i, stage in enumerate(cfg.stages):
        try:
            stage.geometry(cfg.device).build(stage.theta, stage.polarity)
        except ValueError as exc:
            field_name = next((k for k in ("kappa", "w") if str(exc).startswith(k)), "")
            key = f"stage[{i}].{field_name}" if field_name else f"stage[{i}]"
            raise ValidationError(f"{key}: {exc}", key) from None
    if cfg.kind in ("single", "chain", "trajectories"):
        try:
            cfg.chain()
        except (ValueError, ConfigError) as exc:
            raise ValidationError(str(exc), "stage") from None
    if cfg.scenario is not None:
        try:
            cfg.scenario.two_particle_state()
        except ValueError as exc:
            raise ValidationError(str(exc), "scenario.state") from None
        half = 0.5 * cfg.device.w
        for key in ("z0_1", "z0_2"):
            z = getattr(cfg.scenario, key)
            if z is not None and abs(z) > half:
                raise ValidationError(f"scenario.{key} lies outside the packet", f"scenario.{key}")
    if cfg.trajectories is not None and cfg.trajectories.z0 is not None:
        if any(abs(z) > 0.5 * cfg.device.w for z in cfg.trajectories.z0):
            raise ValidationError("trajectories.z0 lies outside the packet", "trajectories.z0")


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ------------------------------------------------------------ serializing


def _drop_none(table: dict) -> dict:
    return {k: v for k, v in table.items() if v is not None}


def serialize_config(cfg: ExperimentConfig) -> str:
    doc: dict = {
        "kind": cfg.kind,
        "n": cfg.n,
        "seed": cfg.seed,
        "out": cfg.out,
        "plot": cfg.plot,
        "per_particle": cfg.per_particle,
        "transverse_mode": cfg.transverse_mode,
    }
    d = cfg.device
    doc["device"] = _drop_none(
        {"w": d.w, "k": d.k, "kappa": d.kappa, "theta": d.theta, "polarity": d.polarity,
         "packet_length": d.packet_length}
    )
    if cfg.input is not None:
        doc["input"] = {"spinor": cfg.input.to_reals()}
    if cfg.stages:
        doc["stage"] = [
            _drop_none({"theta": s.theta, "polarity": s.polarity, "selection": s.selection,
                        "w": s.w, "k": s.k, "kappa": s.kappa})
            for s in cfg.stages
        ]
    if cfg.trajectories is not None:
        t = cfg.trajectories
        doc["trajectories"] = _drop_none(
            {"count": t.count, "z0": list(t.z0) if t.z0 is not None else None, "method": t.method,
             "dt": t.dt, "velocity": t.velocity}
        )
    if cfg.scenario is not None:
        sc = cfg.scenario
        state = [[a.real, a.imag] for a in sc.state]
        if sc.state == ScenarioSpec().state:
            state = "singlet"
        doc["scenario"] = _drop_none(
            {"state": state, "order": sc.order, "alice_present": sc.alice_present, "theta1": sc.theta1,
             "theta2": sc.theta2, "polarity1": sc.polarity1, "polarity2": sc.polarity2,
             "z0_1": sc.z0_1, "z0_2": sc.z0_2}
        )
    if cfg.sweep is not None:
        doc["sweep"] = {"theta1": list(cfg.sweep.theta1), "theta2": list(cfg.sweep.theta2)}
    return tomli_w.dumps(doc)
