import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pilotwave_sg.apparatus import Selection
from pilotwave_sg.config import (
    DeviceSpec,
    ExperimentConfig,
    ScenarioSpec,
    StageSpec,
    SweepSpec,
    TrajectorySpec,
    load_config,
    parse_angle,
    parse_config,
    serialize_config,
)
from pilotwave_sg.errors import ParseError, ValidationError
from pilotwave_sg.spinor import Spinor

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))

FIG4 = """
kind = "chain"
[input]
spinor = "+z"
[[stage]]
selection = "keep_upper"
[[stage]]
theta = "pi/2"
selection = "keep_upper"
[[stage]]
"""


def test_minimal_single_gets_defaults():
    cfg = parse_config('kind = "single"\n[input]\nspinor = "+x"\n')
    assert (cfg.n, cfg.seed, cfg.out, cfg.plot) == (100_000, 42, "out", False)
    d = cfg.chain().stages[0].device
    assert (d.w, d.k, d.kappa, d.axis.theta, d.polarity.value) == (1.0, 100.0, 5.0, 0.0, "standard")


def test_fig4_chain():
    chain = parse_config(FIG4).chain()
    assert len(chain.stages) == 3
    assert [s.selection for s in chain.stages] == [Selection.KEEP_UPPER, Selection.KEEP_UPPER, Selection.MEASURE_BOTH]
    assert chain.stages[1].device.axis.theta == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("where", ["[device]\nkappa = 150.0", "[device]\nkappa = 100.0"])
def test_kappa_above_k(where):
    with pytest.raises(ValidationError, match="kappa must be < k") as err:
        parse_config(f'kind = "single"\n[input]\nspinor = "+z"\n{where}\n')
    assert err.value.key == "device.kappa"


def test_stage_kappa_above_k():
    with pytest.raises(ValidationError, match="kappa must be < k") as err:
        parse_config(FIG4 + "kappa = 500.0\n")
    assert err.value.key == "stage[2].kappa"


@pytest.mark.parametrize(
    "text, key",
    [
        ('kind = "single"\nspeed = 3\n[input]\nspinor = "+z"\n', "speed"),
        ('kind = "single"\n[input]\nspinor = "+z"\ncolour = 1\n', "input.colour"),
        ('kind = "single"\n[input]\nspinor = "+z"\n[device]\nwidth = 1.0\n', "device.width"),
        (FIG4 + "angle = 0.3\n", "stage[2].angle"),
        ('kind = "single"\n[input]\nspinor = "+z"\n[extra]\na = 1\n', "extra"),
    ],
)
def test_unknown_keys_are_named(text, key):
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.key == key


@pytest.mark.parametrize(
    "text, key",
    [
        ('kind = "single"\n', "input"),
        ('kind = "chain"\n[input]\nspinor = "+z"\n', "stage"),
        ('kind = "sweep"\n', "sweep"),
        ('kind = "entangled"\n[input]\nspinor = "+z"\n', "input"),
        ('kind = "ringing"\n', "kind"),
        ("n = 5\n", "kind"),
        ('kind = "single"\nn = 0\n[input]\nspinor = "+z"\n', "n"),
        ('kind = "single"\nn = 1.5\n[input]\nspinor = "+z"\n', "n"),
        ('kind = "single"\nplot = "yes"\n[input]\nspinor = "+z"\n', "plot"),
        ('kind = "single"\n[input]\nspinor = "+q"\n', "input.spinor"),
        ('kind = "single"\n[input]\nspinor = [0.0, 0.0, 0.0, 0.0]\n', "input.spinor"),
        ('kind = "single"\n[input]\nspinor = "+z"\n[device]\nw = inf\n', "device.w"),
        ('kind = "entangled"\n[scenario]\nz0_2 = 0.6\n', "scenario.z0_2"),
        ('kind = "entangled"\n[scenario]\norder = "both"\n', "scenario.order"),
        ('kind = "trajectories"\n[input]\nspinor = "+z"\n[trajectories]\ndt = -1.0\n', "trajectories.dt"),
        ('kind = "sweep"\n[sweep]\ntheta1 = [0.0]\n', "sweep"),
        ('kind = "sweep"\n[sweep]\ntheta1 = []\ntheta2 = [1.0]\n', "sweep.theta1"),
        ('kind = "chain"\n[input]\nspinor = "+z"\n[[stage]]\n[[stage]]\n', "stage"),
    ],
)
def test_validation_errors(text, key):
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.key == key


def test_parse_error_location():
    with pytest.raises(ParseError) as err:
        parse_config('kind = "single"\n[input]\nspinor = \n')
    assert err.value.line == 3 and err.value.column is not None
    assert "line 3" in str(err.value)


@pytest.mark.parametrize(
    "text, value",
    [("pi", math.pi), ("pi/4", math.pi / 4), ("-3*pi/4", -0.75 * math.pi), ("2pi", 2 * math.pi), (" 0.5 * pi ", 0.5 * math.pi), (1.25, 1.25), (2, 2.0)],
)
def test_angles(text, value):
    assert parse_angle(text) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("text", ["tau", "pi/", "pi/0x", "pi/0", True])
def test_bad_angles(text):
    with pytest.raises((TypeError, ValueError)):
        parse_angle(text)


def test_unnormalized_spinor_is_normalized():
    cfg = parse_config('kind = "single"\n[input]\nspinor = [3.0, 0.0, 4.0, 0.0]\n')
    assert cfg.input == Spinor(0.6, 0.8)


def test_normalized_spinor_is_kept_bitwise():
    reals = [0.816496580927726, 0.0, 0.5773502691896257, 0.0]
    cfg = parse_config(f'kind = "single"\n[input]\nspinor = {reals}\n')
    assert cfg.input.to_reals() == reals


def test_explicit_two_particle_state():
    text = 'kind = "entangled"\n[scenario]\nstate = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]\n'
    state = parse_config(text).scenario.two_particle_state()
    assert state.amplitudes[0, 0] == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs(path):
    cfg = load_config(path)
    assert parse_config(serialize_config(cfg)) == cfg


# ---- round trip over generated configs

finite = st.floats(-5.0, 5.0, allow_nan=False)
angle = st.floats(0.0, 6.0, allow_nan=False)
polarity = st.sampled_from(["standard", "reversed"])
heights = st.floats(-0.5, 0.5, allow_nan=False)


@st.composite
def devices(draw):
    k = draw(st.floats(1.0, 1e3))
    return DeviceSpec(
        w=draw(st.floats(0.1, 10.0)),
        k=k,
        kappa=draw(st.floats(1e-3, 0.99)) * k,
        theta=draw(angle),
        polarity=draw(polarity),
        packet_length=draw(st.none() | st.floats(0.1, 100.0)),
    )


@st.composite
def configs(draw):
    kind = draw(st.sampled_from(["single", "chain", "trajectories", "entangled", "sweep"]))
    device = draw(devices())
    fields = dict(
        kind=kind,
        n=draw(st.integers(1, 10**7)),
        seed=draw(st.integers(0, 2**63)),
        out=draw(st.text("abcxyz/_-0123", min_size=1, max_size=12)),
        plot=draw(st.booleans()),
        per_particle=draw(st.booleans()),
        transverse_mode=draw(st.sampled_from(["resample", "carry"])),
        device=device,
    )
    if kind in ("single", "chain", "trajectories"):
        reals = [draw(finite) for _ in range(4)]
        if sum(r * r for r in reals) < 1e-3:
            reals[0] = 1.0
        fields["input"] = Spinor.from_reals(reals).normalized()
    if kind == "chain":
        n_stages = draw(st.integers(1, 4))
        stages = []
        for i in range(n_stages):
            last = i == n_stages - 1
            selection = draw(st.sampled_from(["keep_upper", "keep_lower"] + (["measure_both"] if last else [])))
            stages.append(StageSpec(draw(angle), draw(polarity), selection, draw(st.none() | st.floats(0.1, 3.0))))
        fields["stages"] = tuple(stages)
    if kind == "trajectories":
        z0 = draw(st.none() | st.lists(heights.map(lambda z: z * device.w), min_size=1, max_size=5).map(tuple))
        fields["trajectories"] = TrajectorySpec(
            draw(st.integers(1, 50)), z0, draw(st.sampled_from(["analytic", "numeric"])),
            draw(st.floats(1e-6, 1.0)), draw(st.sampled_from(["closed_form", "finite_difference"])),
        )
    if kind in ("entangled", "sweep"):
        state = ScenarioSpec().state
        if draw(st.booleans()):
            parts = [complex(draw(finite), draw(finite)) for _ in range(4)]
            norm = math.sqrt(sum(abs(p) ** 2 for p in parts))
            if norm > 1e-3:
                state = tuple(p / norm for p in parts)
                if abs(sum(abs(p) ** 2 for p in state) - 1) > 1e-12:
                    state = ScenarioSpec().state
        fields["scenario"] = ScenarioSpec(
            state, draw(st.sampled_from(["particle1_first", "particle2_first"])), draw(st.booleans()),
            draw(angle), draw(angle), draw(polarity), draw(polarity),
            draw(st.none() | heights.map(lambda z: z * device.w)), draw(st.none() | heights.map(lambda z: z * device.w)),
        )
    if kind == "sweep":
        grid = st.lists(angle, min_size=1, max_size=4).map(tuple)
        fields["sweep"] = SweepSpec(draw(grid), draw(grid))
    return ExperimentConfig(**fields)


@given(configs())
def test_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg
