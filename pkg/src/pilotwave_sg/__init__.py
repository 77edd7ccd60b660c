"""Pilot-wave trajectories of spin-1/2 particles through Stern-Gerlach devices."""
from .apparatus import (
    ExperimentChain,
    OutcomeLabel,
    Selection,
    Stage,
    TransverseMode,
    pass_device,
    run_chain,
)
from .ensemble import compare_to_born, run_ensemble, sample_initial
from .entangled import (
    Order,
    ScenarioConfig,
    TwoParticleSpinState,
    correlation_sweep,
    run_scenario,
    singlet,
)
from .errors import (
    ConfigError,
    NotProduct,
    OutsidePacket,
    ParseError,
    PilotWaveError,
    ValidationError,
    ZeroAmplitude,
)
from .spinor import MeasurementAxis, Spinor, X_AXIS, Z_AXIS, eigenspinors, named_spinor
from .trajectory import Branch, critical_geometry, propagate_analytic, propagate_numeric
from .wavefield import DeviceConfig, Polarity, Region, WaveField, psi, velocity

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "compare_to_born",
    "ConfigError",
    "correlation_sweep",
    "critical_geometry",
    "DeviceConfig",
    "eigenspinors",
    "ExperimentChain",
    "MeasurementAxis",
    "named_spinor",
    "NotProduct",
    "Order",
    "OutcomeLabel",
    "OutsidePacket",
    "ParseError",
    "pass_device",
    "PilotWaveError",
    "Polarity",
    "propagate_analytic",
    "propagate_numeric",
    "psi",
    "Region",
    "run_chain",
    "run_ensemble",
    "run_scenario",
    "sample_initial",
    "ScenarioConfig",
    "Selection",
    "singlet",
    "Spinor",
    "Stage",
    "TransverseMode",
    "TwoParticleSpinState",
    "ValidationError",
    "velocity",
    "WaveField",
    "X_AXIS",
    "Z_AXIS",
    "ZeroAmplitude",
]
