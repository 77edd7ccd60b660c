"""``pilotwave-sg`` command line.

Exit codes: 0 on success, 2 when a Born-rule comparison fails (some
|z| > 4), 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .apparatus import OutcomeLabel, device_wavefield
from .config import ExperimentConfig, load_config
from .ensemble import FAIL_Z, binomial_row, compare_to_born, run_ensemble
from .entangled import (
    Order,
    ScenarioConfig,
    correlation_sweep,
    joint_probabilities,
    marginal_weights,
    quantum_correlation,
    run_scenario,
    sample_pair_heights,
    simulate_pairs,
)
from .errors import PilotWaveError
from .spinor import MeasurementAxis
from .svg import emit_svg
from .trajectory import critical_geometry, default_span, propagate_analytic, propagate_numeric

EXIT_OK, EXIT_ERROR, EXIT_BORN_FAIL = 0, 1, 2
# slack for sweep rows whose standard error vanishes (E = +-1 exactly)
SWEEP_ABS_TOL = 1e-9


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pilotwave-sg", description="Pilot-wave Stern-Gerlach simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run an experiment file")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--out")
    run.add_argument("--plot", action="store_true", default=None)
    run.add_argument("--alice", choices=("present", "absent"))
    sweep = sub.add_parser("sweep", help="run the correlation sweep of an experiment file")
    sweep.add_argument("config")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--n", type=int)
    sweep.add_argument("--out")
    validate = sub.add_parser("validate", help="check an experiment file and exit")
    validate.add_argument("config")
    return parser


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _outcome_rows(rows) -> list[dict]:
    return [
        {
            "labels": [str(x) if x is not None else None for x in row.labels],
            "count": row.count,
            "freq": row.frequency,
            "predicted": row.predicted,
            "z": _finite_or_none(row.z),
        }
        for row in rows
    ]


def write_trajectories_csv(path: Path, records):
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["traj_id", "t", "y", "z", "region", "branch"])
        for i, rec in enumerate(records):
            for (t, y, z), region in zip(rec.path, rec.regions):
                out.writerow([i, _fmt(t), _fmt(y), _fmt(z), region.name.lower(), rec.exit_branch.value])


def _run_chain(cfg: ExperimentConfig, out: Path) -> int:
    chain = cfg.chain()
    stats = run_ensemble(chain, cfg.n, cfg.seed, cfg.mode)
    report = compare_to_born(stats, chain)
    _write_json(
        out / "summary.json",
        {
            "seed": stats.seed,
            "n_total": stats.n_total,
            "n_discarded": stats.n_discarded,
            "outcomes": _outcome_rows(report.rows),
        },
    )
    if cfg.per_particle:
        p = stats.particles
        with (out / "particles.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["particle_id", "z0"] + [f"stage{j}" for j in range(p.signs.shape[1])] + ["discarded_at"])
            for i in range(p.signs.shape[0]):
                w.writerow([i, _fmt(p.z0[i]), *(int(s) for s in p.signs[i]), int(p.discarded_at[i])])
    if cfg.plot:
        stage = chain.stages[0]
        f = device_wavefield(chain.input_spinor, stage.device)
        span = default_span(f)
        records = [propagate_analytic(z, f, *span) for z in _sample_heights(stage.device.w)]
        _write_svg(out / "trajectories.svg", records, f, span)
    return EXIT_OK if report.passed else EXIT_BORN_FAIL


def _sample_heights(w: float, count: int = 9) -> np.ndarray:
    return -0.5 * w + (np.arange(count) + 0.5) * (w / count)


def _critical_record(f, span):
    if f.weight_plus == 0.0 or f.weight_minus == 0.0:
        return None
    return propagate_analytic(critical_geometry(f).z_critical, f, *span)


def _write_svg(path: Path, records, f, span):
    path.write_text(emit_svg(records, f.device, span, _critical_record(f, span)), encoding="utf-8")


def _run_trajectories(cfg: ExperimentConfig, out: Path) -> int:
    d = cfg.device.build()
    f = device_wavefield(cfg.input, d)
    span = default_span(f)
    spec = cfg.trajectories
    heights = spec.heights(d.w)
    if spec.method == "analytic":
        records = [propagate_analytic(z, f, *span) for z in heights]
    else:
        dt = spec.dt * d.w / d.k
        records = [propagate_numeric(z, f, dt, *span, method=spec.velocity) for z in heights]
    write_trajectories_csv(out / "trajectories.csv", records)
    if cfg.plot:
        _write_svg(out / "trajectories.svg", records, f, span)
    return EXIT_OK


def _scenario_devices(cfg: ExperimentConfig):
    sc = cfg.scenario
    d1 = cfg.device.build(sc.theta1, sc.polarity1) if sc.alice_present else None
    d2 = cfg.device.build(sc.theta2, sc.polarity2)
    return d1, d2


def _run_entangled(cfg: ExperimentConfig, out: Path) -> int:
    sc = cfg.scenario
    state = sc.two_particle_state()
    order = Order(sc.order)
    d1, d2 = _scenario_devices(cfg)
    z1, z2 = sample_pair_heights(cfg.n, d2.w if d1 is None else d1.w, d2.w, cfg.seed)
    s1, s2 = simulate_pairs(state, d1, d2, z1, z2, order)

    ax2 = d2.axis
    rows = []
    if d1 is None:
        weights = marginal_weights(state, 2, ax2)
        for idx, sign in enumerate((1, -1)):
            count = int(np.count_nonzero(s2 == sign))
            rows.append(binomial_row((None, OutcomeLabel(ax2, sign)), count, cfg.n, weights[idx]))
    else:
        probs = joint_probabilities(state, d1.axis, ax2)
        for i, a in enumerate((1, -1)):
            for j, b in enumerate((1, -1)):
                count = int(np.count_nonzero((s1 == a) & (s2 == b)))
                rows.append(
                    binomial_row((OutcomeLabel(d1.axis, a), OutcomeLabel(ax2, b)), count, cfg.n, float(probs[i, j]))
                )
    payload = {"seed": cfg.seed, "n_total": cfg.n, "n_discarded": 0, "outcomes": _outcome_rows(rows)}

    if sc.z0_2 is not None and (d1 is None or sc.z0_1 is not None):
        result = run_scenario(
            ScenarioConfig(state, d1, d2, order, sc.z0_1 if sc.z0_1 is not None else 0.0, sc.z0_2)
        )
        payload["scenario"] = {
            "alice_present": d1 is not None,
            "z0_1": sc.z0_1 if d1 is not None else None,
            "z0_2": sc.z0_2,
            "outcome1": str(result.outcome1) if result.outcome1 is not None else None,
            "outcome2": str(result.outcome2),
        }
        records = [result.records[k] for k in sorted(result.records)]
        write_trajectories_csv(out / "trajectories.csv", records)
        if cfg.plot:
            span = (records[0].path[0, 1], records[0].path[-1, 1])
            (out / "trajectories.svg").write_text(emit_svg(records, d2, span), encoding="utf-8")
    _write_json(out / "summary.json", payload)
    return EXIT_OK if all(abs(r.z) <= FAIL_Z for r in rows) else EXIT_BORN_FAIL


def _run_sweep(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.sweep is None:
        raise PilotWaveError(f"kind {cfg.kind!r} has no [sweep] section")
    sc = cfg.scenario
    state = sc.two_particle_state()
    rows = correlation_sweep(
        cfg.sweep.theta1, cfg.sweep.theta2, cfg.n, cfg.seed,
        template=cfg.device.build(), state=state, order=Order(sc.order),
    )
    ok = True
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta1", "theta2", "n", "E", "stderr"])
        for row in rows:
            w.writerow([_fmt(row.theta1), _fmt(row.theta2), row.n, _fmt(row.E), _fmt(row.stderr)])
            expected = quantum_correlation(state, MeasurementAxis(row.theta1), MeasurementAxis(row.theta2))
            if abs(row.E - expected) > FAIL_Z * row.stderr + SWEEP_ABS_TOL:
                ok = False
    return EXIT_OK if ok else EXIT_BORN_FAIL


_RUNNERS = {
    "single": _run_chain,
    "chain": _run_chain,
    "trajectories": _run_trajectories,
    "entangled": _run_entangled,
    "sweep": _run_sweep,
}


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise _UsageError("--seed must be >= 0")
        changes["seed"] = args.seed
    if getattr(args, "n", None) is not None:
        if args.n <= 0:
            raise _UsageError("--n must be > 0")
        changes["n"] = args.n
    if getattr(args, "out", None) is not None:
        changes["out"] = args.out
    if getattr(args, "plot", None):
        changes["plot"] = True
    alice = getattr(args, "alice", None)
    if alice is not None:
        if cfg.scenario is None:
            raise _UsageError("--alice applies only to entangled experiments")
        changes["scenario"] = dataclasses.replace(cfg.scenario, alice_present=alice == "present")
    return dataclasses.replace(cfg, **changes)


def execute(cfg: ExperimentConfig, command: str = "run") -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if command == "sweep":
        return _run_sweep(cfg, out)
    return _RUNNERS[cfg.kind](cfg, out)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.command == "validate":
            for issue in cfg.device.build().validity_issues():
                print(f"note: {issue}")
            print(f"ok: {args.config} ({cfg.kind})")
            return EXIT_OK
        return execute(apply_overrides(cfg, args), args.command)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (PilotWaveError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
