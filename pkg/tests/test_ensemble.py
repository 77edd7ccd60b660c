import math

import numpy as np
import pytest

from pilotwave_sg.apparatus import ExperimentChain, OutcomeLabel, Selection, Stage, TransverseMode
from pilotwave_sg.ensemble import (
    RunStats,
    compare_to_born,
    predicted_outcomes,
    run_ensemble,
    sample_initial,
    simulate_chain,
)
from pilotwave_sg.spinor import MeasurementAxis, Spinor, X_AXIS, Z_AXIS, born_probabilities, named_spinor
from pilotwave_sg.trajectory import critical_geometry, default_span, propagate_analytic
from pilotwave_sg.wavefield import DeviceConfig, Polarity, Region, WaveField, classify_region

SEED = 20240611
SG_Z, SG_X = DeviceConfig(Z_AXIS), DeviceConfig(X_AXIS)


def three_sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


def fig4_chain():
    return ExperimentChain(
        (Stage(SG_Z, Selection.KEEP_UPPER), Stage(SG_X, Selection.KEEP_UPPER), Stage(SG_Z)),
        named_spinor("+z"),
    )


class TestSampling:
    def test_deterministic(self):
        assert np.array_equal(sample_initial(4, 1.0, SEED), sample_initial(4, 1.0, SEED))

    def test_streams_differ(self):
        assert not np.array_equal(sample_initial(4, 1.0, SEED, 0), sample_initial(4, 1.0, SEED, 1))

    def test_moments(self):
        n, w = 10**6, 1.0
        z = sample_initial(n, w, SEED)
        assert np.all(np.abs(z) <= w / 2)
        assert abs(z.mean()) <= 4 * w / math.sqrt(12 * n)
        assert abs(np.mean(z > 0) - 0.5) <= 4 * 0.5 / math.sqrt(n)

    @pytest.mark.parametrize("n, w", [(0, 1.0), (10, 0.0)])
    def test_bad_arguments(self, n, w):
        with pytest.raises(ValueError):
            sample_initial(n, w, SEED)


class TestRunEnsemble:
    def test_single_device_born(self, fig2_spinor):
        n = 10**5
        stats = run_ensemble(ExperimentChain((Stage(SG_Z),), fig2_spinor), n, SEED)
        up = stats.counts[(OutcomeLabel(Z_AXIS, 1),)]
        assert abs(up / n - 2 / 3) <= three_sigma(2 / 3, n)

    def test_eigenstate_exact(self):
        stats = run_ensemble(ExperimentChain((Stage(SG_Z),), named_spinor("+z")), 10**4, SEED)
        assert stats.counts == {(OutcomeLabel(Z_AXIS, 1),): 10**4}

    @pytest.mark.parametrize("mode", list(TransverseMode))
    def test_fig4(self, mode):
        n = 10**5
        stats = run_ensemble(fig4_chain(), n, SEED, mode)
        survivors = n - stats.n_discarded
        assert abs(survivors / n - 0.5) <= three_sigma(0.5, n)
        final_up = sum(c for k, c in stats.counts.items() if k[-1].sign == 1)
        assert abs(final_up / survivors - 0.5) <= three_sigma(0.5, survivors)

    def test_seed_determinism(self, fig2_spinor):
        chain = ExperimentChain((Stage(SG_Z, Selection.KEEP_LOWER), Stage(DeviceConfig(MeasurementAxis(1.0)))), fig2_spinor)
        a, b = run_ensemble(chain, 5000, SEED), run_ensemble(chain, 5000, SEED)
        assert a == b
        assert a.particles.signs.tobytes() == b.particles.signs.tobytes()
        assert a.particles.z0.tobytes() == b.particles.z0.tobytes()

    def test_adding_a_stage_keeps_earlier_draws(self, fig2_spinor):
        one = ExperimentChain((Stage(SG_Z),), fig2_spinor)
        two = ExperimentChain((Stage(SG_Z, Selection.KEEP_UPPER), Stage(SG_X)), fig2_spinor)
        a, b = simulate_chain(one, 2000, SEED), simulate_chain(two, 2000, SEED)
        assert np.array_equal(a.signs[:, 0], b.signs[:, 0])

    def test_counts_add_up(self):
        with pytest.raises(ValueError):
            RunStats({(): 3}, 5, 1, SEED)

    def test_repeated_same_axis_carry_mode(self):
        chain = ExperimentChain((Stage(SG_Z, Selection.KEEP_UPPER), Stage(SG_Z)), named_spinor("+x"))
        stats = run_ensemble(chain, 20000, SEED, TransverseMode.CARRY)
        assert all(k[1].sign == 1 for k in stats.counts)

    def test_reversed_polarity_statistics(self, fig2_spinor):
        n = 10**5
        stats = run_ensemble(ExperimentChain((Stage(DeviceConfig(Z_AXIS, Polarity.REVERSED)),), fig2_spinor), n, SEED)
        up = stats.counts[(OutcomeLabel(Z_AXIS, 1),)]
        assert abs(up / n - 2 / 3) <= three_sigma(2 / 3, n)


class TestBornReport:
    def test_passes_for_correct_prediction(self, fig2_spinor):
        chain = ExperimentChain((Stage(SG_Z),), fig2_spinor)
        assert compare_to_born(run_ensemble(chain, 10**5, SEED), chain).passed

    def test_fails_for_wrong_prediction(self, fig2_spinor):
        chain = ExperimentChain((Stage(SG_Z),), fig2_spinor)
        wrong = {(OutcomeLabel(Z_AXIS, 1),): 0.5, (OutcomeLabel(Z_AXIS, -1),): 0.5}
        report = compare_to_born(run_ensemble(chain, 10**5, SEED), chain, wrong)
        assert not report.passed
        assert max(abs(r.z) for r in report.rows) > 100

    def test_empty_run(self, fig2_spinor):
        chain = ExperimentChain((Stage(SG_Z),), fig2_spinor)
        report = compare_to_born(RunStats({}, 0, 0, SEED), chain)
        assert report.rows == () and report.passed

    def test_predictions_sum_to_one_among_survivors(self):
        report = compare_to_born(run_ensemble(fig4_chain(), 1000, SEED), fig4_chain())
        assert sum(r.predicted for r in report.rows) == pytest.approx(1.0, abs=1e-12)
        assert report.survival.predicted == pytest.approx(0.5, abs=1e-12)

    def test_prediction_is_product_of_born_factors(self):
        theta = [0.0, 1.1, 2.5]
        chain = ExperimentChain(
            tuple(Stage(DeviceConfig(MeasurementAxis(t)), Selection.KEEP_UPPER) for t in theta[:-1])
            + (Stage(DeviceConfig(MeasurementAxis(theta[-1]))),),
            Spinor(0.6, 0.8),
        )
        pred = predicted_outcomes(chain)
        p0 = born_probabilities(Spinor(0.6, 0.8), MeasurementAxis(0.0))[0]
        p1 = math.cos((1.1 - 0.0) / 2) ** 2
        p2 = math.cos((2.5 - 1.1) / 2) ** 2
        up = tuple(OutcomeLabel(MeasurementAxis(t), 1) for t in theta)
        assert pred[up] == pytest.approx(p0 * p1 * p2, abs=1e-12)


@pytest.mark.parametrize("p_plus", [0.1, 0.5, 2 / 3, 0.9])
def test_equivariance_at_exit_plane(p_plus):
    n = 10**4
    d = DeviceConfig()
    f = WaveField(d, math.sqrt(p_plus), math.sqrt(1 - p_plus))
    span = default_span(f)
    ends = [propagate_analytic(z, f, *span).final for z in sample_initial(n, d.w, SEED)]
    regions = [classify_region(y, z, d) for y, z in ends]
    assert set(regions) <= {Region.UPPER_BRANCH, Region.LOWER_BRANCH}
    up = regions.count(Region.UPPER_BRANCH) / n
    assert abs(up - p_plus) <= three_sigma(p_plus, n)
    assert abs(up - critical_geometry(f).p_plus_geometric) <= three_sigma(p_plus, n)
