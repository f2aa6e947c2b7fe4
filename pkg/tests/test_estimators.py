import warnings

import numpy as np
import pytest

from rangeloc.errors import ConfigurationError
from rangeloc.estimators import (
    Estimate,
    Method,
    VarianceEstimates,
    _split,
    aw_bias_eli_lin,
    bias_eli,
    bias_eli_lin,
    estimate_variances,
    first_step,
    floored_variances,
    lin_batch,
    noise_est,
    noise_est_lin,
    sls,
    w_bias_eli_lin,
)
from rangeloc.gtrs import GtrsInstance
from rangeloc.model import (
    MeasurementSet,
    build_design,
    reference_heterogeneous_scenario,
    reference_scenario,
    simulate,
    simulate_batch,
)

X0 = np.array([6.0, 6.0, 6.0])


def exact(scenario):
    r = scenario.true_ranges()
    return MeasurementSet.from_grouped(np.repeat(r[:, None], scenario.repeats, axis=1))


@pytest.mark.filterwarnings("ignore:estimated variances floored")
def test_noiseless_exact_recovery():
    sc = reference_scenario(0.0, repeats=2)
    meas = exact(sc)
    for name in ("BiasEli", "BiasEliLin", "NoiseEst", "NoiseEstLin", "S-LS", "AWBiasEliLin"):
        np.testing.assert_allclose(first_step(name, sc, meas).x_hat, X0, atol=1e-9, err_msg=name)
    lifted = bias_eli_lin(build_design(sc, meas, "bias_eli", 0.0)).lifted
    np.testing.assert_allclose(lifted, [6, 6, 6, 108], atol=1e-9)


def test_noiseless_variance_estimates_zero():
    sc = reference_scenario(0.0)
    meas = exact(sc)
    assert abs(noise_est_lin(build_design(sc, meas, "noise_est")).sigma2_hat) < 1e-9
    est = noise_est(build_design(sc, meas, "noise_est"))
    assert abs(est.sigma2_hat) < 1e-9


def test_weighted_noiseless_recovery():
    sc = reference_heterogeneous_scenario()
    design = build_design(sc, exact(sc), "weighted", 0.0, weights=1.0 / sc.variances)
    np.testing.assert_allclose(w_bias_eli_lin(design).x_hat, X0, atol=1e-9)


def test_split_arithmetic():
    x, s2 = _split(np.array([1.0, 2.0, 3.0, 15.0]), 3)
    np.testing.assert_array_equal(x, [1, 2, 3])
    assert s2 == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_bel_nel_identities(seed):
    sc = reference_scenario(1.0, repeats=1 + seed % 4)
    meas = simulate(sc, seed)
    bel = bias_eli_lin(build_design(sc, meas, "bias_eli", 1.0))
    nel = noise_est_lin(build_design(sc, meas, "noise_est"))
    np.testing.assert_allclose(bel.x_hat, nel.x_hat, rtol=0, atol=1e-12)
    np.testing.assert_allclose(bel.lifted, nel.lifted - [0, 0, 0, 1.0], rtol=0, atol=1e-12)


def test_noise_est_phase_one_matches_lin():
    sc = reference_scenario(1.0)
    for seed in range(40):
        design = build_design(sc, simulate(sc, seed), "noise_est")
        ne, nel = noise_est(design), noise_est_lin(design)
        if ne.diagnostics["phase"] == 1:
            np.testing.assert_array_equal(ne.x_hat, nel.x_hat)
            assert ne.sigma2_hat == nel.sigma2_hat
            break
    else:
        pytest.fail("no phase-one instance found")


def test_noise_est_phase_two_is_feasible_and_worse():
    sc = reference_scenario(1.0)
    phase2 = 0
    for seed in range(60):
        design = build_design(sc, simulate(sc, seed), "noise_est")
        ne, nel = noise_est(design), noise_est_lin(design)
        inst = GtrsInstance.from_design(design, "b_bar")
        assert inst.objective(ne.lifted) >= inst.objective(nel.lifted) - 1e-9
        if ne.diagnostics["phase"] == 2:
            phase2 += 1
            assert nel.sigma2_hat < 0
            assert ne.sigma2_hat == 0.0
            assert abs(ne.diagnostics["constraint_residual"]) < 1e-8 * (1 + ne.lifted @ ne.lifted)
            assert ne.diagnostics["lambda_star"] > 0
    assert phase2 > 0


def test_noise_est_variance_consistent():
    sc = reference_scenario(1.0, repeats=10_000)
    s2 = [noise_est(build_design(sc, simulate(sc, s), "noise_est")).sigma2_hat for s in range(20)]
    assert abs(np.mean(s2) - 1.0) < 0.05


def test_bias_eli_bias_small_large_T():
    sc = reference_scenario(1.0, repeats=10_000)
    xs = np.array([bias_eli(build_design(sc, simulate(sc, s), "bias_eli", 1.0)).x_hat for s in range(30)])
    assert np.all(np.abs(xs.mean(axis=0) - X0) < 0.01)


def test_sls_uses_uncorrected_rhs():
    sc = reference_scenario(1.0)
    meas = simulate(sc, 1)
    a = sls(build_design(sc, meas, "noise_est"))
    b = bias_eli(build_design(sc, meas, "bias_eli", 0.0))
    np.testing.assert_allclose(a.x_hat, b.x_hat, rtol=1e-12)
    assert a.method == Method.SLS


def test_estimate_variances_examples():
    v = estimate_variances(MeasurementSet.from_grouped([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]]))
    np.testing.assert_allclose(v.variances, [1.0, 0.0])
    assert v.repeats == 3
    ones = estimate_variances(MeasurementSet.from_grouped([[1.0], [7.0]]))
    np.testing.assert_array_equal(ones.variances, [1.0, 1.0])


def test_estimate_variances_concentrate():
    sc = reference_heterogeneous_scenario(repeats=10_000)
    v = estimate_variances(simulate(sc, 8)).variances
    np.testing.assert_allclose(v, sc.variances, rtol=0.05)


def test_floored_variances_warns():
    with pytest.warns(RuntimeWarning):
        v = floored_variances(VarianceEstimates(np.array([0.0, 2.0]), 2))
    assert v[0] == pytest.approx(2e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        floored_variances(VarianceEstimates(np.array([1.0, 2.0]), 2))


def test_uniform_weights_reduce_to_bias_eli_lin():
    sc = reference_scenario(0.7, repeats=3)
    meas = simulate(sc, 5)
    w = w_bias_eli_lin(build_design(sc, meas, "weighted", 0.7, weights=1.0))
    b = bias_eli_lin(build_design(sc, meas, "bias_eli", 0.7))
    np.testing.assert_allclose(w.x_hat, b.x_hat, rtol=1e-12)


def test_aw_with_true_variances_is_w():
    sc = reference_heterogeneous_scenario(repeats=5)
    meas = simulate(sc, 5)
    aw = aw_bias_eli_lin(sc, meas, VarianceEstimates(sc.variances, 5))
    w = w_bias_eli_lin(build_design(sc, meas, "weighted", sc.variances))
    np.testing.assert_allclose(aw.x_hat, w.x_hat, rtol=1e-13)
    assert aw.method == Method.AW_BIAS_ELI_LIN


def test_aw_single_repeat_uses_unit_variances():
    sc = reference_heterogeneous_scenario(repeats=1)
    meas = simulate(sc, 2)
    aw = aw_bias_eli_lin(sc, meas)
    np.testing.assert_array_equal(aw.diagnostics["variances"], np.ones(10))
    w = w_bias_eli_lin(build_design(sc, meas, "weighted", 1.0))
    np.testing.assert_allclose(aw.x_hat, w.x_hat, rtol=1e-13)


def test_w_bias_eli_lin_needs_weighted_design():
    sc = reference_scenario(1.0)
    with pytest.raises(ConfigurationError):
        w_bias_eli_lin(build_design(sc, simulate(sc, 0), "bias_eli", 1.0))


def test_first_step_dispatch_errors():
    sc = reference_heterogeneous_scenario()
    meas = simulate(sc, 0)
    with pytest.raises(ConfigurationError):
        first_step("BiasEli", sc, meas)
    with pytest.raises(ConfigurationError):
        first_step("LS-GN", sc, meas)
    with pytest.raises(ValueError):
        first_step("Nope", sc, meas)


def test_lin_batch_matches_lstsq():
    sc = reference_scenario(1.0, repeats=2)
    batch = simulate_batch(sc, 3, 5)
    design = build_design(sc, simulate(sc, 3), "noise_est")
    a2 = np.sum(sc.sensors[sc.sensor_index] ** 2, axis=1)
    Y = lin_batch(design.A, batch**2 - a2)
    np.testing.assert_allclose(Y[0], noise_est_lin(design).lifted, rtol=1e-12)


def test_estimate_to_dict_is_json_ready():
    import json

    sc = reference_scenario(1.0)
    est = first_step("BiasEli", sc, simulate(sc, 0))
    d = est.to_dict()
    json.dumps(d)
    assert d["method"] == "BiasEli"
    assert d["diagnostics"]["path"] == "regular"
    assert isinstance(Estimate(np.zeros(2), Method.SLS).to_dict()["x_hat"], list)


def test_too_few_sensors_is_rank_deficient():
    from rangeloc.errors import RankDeficiencyError
    from rangeloc.model import NoiseModel, Scenario

    sc = Scenario([[5.0, 0.0, 5.0], [0.0, 1.0, 0.0]], X0, NoiseModel.homogeneous(0.0))
    meas = exact(sc)
    for name in ("BiasEli", "BiasEliLin", "NoiseEst", "NoiseEstLin"):
        with pytest.raises(RankDeficiencyError):
            first_step(name, sc, meas)
