import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangeloc.errors import ConfigurationError, InvalidScenarioError
from rangeloc.model import (
    REFERENCE_SENSORS,
    MeasurementSet,
    NoiseModel,
    Scenario,
    build_design,
    lift_matrices,
    load_scenario,
    reference_heterogeneous_scenario,
    reference_scenario,
    save_scenario,
    simulate,
    simulate_batch,
    true_lift,
)


def single_sensor(sigma2=0.0, repeats=1):
    sensors = np.array([[5.0, 0.0, 5.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return Scenario(sensors, [6.0, 6.0, 6.0], NoiseModel.homogeneous(sigma2), repeats)


def test_noiseless_distance_formula():
    meas = simulate(single_sensor(0.0), 1)
    assert meas.values[0] == pytest.approx(6.164414, abs=1e-6)
    assert meas.values[0] == np.sqrt(38.0)


def test_noiseless_reference_distances_exact():
    sc = reference_scenario(0.0)
    meas = simulate(sc, 123)
    expected = np.linalg.norm(REFERENCE_SENSORS - sc.target, axis=1)
    np.testing.assert_array_equal(meas.values, expected)


def test_sample_means_converge():
    sc = reference_scenario(1.0, repeats=10_000)
    d = simulate(sc, 5).grouped
    dev = d.mean(axis=1) - sc.true_ranges()
    assert np.all(np.abs(dev) < 3.0 / np.sqrt(10_000))


def test_simulation_determinism():
    sc = reference_scenario(1.0, repeats=3)
    a, b, c = simulate(sc, 11), simulate(sc, 11), simulate(sc, 12)
    np.testing.assert_array_equal(a.values, b.values)
    assert np.any(a.values != c.values)


def test_batch_row_zero_matches_single_draw():
    sc = reference_scenario(0.5, repeats=4)
    batch = simulate_batch(sc, 99, 6)
    assert batch.shape == (6, sc.m)
    np.testing.assert_array_equal(batch[0], simulate(sc, 99).values)


def test_design_row_and_rhs():
    sc = single_sensor(1.0)
    meas = MeasurementSet.from_grouped(np.sqrt([[38.0], [1.0], [1.0], [1.0]]))
    design = build_design(sc, meas, "bias_eli", 1.0)
    np.testing.assert_array_equal(design.A[0], [-10.0, 0.0, -10.0, 1.0])
    assert design.b[0] == pytest.approx(-13.0, abs=1e-12)


def test_lift_matrices():
    D, g = lift_matrices(3)
    np.testing.assert_array_equal(D, np.diag([1.0, 1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(g, [0.0, 0.0, 0.0, -0.5])


def test_true_lift_examples():
    sc = reference_scenario(1.0)
    np.testing.assert_array_equal(true_lift(sc), [6, 6, 6, 108])
    np.testing.assert_array_equal(true_lift(sc, "noise_est"), [6, 6, 6, 109])
    zero = Scenario(REFERENCE_SENSORS, np.zeros(3), NoiseModel.homogeneous(1.0))
    np.testing.assert_array_equal(true_lift(zero), np.zeros(4))


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.integers(1, 3),
)
def test_noiseless_lift_solves_linear_model(target, repeats):
    target = np.array(target)
    sc = Scenario(REFERENCE_SENSORS, target, NoiseModel.homogeneous(0.0), repeats)
    meas = simulate(sc, 0)
    design = build_design(sc, meas, "bias_eli", 0.0)
    y = true_lift(sc)
    scale = 1.0 + np.abs(design.b_bar).max()
    np.testing.assert_allclose(design.A @ y, design.b, atol=1e-12 * scale)
    np.testing.assert_allclose(design.A @ y, design.b_bar, atol=1e-12 * scale)


def test_design_full_column_rank():
    sc = reference_scenario(1.0)
    design = build_design(sc, simulate(sc, 0), "noise_est")
    assert np.linalg.svd(design.A, compute_uv=False)[-1] > 0.1


def test_weighted_design_defaults_and_override():
    sc = reference_heterogeneous_scenario()
    meas = simulate(sc, 0)
    design = build_design(sc, meas, "weighted", sc.variances)
    np.testing.assert_allclose(design.weights, 1.0 / sc.variances)
    np.testing.assert_allclose(design.b_sigma, design.b_bar - sc.variances)
    with pytest.raises(ConfigurationError):
        build_design(sc, meas, "weighted", 0.0)
    d0 = build_design(sc, meas, "weighted", 0.0, weights=2.0)
    np.testing.assert_array_equal(d0.b_sigma, d0.b_bar)
    np.testing.assert_array_equal(d0.weights, np.full(10, 2.0))


def test_design_mode_errors():
    sc = reference_scenario(1.0)
    meas = simulate(sc, 0)
    with pytest.raises(ConfigurationError):
        build_design(sc, meas, "bias_eli")
    with pytest.raises(ConfigurationError):
        build_design(sc, meas, "noise_est", 1.0)
    with pytest.raises(ConfigurationError):
        build_design(sc, meas, "bias_eli", [1.0, 2.0])
    with pytest.raises(ConfigurationError):
        build_design(sc, meas, "nonsense", 1.0)
    with pytest.raises(ConfigurationError):
        build_design(single_sensor(), meas, "noise_est")


def test_scenario_validation():
    with pytest.raises(InvalidScenarioError):
        Scenario(REFERENCE_SENSORS, [1.0, 2.0], NoiseModel.homogeneous(1.0))
    with pytest.raises(ConfigurationError):
        NoiseModel.homogeneous(-1.0)
    with pytest.raises(ConfigurationError):
        Scenario(REFERENCE_SENSORS, [1.0, 2.0, 3.0], NoiseModel.homogeneous(1.0), repeats=0)
    with pytest.raises(ConfigurationError):
        simulate("not a scenario", 1)


def test_heterogeneous_variances():
    sc = reference_heterogeneous_scenario(repeats=2)
    np.testing.assert_allclose(sc.variances, [0.01, 0.04, 0.09, 0.16, 0.25, 0.36, 0.49, 0.64, 0.81, 1.0])
    assert sc.m == 20
    np.testing.assert_array_equal(sc.sensor_index[:4], [0, 0, 1, 1])


def test_scenario_json_roundtrip(tmp_path):
    sc = reference_heterogeneous_scenario(repeats=3)
    path = tmp_path / "sc.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    np.testing.assert_array_equal(back.sensors, sc.sensors)
    np.testing.assert_array_equal(back.variances, sc.variances)
    assert back.repeats == 3
    path.write_text("{not json")
    with pytest.raises(InvalidScenarioError):
        load_scenario(path)
    path.write_text(json.dumps({"sensors": [[0, 0]]}))
    with pytest.raises(ConfigurationError):
        load_scenario(path)


def test_measurement_csv_roundtrip(tmp_path):
    sc = reference_scenario(1.0, repeats=3)
    meas = simulate(sc, 4)
    path = tmp_path / "m.csv"
    meas.to_csv(path)
    back = MeasurementSet.from_csv(path, sc.n_sensors)
    np.testing.assert_array_equal(back.values, meas.values)
    np.testing.assert_array_equal(back.grouped, meas.grouped)


def test_negative_distances_pass_through():
    sc = Scenario(REFERENCE_SENSORS, [6.0, 6.0, 6.0], NoiseModel.homogeneous(1e4))
    meas = simulate(sc, 3)
    assert np.any(meas.values < 0)
    design = build_design(sc, meas, "noise_est")
    assert np.all(np.isfinite(design.b_bar))
