"""End-to-end smoke tests for the Python bindings.

The heavy numerical validation lives in the C++ suites; these tests confirm
that the module imports, that data flows through numpy in both directions,
and that each major operation is usable from Python.
"""

import math

import numpy as np
import pytest

import cooccur


def two_species_params():
    return cooccur.make_params(np.array([0.25, 0.30, 0.15, 0.30]), np.array([0.55, 0.40]))


def simulated_history(sites=200, occasions=8, seed=7):
    spec = cooccur.SimSpec()
    spec.params = two_species_params()
    spec.n_sites = sites
    spec.n_occasions = occasions
    spec.seed = seed
    return cooccur.simulate_history(spec)


def test_module_surface():
    assert cooccur.DEFAULT_SEED == 1729
    assert cooccur.MAX_SPECIES == 20
    assert cooccur.__version__


def test_theta_round_trip():
    theta = np.linspace(-1.0, 1.0, cooccur.theta_dim(2))
    params = cooccur.theta_to_params(theta, 2)
    assert params.psi.shape == (4,)
    assert params.psi.sum() == pytest.approx(1.0, abs=1e-12)
    back = cooccur.params_to_theta(params)
    np.testing.assert_allclose(back, theta, atol=1e-10)


def test_state_labels():
    assert cooccur.state_label(1, 2) == "10"
    assert cooccur.state_from_label("01") == 2


def test_single_detection_nll_is_ln2():
    params = cooccur.make_params(np.array([0.0, 1.0]), np.array([0.5]))
    record = cooccur.ImageRecord("siteA", cooccur.parse_datetime("2017-03-14"), "lynx")
    history, warnings = cooccur.build_detection_history([record], [], ["lynx"], cooccur.LabelSource.truth)
    assert warnings == []
    assert history.cell(0, 0, 0) == 1
    assert cooccur.neg_log_likelihood(params, history) == pytest.approx(math.log(2.0), abs=1e-14)


def test_nll_gradient_shape():
    history = simulated_history(sites=50, occasions=4)
    theta = np.zeros(cooccur.theta_dim(2))
    value, gradient = cooccur.nll_theta(theta, history)
    assert math.isfinite(value)
    assert gradient.shape == theta.shape
    assert np.all(np.isfinite(gradient))


def test_fit_recovers_simulation():
    history = simulated_history()
    options = cooccur.FitOptions()
    options.n_starts = 2
    result = cooccur.fit(history, options)
    assert result.converged
    assert result.species == ["sp1", "sp2"]
    np.testing.assert_allclose(result.params_hat.p, [0.55, 0.40], atol=0.15)
    assert result.vcov is None or result.vcov.shape == (5, 5)

    rows = cooccur.estimate_table(result, 0.95)
    names = [row.quantity for row in rows]
    assert names[:2] == ["p:sp1", "p:sp2"]
    assert "marginal:sp1" in names
    assert "conditional:sp1|sp2=present" in names

    interval = cooccur.derived_interval(result, cooccur.DerivedQuantity.marginal(0))
    assert 0.0 <= interval.lower <= interval.point <= interval.upper <= 1.0
    assert interval.point == pytest.approx(cooccur.marginal_occupancy(result.params_hat, 0))


def test_fit_error_is_catchable():
    history = simulated_history(sites=100, occasions=6)
    options = cooccur.FitOptions()
    options.max_iter = 1
    options.n_starts = 1
    with pytest.raises(cooccur.FitError):
        cooccur.fit(history, options)


def test_z_value():
    assert cooccur.z_value(0.95) == pytest.approx(1.959964, abs=1e-6)


def test_metrics_identity():
    records = []
    for k, label in enumerate(["lynx", "lynx", "chamois"]):
        ts = cooccur.parse_datetime(f"2017-03-{k + 1:02d}")
        records.append(cooccur.ImageRecord("site", ts, label, label))
    report = cooccur.precision_recall(cooccur.confusion_matrix(records))
    assert report.accuracy == 1.0
    assert report.precision == [1.0, 1.0]
    assert report.recall == [1.0, 1.0]
    assert report.support == [1, 2]


def test_row_normalize_drops_empty_rows():
    records = [
        cooccur.ImageRecord("s", cooccur.parse_datetime("2017-01-01"), "a", "b"),
        cooccur.ImageRecord("s", cooccur.parse_datetime("2017-01-02"), "a", "a"),
    ]
    cm = cooccur.confusion_matrix(records)
    probs, warnings = cooccur.row_normalize(cm)
    assert probs.row_labels == ["a"]
    assert probs.col_labels == ["a", "b"]
    np.testing.assert_allclose(probs.probs, [[0.5, 0.5]])
    assert len(warnings) == 1 and "'b'" in warnings[0]


def test_identity_experiment_zero_deltas():
    history = simulated_history(sites=120, occasions=6, seed=44)
    records = cooccur.records_from_history(history, 1.5, 9)
    start = cooccur.format_month(history.occasions[0]) + "-01"
    end = cooccur.format_month(history.occasions[-1]) + "-28"
    deployments = [
        cooccur.DeploymentWindow(site, cooccur.parse_datetime(start), cooccur.parse_datetime(end))
        for site in history.sites
    ]
    options = cooccur.FitOptions()
    options.n_starts = 2
    identity = cooccur.RowStochastic.identity(history.species)
    report, warnings = cooccur.run_experiment(
        records, deployments, history.species, identity, options, 5
    )
    assert report.metrics.accuracy == 1.0
    assert report.fit_truth.nll == report.fit_classified.nll
    assert len(report.deltas) > 0
    for row in report.deltas:
        assert row.delta == 0.0


def test_history_json_round_trip():
    history = simulated_history(sites=10, occasions=3)
    blob = history.to_json()
    back = cooccur.DetectionHistory.from_json(blob)
    assert back.species == history.species
    assert back.sites == history.sites
    assert all(
        back.cell(s, i, t) == history.cell(s, i, t)
        for s in range(2)
        for i in range(10)
        for t in range(3)
    )
