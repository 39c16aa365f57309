"""Smoke tests for the python bindings: each main operation runs end to end
and agrees with the documented behavior on small instances."""
import math

import numpy as np
import pytest

import medex

TOY = {"name": "toy2d", "w1": 1.0, "w2": 20.0}


def test_design_is_latin_hypercube():
    X = medex.make_design("lhd", 8, 3, seed=5)
    assert X.shape == (8, 3)
    mids = [(2 * i + 1) / 16 for i in range(8)]
    for col in range(3):
        assert sorted(X[:, col]) == pytest.approx(mids)


def test_design_is_deterministic():
    a = medex.make_design("maximin", 10, 2, sweeps=20, seed=3)
    b = medex.make_design("maximin", 10, 2, sweeps=20, seed=3)
    assert np.array_equal(a, b)


def test_toy_loss_at_center():
    rec = medex.evaluate(TOY, np.array([0.5, 0.5]))
    assert rec["z"] == 1
    assert rec["loss"] == pytest.approx(4.081e-4, abs=1e-5)


def test_toy_infeasible_region():
    rec = medex.evaluate(TOY, np.array([0.1, 0.2]))
    assert rec["z"] == 0
    assert rec["y"] is None
    assert rec["loss"] is None


def test_loss_matches_formula():
    value = medex.loss(np.array([1.0, 2.0]), np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    assert value == pytest.approx(1.0 + 1.0)


def test_med_generate_budget_and_domain():
    calls = []

    def f(x):
        calls.append(np.array(x))
        return -math.log(max(1e-12, float(np.sum((x - 0.5) ** 2))))

    initial = medex.make_design("maximin", 10, 2, sweeps=20, seed=1)
    result = medex.med_generate(initial, f, K=3, seed=7)
    assert result["new_evaluations"] == 30
    assert result["all_points"].shape == (40, 2)
    assert result["all_points"].min() >= 0.0
    assert result["all_points"].max() <= 1.0
    assert len(result["energy_trace"]) == 3


def test_classifier_round_trip():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(80, 2))
    z = [1 if x[0] + x[1] > 0.6 else 0 for x in X]
    model = medex.fit_logistic(X, z)
    assert model.kind == "logistic"
    p_high = model.predict_proba(np.array([0.9, 0.9]))
    p_low = model.predict_proba(np.array([0.05, 0.05]))
    assert 0.0 <= p_low < 0.5 < p_high <= 1.0

    back = medex.Classifier.from_json(model.to_json())
    assert back.predict_proba(np.array([0.3, 0.3])) == pytest.approx(
        model.predict_proba(np.array([0.3, 0.3]))
    )


def test_surrogate_predicts_synthetic_loss():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(120, 2))
    targets = np.array([1.0, -2.0])
    weights = np.array([0.5, 2.0])
    h1 = -1.0 + X[:, 0] + 0.5 * X[:, 1] ** 2
    h2 = 0.5 - X[:, 0] * X[:, 1]
    Y = np.column_stack([targets[0] + weights[0] * np.exp(h1),
                         targets[1] + weights[1] * np.exp(h2)])
    s = medex.fit_loss_surrogate(X, Y, targets, weights, delta=1.0, seed=2)

    probe = np.array([0.3, 0.6])
    truth = np.exp(-1.0 + probe[0] + 0.5 * probe[1] ** 2) ** 2 + np.exp(
        0.5 - probe[0] * probe[1]
    ) ** 2
    assert s.predict_loss(probe) == pytest.approx(truth, rel=0.15)

    back = medex.Surrogate.from_json(s.to_json())
    assert back.predict_loss(probe) == pytest.approx(s.predict_loss(probe))


def test_gp_interpolates_and_ei_runs():
    X = medex.make_design("maximin", 12, 2, sweeps=20, seed=4)
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    gp = medex.fit_gp(X, y, seed=1)
    for i in range(12):
        mean, sd = gp.predict(X[i])
        assert mean == pytest.approx(y[i], abs=1e-4)
    assert medex.expected_improvement(gp, np.array([0.5, 0.5]), float(y.min())) >= 0.0

    def f(x):
        return -math.log(max(1e-12, float(np.sum((x - 0.4) ** 2))))

    initial_losses = np.sum((X - 0.4) ** 2, axis=1)
    result = medex.ei_optimize(f, X, 5, seed=9, initial_losses=initial_losses)
    assert result["new_evaluations"] == 5
    assert result["all_points"].shape == (17, 2)


def test_run_exploration_and_rerun_identical():
    config = {
        "schema_version": 1,
        "seed": 6,
        "problem": TOY,
        "initial_design": {"type": "maximin", "size": 12, "sweeps": 10},
        "med": {"batch": 12, "iterations": 2},
        "classifier": "logistic",
        "cycles": 1,
    }
    run1 = medex.run_exploration(config)
    run2 = medex.run_exploration(config)
    assert run1["table_csv"] == run2["table_csv"]

    records = run1["records"]
    assert len(records) == 12 + 2 * 12
    assert all(r["source"] == "initial" for r in records[:12])
    losses = [r["loss"] for r in records if r["z"] == 1]
    assert min(losses) < 0.05

    parsed = medex.table_from_csv(run1["table_csv"], 2, 2)
    assert len(parsed) == len(records)


def test_run_exploration_rejects_unknown_keys():
    with pytest.raises(Exception, match="iterationz"):
        medex.run_exploration({
            "schema_version": 1,
            "problem": TOY,
            "med": {"iterationz": 3},
        })


def test_compare_designs_smoke():
    result = medex.compare_designs(TOY, initial_size=12, design_sweeps=5, reps=3,
                                   seed_base=0, threads=2)
    summary = result["summary"]
    assert summary["repetitions"] == 3
    assert 0.0 <= summary["min_win_rate"] <= 1.0
    assert result["csv"].splitlines()[0].startswith("rep,seed,proposed_min")
