import math

import numpy as np
import pytest

from palms.data import Dataset
from palms.errors import DataError, SolverError
from palms.svm import (
    ModelParams,
    SolverSettings,
    boundary_distance,
    decision_value,
    decision_values,
    predict,
    rbf_kernel,
    train_svc,
)

from oracles import (
    dual_objective,
    naive_loocv_oracle,
    oracle_fit_predict,
    oracle_kernel_matrix,
    qp_dual_oracle,
    symmetric_pair_grid_oracle,
)

TIGHT = SolverSettings(kkt_tolerance=1e-9, max_passes=10_000)


def two_point_pair():
    return Dataset(
        ids=np.array([0, 1]),
        features=np.array([[-1.0, 0.0], [1.0, 0.0]]),
        labels=np.array([0, 1]),
    )


def random_instance(rng, n_points, n_features=2):
    X = rng.normal(size=(n_points, n_features))
    y = np.zeros(n_points, dtype=int)
    y[: n_points // 2] = 1
    rng.shuffle(y)
    if y.sum() in (0, n_points):
        y[0] = 1 - y[0]
    return Dataset(np.arange(n_points), X, y)


class TestRbfKernel:
    def test_self_kernel_is_one(self):
        x = np.array([3.0, -2.0, 0.5])
        for gamma in (0.1, 1.0, 50.0):
            assert rbf_kernel(x, x, gamma) == 1.0

    def test_unit_distance(self):
        assert rbf_kernel([0.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(math.exp(-1), abs=1e-12)

    def test_scaled_distance(self):
        assert rbf_kernel([0.0], [2.0], 0.5) == pytest.approx(math.exp(-2), abs=1e-12)

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b = rng.normal(size=(2, 4))
            g = float(rng.uniform(0.01, 10))
            k = rbf_kernel(a, b, g)
            assert k == rbf_kernel(b, a, g)
            assert 0.0 < k <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rbf_kernel([1.0], [1.0, 2.0], 1.0)

    def test_gamma_positive(self):
        with pytest.raises(ValueError):
            rbf_kernel([1.0], [2.0], 0.0)


class TestTrainSvc:
    def test_symmetric_pair_midpoint_boundary(self):
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0), TIGHT)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        assert decision_value(model, [0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_pair_alpha_matches_grid_oracle(self):
        # oracle-computed optimum: the unconstrained stationary point
        # 1/(1 - e^-4) ~ 1.0187 exceeds C, so both coefficients clip at C = 1
        expected = symmetric_pair_grid_oracle(gamma=1.0, sq_dist=4.0, C=1.0)
        assert expected == pytest.approx(1.0, abs=2e-5)
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0), TIGHT)
        alphas = np.abs(model.dual_coefs)
        assert alphas == pytest.approx([expected, expected], abs=2e-5)

    def test_dual_feasibility_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            ds = random_instance(rng, int(rng.integers(4, 12)))
            params = ModelParams(C=float(rng.choice([0.1, 1.0, 10.0])), gamma=float(rng.choice([0.1, 1.0])))
            model = train_svc(ds, params)
            alphas = np.abs(model.dual_coefs)
            assert np.all(alphas > 0.0)
            assert np.all(alphas <= params.C + 1e-12)
            assert abs(model.dual_coefs.sum()) < 1e-6

    def test_free_support_vectors_on_margin(self):
        rng = np.random.default_rng(23)
        checked = 0
        for _ in range(20):
            ds = random_instance(rng, 8)
            params = ModelParams(C=10.0, gamma=1.0)
            model = train_svc(ds, params)
            alphas = np.abs(model.dual_coefs)
            free = (alphas > 1e-9) & (alphas < params.C - 1e-9)
            if not free.any():
                continue
            f = decision_values(model, model.support_features[free])
            y_pm = np.sign(model.dual_coefs[free])
            assert np.all(np.abs(y_pm * f - 1.0) <= 10 * 1e-3)
            checked += 1
        assert checked > 5

    def test_separable_blobs_perfect_training_accuracy(self):
        rng = np.random.default_rng(3)
        X = np.vstack([rng.normal(size=(20, 2)) * 0.3, rng.normal(size=(20, 2)) * 0.3 + 8.0])
        y = np.array([0] * 20 + [1] * 20)
        ds = Dataset(np.arange(40), X, y)
        model = train_svc(ds, ModelParams(C=1.0, gamma=1.0))
        preds = [predict(model, x) for x in X]
        assert preds == list(y)

    def test_single_class_rejected(self):
        ds = Dataset(np.arange(2), np.zeros((2, 1)), np.array([1, 1]))
        with pytest.raises(DataError):
            train_svc(ds, ModelParams(C=1.0, gamma=1.0))

    def test_determinism(self):
        rng = np.random.default_rng(8)
        ds = random_instance(rng, 20, 3)
        params = ModelParams(C=100.0, gamma=0.5)
        a = train_svc(ds, params)
        b = train_svc(ds, params)
        assert a.bias == b.bias
        assert np.array_equal(a.dual_coefs, b.dual_coefs)
        assert np.array_equal(a.support_ids, b.support_ids)

    def test_nonconvergence_raises_with_diagnostics(self):
        rng = np.random.default_rng(1)
        ds = random_instance(rng, 12)
        with pytest.raises(SolverError) as err:
            train_svc(ds, ModelParams(C=1.0, gamma=1.0), SolverSettings(kkt_tolerance=1e-12, max_passes=1))
        assert "updates" in err.value.details

    def test_kkt_gap_recorded_within_tolerance(self):
        rng = np.random.default_rng(21)
        ds = random_instance(rng, 15)
        settings = SolverSettings(kkt_tolerance=1e-3)
        model = train_svc(ds, ModelParams(C=1.0, gamma=1.0), settings)
        assert model.kkt_gap <= settings.kkt_tolerance


class TestOracleEquivalence:
    def test_dual_objective_and_predictions_match_qp(self):
        rng = np.random.default_rng(202)
        for _ in range(40):
            ds = random_instance(rng, int(rng.integers(4, 9)))
            C = float(rng.choice([0.1, 1.0, 10.0]))
            gamma = float(rng.choice([0.1, 1.0]))
            model = train_svc(ds, ModelParams(C=C, gamma=gamma), TIGHT)
            y_pm = ds.labels.astype(float) * 2 - 1
            alpha_qp, obj_qp = qp_dual_oracle(ds.features, y_pm, C, gamma)
            K = oracle_kernel_matrix(ds.features, ds.features, gamma)
            alpha_mine = np.zeros(len(ds))
            sv = {int(i): a for i, a in zip(model.support_ids, np.abs(model.dual_coefs))}
            for pos, pid in enumerate(ds.ids):
                alpha_mine[pos] = sv.get(int(pid), 0.0)
            assert dual_objective(K, y_pm, alpha_mine) == pytest.approx(obj_qp, abs=1e-5)
            probe = rng.uniform(-2.5, 2.5, size=(20, 2))
            mine = (decision_values(model, probe) > 0).astype(int)
            theirs = oracle_fit_predict(ds.features, ds.labels, C, gamma, probe)
            assert np.array_equal(mine, theirs)


class TestDecisionSurface:
    def test_positive_at_positive_training_point(self):
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0), TIGHT)
        assert decision_value(model, [1.0, 0.0]) > 0

    def test_predict_sign_rule(self):
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0), TIGHT)
        assert predict(model, [1.0, 0.0]) == 1
        assert predict(model, [-1.0, 0.0]) == 0
        assert predict(model, [0.0, 0.0]) == 0  # exact boundary goes to class 0

    def test_boundary_distance_is_abs_f(self):
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0), TIGHT)
        for x in ([0.3, 0.1], [-0.7, 0.4]):
            assert boundary_distance(model, x) == abs(decision_value(model, x))

    def test_feature_count_mismatch(self):
        model = train_svc(two_point_pair(), ModelParams(C=1.0, gamma=1.0))
        with pytest.raises(ValueError):
            decision_value(model, [1.0, 2.0, 3.0])


class TestLoocvOracleSpotValues:
    """Reference values for the selection module, frozen from the naive oracle."""

    def test_tight_clusters_all_folds_correct(self):
        X = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
        y = np.array([0, 0, 1, 1])
        assert naive_loocv_oracle(X, y, C=1.0, gamma=0.5).all()

    def test_alternating_collinear_all_folds_wrong(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        y = np.array([0, 1, 0, 1])
        assert not naive_loocv_oracle(X, y, C=1.0, gamma=1e-4 / 2).any()
