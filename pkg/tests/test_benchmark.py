import json

import numpy as np
import pytest

from palms.benchmark import (
    ExperimentConfig,
    Method,
    emit_results,
    read_results,
    result_from_json,
    result_to_json,
    run_experiment,
    run_trial,
)
from palms.data import Dataset
from palms.svm import ModelParams


def blob_csv(tmp_path, n_per_class=40, gap=2.2, seed=0, name="blobs.csv"):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_per_class, 2)), rng.normal(size=(n_per_class, 2)) + gap])
    y = [0] * n_per_class + [1] * n_per_class
    lines = ["f1,f2,label"] + [f"{float(a)!r},{float(b)!r},{lab}" for (a, b), lab in zip(X, y)]
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def blob_dataset(n_per_class=40, gap=2.2, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_per_class, 2)), rng.normal(size=(n_per_class, 2)) + gap])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return Dataset(np.arange(2 * n_per_class), X, y)


SMALL = dict(budget=6, trials=3, test_per_class=8, base_seed=11)


@pytest.fixture(scope="module")
def small_result():
    config = ExperimentConfig(dataset="<in-memory>", **SMALL)
    return run_experiment(config, data=blob_dataset())


class TestConfig:
    def test_grid_has_default(self):
        grid = ExperimentConfig(dataset="x").grid_for(4)
        assert grid.default == ModelParams(C=1.0, gamma=0.25)
        assert len(grid.models) == 20

    def test_default_must_be_on_grid(self):
        with pytest.raises(ValueError):
            ExperimentConfig(dataset="x", c_values=(0.5, 2.0))

    def test_evaluated_budgets_stride(self):
        cfg = ExperimentConfig(dataset="x", budget=10, stride=4)
        assert cfg.evaluated_budgets(pool_size=100) == (0, 4, 8, 10)

    def test_budget_capped_by_pool(self):
        cfg = ExperimentConfig(dataset="x", budget=55)
        assert cfg.evaluated_budgets(pool_size=7)[-1] == 7

    def test_method_names_validated(self):
        with pytest.raises(ValueError):
            ExperimentConfig(dataset="x", methods=("palms", "bogus"))


class TestRunTrial:
    def test_deterministic(self):
        data = blob_dataset()
        config = ExperimentConfig(dataset="<mem>", **SMALL)
        a = run_trial(data, config, 0)
        b = run_trial(data, config, 0)
        assert a == b

    def test_oracle_dominates_default_everywhere(self, small_result):
        for t in small_result.trials:
            d = t.curves[Method.DEFAULT.value]
            o = t.curves[Method.ORACLE.value]
            assert all(oc >= dc for oc, dc in zip(o, d))

    def test_shared_init_at_budget_zero(self, small_result):
        # RANDOM and PALMS both select on the identical 4-point init at b=0
        for t in small_result.trials:
            assert t.curves[Method.RANDOM.value][0] == t.curves[Method.PALMS.value][0]

    def test_curve_lengths_match_budgets(self, small_result):
        for t in small_result.trials:
            for m, curve in t.curves.items():
                assert len(curve) == len(t.budgets)

    def test_seed_is_base_plus_index(self, small_result):
        for i, t in enumerate(small_result.trials):
            assert t.trial_index == i
            assert t.seed == SMALL["base_seed"] + i

    def test_chosen_models_recorded(self, small_result):
        t = small_result.trials[0]
        for m in (Method.PALMS.value, Method.PALMS_FWC.value, Method.RANDOM.value,
                  Method.DEFAULT.value, Method.ORACLE.value):
            assert m in t.chosen
        assert len(t.oracle_argmax) == len(t.budgets)

    def test_accuracies_in_unit_interval(self, small_result):
        for t in small_result.trials:
            for curve in t.curves.values():
                assert all(0.0 <= v <= 1.0 for v in curve)

    def test_methods_subset_runs(self):
        data = blob_dataset()
        config = ExperimentConfig(dataset="<mem>", methods=("default", "palms"), **SMALL)
        t = run_trial(data, config, 1)
        assert set(t.curves) == {"default", "palms"}


class TestRunExperiment:
    def test_aggregates_recomputable(self, small_result):
        for m in small_result.config.methods:
            stack = np.array([t.curves[m] for t in small_result.trials])
            assert np.allclose(stack.mean(axis=0), small_result.mean[m], atol=1e-12)
            assert np.allclose(stack.std(axis=0), small_result.std[m], atol=1e-12)

    def test_single_trial_zero_std(self):
        config = ExperimentConfig(dataset="<mem>", budget=3, trials=1, test_per_class=8)
        result = run_experiment(config, data=blob_dataset())
        assert all(v == 0.0 for m in config.methods for v in result.std[m])

    def test_rerun_identical(self):
        config = ExperimentConfig(dataset="<mem>", budget=4, trials=2, test_per_class=8)
        a = run_experiment(config, data=blob_dataset())
        b = run_experiment(config, data=blob_dataset())
        assert result_to_json(a) == result_to_json(b)


class TestResultsDocument:
    def test_round_trip_equality(self, small_result, tmp_path):
        emit_results(small_result, tmp_path)
        loaded = read_results(tmp_path)
        assert loaded == small_result

    def test_json_round_trip_via_text(self, small_result):
        doc = json.dumps(result_to_json(small_result))
        assert result_from_json(json.loads(doc)) == small_result

    def test_schema_version_present(self, small_result):
        doc = result_to_json(small_result)
        assert doc["schema_version"] == 1

    def test_plot_tables(self, small_result, tmp_path):
        written = emit_results(small_result, tmp_path)
        for m in small_result.config.methods:
            table = tmp_path / f"{m}.tsv"
            assert table in written
            lines = table.read_text().strip().split("\n")
            assert lines[0] == "budget\tmean\tstd"
            assert len(lines) - 1 == len(small_result.budgets)
            for line, b, mu in zip(lines[1:], small_result.budgets, small_result.mean[m]):
                cols = line.split("\t")
                assert int(cols[0]) == b
                assert abs(float(cols[1]) - mu) < 1e-9

    def test_unsupported_schema_rejected(self, small_result):
        doc = result_to_json(small_result)
        doc["schema_version"] = 999
        with pytest.raises(ValueError):
            result_from_json(doc)


class TestOracleFinalBudgetSwitch:
    def test_single_model_curve(self):
        config = ExperimentConfig(dataset="<mem>", methods=("default", "oracle"),
                                  oracle_final_budget=True, **SMALL)
        t = run_trial(blob_dataset(), config, 0)
        assert len(set(t.oracle_argmax)) == 1
        # final-budget oracle still dominates default at the final budget
        assert t.curves["oracle"][-1] >= t.curves["default"][-1]
