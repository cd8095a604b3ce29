"""Benchmark protocol: five methods, repeated seeded trials, accuracy-vs-budget curves.

Each trial draws a balanced test set and a stratified initial sample (shared
by every method), then produces one accuracy curve per method:

- DEFAULT: the fixed model's own margin-based run, evaluated as it grows.
- PALMS / PALMS-FWC: selection on each evaluated prefix of that same run.
- RANDOM: one IID draw, prefix-evaluated with plain LOOCV selection.
- ORACLE: per grid model, a separate run where the model both acquires and
  consumes; the curve is the per-budget max over models.

Results serialize to a schema-versioned JSON document plus per-method
plot-data tables; identical configs and seeds reproduce identical bytes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .active import AcquisitionStrategy, SimulatedOracle, run_active_learning
from .data import Dataset, SeededRng, apply_standardizer, fit_standardizer, load_csv, stratified_initial_sample, stratified_test_split
from .selection import ModelGrid, assign_weights, compute_cutoffs, grid_loocv, select_best, weighted_score_for_fixed_model
from .svm import DEFAULT_SETTINGS, ModelParams, SolverSettings, TrainedSvm, predict_many, train_svc

__all__ = [
    "Method",
    "ExperimentConfig",
    "TrialResult",
    "ExperimentResult",
    "run_trial",
    "run_experiment",
    "emit_results",
    "read_results",
]

SCHEMA_VERSION = 1


class Method(str, Enum):
    RANDOM = "random"
    DEFAULT = "default"
    ORACLE = "oracle"
    PALMS = "palms"
    PALMS_FWC = "palms-fwc"


ALL_METHODS = tuple(Method)


@dataclass(frozen=True)
class ExperimentConfig:
    """Run protocol knobs; gamma grids are factors of 1/n_features."""

    dataset: str
    methods: tuple[str, ...] = tuple(m.value for m in ALL_METHODS)
    budget: int = 55
    trials: int = 50
    test_per_class: int = 50
    init_per_class: int = 2
    c_values: tuple[float, ...] = (0.01, 1.0, 100.0, 1e4)
    gamma_factors: tuple[float, ...] = (1e-4, 1e-2, 1.0, 1e2, 1e4)
    default_c: float = 1.0
    default_gamma_factor: float = 1.0
    weight: float = 1.5
    base_seed: int = 0
    stride: int = 1
    oracle_final_budget: bool = False
    kkt_tolerance: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(Method(m).value for m in self.methods))
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "gamma_factors", tuple(float(g) for g in self.gamma_factors))
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.c_values or not self.gamma_factors:
            raise ValueError("hyperparameter grids must be non-empty")
        if self.default_c not in self.c_values or self.default_gamma_factor not in self.gamma_factors:
            raise ValueError("the default model must lie on the grid")

    def grid_for(self, n_features: int) -> ModelGrid:
        inv_n = 1.0 / n_features
        return ModelGrid.build(
            self.c_values,
            [f * inv_n for f in self.gamma_factors],
            default_c=self.default_c,
            default_gamma=self.default_gamma_factor * inv_n,
        )

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(kkt_tolerance=self.kkt_tolerance)

    def evaluated_budgets(self, pool_size: int) -> tuple[int, ...]:
        cap = min(self.budget, pool_size)
        budgets = list(range(0, cap + 1, self.stride))
        if budgets[-1] != cap:
            budgets.append(cap)
        return tuple(budgets)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    seed: int
    budgets: tuple[int, ...]
    curves: dict[str, tuple[float, ...]]
    chosen: dict[str, ModelParams]
    oracle_argmax: tuple[ModelParams, ...] | None = None


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    budgets: tuple[int, ...]
    trials: tuple[TrialResult, ...]
    mean: dict[str, tuple[float, ...]] = field(default_factory=dict)
    std: dict[str, tuple[float, ...]] = field(default_factory=dict)


def _test_accuracy(model: TrainedSvm, test: Dataset) -> float:
    return float((predict_many(model, test.features) == test.labels).mean())


def _prefix_training_sets(init: Dataset, pool: Dataset, record, budgets) -> dict[int, Dataset]:
    """T_b = init plus the first b queried points, for each evaluated b."""
    out = {}
    training = init
    step = 0
    wanted = set(budgets)
    if 0 in wanted:
        out[0] = training
    for q in record.queries:
        pos = int(np.flatnonzero(pool.ids == q.point_id)[0])
        piece = Dataset(pool.ids[pos : pos + 1], pool.features[pos : pos + 1], np.array([q.label]))
        training = training.concat(piece)
        step += 1
        if step in wanted:
            out[step] = training
    return out


def _margin_run_models(init, pool, params, budget, oracle, settings):
    """Margin run capturing the model trained on each prefix (0..budget)."""
    captured: list[TrainedSvm] = []
    record = run_active_learning(
        init, pool, params, budget, AcquisitionStrategy.MARGIN, oracle, settings,
        observer=lambda step, model: captured.append(model),
    )
    captured.append(train_svc(record.final_training_set, params, settings))
    return record, captured


def _argmax_model(grid: ModelGrid, accs: dict[ModelParams, float]) -> ModelParams:
    best = max(accs.values())
    return min((m for m in grid.models if accs[m] == best), key=lambda m: (m.gamma, m.C))


def run_trial(data: Dataset, config: ExperimentConfig, trial_index: int) -> TrialResult:
    """One seeded trial: shared splits, then a curve per configured method."""
    seed = config.base_seed + trial_index
    rng = SeededRng(seed)
    settings = config.solver_settings()
    test_raw, rest_raw = stratified_test_split(data, config.test_per_class, rng)
    scaler = fit_standardizer(rest_raw)
    test = apply_standardizer(scaler, test_raw)
    rest = apply_standardizer(scaler, rest_raw)
    init, pool = stratified_initial_sample(rest, config.init_per_class, rng)
    grid = config.grid_for(data.n_features)
    fixed = grid.default
    label_oracle = SimulatedOracle(rest)
    budgets = config.evaluated_budgets(len(pool))
    final_b = budgets[-1]
    methods = set(config.methods)
    curves: dict[str, tuple[float, ...]] = {}
    chosen: dict[str, ModelParams] = {}
    oracle_argmax = None

    needs_fixed_run = methods & {Method.DEFAULT.value, Method.PALMS.value, Method.PALMS_FWC.value,
                                 Method.ORACLE.value}
    fixed_models: list[TrainedSvm] = []
    fixed_prefixes: dict[int, Dataset] = {}
    if needs_fixed_run:
        record, fixed_models = _margin_run_models(init, pool, fixed, final_b, label_oracle, settings)
        fixed_prefixes = _prefix_training_sets(init, pool, record, budgets)
    if Method.DEFAULT.value in methods:
        curves[Method.DEFAULT.value] = tuple(_test_accuracy(fixed_models[b], test) for b in budgets)
        chosen[Method.DEFAULT.value] = fixed

    if methods & {Method.PALMS.value, Method.PALMS_FWC.value}:
        palms_curve, fwc_curve = [], []
        for b in budgets:
            training = fixed_prefixes[b]
            scores = grid_loocv(training, grid, settings)
            trained_cache = {fixed: fixed_models[b]}

            def accuracy_of(params):
                if params not in trained_cache:
                    trained_cache[params] = train_svc(training, params, settings)
                return _test_accuracy(trained_cache[params], test)

            if Method.PALMS.value in methods:
                pick, _ = select_best(scores, grid)
                palms_curve.append(accuracy_of(pick))
                if b == final_b:
                    chosen[Method.PALMS.value] = pick
            if Method.PALMS_FWC.value in methods:
                cutoffs = compute_cutoffs(fixed_models[b], training)
                weights = assign_weights(fixed_models[b], training, cutoffs, config.weight)
                fwc_scores = tuple(
                    weighted_score_for_fixed_model(s, weights) if i == grid.default_index else s
                    for i, s in enumerate(scores)
                )
                pick, _ = select_best(fwc_scores, grid)
                fwc_curve.append(accuracy_of(pick))
                if b == final_b:
                    chosen[Method.PALMS_FWC.value] = pick
        if Method.PALMS.value in methods:
            curves[Method.PALMS.value] = tuple(palms_curve)
        if Method.PALMS_FWC.value in methods:
            curves[Method.PALMS_FWC.value] = tuple(fwc_curve)

    if Method.RANDOM.value in methods:
        rand_record = run_active_learning(
            init, pool, fixed, final_b, AcquisitionStrategy.RANDOM, label_oracle, settings, rng
        )
        prefixes = _prefix_training_sets(init, pool, rand_record, budgets)
        curve = []
        for b in budgets:
            training = prefixes[b]
            pick, _ = select_best(grid_loocv(training, grid, settings), grid)
            curve.append(_test_accuracy(train_svc(training, pick, settings), test))
            if b == final_b:
                chosen[Method.RANDOM.value] = pick
        curves[Method.RANDOM.value] = tuple(curve)

    if Method.ORACLE.value in methods:
        per_model: dict[ModelParams, list[float]] = {}
        for params in grid.models:
            if params == fixed:
                models = fixed_models
            else:
                _, models = _margin_run_models(init, pool, params, final_b, label_oracle, settings)
            per_model[params] = [_test_accuracy(models[b], test) for b in budgets]
        if config.oracle_final_budget:
            final_accs = {m: per_model[m][-1] for m in grid.models}
            best = _argmax_model(grid, final_accs)
            curves[Method.ORACLE.value] = tuple(per_model[best])
            oracle_argmax = tuple(best for _ in budgets)
            chosen[Method.ORACLE.value] = best
        else:
            curve, argmax = [], []
            for pos in range(len(budgets)):
                accs = {m: per_model[m][pos] for m in grid.models}
                best = _argmax_model(grid, accs)
                curve.append(accs[best])
                argmax.append(best)
            curves[Method.ORACLE.value] = tuple(curve)
            oracle_argmax = tuple(argmax)
            chosen[Method.ORACLE.value] = argmax[-1]

    return TrialResult(trial_index, seed, budgets, curves, chosen, oracle_argmax)


def _aggregate(trials, budgets, methods):
    mean: dict[str, tuple[float, ...]] = {}
    std: dict[str, tuple[float, ...]] = {}
    for m in methods:
        stack = np.array([t.curves[m] for t in trials])
        mean[m] = tuple(float(v) for v in stack.mean(axis=0))
        std[m] = tuple(float(v) for v in stack.std(axis=0))
    return mean, std


def _trial_worker(args):
    data, config, index = args
    return run_trial(data, config, index)


def run_experiment(config: ExperimentConfig, data: Dataset | None = None,
                   workers: int = 1) -> ExperimentResult:
    """All trials plus per-method mean/std curves; trial order is by index."""
    if data is None:
        data = load_csv(config.dataset)
    jobs = [(data, config, i) for i in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = tuple(pool.map(_trial_worker, jobs))
    else:
        trials = tuple(run_trial(data, config, i) for i in range(config.trials))
    budgets = trials[0].budgets
    mean, std = _aggregate(trials, budgets, config.methods)
    return ExperimentResult(config, budgets, trials, mean, std)


def _params_to_json(p: ModelParams) -> dict:
    return {"C": p.C, "gamma": p.gamma}


def _params_from_json(d: dict) -> ModelParams:
    return ModelParams(C=d["C"], gamma=d["gamma"])


def _trial_to_json(t: TrialResult) -> dict:
    return {
        "trial_index": t.trial_index,
        "seed": t.seed,
        "budgets": list(t.budgets),
        "curves": {m: list(c) for m, c in t.curves.items()},
        "chosen": {m: _params_to_json(p) for m, p in t.chosen.items()},
        "oracle_argmax": [_params_to_json(p) for p in t.oracle_argmax] if t.oracle_argmax else None,
    }


def _trial_from_json(d: dict) -> TrialResult:
    return TrialResult(
        trial_index=d["trial_index"],
        seed=d["seed"],
        budgets=tuple(d["budgets"]),
        curves={m: tuple(c) for m, c in d["curves"].items()},
        chosen={m: _params_from_json(p) for m, p in d["chosen"].items()},
        oracle_argmax=tuple(_params_from_json(p) for p in d["oracle_argmax"]) if d["oracle_argmax"] else None,
    )


def result_to_json(result: ExperimentResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": asdict(result.config),
        "budgets": list(result.budgets),
        "trials": [_trial_to_json(t) for t in result.trials],
        "aggregates": {
            m: {"mean": list(result.mean[m]), "std": list(result.std[m])}
            for m in result.config.methods
        },
    }


def result_from_json(doc: dict) -> ExperimentResult:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported results schema: {doc.get('schema_version')}")
    cfg_raw = dict(doc["config"])
    for key in ("methods", "c_values", "gamma_factors"):
        cfg_raw[key] = tuple(cfg_raw[key])
    config = ExperimentConfig(**cfg_raw)
    return ExperimentResult(
        config=config,
        budgets=tuple(doc["budgets"]),
        trials=tuple(_trial_from_json(t) for t in doc["trials"]),
        mean={m: tuple(doc["aggregates"][m]["mean"]) for m in config.methods},
        std={m: tuple(doc["aggregates"][m]["std"]) for m in config.methods},
    )


def emit_results(result: ExperimentResult, out_dir) -> list[Path]:
    """Write results.json plus one budget/mean/std table per method."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    doc_path = out / "results.json"
    doc_path.write_text(json.dumps(result_to_json(result), indent=2) + "\n")
    written.append(doc_path)
    for m in result.config.methods:
        table = out / f"{m}.tsv"
        lines = ["budget\tmean\tstd"]
        for b, mu, sd in zip(result.budgets, result.mean[m], result.std[m]):
            lines.append(f"{b}\t{mu!r}\t{sd!r}")
        table.write_text("\n".join(lines) + "\n")
        written.append(table)
    return written


def read_results(path) -> ExperimentResult:
    p = Path(path)
    if p.is_dir():
        p = p / "results.json"
    return result_from_json(json.loads(p.read_text()))
