"""
Experiment engine for the detection benchmarks
"""

import dataclasses
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algorithms import icpa_solver
from src.algorithms.baselines import atom_scores, solve_mbmp, solve_mfocuss
from src.algorithms.cpa_solver import solve_cpa_regularized
from src.errors import ArgumentError
from src.simulation.dictionary import Dictionary, generate_dictionary
from src.simulation.signal_model import (
    DEFAULT_NOVEL_STD,
    ActiveSet,
    ObservationSet,
    add_noise,
    choose_active_set,
    generate_novel_atom,
    inject_novel_atom,
    synthesize,
)
from src.utils.config import ExperimentConfig
from src.utils.evaluation import (
    DENSITY_CSV_FIELDS,
    RESULT_CSV_FIELDS,
    PRFResult,
    aggregate_trials,
    best_threshold_f,
    density_report,
)
from src.utils.metrics_exporter import MetricsExporter

logger = logging.getLogger(__name__)

EXPERIMENTS = ("complexity", "novel", "masking", "lambda-sweep")
NOISE_CONVENTION = "global-over-record"
LAMBDA_SWEEP_K = 2
NOVEL_REPRESENTATION_K = 1


@dataclass
class ExperimentResult:
    """Rows of one experiment plus its JSON summary"""

    name: str
    fields: List[str]
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any] = field(default_factory=dict)


class ExperimentEngine:
    """Runs the benchmark experiments for one configuration"""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize experiment engine

        Args:
            config: Validated experiment configuration
        """
        self.config = config.validate()
        self._shared_dictionary: Optional[Dictionary] = None
        self._dictionary_lock = threading.Lock()
        self.last_result: Optional[ExperimentResult] = None

    # Trial inputs

    def trial_seeds(self) -> List[int]:
        """Trial t runs with seed base_seed + t"""
        return [self.config.base_seed + t for t in range(self.config.n_trials)]

    @property
    def dictionary_policy(self) -> str:
        return "reused" if self.config.reuse_dictionary else "per-trial"

    def dictionary_for(self, seed: int) -> Dictionary:
        """Fresh dictionary per trial seed, or the base_seed one when reuse_dictionary is set"""
        cfg = self.config
        if not cfg.reuse_dictionary:
            return generate_dictionary(cfg.n_dims, cfg.n_atoms, seed)
        with self._dictionary_lock:
            if self._shared_dictionary is None:
                self._shared_dictionary = generate_dictionary(cfg.n_dims, cfg.n_atoms, cfg.base_seed)
            return self._shared_dictionary

    def observe(self, dictionary: Dictionary, k: int, seed: int,
                novel_std: float = 0.0) -> Tuple[ObservationSet, ActiveSet]:
        """
        Noisy k-atom record, optionally with a novel atom added after the noise

        The noise is scaled to the dictionary-atom signal only, so the record
        without a novel atom is the same whether or not one is injected later.
        """
        cfg = self.config
        active = choose_active_set(dictionary.n_atoms, k, seed)
        obs, _ = synthesize(dictionary, active, cfg.n_steps, seed)
        obs = add_noise(obs, cfg.noise_ratio, seed=seed)
        if novel_std > 0:
            spec = generate_novel_atom(dictionary.n_dims, seed, amplitude_std=novel_std)
            obs = inject_novel_atom(obs, spec, seed)
        return obs, active

    # Algorithms

    def algorithm_lambda(self, algo: str) -> Optional[float]:
        """Regularization constant reported for an algorithm; None for M-BMP"""
        if algo in ("cpa", "icpa"):
            return self.config.cpa_lambda
        if algo == "mfocuss":
            return self.config.mfocuss_params.lam
        return None

    def score_atoms(self, algo: str, dictionary: Dictionary, obs: ObservationSet,
                    lam: Optional[float] = None) -> np.ndarray:
        """Per-atom detection scores: |Theta| for CPA, coefficient row norms for the baselines"""
        cfg = self.config
        if algo == "cpa":
            return np.abs(solve_cpa_regularized(dictionary, obs, lam or cfg.cpa_lambda).theta)
        if algo == "icpa":
            return np.abs(icpa_solver.run(dictionary, obs, lam or cfg.cpa_lambda).theta)
        if algo == "mbmp":
            return atom_scores(solve_mbmp(dictionary, obs, cfg.mbmp_max_iters))
        if algo == "mfocuss":
            params = cfg.mfocuss_params if lam is None else dataclasses.replace(cfg.mfocuss_params, lam=lam)
            coefficients = solve_mfocuss(dictionary, obs, params)
            if not coefficients.converged:
                logger.warning("M-FOCUSS did not converge in %d iterations (lambda=%g)",
                               params.max_iters, params.lam)
            return atom_scores(coefficients)
        raise ArgumentError(f"Unknown algorithm: {algo}")

    # Experiments

    def run(self, name: str) -> ExperimentResult:
        runners: Dict[str, Callable[[], ExperimentResult]] = {
            "complexity": self.run_complexity_sweep,
            "novel": self.run_novel_representation,
            "masking": self.run_masking_robustness,
            "lambda-sweep": self.run_lambda_sweep,
        }
        if name not in runners:
            raise ArgumentError(f"Unknown experiment {name!r}, expected one of {EXPERIMENTS}")
        return runners[name]()

    def run_complexity_sweep(self) -> ExperimentResult:
        """F-measure of every algorithm as the number of active atoms grows"""
        tasks = [(k, seed) for k in self.config.k_values for seed in self.trial_seeds()]

        def trial(task):
            k, seed = task
            dictionary = self.dictionary_for(seed)
            obs, active = self.observe(dictionary, k, seed)
            return self._detection_rows("complexity", dictionary, obs, active, k, None, seed)

        rows = self._run_trials("complexity", trial, tasks)
        return self._finish("complexity", RESULT_CSV_FIELDS, rows, self._detection_summary(rows))

    def run_masking_robustness(self) -> ExperimentResult:
        """Paired runs without and with a strong novel atom; only dictionary atoms are scored"""
        novel_std = self._novel_std()
        conditions = [0.0, novel_std] if novel_std > 0 else [0.0]
        tasks = [(k, std, seed) for k in self.config.k_values for std in conditions for seed in self.trial_seeds()]

        def trial(task):
            k, std, seed = task
            dictionary = self.dictionary_for(seed)
            obs, active = self.observe(dictionary, k, seed, novel_std=std)
            return self._detection_rows("masking", dictionary, obs, active, k, std, seed)

        rows = self._run_trials("masking", trial, tasks)
        return self._finish("masking", RESULT_CSV_FIELDS, rows, self._detection_summary(rows))

    def run_lambda_sweep(self) -> ExperimentResult:
        """
        M-FOCUSS over the lambda grid at k=2, without and with a novel atom

        CPA at its configured lambda runs on the same records and is reported
        in the summary as the reference.
        """
        cfg = self.config
        novel_std = self._novel_std()
        conditions = [0.0, novel_std] if novel_std > 0 else [0.0]
        tasks = [(std, seed) for std in conditions for seed in self.trial_seeds()]

        def trial(task):
            std, seed = task
            dictionary = self.dictionary_for(seed)
            obs, active = self.observe(dictionary, LAMBDA_SWEEP_K, seed, novel_std=std)
            rows = []
            for lam in cfg.lambda_values:
                prf = best_threshold_f(self.score_atoms("mfocuss", dictionary, obs, lam=lam), active)
                rows.append(self._row("lambda-sweep", "mfocuss", LAMBDA_SWEEP_K, std, lam, seed, prf))
            reference = best_threshold_f(self.score_atoms("cpa", dictionary, obs), active)
            return rows, (std, reference.f_measure)

        outputs = self._run_trials("lambda-sweep", trial, tasks, flatten=False)
        rows = sorted((row for trial_rows, _ in outputs for row in trial_rows),
                      key=lambda r: (r["novel_std"], r["lambda"], r["seed"]))

        summary = self._detection_summary(rows)
        summary["cpa_reference"] = []
        for std in conditions:
            aggregate = aggregate_trials([f for s, f in (ref for _, ref in outputs) if s == std])
            summary["cpa_reference"].append({
                "lambda": cfg.cpa_lambda, "novel_std": std,
                "mean_f": aggregate.mean, "std_f": aggregate.std, "n": aggregate.n,
            })
        return self._finish("lambda-sweep", RESULT_CSV_FIELDS, rows, summary)

    def run_novel_representation(self) -> ExperimentResult:
        """
        Density of each algorithm's response to a single known atom versus a
        novel atom alone, at each amplitude std
        """
        cfg = self.config
        tasks = [(std, seed) for std in cfg.novel_amplitude_stds for seed in self.trial_seeds()]

        def trial(task):
            std, seed = task
            dictionary = self.dictionary_for(seed)
            active = choose_active_set(dictionary.n_atoms, NOVEL_REPRESENTATION_K, seed)
            known, _ = synthesize(dictionary, active, cfg.n_steps, seed, amp_std=std)
            known = add_noise(known, cfg.noise_ratio, seed=seed)

            silent = ObservationSet(dictionary.n_dims, np.zeros((cfg.n_steps, dictionary.n_dims)))
            novel = inject_novel_atom(silent, generate_novel_atom(dictionary.n_dims, seed, std), seed)
            novel = add_noise(novel, cfg.noise_ratio, seed=seed)

            rows = []
            for condition, obs in (("known", known), ("novel", novel)):
                for algo in cfg.algorithms:
                    report = density_report(self.score_atoms(algo, dictionary, obs))
                    rows.append({
                        "experiment": "novel", "algo": algo, "condition": condition,
                        "amplitude_std": std, "seed": seed,
                        "support_fraction": report.support_fraction,
                        "peak_score": report.peak_score,
                        "l1_l2_ratio": report.l1_l2_ratio,
                    })
            return rows

        rows = self._run_trials("novel", trial, tasks)
        return self._finish("novel", DENSITY_CSV_FIELDS, rows, self._density_summary(rows))

    # Output

    def output_path_for(self, name: str) -> str:
        return self.config.output_path or f"results/{name}.csv"

    def write_results(self, result: ExperimentResult, output_path: Optional[str] = None) -> str:
        """Write the CSV and its `<stem>_summary.json` sidecar; returns the CSV path"""
        path = output_path or self.output_path_for(result.name)
        if result.fields == DENSITY_CSV_FIELDS:
            MetricsExporter.export_density_csv(result.rows, path)
        else:
            MetricsExporter.export_results_csv(result.rows, path)
        MetricsExporter.export_summary_json(result.summary, MetricsExporter.summary_path(path))
        logger.info("Wrote %d rows to %s", len(result.rows), path)
        return path

    def get_statistics(self) -> dict:
        """Summary of the last experiment run"""
        if self.last_result is None:
            return {}
        return self.last_result.summary

    # Internals

    def _novel_std(self) -> float:
        if self.config.novel_std is None:
            logger.info("novel_std not set, using %g", DEFAULT_NOVEL_STD)
            return DEFAULT_NOVEL_STD
        return self.config.novel_std

    def _run_trials(self, name: str, trial: Callable, tasks: Sequence, flatten: bool = True) -> List:
        """Map trials over the worker pool; results keep task order"""
        workers = self.config.worker_count()
        logger.info("Experiment %s: %d trials on %d worker(s), N=%d, M=%d, dictionary %s",
                    name, len(tasks), workers, self.config.n_dims, self.config.n_atoms,
                    self.dictionary_policy)
        if workers == 1:
            outputs = [trial(task) for task in tasks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                outputs = list(executor.map(trial, tasks))
        if not flatten:
            return outputs
        return [row for rows in outputs for row in rows]

    def _detection_rows(self, experiment: str, dictionary: Dictionary, obs: ObservationSet,
                        active: ActiveSet, k: int, novel_std: Optional[float], seed: int) -> List[Dict[str, Any]]:
        rows = []
        for algo in self.config.algorithms:
            prf = best_threshold_f(self.score_atoms(algo, dictionary, obs), active)
            rows.append(self._row(experiment, algo, k, novel_std, self.algorithm_lambda(algo), seed, prf))
        return rows

    @staticmethod
    def _row(experiment: str, algo: str, k: int, novel_std: Optional[float], lam: Optional[float],
             seed: int, prf: PRFResult) -> Dict[str, Any]:
        return {
            "experiment": experiment, "algo": algo, "k": k, "novel_std": novel_std,
            "lambda": lam, "seed": seed, "precision": prf.precision, "recall": prf.recall,
            "f": prf.f_measure, "threshold": prf.threshold,
        }

    def _base_summary(self, name: str) -> Dict[str, Any]:
        return {
            "experiment": name,
            "dictionary_policy": self.dictionary_policy,
            "noise_convention": NOISE_CONVENTION,
            "base_seed": self.config.base_seed,
            "n_trials": self.config.n_trials,
            "config": self.config.to_dict(),
        }

    @staticmethod
    def _detection_summary(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        groups: Dict[Tuple, List[float]] = {}
        for row in rows:
            key = (row["algo"], row["k"], row["novel_std"], row["lambda"])
            groups.setdefault(key, []).append(row["f"])
        conditions = []
        for (algo, k, novel_std, lam), values in groups.items():
            aggregate = aggregate_trials(values)
            conditions.append({
                "algo": algo, "k": k, "novel_std": novel_std, "lambda": lam,
                "mean_f": aggregate.mean, "std_f": aggregate.std, "n": aggregate.n,
            })
        return {"conditions": conditions}

    @staticmethod
    def _density_summary(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        groups: Dict[Tuple, List[Dict[str, Any]]] = {}
        for row in rows:
            groups.setdefault((row["algo"], row["condition"], row["amplitude_std"]), []).append(row)
        conditions = []
        for (algo, condition, std), members in groups.items():
            entry = {"algo": algo, "condition": condition, "amplitude_std": std, "n": len(members)}
            for metric in ("support_fraction", "peak_score", "l1_l2_ratio"):
                entry[f"mean_{metric}"] = float(np.mean([m[metric] for m in members]))
            conditions.append(entry)
        return {"conditions": conditions}

    def _finish(self, name: str, fields: List[str], rows: List[Dict[str, Any]],
                summary: Dict[str, Any]) -> ExperimentResult:
        full_summary = self._base_summary(name)
        full_summary.update(summary)
        result = ExperimentResult(name=name, fields=list(fields), rows=rows, summary=full_summary)
        self.last_result = result
        logger.info("Experiment %s finished: %d rows", name, len(rows))
        return result
