"""
Metrics Export Utility
"""

import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from src.utils.evaluation import DENSITY_CSV_FIELDS, RESULT_CSV_FIELDS


class MetricsExporter:
    """Export benchmark rows, summaries and solver outputs to CSV/JSON"""

    @staticmethod
    def _convert_to_serializable(obj: Any) -> Any:
        """Convert numpy types and other non-serializable types to native Python types"""
        if isinstance(obj, (np.integer, np.floating)):
            return float(obj) if isinstance(obj, np.floating) else int(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, dict):
            return {key: MetricsExporter._convert_to_serializable(value) for key, value in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [MetricsExporter._convert_to_serializable(item) for item in obj]
        elif isinstance(obj, set):
            return sorted(obj)
        else:
            return obj

    @staticmethod
    def _format_cell(value: Any) -> str:
        """Empty for missing values, shortest round-trip repr for floats"""
        if value is None:
            return ""
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if math.isnan(value):
                return ""
            return repr(value)
        return str(value)

    @staticmethod
    def _ensure_parent(filepath: str):
        parent = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(parent, exist_ok=True)

    @staticmethod
    def _export_rows(rows: Iterable[Dict[str, Any]], fields: Sequence[str], filepath: str) -> str:
        MetricsExporter._ensure_parent(filepath)
        with open(filepath, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(fields)
            for row in rows:
                writer.writerow([MetricsExporter._format_cell(row.get(name)) for name in fields])
        return filepath

    @staticmethod
    def export_results_csv(rows: Iterable[Dict[str, Any]], filepath: str) -> str:
        """Detection rows in the results schema"""
        return MetricsExporter._export_rows(rows, RESULT_CSV_FIELDS, filepath)

    @staticmethod
    def export_density_csv(rows: Iterable[Dict[str, Any]], filepath: str) -> str:
        """Representation-density rows of the novel-atom experiment"""
        return MetricsExporter._export_rows(rows, DENSITY_CSV_FIELDS, filepath)

    @staticmethod
    def summary_path(csv_path: str) -> str:
        """results/masking.csv -> results/masking_summary.json"""
        stem, _ = os.path.splitext(csv_path)
        return f"{stem}_summary.json"

    @staticmethod
    def export_summary_json(summary: Dict, filepath: str) -> str:
        """
        Export an experiment summary to JSON

        Keys are sorted and no timestamp is written, so the file is a pure
        function of the experiment inputs.
        """
        MetricsExporter._ensure_parent(filepath)
        serializable = MetricsExporter._convert_to_serializable(summary)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(serializable, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write('\n')
        return filepath

    @staticmethod
    def export_presence_csv(theta: np.ndarray, filepath: str) -> str:
        """One `atom_index,theta` row per atom"""
        MetricsExporter._ensure_parent(filepath)
        with open(filepath, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(["atom_index", "theta"])
            for index, value in enumerate(np.asarray(theta, dtype=np.float64).reshape(-1)):
                writer.writerow([index, f"{value:.17g}"])
        return filepath

    @staticmethod
    def export_coefficients_csv(values: np.ndarray, filepath: str) -> str:
        """
        `atom_index,t,value` listing of an M x T coefficient matrix

        All-zero atom rows are omitted; a row with any nonzero entry is
        written for every t, zeros included.
        """
        values = np.asarray(values, dtype=np.float64)
        MetricsExporter._ensure_parent(filepath)
        with open(filepath, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(["atom_index", "t", "value"])
            for index in np.flatnonzero(np.any(values != 0.0, axis=1)):
                for t, value in enumerate(values[index]):
                    writer.writerow([int(index), t, f"{value:.17g}"])
        return filepath

    @staticmethod
    def read_csv_rows(filepath: str) -> List[Dict[str, str]]:
        """Rows of a CSV written by this class, as dicts of strings"""
        with open(filepath, 'r', newline='', encoding='utf-8') as f:
            return list(csv.DictReader(f))
