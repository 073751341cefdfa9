import copy
import hashlib
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from src.utils.logger import DEFAULT_CONFIG_PATH

DEFAULT_CONFIG: Dict[str, Any] = {
    "logging": {
        "level": "INFO",
        "file_path": "logs/ldlr_sda.log",
        "backup_count": 30
    },
    "numerics": {
        "state_cap": 2 ** 22,
        "sda_q_cap": 10 ** 9,
        "exact_binomial_max_m": 60,
        "restriction_enum_max_n": 12,
        "product_sda_exact_max": 20,
        "certify_tol": 1e-9,
        "bootstrap_resamples": 200,
        "pair_chunk_rows": 256
    },
    "seeds": {
        "default": 7
    },
    "suites": {
        "identity_corpus_size": 100,
        "fact_corpus_size": 200,
        "counterexample_n": 256,
        "ggm_monte_carlo_budget": 2000
    },
    "sq": {
        "query_cap": 100000,
        "trials": 1000
    },
    "cloning": {
        "trials": 100000,
        "gof_alpha": 0.001
    },
    "output": {
        "directory": "results"
    }
}


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load the JSON configuration, filling in defaults for missing keys
    """
    path = config_path or DEFAULT_CONFIG_PATH
    loaded = load_json(path)
    if loaded is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    return _merge(DEFAULT_CONFIG, loaded)


def convert_numpy_types(obj):
    """
    Recursively turn numpy scalars/arrays into plain Python objects so that json can serialize them
    """
    if isinstance(obj, dict):
        return {str(k): convert_numpy_types(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_numpy_types(item) for item in obj]
    elif isinstance(obj, np.ndarray):
        return convert_numpy_types(obj.tolist())
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        obj = float(obj)
    elif isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def save_json(data, file_path):
    """
    Save data as JSON
    """
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(file_path, 'w') as f:
        json.dump(convert_numpy_types(data), f, indent=4, sort_keys=True)


def load_json(file_path):
    """
    Load data from JSON
    """
    if not os.path.exists(file_path):
        return None

    with open(file_path, 'r') as f:
        return json.load(f)


def records_to_frame(records: Iterable[Dict[str, Any]], columns: Optional[List[str]] = None) -> pd.DataFrame:
    df = pd.DataFrame([convert_numpy_types(r) for r in records])
    if columns is not None:
        for column in columns:
            if column not in df.columns:
                df[column] = ""
        extra = [c for c in df.columns if c not in columns]
        df = df[list(columns) + extra]
    return df


def save_records_to_csv(records: Iterable[Dict[str, Any]], file_path: str,
                        columns: Optional[List[str]] = None) -> pd.DataFrame:
    """
    Save a list of flat records to CSV; float columns are written at 17 significant digits
    """
    df = records_to_frame(records, columns)
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(file_path, index=False, float_format="%.17g")
    return df


def spec_hash(spec: Any) -> str:
    """
    Stable hash of a JSON-compatible specification (key order independent)
    """
    canonical = json.dumps(convert_numpy_types(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def generate_problem_id(family: str, params: Dict[str, Any]) -> str:
    """
    Short human-readable id: family name plus sorted parameters
    """
    parts = [family]
    for key in sorted(params):
        if key == "family":
            continue
        value = params[key]
        if isinstance(value, float):
            value = format(value, ".6g")
        parts.append(f"{key}={value}")
    return "|".join(parts)
