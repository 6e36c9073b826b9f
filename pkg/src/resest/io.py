"""JSON model/scenario/result files and CSV tables.

Every file is plain JSON. Matrices are nested lists, row-major. Floats are
written with Python's shortest round-trip repr, so write -> read is exact.

Model file::

    {"A": [[...], ...], "C": [[...], ...], "T": 100}

Scenario config (all fields explicit)::

    {"seed": 0, "process_noise_std": 1.0, "dense_snr_db": 30.0,
     "attack_count": 20, "attack_magnitude_range": [5.0, 50.0],
     "initial_state": [1.0, 0.0]}

Noise realization::

    {"w": [[...]], "v": [[...]], "s": [[...]], "support": [[i, t], ...]}
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .estimator import EstimateResult
from .model import NoiseRealization, ScenarioConfig, SystemModel


def _clean(obj):
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def model_to_dict(model: SystemModel) -> dict:
    return {"A": model.A.tolist(), "C": model.C.tolist(), "T": model.T}


def model_from_dict(d: dict) -> SystemModel:
    return SystemModel(np.array(d["A"], dtype=float), np.array(d["C"], dtype=float), int(d["T"]))


def scenario_to_dict(cfg: ScenarioConfig, model: SystemModel | None = None) -> dict:
    d = asdict(cfg)
    d["attack_magnitude_range"] = list(cfg.attack_magnitude_range)
    if model is not None:
        d["initial_state"] = cfg.x0(model).tolist()
    elif cfg.initial_state is not None:
        d["initial_state"] = list(cfg.initial_state)
    return d


def scenario_from_dict(d: dict) -> ScenarioConfig:
    known = {"seed", "process_noise_std", "dense_snr_db", "attack_count",
             "attack_magnitude_range", "initial_state"}
    extra = set(d) - known
    if extra:
        raise KeyError(f"unknown scenario fields: {sorted(extra)}")
    kw = dict(d)
    if "attack_magnitude_range" in kw:
        kw["attack_magnitude_range"] = tuple(float(x) for x in kw["attack_magnitude_range"])
    if kw.get("initial_state") is not None:
        kw["initial_state"] = tuple(float(x) for x in kw["initial_state"])
    if kw.get("dense_snr_db") in ("inf", "Infinity"):
        kw["dense_snr_db"] = None
    return ScenarioConfig(**kw)


def noise_to_dict(noise: NoiseRealization) -> dict:
    return {
        "w": noise.w.tolist(),
        "v": noise.v.tolist(),
        "s": noise.s.tolist(),
        "support": [list(ij) for ij in noise.support],
    }


def noise_from_dict(d: dict, model: SystemModel | None = None) -> NoiseRealization:
    def mat(key, rows, cols):
        a = np.array(d[key], dtype=float)
        return a.reshape(rows, cols) if a.size == 0 else a

    if model is not None:
        w = mat("w", model.n, model.T - 1)
        v, s = mat("v", model.n_y, model.T), mat("s", model.n_y, model.T)
    else:
        w, v, s = (np.array(d[k], dtype=float) for k in ("w", "v", "s"))
    return NoiseRealization(w, v, s, [tuple(ij) for ij in d.get("support", [])])


def estimate_to_dict(res: EstimateResult, include_trace: bool = False) -> dict:
    d = {
        "estimate": res.estimate.tolist(),
        "objective": res.objective,
        "iterations": res.iterations,
        "primal_residual": res.primal_residual,
        "dual_residual": res.dual_residual,
        "converged": res.converged,
        "polished": res.polished,
        "certificate": asdict(res.certificate),
    }
    if include_trace:
        d["trace"] = res.trace
    return d


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; empty cell for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
