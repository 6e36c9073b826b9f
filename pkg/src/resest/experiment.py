"""Experiment specs, the end-to-end ``run`` and parameter ``sweep``."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import resilience_report
from .baseline import GaussianPrior, NoiseCovariances, kalman_filter, rts_smooth
from .estimator import EstimatorConfig, evaluate_F, solve, trajectory_norm
from .model import (
    NoiseRealization,
    ScenarioConfig,
    SystemModel,
    generate_scenario,
    reference_system,
    simulate,
)
from .svg import write_line_chart

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3
ARTIFACTS = ("states", "errors", "metrics", "report", "plots")
SWEEP_VARIABLES = ("attack_count", "attack_scale", "lam", "T")
COV_FLOOR = 1e-6


class SpecError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class BaselineConfig:
    prior_mean: list[float] | None = None
    prior_cov_scale: float = 10.0
    # None: derived from the scenario (generative process variance, realized dense variance)
    process_var: float | None = None
    measurement_var: float | None = None


@dataclass
class AnalysisBudget:
    enabled: bool = True
    samples: int = 10_000
    restarts: int = 50
    steps: int = 500
    seed: int = 0
    r_max: int | None = None
    constrained: bool = False


@dataclass
class ExperimentSpec:
    model: SystemModel = field(default_factory=reference_system)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    analysis: AnalysisBudget = field(default_factory=AnalysisBudget)
    output_dir: str = "out"
    artifacts: tuple[str, ...] = ARTIFACTS

    def to_dict(self) -> dict:
        return {
            "model": io.model_to_dict(self.model),
            "scenario": io.scenario_to_dict(self.scenario),
            "estimator": asdict(self.estimator),
            "baseline": asdict(self.baseline),
            "analysis": asdict(self.analysis),
            "output_dir": self.output_dir,
            "artifacts": list(self.artifacts),
        }


def _build(path: str, cls, data):
    if not isinstance(data, dict):
        raise SpecError(path, "expected an object")
    try:
        return cls(**data)
    except TypeError as exc:
        raise SpecError(path, str(exc)) from exc
    except ValueError as exc:
        raise SpecError(path, str(exc)) from exc


def spec_from_dict(d: dict, base_dir: str | Path = ".") -> ExperimentSpec:
    """Validate a spec dictionary; every failure names its field path."""
    if not isinstance(d, dict):
        raise SpecError("<root>", "spec must be a JSON object")
    unknown = set(d) - {"model", "model_file", "scenario", "estimator", "baseline",
                        "analysis", "output_dir", "artifacts"}
    if unknown:
        raise SpecError("<root>", f"unknown fields {sorted(unknown)}")
    if "model_file" in d:
        mpath = Path(base_dir) / d["model_file"]
        if not mpath.is_file():
            raise SpecError("model_file", f"file not found: {mpath}")
        mdict = io.read_json(mpath)
    else:
        mdict = d.get("model")
    if mdict is None:
        model = reference_system()
    else:
        try:
            model = io.model_from_dict(mdict)
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError("model", str(exc)) from exc

    try:
        scenario = io.scenario_from_dict(d.get("scenario", {}))
        scenario.validate(model)
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError("scenario", str(exc)) from exc
    est = _build("estimator", EstimatorConfig, d.get("estimator", {}))
    base = _build("baseline", BaselineConfig, d.get("baseline", {}))
    ana = _build("analysis", AnalysisBudget, d.get("analysis", {}))
    arts = tuple(d.get("artifacts", ARTIFACTS))
    bad = [a for a in arts if a not in ARTIFACTS]
    if bad:
        raise SpecError("artifacts", f"unknown artifacts {bad}; choose from {list(ARTIFACTS)}")
    return ExperimentSpec(model, scenario, est, base, ana, str(d.get("output_dir", "out")), arts)


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError("--spec", f"file not found: {path}")
    try:
        d = io.read_json(path)
    except ValueError as exc:
        raise SpecError("--spec", f"invalid JSON: {exc}") from exc
    return spec_from_dict(d, path.parent)


# ---------------------------------------------------------------------------

@dataclass
class MetricsRow:
    estimator: str
    rmse_components: list[float]
    rmse: float
    error_norm: float
    max_step_error: float
    bound: float | None
    seconds: float = 0.0

    def csv_row(self) -> list:
        return [self.estimator, *self.rmse_components, self.rmse, self.error_norm,
                self.max_step_error, self.bound]

    @staticmethod
    def csv_header(n: int) -> list[str]:
        return ["estimator", *[f"rmse_x{k + 1}" for k in range(n)], "rmse", "error_norm",
                "max_step_error", "bound"]


def metrics(name: str, Xhat, X, norm: str = "fro", bound=None, seconds: float = 0.0) -> MetricsRow:
    E = np.asarray(Xhat) - np.asarray(X)
    return MetricsRow(
        name,
        [float(v) for v in np.sqrt(np.mean(E**2, axis=1))],
        float(np.sqrt(np.mean(E**2))),
        trajectory_norm(E, norm),
        float(np.max(np.linalg.norm(E, axis=0))),
        bound,
        seconds,
    )


@dataclass
class Outcome:
    """Everything computed for one scenario realization."""

    X: np.ndarray
    Y: np.ndarray
    noise: NoiseRealization
    resilient: object
    smoother: np.ndarray
    rows: list[MetricsRow]


def baseline_covariances(spec: ExperimentSpec, noise: NoiseRealization) -> NoiseCovariances:
    """Q from the generative process variance, R from the realized dense noise.

    The smoother is not informed about the attack. Both are floored at
    ``COV_FLOOR`` so noise-free scenarios still yield a valid filter.
    """
    n, n_y = spec.model.n, spec.model.n_y
    q = spec.baseline.process_var
    if q is None:
        q = spec.scenario.process_noise_std**2
    r = spec.baseline.measurement_var
    if r is None:
        r = float(np.mean(noise.v**2))
    return NoiseCovariances(max(q, COV_FLOOR) * np.eye(n), max(r, COV_FLOOR) * np.eye(n_y))


def baseline_prior(spec: ExperimentSpec) -> GaussianPrior:
    n = spec.model.n
    mean = np.zeros(n) if spec.baseline.prior_mean is None else np.asarray(spec.baseline.prior_mean, float)
    return GaussianPrior(mean, spec.baseline.prior_cov_scale * np.eye(n))


def evaluate(spec: ExperimentSpec, noise: NoiseRealization, bound=None) -> Outcome:
    model = spec.model
    X, Y = simulate(model, noise, spec.scenario.x0(model))
    t0 = time.perf_counter()
    res = solve(model, Y, spec.estimator)
    t_res = time.perf_counter() - t0
    t0 = time.perf_counter()
    filt = kalman_filter(model, Y, baseline_prior(spec), baseline_covariances(spec, noise))
    sm = rts_smooth(model, filt).x_smooth
    t_sm = time.perf_counter() - t0
    norm = spec.estimator.norm
    rows = [
        metrics("resilient", res.estimate, X, norm, bound, t_res),
        metrics("rts_smoother", sm, X, norm, None, t_sm),
    ]
    return Outcome(X, Y, noise, res, sm, rows)


def _states_rows(out: Outcome):
    n, T = out.X.shape
    for t in range(T):
        yield [t, *out.X[:, t], *out.resilient.estimate[:, t], *out.smoother[:, t], *out.Y[:, t]]


def _plots(spec: ExperimentSpec, clean: Outcome, attacked: Outcome, out_dir: Path) -> None:
    n, T = clean.X.shape
    t = np.arange(T)

    def state_panels(o, with_smoother):
        panels = []
        for k in range(n):
            series = [(f"x{k + 1} true", t, o.X[k], False), (f"x{k + 1} resilient", t, o.resilient.estimate[k], True)]
            if with_smoother:
                series.append((f"x{k + 1} smoother", t, o.smoother[k], True))
            panels.append((f"state x{k + 1}", series))
        return panels

    write_line_chart(out_dir / "fig1.svg", state_panels(clean, True),
                     "States and estimates without sparse noise")
    panels = state_panels(attacked, True)
    y_clean = spec.model.C @ attacked.X + attacked.noise.v
    for i in range(spec.model.n_y):
        panels.append((f"output y{i + 1}", [(f"y{i + 1} measured", t, attacked.Y[i], False),
                                            (f"y{i + 1} uncorrupted", t, y_clean[i], True)]))
    write_line_chart(out_dir / "fig2.svg", panels, "States, estimates and output with sparse noise")
    write_line_chart(out_dir / "fig3.svg", state_panels(attacked, False),
                     "Resilient estimate with sparse noise")


@dataclass
class RunResult:
    exit_code: int
    outcome: Outcome
    report: dict
    files: list[Path]


def run(spec: ExperimentSpec, out_dir=None) -> RunResult:
    """Generate the scenario, run both estimators, analyze, and write artifacts."""
    out_dir = Path(out_dir or spec.output_dir)
    model = spec.model
    noise = generate_scenario(model, spec.scenario)

    report_dict = None
    bound = None
    if spec.analysis.enabled:
        rep = resilience_report(
            model, noise, spec.estimator.lam, spec.estimator.norm,
            spec.analysis.samples, spec.analysis.restarts, spec.analysis.steps,
            spec.analysis.seed, spec.analysis.r_max, spec.analysis.constrained,
        )
        report_dict = rep.to_dict()
        bound = rep.bound

    attacked = evaluate(spec, noise, bound)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    n, n_y = model.n, model.n_y

    if "states" in spec.artifacts:
        header = (["t"] + [f"true_x{k + 1}" for k in range(n)] + [f"resilient_x{k + 1}" for k in range(n)]
                  + [f"smoother_x{k + 1}" for k in range(n)] + [f"y{i + 1}" for i in range(n_y)])
        io.write_csv(out_dir / "states.csv", header, _states_rows(attacked))
        files.append(out_dir / "states.csv")
    if "errors" in spec.artifacts:
        E_r = attacked.resilient.estimate - attacked.X
        E_s = attacked.smoother - attacked.X
        header = (["t"] + [f"resilient_e{k + 1}" for k in range(n)] + [f"smoother_e{k + 1}" for k in range(n)]
                  + ["resilient_norm", "smoother_norm"])
        rows = ([t, *E_r[:, t], *E_s[:, t], np.linalg.norm(E_r[:, t]), np.linalg.norm(E_s[:, t])]
                for t in range(model.T))
        io.write_csv(out_dir / "errors.csv", header, rows)
        files.append(out_dir / "errors.csv")
    if "metrics" in spec.artifacts:
        io.write_csv(out_dir / "metrics.csv", MetricsRow.csv_header(n), [r.csv_row() for r in attacked.rows])
        files.append(out_dir / "metrics.csv")
    if "plots" in spec.artifacts:
        clean = evaluate(spec, noise.without_attack(), None)
        _plots(spec, clean, attacked, out_dir)
        files += [out_dir / f"fig{k}.svg" for k in (1, 2, 3)]

    res = attacked.resilient
    summary = {
        "spec": spec.to_dict(),
        "solver": {
            "converged": res.converged,
            "iterations": res.iterations,
            "objective": res.objective,
            "objective_true": evaluate_F(model, attacked.Y, attacked.X, spec.estimator.lam),
            "certificate": {"residual": res.certificate.subgradient_residual,
                            "satisfied": res.certificate.satisfied},
        },
        "metrics": [
            {"estimator": r.estimator, "rmse": r.rmse, "rmse_components": r.rmse_components,
             "error_norm": r.error_norm, "max_step_error": r.max_step_error, "bound": r.bound}
            for r in attacked.rows
        ],
        "resilience": report_dict,
        "warnings": [],
    }
    if report_dict is not None:
        ana = report_dict
        io.write_csv(out_dir / "pr_table.csv", ["r", "pr_hat"], sorted((int(r), p) for r, p in ana["pr_table"].items()))
        io.write_csv(out_dir / "beta_curve.csv", ["epsilon", "r", "beta", "bound"],
                     [[row["epsilon"], row["r"], row["beta"], row["bound"]] for row in ana["beta_curve"]])
        files += [out_dir / "pr_table.csv", out_dir / "beta_curve.csv"]
    exit_code = EXIT_OK
    if not res.certificate.satisfied:
        summary["warnings"].append("resilient solver did not reach a certified optimum")
        exit_code = EXIT_NONCONVERGED
    if "report" in spec.artifacts:
        io.write_json(out_dir / "report.json", summary)
        files.append(out_dir / "report.json")
    return RunResult(exit_code, attacked, summary, files)


def _apply(spec: ExperimentSpec, variable: str, value):
    """Spec and attack scale factor for one sweep point."""
    if variable == "attack_count":
        return replace(spec, scenario=replace(spec.scenario, attack_count=int(value))), 1.0
    if variable == "attack_scale":
        return spec, float(value)
    if variable == "lam":
        return replace(spec, estimator=replace(spec.estimator, lam=float(value))), 1.0
    if variable == "T":
        return replace(spec, model=spec.model.with_horizon(int(value))), 1.0
    raise SpecError("sweep.variable", f"unknown variable {variable!r}; choose from {list(SWEEP_VARIABLES)}")


def sweep(spec: ExperimentSpec, variable: str, values, out_dir=None) -> list[list]:
    """One metrics row per (value, estimator); every point reuses the same seed."""
    if variable not in SWEEP_VARIABLES:
        raise SpecError("sweep.variable", f"unknown variable {variable!r}; choose from {list(SWEEP_VARIABLES)}")
    rows = []
    for value in values:
        pspec, scale = _apply(spec, variable, value)
        pspec.scenario.validate(pspec.model)
        noise = generate_scenario(pspec.model, pspec.scenario)
        if scale != 1.0:
            noise = noise.scaled_attack(scale)
        out = evaluate(pspec, noise)
        for r in out.rows:
            rows.append([variable, value, *r.csv_row()])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        header = ["variable", "value"] + MetricsRow.csv_header(spec.model.n)
        io.write_csv(out_dir / "sweep.csv", header, rows)
    return rows
