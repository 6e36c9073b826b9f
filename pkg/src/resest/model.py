"""LTI plant, trajectory simulation and seeded attack scenarios.

Arrays follow one convention throughout the package: a state trajectory is an
``(n, T)`` array whose columns are the states ``x_0 ... x_{T-1}``, and a
measurement set is an ``(n_y, T)`` array of outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_RTOL = 1e-9


class DimensionError(ValueError):
    """Raised when an array does not have the shape the model requires."""

    def __init__(self, field_name: str, expected, got):
        self.field = field_name
        super().__init__(f"{field_name}: expected shape {expected}, got {got}")


@dataclass(frozen=True)
class SystemModel:
    """x_{t+1} = A x_t + w_t,  y_t = C x_t + f_t  over the horizon 0..T-1."""

    A: np.ndarray
    C: np.ndarray
    T: int

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        if A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError("A", "(n, n)", A.shape)
        if C.shape[1] != A.shape[0] or C.shape[0] < 1:
            raise DimensionError("C", f"(n_y, {A.shape[0]})", C.shape)
        if int(self.T) < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        object.__setattr__(self, "T", int(self.T))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def with_horizon(self, T: int) -> "SystemModel":
        return SystemModel(self.A, self.C, T)

    def check_trajectory(self, Z, name: str = "Z") -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.shape != (self.n, self.T):
            raise DimensionError(name, (self.n, self.T), Z.shape)
        return Z

    def check_measurements(self, Y, name: str = "Y") -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (self.n_y, self.T):
            raise DimensionError(name, (self.n_y, self.T), Y.shape)
        return Y


def reference_system(T: int = 100) -> SystemModel:
    """Two-state, single-sensor plant used in the simulation study."""
    A = np.array([[-0.11, -0.34], [-0.34, 0.46]])
    C = np.array([[1.4, -0.94]])
    return SystemModel(A, C, T)


@dataclass
class NoiseRealization:
    """Process noise ``w`` (n, T-1), dense noise ``v`` and sparse attack ``s`` (n_y, T).

    ``support`` lists the ``(i, t)`` entries where the attack may be nonzero;
    the total measurement noise is ``f = v + s``.
    """

    w: np.ndarray
    v: np.ndarray
    s: np.ndarray
    support: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.support = sorted((int(i), int(t)) for i, t in self.support)
        mask = np.zeros(self.s.shape, dtype=bool)
        for i, t in self.support:
            mask[i, t] = True
        if np.any(self.s[~mask] != 0.0):
            raise ValueError("s has nonzero entries outside its declared support")

    @property
    def f(self) -> np.ndarray:
        return self.v + self.s

    def check(self, model: SystemModel) -> None:
        if self.w.shape != (model.n, model.T - 1):
            raise DimensionError("noise.w", (model.n, model.T - 1), self.w.shape)
        if self.v.shape != (model.n_y, model.T):
            raise DimensionError("noise.v", (model.n_y, model.T), self.v.shape)
        if self.s.shape != (model.n_y, model.T):
            raise DimensionError("noise.s", (model.n_y, model.T), self.s.shape)

    @classmethod
    def zeros(cls, model: SystemModel) -> "NoiseRealization":
        return cls(
            np.zeros((model.n, model.T - 1)),
            np.zeros((model.n_y, model.T)),
            np.zeros((model.n_y, model.T)),
        )

    def scaled_attack(self, factor: float) -> "NoiseRealization":
        """Same realization with the attack values multiplied by ``factor``."""
        return NoiseRealization(self.w.copy(), self.v.copy(), self.s * factor, list(self.support))

    def without_attack(self) -> "NoiseRealization":
        return NoiseRealization(self.w.copy(), self.v.copy(), np.zeros_like(self.s), [])


@dataclass
class ScenarioConfig:
    seed: int = 0
    process_noise_std: float = 1.0
    # None means no dense measurement noise
    dense_snr_db: float | None = 30.0
    attack_count: int = 20
    attack_magnitude_range: tuple[float, float] = (5.0, 50.0)
    initial_state: tuple[float, ...] | None = None

    def validate(self, model: SystemModel) -> None:
        if self.process_noise_std < 0:
            raise ValueError("process_noise_std must be >= 0")
        if self.attack_count < 0:
            raise ValueError("attack_count must be >= 0")
        if self.attack_count > model.n_y * model.T:
            raise ValueError(
                f"attack_count={self.attack_count} exceeds n_y*T={model.n_y * model.T}"
            )
        low, high = self.attack_magnitude_range
        if not 0 < low <= high:
            raise ValueError("attack_magnitude_range must satisfy 0 < low <= high")
        if self.initial_state is not None and len(self.initial_state) != model.n:
            raise DimensionError("initial_state", (model.n,), (len(self.initial_state),))

    def x0(self, model: SystemModel) -> np.ndarray:
        if self.initial_state is None:
            x0 = np.zeros(model.n)
            x0[0] = 1.0
            return x0
        return np.asarray(self.initial_state, dtype=float)


def simulate(model: SystemModel, noise: NoiseRealization, x0) -> tuple[np.ndarray, np.ndarray]:
    """Propagate the plant and return ``(X, Y)``."""
    noise.check(model)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (model.n,):
        raise DimensionError("x0", (model.n,), x0.shape)
    X = np.empty((model.n, model.T))
    X[:, 0] = x0
    for t in range(model.T - 1):
        X[:, t + 1] = model.A @ X[:, t] + noise.w[:, t]
    Y = model.C @ X + noise.v + noise.s
    return X, Y


def observability_matrix(model: SystemModel) -> np.ndarray:
    blocks = [model.C]
    for _ in range(model.n - 1):
        blocks.append(blocks[-1] @ model.A)
    return np.vstack(blocks)


def is_observable(model: SystemModel, rtol: float = RANK_RTOL) -> bool:
    sv = np.linalg.svd(observability_matrix(model), compute_uv=False)
    if sv[0] == 0.0:
        return False
    return int(np.sum(sv > rtol * sv[0])) == model.n


def generate_scenario(model: SystemModel, cfg: ScenarioConfig) -> NoiseRealization:
    """Draw a seeded noise realization.

    The generator is numpy's PCG64 seeded with ``cfg.seed``. Draw order is
    fixed: process noise, dense noise, attack support, attack signs, attack
    magnitudes. The dense noise is rescaled so that the realized ratio of
    clean-output power to noise power equals ``dense_snr_db`` exactly.
    """
    cfg.validate(model)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n, n_y, T = model.n, model.n_y, model.T

    w = cfg.process_noise_std * rng.standard_normal((n, T - 1))
    raw_v = rng.standard_normal((n_y, T))

    v = np.zeros((n_y, T))
    if cfg.dense_snr_db is not None and np.isfinite(cfg.dense_snr_db):
        X, _ = simulate(model, NoiseRealization(w, v, np.zeros((n_y, T))), cfg.x0(model))
        signal_power = float(np.sum((model.C @ X) ** 2))
        raw_power = float(np.sum(raw_v**2))
        if signal_power > 0 and raw_power > 0:
            target = signal_power / 10.0 ** (cfg.dense_snr_db / 10.0)
            v = raw_v * np.sqrt(target / raw_power)

    s = np.zeros((n_y, T))
    flat = rng.choice(n_y * T, size=cfg.attack_count, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=cfg.attack_count)
    low, high = cfg.attack_magnitude_range
    mags = rng.uniform(low, high, size=cfg.attack_count)
    support = []
    for k, idx in enumerate(flat):
        t, i = divmod(int(idx), n_y)
        s[i, t] = signs[k] * mags[k]
        support.append((i, t))
    return NoiseRealization(w, v, s, support)


def realized_snr_db(model: SystemModel, X: np.ndarray, v: np.ndarray) -> float:
    return 10.0 * np.log10(np.sum((model.C @ X) ** 2) / np.sum(np.asarray(v) ** 2))
