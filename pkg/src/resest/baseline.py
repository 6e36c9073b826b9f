"""Kalman filter and Rauch-Tung-Striebel smoother used as the comparison baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemModel


@dataclass
class GaussianPrior:
    """Belief on x_0 before y_0 is processed."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("prior covariance must be n x n")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12, rtol=0):
            raise ValueError("prior covariance must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -1e-12:
            raise ValueError("prior covariance must be positive semidefinite")

    @classmethod
    def default(cls, n: int) -> "GaussianPrior":
        return cls(np.zeros(n), 10.0 * np.eye(n))


@dataclass
class NoiseCovariances:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M in (("Q", self.Q), ("R", self.R)):
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12, rtol=0):
                raise ValueError(f"{name} must be square and symmetric")
            if np.linalg.eigvalsh(M).min() <= 0:
                raise ValueError(f"{name} must be positive definite")


@dataclass
class FilterResult:
    x_filt: np.ndarray  # (n, T)
    P_filt: np.ndarray  # (T, n, n)
    x_pred: np.ndarray
    P_pred: np.ndarray


@dataclass
class SmootherResult:
    x_smooth: np.ndarray
    P_smooth: np.ndarray
    gains: np.ndarray


def kalman_filter(model: SystemModel, Y, prior: GaussianPrior, cov: NoiseCovariances) -> FilterResult:
    """Forward pass; covariance updates use the Joseph form."""
    Y = model.check_measurements(Y)
    A, C = model.A, model.C
    n, T = model.n, model.T
    if prior.mean.shape != (n,) or cov.Q.shape != (n, n) or cov.R.shape != (model.n_y, model.n_y):
        raise ValueError("prior / covariance dimensions do not match the model")
    I = np.eye(n)
    x_pred = np.empty((n, T))
    P_pred = np.empty((T, n, n))
    x_filt = np.empty((n, T))
    P_filt = np.empty((T, n, n))
    x, P = prior.mean.copy(), prior.cov.copy()
    for t in range(T):
        if t > 0:
            x = A @ x
            P = A @ P @ A.T + cov.Q
            P = 0.5 * (P + P.T)
        x_pred[:, t], P_pred[t] = x, P
        S = C @ P @ C.T + cov.R
        if np.linalg.cond(S) > 1e14:
            raise np.linalg.LinAlgError(f"innovation covariance singular at t={t}")
        K = np.linalg.solve(S, C @ P).T
        x = x + K @ (Y[:, t] - C @ x)
        IKC = I - K @ C
        P = IKC @ P @ IKC.T + K @ cov.R @ K.T
        P = 0.5 * (P + P.T)
        x_filt[:, t], P_filt[t] = x, P
    return FilterResult(x_filt, P_filt, x_pred, P_pred)


def rts_smooth(model: SystemModel, filt: FilterResult) -> SmootherResult:
    """Backward pass with gain G_t = P_{t|t} A' P_{t+1|t}^{-1}."""
    A = model.A
    n, T = filt.x_filt.shape
    xs = filt.x_filt.copy()
    Ps = filt.P_filt.copy()
    G = np.zeros((T, n, n))
    for t in range(T - 2, -1, -1):
        Pp = filt.P_pred[t + 1]
        if np.linalg.cond(Pp) > 1e14:
            raise np.linalg.LinAlgError(f"predicted covariance singular at t={t + 1}")
        G[t] = np.linalg.solve(Pp, A @ filt.P_filt[t]).T
        xs[:, t] = filt.x_filt[:, t] + G[t] @ (xs[:, t + 1] - filt.x_pred[:, t + 1])
        P = filt.P_filt[t] + G[t] @ (Ps[t + 1] - Pp) @ G[t].T
        Ps[t] = 0.5 * (P + P.T)
    return SmootherResult(xs, Ps, G)


def smooth(model: SystemModel, Y, prior: GaussianPrior | None = None, cov: NoiseCovariances | None = None):
    prior = prior or GaussianPrior.default(model.n)
    cov = cov or NoiseCovariances(np.eye(model.n), np.eye(model.n_y))
    filt = kalman_filter(model, Y, prior, cov)
    return filt, rts_smooth(model, filt)
