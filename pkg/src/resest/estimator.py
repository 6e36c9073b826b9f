"""Resilient batch estimator: minimize

    F(Z) = lam * sum_t ||z_{t+1} - A z_t||_2^2 + sum_t ||y_t - C z_t||_1

over state trajectories Z, by ADMM on the splitting R = Y - C Z followed by an
active-set polish of the piecewise-quadratic optimality system.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import lsq_linear

from .model import SystemModel, is_observable

log = logging.getLogger(__name__)


class NotObservableError(ValueError):
    pass


@dataclass
class EstimatorConfig:
    lam: float = 0.2
    penalty: float = 1.0
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_iter: int = 100_000
    adaptive_penalty: bool = True
    polish: bool = True
    cert_tol: float = 1e-6
    norm: str = "fro"
    verbose: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.penalty <= 0:
            raise ValueError("penalty must be > 0")
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.cert_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.norm not in ("fro", "maxcol"):
            raise ValueError("norm must be 'fro' or 'maxcol'")


@dataclass
class OptimalityCertificate:
    subgradient_residual: float
    tolerance: float
    satisfied: bool


@dataclass
class EstimateResult:
    estimate: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    polished: bool
    certificate: OptimalityCertificate
    trace: list[dict] = field(default_factory=list)


def soft_threshold(x, kappa):
    """Elementwise sign(x) * max(|x| - kappa, 0)."""
    if np.any(np.asarray(kappa) < 0):
        raise ValueError("kappa must be >= 0")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - kappa, 0.0)
    return float(out) if out.ndim == 0 else out


def dynamics_residual(A: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return Z[:, 1:] - A @ Z[:, :-1]


def evaluate_F(model: SystemModel, Y, Z, lam: float) -> float:
    Z = model.check_trajectory(Z)
    Y = model.check_measurements(Y)
    quad = float(np.sum(dynamics_residual(model.A, Z) ** 2))
    l1 = float(np.sum(np.abs(Y - model.C @ Z)))
    return lam * quad + l1


def _quad_gradient(A: np.ndarray, Z: np.ndarray, lam: float) -> np.ndarray:
    """Gradient of lam * sum ||z_{t+1} - A z_t||^2 with respect to Z."""
    d = dynamics_residual(A, Z)
    G = np.zeros_like(Z)
    G[:, 1:] += 2.0 * lam * d
    G[:, :-1] -= 2.0 * lam * (A.T @ d)
    return G


def _dynamics_operator(model: SystemModel) -> sp.csr_matrix:
    """Sparse D with (D z)_t = z_{t+1} - A z_t for z stacked time-major."""
    n, T = model.n, model.T
    shift = sp.eye(T - 1, T, k=1)
    lag = sp.eye(T - 1, T)
    return (sp.kron(shift, sp.eye(n)) - sp.kron(lag, sp.csr_matrix(model.A))).tocsr()


def _banded_upper(M: sp.spmatrix, bandwidth: int) -> np.ndarray:
    N = M.shape[0]
    ab = np.zeros((bandwidth + 1, N))
    M = M.tocsr()
    for k in range(bandwidth + 1):
        ab[bandwidth - k, k:] = M.diagonal(k)
    return ab


class _ZSolver:
    """Factorization of lam*2*D'D + rho*(I kron C'C), block tridiagonal in time."""

    def __init__(self, model: SystemModel, lam: float, rho: float):
        self.model = model
        n, T = model.n, model.T
        self.bw = 2 * n - 1
        D = _dynamics_operator(model)
        hess = 2.0 * lam * (D.T @ D) + rho * sp.kron(sp.eye(T), sp.csr_matrix(model.C.T @ model.C))
        try:
            self.cb = sla.cholesky_banded(_banded_upper(hess, self.bw), lower=False)
        except np.linalg.LinAlgError as exc:
            raise NotObservableError(
                "Z-update system is singular; the trajectory is not observable over this horizon"
            ) from exc
        self.rho = rho

    def solve(self, B: np.ndarray) -> np.ndarray:
        rhs = self.rho * (self.model.C.T @ B)
        z = sla.cho_solve_banded((self.cb, False), rhs.T.ravel())
        return z.reshape(self.model.T, self.model.n).T


def solve(model: SystemModel, Y, cfg: EstimatorConfig | None = None) -> EstimateResult:
    """Compute an element of argmin F."""
    cfg = cfg or EstimatorConfig()
    Y = model.check_measurements(Y)
    if not is_observable(model):
        raise NotObservableError("(A, C) is not observable; the minimizer set may be unbounded")

    A, C, lam = model.A, model.C, cfg.lam
    n, n_y, T = model.n, model.n_y, model.T
    rho = cfg.penalty
    zsolver = _ZSolver(model, lam, rho)

    Z = np.zeros((n, T))
    R = Y.copy()
    U = np.zeros_like(Y)
    y_norm = np.linalg.norm(Y)
    trace = []
    converged = False
    pri = dual = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        Z = zsolver.solve(Y - R - U)
        CZ = C @ Z
        R_old = R
        R = soft_threshold(Y - CZ - U, 1.0 / rho)
        U = U + CZ + R - Y

        pri = np.linalg.norm(CZ + R - Y)
        dual = rho * np.linalg.norm(C.T @ (R - R_old))
        eps_pri = np.sqrt(n_y * T) * cfg.abs_tol + cfg.rel_tol * max(
            np.linalg.norm(CZ), np.linalg.norm(R), y_norm
        )
        eps_dual = np.sqrt(n * T) * cfg.abs_tol + cfg.rel_tol * rho * np.linalg.norm(C.T @ U)
        if cfg.verbose or k == 1:
            trace.append(
                {"iteration": k, "objective": evaluate_F(model, Y, Z, lam), "primal": pri, "dual": dual, "rho": rho}
            )
        if pri <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if cfg.adaptive_penalty and k % 10 == 0:
            if pri > 10.0 * dual:
                rho *= 2.0
                U /= 2.0
                zsolver = _ZSolver(model, lam, rho)
            elif dual > 10.0 * pri:
                rho /= 2.0
                U *= 2.0
                zsolver = _ZSolver(model, lam, rho)

    Zhat, polished = Z, False
    if cfg.polish:
        Zp = polish(model, Y, lam, zero_set=(R == 0.0), signs=np.sign(R))
        if Zp is not None and evaluate_F(model, Y, Zp, lam) <= evaluate_F(model, Y, Z, lam):
            Zhat, polished = Zp, True

    obj = evaluate_F(model, Y, Zhat, lam)
    cert = certify(model, Y, Zhat, lam, cfg.cert_tol)
    if cfg.verbose:
        trace.append({"iteration": k, "objective": obj, "primal": pri, "dual": dual, "rho": rho})
    if not converged:
        log.warning("ADMM stopped at max_iter=%d (primal %.3g, dual %.3g)", cfg.max_iter, pri, dual)
    return EstimateResult(Zhat, obj, k, float(pri), float(dual), converged, polished, cert, trace)


def _kkt_solve(model, Y, lam, zero_set, signs, DtD):
    n, T = model.n, model.T
    C = model.C
    idx = np.argwhere(zero_set)  # rows (i, t)
    m = len(idx)
    nT = n * T
    lin = (C.T @ np.where(zero_set, 0.0, signs)).T.ravel()
    rows = np.repeat(np.arange(m), n)
    cols = (idx[:, 1, None] * n + np.arange(n)[None, :]).ravel()
    vals = C[idx[:, 0]].ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(m, nT))
    K = sp.bmat([[2.0 * lam * DtD, G.T], [G, None]], format="csc")
    rhs = np.concatenate([lin, Y[zero_set.nonzero()] if m else np.zeros(0)])
    # zero_set.nonzero() and argwhere share row-major order
    sol = None
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            sol = spla.spsolve(K, rhs)
        if not np.all(np.isfinite(sol)) or np.linalg.norm(K @ sol - rhs) > 1e-8 * (1 + np.linalg.norm(rhs)):
            sol = None
    except (RuntimeError, ValueError):
        sol = None
    if sol is None:
        sol = np.linalg.lstsq(K.toarray(), rhs, rcond=None)[0]
    Z = sol[:nT].reshape(T, n).T
    nu = np.zeros(zero_set.shape)
    nu[zero_set] = sol[nT:]
    return Z, nu


def polish(model: SystemModel, Y, lam: float, zero_set, signs, max_rounds: int = 50):
    """Active-set refinement from a guessed set of zero residuals and residual signs.

    For a fixed guess the optimality system is an equality-constrained QP; the
    guess is corrected wherever a multiplier leaves [-1, 1] or a residual
    flips sign. Returns the best trajectory found, or None.
    """
    Y = model.check_measurements(Y)
    zero_set = np.array(zero_set, dtype=bool)
    signs = np.array(signs, dtype=float)
    signs[~zero_set & (signs == 0)] = 1.0
    DtD = (lambda D: (D.T @ D).tocsr())(_dynamics_operator(model))
    best, best_F = None, np.inf
    seen = set()
    for _ in range(max_rounds):
        key = (zero_set.tobytes(), signs.tobytes())
        if key in seen:
            break
        seen.add(key)
        Z, nu = _kkt_solve(model, Y, lam, zero_set, signs, DtD)
        F = evaluate_F(model, Y, Z, lam)
        if F < best_F:
            best, best_F = Z, F
        resid = Y - model.C @ Z
        gamma = -nu  # subgradient weight carried by each zero residual
        leave = zero_set & (np.abs(gamma) > 1.0 + 1e-9)
        flipped = ~zero_set & (np.sign(resid) != signs)
        if not leave.any() and not flipped.any():
            break
        zero_set = (zero_set & ~leave) | flipped
        signs = np.where(leave, np.sign(gamma), signs)
    return best


def certify(model: SystemModel, Y, Xhat, lam: float, tol: float) -> OptimalityCertificate:
    """Norm of the smallest constructible subgradient of F at ``Xhat``."""
    Y = model.check_measurements(Y)
    Xhat = model.check_trajectory(Xhat, "Xhat")
    C = model.C
    resid = Y - C @ Xhat
    active = np.abs(resid) > 1e-6 * (1.0 + np.abs(Y))
    # d/dz_t |y_it - c_i'z_t| = -sign(resid) c_i on active entries
    g = np.where(active, -np.sign(resid), 0.0)
    base = _quad_gradient(model.A, Xhat, lam) + C.T @ g
    free = np.argwhere(~active)
    if len(free):
        n, T = model.n, model.T
        M = np.zeros((n * T, len(free)))
        for k, (i, t) in enumerate(free):
            M[t * n:(t + 1) * n, k] = C[i]
        b = -base.T.ravel()
        res = lsq_linear(M, b, bounds=(-1.0, 1.0), method="bvls")
        stat = M @ res.x - b
    else:
        stat = base.ravel()
    r = float(np.linalg.norm(stat))
    return OptimalityCertificate(r, tol, r <= tol)


def trajectory_norm(E, norm: str = "fro") -> float:
    E = np.asarray(E, dtype=float)
    if norm == "fro":
        return float(np.linalg.norm(E))
    if norm == "maxcol":
        return float(np.max(np.linalg.norm(E, axis=0)))
    raise ValueError(f"unknown norm {norm!r}")
