"""Resilience analysis quantities and their sampled estimates.

``D`` (minimum of H on the unit sphere) and the r-resilience indices ``p_r`` are
nonconvex programs. They are estimated here by multi-start sampling plus
local (sub)gradient search; the direction of the bias is known and recorded:
the returned D is an upper estimate and every p_r a lower estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import trajectory_norm
from .model import NoiseRealization, SystemModel, is_observable

NOT_APPLICABLE = None


class AnalysisError(ValueError):
    pass


def _require_observable(model: SystemModel) -> None:
    if not is_observable(model):
        raise AnalysisError("(A, C) is not observable; H is not positive definite")


# ---------------------------------------------------------------------------
# scalar maps

def q_func(alpha):
    """min(alpha, alpha**2), the growth function of H."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise ValueError("q is defined on alpha >= 0")
    out = np.minimum(a, a * a)
    return float(out) if out.ndim == 0 else out


def h_func(alpha):
    """max(alpha, sqrt(alpha)); the inverse of q."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise ValueError("h is defined on alpha >= 0")
    out = np.maximum(a, np.sqrt(a))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# H and its batched variants

def evaluate_H(model: SystemModel, Z, lam: float) -> float:
    Z = model.check_trajectory(Z)
    d = Z[:, 1:] - model.A @ Z[:, :-1]
    return 0.5 * lam * float(np.sum(d * d)) + float(np.sum(np.abs(model.C @ Z)))


def _batch_parts(model, Z):
    # Z: (B, n, T) -> dynamics residuals (B, n, T-1) and outputs (B, n_y, T)
    d = Z[:, :, 1:] - np.einsum("ij,bjt->bit", model.A, Z[:, :, :-1])
    CZ = np.einsum("ij,bjt->bit", model.C, Z)
    return d, CZ


def _batch_H(model, Z, lam):
    d, CZ = _batch_parts(model, Z)
    return 0.5 * lam * np.sum(d * d, axis=(1, 2)) + np.sum(np.abs(CZ), axis=(1, 2))


def _batch_H_grad(model, Z, lam, d, CZ):
    G = np.zeros_like(Z)
    G[:, :, 1:] += lam * d
    G[:, :, :-1] -= lam * np.einsum("ji,bjt->bit", model.A, d)
    G += np.einsum("ji,bjt->bit", model.C, np.sign(CZ))
    return G


def _normalize(Z, norm):
    if norm == "fro":
        s = np.sqrt(np.sum(Z * Z, axis=(1, 2)))
    elif norm == "maxcol":
        s = np.max(np.sqrt(np.sum(Z * Z, axis=1)), axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return Z / s[:, None, None]


def top_r_sums(values) -> np.ndarray:
    """Cumulative sums of the largest absolute entries: out[..., r] = best r-term sum.

    Picking the r largest terms is the exact inner supremum over index sets
    of size r, since all summands are nonnegative.
    """
    v = np.abs(np.asarray(values, dtype=float))
    flat = v.reshape(v.shape[0], -1) if v.ndim > 1 else v[None, :]
    srt = -np.sort(-flat, axis=1)
    out = np.concatenate([np.zeros((flat.shape[0], 1)), np.cumsum(srt, axis=1)], axis=1)
    return out if v.ndim > 1 else out[0]


# ---------------------------------------------------------------------------
# D

@dataclass
class DEstimate:
    value: float
    argmin: np.ndarray
    norm: str
    certified: bool = False


def estimate_D(
    model: SystemModel,
    lam: float,
    norm: str = "fro",
    samples: int = 10_000,
    restarts: int = 50,
    steps: int = 500,
    seed: int = 0,
) -> DEstimate:
    """Smallest H found on {||Z|| = 1}: sphere samples, then projected subgradient descent."""
    _require_observable(model)
    rng = np.random.default_rng(seed)
    n, T = model.n, model.T
    Z = _normalize(rng.standard_normal((samples, n, T)), norm)
    Hs = _batch_H(model, Z, lam)
    order = np.argsort(Hs, kind="stable")[: max(1, min(restarts, samples))]
    best_val, best_Z = float(Hs[order[0]]), Z[order[0]].copy()

    W = Z[order].copy()
    for k in range(1, steps + 1):
        d, CZ = _batch_parts(model, W)
        Hw = 0.5 * lam * np.sum(d * d, axis=(1, 2)) + np.sum(np.abs(CZ), axis=(1, 2))
        i = int(np.argmin(Hw))
        if Hw[i] < best_val:
            best_val, best_Z = float(Hw[i]), W[i].copy()
        G = _batch_H_grad(model, W, lam, d, CZ)
        if norm == "fro":
            G -= np.sum(G * W, axis=(1, 2))[:, None, None] * W
        gn = np.sqrt(np.sum(G * G, axis=(1, 2)))
        stuck = gn < 1e-14
        if stuck.any():
            # coordinate-free fallback at kinks with an empty descent direction
            G[stuck] = rng.standard_normal(G[stuck].shape)
            gn[stuck] = np.sqrt(np.sum(G[stuck] ** 2, axis=(1, 2)))
        W = _normalize(W - (0.3 / k) * G / gn[:, None, None], norm)
    d, CZ = _batch_parts(model, W)
    Hw = 0.5 * lam * np.sum(d * d, axis=(1, 2)) + np.sum(np.abs(CZ), axis=(1, 2))
    i = int(np.argmin(Hw))
    if Hw[i] < best_val:
        best_val, best_Z = float(Hw[i]), W[i].copy()
    return DEstimate(best_val, best_Z, norm)


def refine_D(model: SystemModel, lam: float, d_hat: float, Zs, norm: str = "fro") -> tuple[float, int]:
    """Spot-check H(Z) >= D q(||Z||) on fresh samples.

    A violation only means the sampled D was too high; it is lowered to the
    offending ratio. Returns the refined value and the number of refinements.
    """
    refined, count = float(d_hat), 0
    for Z in Zs:
        nz = trajectory_norm(Z, norm)
        if nz == 0.0:
            continue
        ratio = evaluate_H(model, Z, lam) / q_func(nz)
        if ratio < refined:
            refined, count = ratio, count + 1
    return refined, count


# ---------------------------------------------------------------------------
# p_r

@dataclass
class PrEstimate:
    table: dict[int, float]
    constrained: bool
    certified: bool = False
    witnesses: dict[int, np.ndarray] = field(default_factory=dict)


def _ascent_levels(r_max: int) -> list[int]:
    levels, r = set(), 1
    while r < r_max:
        levels.add(r)
        r *= 2
    if r_max >= 1:
        levels.add(r_max)
    return sorted(levels)


def estimate_pr_table(
    model: SystemModel,
    lam: float,
    r_max: int | None = None,
    samples: int = 10_000,
    restarts: int = 50,
    steps: int = 500,
    seed: int = 0,
    constrained: bool = False,
) -> PrEstimate:
    """Sampled lower bounds of p_0 ... p_{r_max}.

    Every candidate trajectory is scored for all r at once; the table is the
    best score over the shared pool, so it is nondecreasing in r. Local ascent
    is run from the best candidates at r = 1, 2, 4, ... and r_max. With
    ``constrained`` the search is over free trajectories z_{t+1} = A z_t only,
    parametrized by z_0.
    """
    _require_observable(model)
    N = model.n_y * model.T
    r_max = N if r_max is None else int(r_max)
    if not 0 <= r_max <= N:
        raise AnalysisError(f"r must lie in [0, n_y*T={N}]")
    rng = np.random.default_rng(seed)
    if constrained:
        pool = _pr_pool_constrained(model, rng, samples, restarts, steps, r_max)
    else:
        pool = _pr_pool_free(model, lam, rng, samples, restarts, steps, r_max)
    scores, cands = pool
    best = np.argmax(scores[:, : r_max + 1], axis=0)
    table = {r: float(scores[best[r], r]) for r in range(r_max + 1)}
    table[0] = 0.0
    witnesses = {r: cands[best[r]] for r in range(1, r_max + 1)}
    return PrEstimate(table, constrained, False, witnesses)


def estimate_pr(model: SystemModel, lam: float, r: int, **budget) -> float:
    N = model.n_y * model.T
    if not 0 <= r <= N:
        raise AnalysisError(f"r={r} outside [0, n_y*T={N}]")
    if r == 0:
        _require_observable(model)
        return 0.0
    return estimate_pr_table(model, lam, r_max=r, **budget).table[r]


def _ratio_scores(tops, denom):
    with np.errstate(invalid="ignore", divide="ignore"):
        s = tops / denom[:, None]
    s[~np.isfinite(s)] = 0.0
    return np.minimum(s, 1.0)


def _pr_pool_free(model, lam, rng, samples, restarts, steps, r_max):
    n, n_y, T = model.n, model.n_y, model.T
    half = samples // 2
    dense = rng.standard_normal((half, n, T))
    # column-sparse candidates concentrate the output on a few (i, t) entries
    keep = rng.random((samples - half, 1, T)) < rng.uniform(0.0, 0.2, size=(samples - half, 1, 1))
    keep[np.arange(samples - half), 0, rng.integers(0, T, size=samples - half)] = True
    sparse = rng.standard_normal((samples - half, n, T)) * keep
    Z = np.concatenate([dense, sparse])
    # H mixes degree-1 and degree-2 terms, so the ratio depends on scale
    scale = 10.0 ** rng.uniform(-5.0, 1.0, size=samples)
    Z = _normalize(Z, "fro") * scale[:, None, None]

    def score(W):
        d, CZ = _batch_parts(model, W)
        H = 0.5 * lam * np.sum(d * d, axis=(1, 2)) + np.sum(np.abs(CZ), axis=(1, 2))
        return _ratio_scores(top_r_sums(CZ.reshape(len(W), -1)), H)

    scores = [score(Z)]
    cands = [Z]
    for r in _ascent_levels(r_max):
        start = np.argsort(-scores[0][:, r], kind="stable")[:restarts]
        W = Z[start].copy()
        for k in range(1, steps + 1):
            d, CZ = _batch_parts(model, W)
            flat = np.abs(CZ).reshape(len(W), -1)
            idx = np.argsort(-flat, axis=1, kind="stable")[:, :r]
            mask = np.zeros_like(flat)
            np.put_along_axis(mask, idx, 1.0, axis=1)
            mask = mask.reshape(CZ.shape)
            S = np.sum(mask * np.abs(CZ), axis=(1, 2))
            H = 0.5 * lam * np.sum(d * d, axis=(1, 2)) + np.sum(np.abs(CZ), axis=(1, 2))
            gS = np.einsum("ji,bjt->bit", model.C, mask * np.sign(CZ))
            gH = _batch_H_grad(model, W, lam, d, CZ)
            safe = np.where(H > 0, H, 1.0)
            G = (gS * safe[:, None, None] - gH * S[:, None, None]) / (safe**2)[:, None, None]
            gn = np.sqrt(np.sum(G * G, axis=(1, 2)))
            wn = np.sqrt(np.sum(W * W, axis=(1, 2)))
            gn[gn < 1e-300] = 1.0
            W = W + (0.3 / k) * (wn / gn)[:, None, None] * G
            if k % 50 == 0 or k == steps:
                scores.append(score(W))
                cands.append(W.copy())
    return np.concatenate(scores), np.concatenate(cands)


def _pr_pool_constrained(model, rng, samples, restarts, steps, r_max):
    n, T = model.n, model.T
    # rows c_i' A^t, ordered (t, i)
    blocks, M = [], model.C
    for _ in range(T):
        blocks.append(M)
        M = M @ model.A
    O = np.vstack(blocks)

    def score(z0):
        out = z0 @ O.T
        return _ratio_scores(top_r_sums(out), np.sum(np.abs(out), axis=1))

    Z0 = rng.standard_normal((samples, n))
    Z0 /= np.linalg.norm(Z0, axis=1, keepdims=True)
    scores, cands = [score(Z0)], [Z0]
    for r in _ascent_levels(r_max):
        start = np.argsort(-scores[0][:, r], kind="stable")[:restarts]
        W = Z0[start].copy()
        for k in range(1, steps + 1):
            out = W @ O.T
            idx = np.argsort(-np.abs(out), axis=1, kind="stable")[:, :r]
            mask = np.zeros_like(out)
            np.put_along_axis(mask, idx, 1.0, axis=1)
            S = np.sum(mask * np.abs(out), axis=1)
            H = np.sum(np.abs(out), axis=1)
            gS = (mask * np.sign(out)) @ O
            gH = np.sign(out) @ O
            safe = np.where(H > 0, H, 1.0)
            G = (gS * safe[:, None] - gH * S[:, None]) / (safe**2)[:, None]
            G -= np.sum(G * W, axis=1, keepdims=True) * W
            gn = np.linalg.norm(G, axis=1, keepdims=True)
            gn[gn < 1e-300] = 1.0
            W = W + (0.3 / k) * G / gn
            W /= np.linalg.norm(W, axis=1, keepdims=True)
            if k % 50 == 0 or k == steps:
                scores.append(score(W))
                cands.append(W.copy())
    return np.concatenate(scores), np.concatenate(cands)


def max_tolerable_outliers(pr_table: dict[int, float]) -> int:
    """Largest tabulated r with p_r < 1/2.

    The table holds lower bounds of p_r, so the count is optimistic and not
    certified.
    """
    if not pr_table:
        raise AnalysisError("empty p_r table")
    ok = [r for r, p in pr_table.items() if p < 0.5]
    return max(ok) if ok else -1


# ---------------------------------------------------------------------------
# noise split, beta and the error bound

@dataclass
class EpsilonSplit:
    epsilon: float
    bounded: np.ndarray  # boolean mask over (i, t): |f_it| <= epsilon

    @property
    def unbounded(self) -> np.ndarray:
        return ~self.bounded

    @property
    def r(self) -> int:
        return int(np.count_nonzero(~self.bounded))

    def bounded_set(self) -> set[tuple[int, int]]:
        return {tuple(map(int, ij)) for ij in np.argwhere(self.bounded)}

    def unbounded_set(self) -> set[tuple[int, int]]:
        return {tuple(map(int, ij)) for ij in np.argwhere(~self.bounded)}


def split_by_epsilon(noise: NoiseRealization, epsilon: float) -> EpsilonSplit:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return EpsilonSplit(float(epsilon), np.abs(noise.f) <= epsilon)


def beta_sigma(noise: NoiseRealization, split: EpsilonSplit, lam: float) -> float:
    f = noise.f
    if split.bounded.shape != f.shape:
        raise ValueError("split does not match the noise dimensions")
    return lam * float(np.sum(noise.w**2)) + float(np.sum(np.abs(f[split.bounded])))


def theorem_bound(d_hat: float, pr: float, beta: float):
    """h(2 beta / (D (1 - 2 p_r))), or NOT_APPLICABLE when p_r >= 1/2."""
    if not d_hat > 0:
        raise ValueError("D must be > 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if pr is None or pr >= 0.5:
        return NOT_APPLICABLE
    return h_func(2.0 * beta / (d_hat * (1.0 - 2.0 * pr)))


@dataclass
class SweepRow:
    epsilon: float
    r: int
    beta: float
    bound: float | None


@dataclass
class SweepResult:
    epsilon_star: float | None
    bound: float | None
    rows: list[SweepRow]


def default_epsilon_grid(noise: NoiseRealization) -> list[float]:
    return sorted(set([0.0]) | set(np.abs(noise.f).ravel().tolist()))


def epsilon_sweep(
    model: SystemModel,
    noise: NoiseRealization,
    lam: float,
    d_hat: float,
    pr_table: dict[int, float],
    grid=None,
) -> SweepResult:
    """Minimize the error bound over the split level epsilon.

    Ties go to the smaller epsilon. r values absent from ``pr_table`` are
    treated as not applicable.
    """
    noise.check(model)
    grid = default_epsilon_grid(noise) if grid is None else list(grid)
    if not grid:
        raise ValueError("epsilon grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be sorted ascending")
    rows = []
    best_eps, best_bound = NOT_APPLICABLE, NOT_APPLICABLE
    for eps in grid:
        split = split_by_epsilon(noise, eps)
        beta = beta_sigma(noise, split, lam)
        bound = theorem_bound(d_hat, pr_table.get(split.r), beta)
        rows.append(SweepRow(float(eps), split.r, beta, bound))
        if bound is not None and (best_bound is None or bound < best_bound):
            best_eps, best_bound = float(eps), bound
    return SweepResult(best_eps, best_bound, rows)


# ---------------------------------------------------------------------------
# full report

@dataclass
class ResilienceReport:
    lam: float
    norm: str
    d_hat: float
    d_refinements: int
    pr_table: dict[int, float]
    pr_constrained: bool
    beta_curve: list[SweepRow]
    bound: float | None
    epsilon_star: float | None
    max_tolerable_outliers: int
    certified: dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "norm": self.norm,
            "D_hat": self.d_hat,
            "D_refinements": self.d_refinements,
            "pr_table": {str(r): p for r, p in self.pr_table.items()},
            "pr_constrained": self.pr_constrained,
            "beta_curve": [
                {"epsilon": row.epsilon, "r": row.r, "beta": row.beta, "bound": row.bound}
                for row in self.beta_curve
            ],
            "bound": self.bound,
            "epsilon_star": self.epsilon_star,
            "max_tolerable_outliers": self.max_tolerable_outliers,
            "certified": dict(self.certified),
        }


def resilience_report(
    model: SystemModel,
    noise: NoiseRealization,
    lam: float,
    norm: str = "fro",
    samples: int = 10_000,
    restarts: int = 50,
    steps: int = 500,
    seed: int = 0,
    r_max: int | None = None,
    constrained: bool = False,
    refine_samples: int = 1000,
) -> ResilienceReport:
    d_est = estimate_D(model, lam, norm, samples, restarts, steps, seed)
    rng = np.random.default_rng(seed + 1)
    fresh = rng.standard_normal((refine_samples, model.n, model.T))
    fresh *= (10.0 ** rng.uniform(-2, 2, size=refine_samples))[:, None, None]
    d_hat, n_ref = refine_D(model, lam, d_est.value, fresh, norm)

    f_abs = np.abs(noise.f)
    if r_max is None:
        r_max = int(np.count_nonzero(f_abs > 0))
    pr = estimate_pr_table(model, lam, r_max, samples, restarts, steps, seed, constrained)
    sweep = epsilon_sweep(model, noise, lam, d_hat, pr.table)
    certified = {
        "D": False,
        "pr": False,
        "bound": False,
        "max_tolerable_outliers": False,
    }
    return ResilienceReport(
        lam, norm, d_hat, n_ref, pr.table, constrained, sweep.rows, sweep.bound,
        sweep.epsilon_star, max_tolerable_outliers(pr.table), certified,
    )
