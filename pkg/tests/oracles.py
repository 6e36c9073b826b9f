"""Independent brute-force oracles used to freeze expected values."""
from fractions import Fraction

import numpy as np


def grid_min_scalar_F(a, c, lam, y, lo, hi, step=1e-3, chunk=400):
    """Exhaustive grid minimum of F for n = 1, T = 2.

    F(z0, z1) = lam (z1 - a z0)^2 + |y0 - c z0| + |y1 - c z1|
    """
    g = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    best, arg = np.inf, None
    for s in range(0, g.size, chunk):
        z0 = g[s:s + chunk, None]
        z1 = g[None, :]
        F = lam * (z1 - a * z0) ** 2 + np.abs(y[0] - c * z0) + np.abs(y[1] - c * z1)
        k = np.argmin(F)
        if F.flat[k] < best:
            i, j = np.unravel_index(k, F.shape)
            best, arg = float(F.flat[k]), (float(z0[i, 0]), float(g[j]))
    return best, np.array(arg)


def circle_min_l1(step=1e-4):
    """min |z0| + |z1| on the unit circle by a 1-parameter sweep."""
    th = np.arange(0.0, 2 * np.pi, step)
    return float(np.min(np.abs(np.cos(th)) + np.abs(np.sin(th))))


def grid_sup_pr1_scalar(lam, lo=-2.0, hi=2.0, step=1e-3, chunk=400):
    """sup of max(|z0|, |z1|) / H(Z) for n = 1, T = 2, A = C = 1."""
    g = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    best = 0.0
    for s in range(0, g.size, chunk):
        z0 = g[s:s + chunk, None]
        z1 = g[None, :]
        H = 0.5 * lam * (z1 - z0) ** 2 + np.abs(z0) + np.abs(z1)
        num = np.maximum(np.abs(z0), np.abs(z1))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(H > 0, num / H, 0.0)
        best = max(best, float(r.max()))
    return best


def exact_rank(M) -> int:
    """Rank by Gaussian elimination over the rationals."""
    rows = [[Fraction(int(v)) for v in row] for row in np.asarray(M)]
    if not rows:
        return 0
    m, n = len(rows), len(rows[0])
    rank, col = 0, 0
    while rank < m and col < n:
        piv = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(m):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
        col += 1
    return rank


def riccati_predicted(P0, steps, q=1.0, r=1.0):
    """Predicted variances for the scalar A = C = 1 filter, P+ = P - P^2/(P+r) + q."""
    out = [Fraction(P0)]
    for _ in range(steps - 1):
        P = out[-1]
        out.append(P - P * P / (P + r) + q)
    return out
