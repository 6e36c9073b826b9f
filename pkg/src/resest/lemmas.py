"""Randomized checks of the inequalities the error bound is built on.

Each check returns a :class:`LemmaTestReport`; ``worst_slack`` is the most
negative margin (lhs - rhs) seen, so a passing suite has it above ``-tol``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import evaluate_H, h_func, q_func
from .model import SystemModel


@dataclass
class LemmaTestReport:
    name: str
    trials: int
    violations: int
    worst_slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _report(name, margins, tol):
    margins = np.asarray(margins, dtype=float)
    return LemmaTestReport(name, margins.size, int(np.sum(margins < -tol)), float(margins.min()))


def check_tri_gen(rng, trials=10_000, dim=4, tol=1e-10) -> LemmaTestReport:
    """||z1 - z2||^2 >= ||z1||^2 / 2 - ||z2||^2."""
    scale = 10.0 ** rng.uniform(-3, 3, size=(trials, 1))
    z1 = rng.standard_normal((trials, dim)) * scale
    z2 = rng.standard_normal((trials, dim)) * scale * 10.0 ** rng.uniform(-1, 1, size=(trials, 1))
    lhs = np.sum((z1 - z2) ** 2, axis=1)
    rhs = 0.5 * np.sum(z1**2, axis=1) - np.sum(z2**2, axis=1)
    return _report("tri_gen", (lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs)), tol)


def check_convex_split(rng, trials=10_000, shape=(3, 4), sigma=lambda a: a * a, tol=1e-10) -> LemmaTestReport:
    """G(S1 - S2) >= 2 sigma(1/2) G(S1) - G(S2) with G the squared Frobenius norm."""
    S1 = rng.standard_normal((trials, *shape))
    S2 = rng.standard_normal((trials, *shape)) * 10.0 ** rng.uniform(-2, 2, size=(trials, 1, 1))

    def G(S):
        return np.sum(S * S, axis=(1, 2))

    lhs = G(S1 - S2)
    rhs = 2.0 * sigma(0.5) * G(S1) - G(S2)
    return _report("convex_split", (lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs)), tol)


def check_relaxed_homogeneity(model: SystemModel, lam: float, rng, trials=10_000, tol=1e-10) -> LemmaTestReport:
    """H(Z) >= q(1/gamma) H(gamma Z) for gamma > 0."""
    margins = np.empty(trials)
    for k in range(trials):
        Z = rng.standard_normal((model.n, model.T))
        gamma = 10.0 ** rng.uniform(-3, 3)
        margins[k] = evaluate_H(model, Z, lam) - q_func(1.0 / gamma) * evaluate_H(model, gamma * Z, lam)
    return _report("relaxed_homogeneity", margins, tol)


def check_inverse_pair(rng, trials=10_000, tol=1e-12) -> LemmaTestReport:
    """h(q(a)) = a and q(h(a)) = a, relative error."""
    a = np.concatenate([10.0 ** rng.uniform(-6, 6, size=trials - 2), [0.0, 1.0]])
    e1 = np.abs(h_func(q_func(a)) - a)
    e2 = np.abs(q_func(h_func(a)) - a)
    rel = np.maximum(e1, e2) / np.maximum(a, 1e-300)
    rel[a == 0] = np.maximum(e1, e2)[a == 0]
    return _report("inverse_pair", -rel, tol)


def check_positive_definite(model: SystemModel, lam: float, rng, trials=10_000) -> LemmaTestReport:
    """H(Z) > 0 for nonzero Z; margin is H itself."""
    Zs = rng.standard_normal((trials, model.n, model.T)) * 10.0 ** rng.uniform(-4, 2, size=(trials, 1, 1))
    vals = np.array([evaluate_H(model, Z, lam) for Z in Zs])
    return LemmaTestReport("positive_definite", trials, int(np.sum(vals <= 0.0)), float(vals.min()))
