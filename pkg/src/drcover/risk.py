"""Scenario scores, empirical VaR/CVaR, feasibility of a selection and reliability."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import binom

from .model import Instance

MEMBERSHIP_TOL = 1e-7


def fbar(z: int, p: float) -> float:
    """Concave extension of ``z ** (1/p)`` to negative integers (identity below 0)."""
    if z >= 0:
        return float(z) ** (1.0 / p)
    return float(z)


def fbar_array(z: np.ndarray, p: float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, np.maximum(z, 0.0) ** (1.0 / p), z)


def coverage_margins(x: np.ndarray, samples: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Per-target shifted margins ``x . xi_i - v_i + 1``.

    ``samples`` may be a single ``(I, n)`` scenario or a stack ``(N, I, n)``.
    """
    samples = np.asarray(samples)
    x = np.asarray(x)
    if samples.shape[-1] != x.shape[-1] or samples.shape[-2] != np.shape(v)[0]:
        raise ValueError(
            f"dimension mismatch: samples {samples.shape}, x {x.shape}, v {np.shape(v)}"
        )
    return samples @ x - np.asarray(v) + 1


def g_value(x: np.ndarray, sample: np.ndarray, v: np.ndarray, p: float) -> float:
    """Score of one scenario: ``min_i ((x . xi_i - v_i + 1)^+)^(1/p)``."""
    margins = coverage_margins(x, sample, v)
    return float(np.min(np.maximum(margins, 0) ** (1.0 / p)))


def g_values(x: np.ndarray, inst: Instance) -> np.ndarray:
    """Scores of all training scenarios, computed through the tightest margin."""
    m = coverage_margins(x, inst.samples, inst.v).min(axis=-1)
    return np.maximum(m, 0) ** (1.0 / inst.p)


def var_cvar(values, eps: float) -> tuple[float, float]:
    """Empirical ``(VaR_{1-eps}, CVaR_{1-eps})`` of equally weighted values."""
    vals = np.sort(np.asarray(values, dtype=float))
    n = vals.size
    if n == 0:
        raise ValueError("empty value list")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps={eps} outside (0, 1)")
    # smallest index with (idx+1)/n >= 1-eps; guard against round-off in n*(1-eps)
    idx = max(int(math.ceil(n * (1.0 - eps) - 1e-9)) - 1, 0)
    var = float(vals[idx])
    cvar = var + float(np.maximum(vals - var, 0.0).sum()) / (n * eps)
    return var, cvar


def cvar_rows(values: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise empirical CVaR for a ``(..., N)`` array."""
    vals = np.sort(np.asarray(values, dtype=float), axis=-1)
    n = vals.shape[-1]
    idx = max(int(math.ceil(n * (1.0 - eps) - 1e-9)) - 1, 0)
    var = vals[..., idx]
    return var + np.maximum(vals - var[..., None], 0.0).sum(axis=-1) / (n * eps)


def cvar_slack(x: np.ndarray, inst: Instance) -> float:
    """``delta/eps + CVaR_{1-eps}(-g)``; a selection is feasible iff this is <= 0."""
    _, cvar = var_cvar(-g_values(x, inst), inst.epsilon)
    return inst.ratio + cvar


def z_membership(x: np.ndarray, inst: Instance, tol: float = MEMBERSHIP_TOL) -> bool:
    """Feasibility of ``x`` for the worst-case chance constraint (CVaR form)."""
    return cvar_slack(x, inst) <= tol


def existential_certificate(
    x: np.ndarray, inst: Instance, tol: float = MEMBERSHIP_TOL
) -> tuple[float, np.ndarray] | None:
    """Search ``gamma >= 0`` and ``z <= 0`` for the coupled scenario system.

    Only the scenario scores and zero are candidate values of gamma, and the
    best ``z`` for a given gamma is ``min(0, g_j - gamma)``.
    """
    g = g_values(x, inst)
    best = None
    for gamma in np.unique(np.concatenate([g, [0.0]])):
        z = np.minimum(0.0, g - gamma)
        slack = z.mean() - (inst.delta - gamma * inst.epsilon)
        if slack >= -tol and (best is None or slack > best[0]):
            best = (slack, float(gamma), z)
    if best is None:
        return None
    return best[1], best[2]


def z_membership_existential(x: np.ndarray, inst: Instance, tol: float = MEMBERSHIP_TOL) -> bool:
    # the existential form is scaled by eps relative to the CVaR form
    return existential_certificate(x, inst, tol * inst.epsilon) is not None


def true_reliability(x: np.ndarray, q: np.ndarray, v: np.ndarray) -> float:
    """Probability that every target meets its coverage level under independent entries."""
    count = int(np.asarray(x).sum())
    q = np.asarray(q, dtype=float)
    v = np.asarray(v)
    # P(Binomial(count, q_i) >= v_i) per target
    tails = binom.sf(v - 1, count, q)
    return float(np.prod(tails))


def empirical_reliability(x: np.ndarray, inst: Instance) -> float:
    covered = np.all(inst.samples @ np.asarray(x) >= inst.v, axis=-1)
    return float(covered.mean())
