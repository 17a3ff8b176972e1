"""Convex-hull inequalities for the hypograph of a shifted concave coverage score.

The set is ``{(theta, x): theta <= f((x.xi - beta)^+)}`` with ``f`` strictly
concave increasing and ``f(0) = 0``. Its hull is the intersection of the
hulls of the hypographs of the surrogate functions ``h_(l, rho)``, each a
positive part of an affine function of ``x.xi`` and hence supermodular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import Instance
from .scenario_cuts import LinearCut, epi_affine_min, epi_cut

RHO_GUARD = 1e-12


@dataclass(frozen=True)
class PiecewiseConcave:
    """Secant slopes ``a`` and intercepts ``b`` of ``f`` on ``0..n`` (1-indexed by ``l``)."""

    a: np.ndarray
    b: np.ndarray
    values: np.ndarray  # f(0), ..., f(n)

    @property
    def n(self) -> int:
        return self.a.size

    def f(self, z: int) -> float:
        return float(self.values[z])

    def ratio(self, ell: int) -> float:
        return float(self.b[ell - 1] / self.a[ell - 1])


def breakpoints_from_values(values) -> PiecewiseConcave:
    values = np.asarray(values, dtype=float)
    if values[0] != 0.0:
        raise ValueError("f(0) must be 0")
    a = np.diff(values)
    if np.any(a <= 0) or np.any(np.diff(a) >= 0):
        raise ValueError("f must be strictly concave and increasing on 0..n")
    ells = np.arange(1, values.size)
    b = values[1:] - a * ells
    return PiecewiseConcave(a=a, b=b, values=values)


@lru_cache(maxsize=64)
def breakpoints(p: float, n: int) -> PiecewiseConcave:
    """Breakpoint data of ``f(z) = z**(1/p)`` on ``0..n``; requires ``p > 1``."""
    if not p > 1.0:
        raise ValueError(f"hull construction needs strictly concave f (p > 1), got p={p}")
    values = np.arange(n + 1, dtype=float) ** (1.0 / p)
    if n == 1:
        return PiecewiseConcave(a=np.array([1.0]), b=np.array([0.0]), values=values)
    return breakpoints_from_values(values)


@dataclass(frozen=True)
class HullFamily:
    Z_size: int
    beta: int
    L1: tuple[tuple[int, float], ...]
    L2: tuple[tuple[int, float], ...]
    pw: PiecewiseConcave

    @property
    def pairs(self) -> tuple[tuple[int, float], ...]:
        return self.L1 + self.L2

    def slope(self, pair: tuple[int, float]) -> float:
        ell, rho = pair
        return self.pw.f(ell) / (ell + rho)


def _l2_rhos(pw: PiecewiseConcave, ell: int, beta: int) -> list[int]:
    lo = pw.ratio(ell)
    hi = pw.ratio(ell + 1) if ell + 1 <= pw.n else math.inf
    first = math.floor(lo + RHO_GUARD) + 1
    out = []
    rho = max(first, 1)
    while rho <= beta and rho < hi - RHO_GUARD:
        out.append(rho)
        rho += 1
    return out


def build_family(xi: np.ndarray, beta: int, pw: PiecewiseConcave) -> HullFamily:
    """Index sets ``L1`` and ``L2`` for support size ``|Z|`` and shift ``beta``."""
    z_size = int(np.sum(xi))
    if not 1 <= beta <= z_size - 2:
        raise ValueError(f"beta={beta} outside [1, |Z|-2] for |Z|={z_size}")
    if pw.n < z_size:
        raise ValueError("breakpoint table shorter than the support")
    ells = range(1, z_size - beta + 1)
    L1 = tuple((ell, pw.ratio(ell)) for ell in ells)
    L2 = tuple((ell, float(rho)) for ell in ells for rho in _l2_rhos(pw, ell, beta))
    return HullFamily(Z_size=z_size, beta=beta, L1=L1, L2=L2, pw=pw)


def scenario_family(xi: np.ndarray, beta: int, pw: PiecewiseConcave) -> HullFamily:
    """Family for any shift, including the regimes outside ``[1, |Z|-2]``.

    With no shift the surrogates are the secant lines of ``f``; with
    ``beta >= |Z|-1`` the score is already supermodular and its own surrogate.
    """
    z_size = int(np.sum(xi))
    if 1 <= beta <= z_size - 2:
        return build_family(xi, beta, pw)
    if beta == 0 and z_size >= 1:
        L1 = tuple((ell, pw.ratio(ell)) for ell in range(1, z_size + 1))
        return HullFamily(Z_size=z_size, beta=0, L1=L1, L2=(), pw=pw)
    return HullFamily(Z_size=z_size, beta=beta, L1=((1, 0.0),), L2=(), pw=pw)


def h_value(pair: tuple[int, float], z: float, beta: int, pw: PiecewiseConcave) -> float:
    ell, rho = pair
    return max(pw.f(ell) / (ell + rho) * (z - (beta - rho)), 0.0)


def surrogate_affine(
    family: HullFamily, pair: tuple[int, float], xi: np.ndarray
) -> tuple[np.ndarray, float, float]:
    """``-h(x.xi) = min(const + slope.x, 0)``; also returns the scalar slope ``d < 0``."""
    s = family.slope(pair)
    ell, rho = pair
    slope = -s * np.asarray(xi, dtype=float)
    const = s * (family.beta - rho)
    return slope, const, -s


def separate_hull(
    theta_hat: float,
    x_hat: np.ndarray,
    xi: np.ndarray,
    beta: int,
    pw: PiecewiseConcave,
    tol: float = 1e-6,
) -> LinearCut | None:
    """Most violated hull inequality ``-theta >= EPI(-h)`` at ``(theta_hat, x_hat)``.

    The returned cut carries ``theta`` in its ``gamma`` slot.
    """
    family = scenario_family(xi, beta, pw)
    x_hat = np.asarray(x_hat, dtype=float)
    sigma = np.argsort(-x_hat, kind="stable")
    best, best_viol = None, tol
    for pair in family.pairs:
        slope, const, d = surrogate_affine(family, pair, xi)
        _, inc, phi0 = epi_affine_min(slope, const, sigma)
        # cut: -theta >= phi0 + sum inc_k x_{sigma_k}
        viol = phi0 + float(inc @ x_hat[sigma]) + theta_hat
        if viol > best_viol:
            best_viol = viol
            best = epi_cut(slope, const, x_hat, -1, "hull", d)
            best.z = {}
            best.scenario = None
    return best


def single_scenario_cut(
    x_hat: np.ndarray,
    gamma_hat: float,
    z_hat_j: float,
    sample: np.ndarray,
    j: int,
    i_star: int,
    inst: Instance,
    tol: float = 1e-6,
) -> list[LinearCut]:
    """All violated hull cuts for scenario ``j`` restricted to target ``i_star``."""
    if inst.p <= 1.0:
        return []
    pw = breakpoints(inst.p, inst.n)
    xi = np.asarray(sample[i_star])
    beta = int(inst.v[i_star]) - 1
    family = scenario_family(xi, beta, pw)
    x_hat = np.asarray(x_hat, dtype=float)
    theta_hat = gamma_hat + z_hat_j
    cuts = []
    for pair in family.pairs:
        slope, const, d = surrogate_affine(family, pair, xi)
        cut = epi_cut(slope, const, x_hat, j, "hull", d)
        viol = cut.rhs - (float(cut.x @ x_hat) - theta_hat)
        if viol > tol:
            cuts.append(cut)
    return cuts
