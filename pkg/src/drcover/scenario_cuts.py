"""Per-scenario cut machinery: knapsack linearization, closed-form duals, EPI
separation and Benders feasibility cuts."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .model import Instance
from .risk import fbar


@dataclass
class LinearCut:
    """``x_coef.x + gamma*g + sum_j z[j]*z_j + bits.gamma_k >= rhs``.

    EPI-shaped cuts also record the scenario, the negative slope ``d`` and the
    support ``xi_bar`` they were derived from so they can seed mixing.
    """

    x: np.ndarray
    rhs: float
    gamma: float = 0.0
    z: dict[int, float] = field(default_factory=dict)
    bits: np.ndarray | None = None
    family: str = ""
    scenario: int | None = None
    slope: float | None = None
    support: np.ndarray | None = None
    constant: float | None = None

    def lhs(self, x, gamma: float, z, bits=None) -> float:
        val = float(np.dot(self.x, x)) + self.gamma * gamma
        for j, coef in self.z.items():
            val += coef * z[j]
        if self.bits is not None and bits is not None:
            val += float(np.dot(self.bits, bits))
        return val

    def violation(self, x, gamma: float, z, bits=None) -> float:
        """Positive when the point violates the cut."""
        return self.rhs - self.lhs(x, gamma, z, bits)

    def is_trivial(self) -> bool:
        nonzero = np.any(self.x != 0) or self.gamma != 0 or any(self.z.values())
        if self.bits is not None:
            nonzero = nonzero or np.any(self.bits != 0)
        return not nonzero


@dataclass(frozen=True)
class DualSolution:
    mu1_sum: float
    i_star: int
    mu2: np.ndarray
    objective: float
    v_bar: float
    v_star: int


@lru_cache(maxsize=256)
def cp_vector(v_m: int, p: float, n: int) -> np.ndarray:
    """Consecutive differences of the extended root over ``1-v_m .. n+1-v_m``."""
    out = np.array([fbar(k + 1 - v_m, p) - fbar(k - v_m, p) for k in range(1, n + 1)])
    out.setflags(write=False)
    return out


def _tight_capacity(x: np.ndarray, sample: np.ndarray, inst: Instance) -> tuple[int, float]:
    caps = sample @ x - inst.v + inst.v_max
    i_star = int(np.argmin(caps))
    return i_star, float(caps[i_star])


def knapsack_at_capacity(v_bar: float, cp: np.ndarray, v_m: int, p: float) -> float:
    """Greedy optimum of the knapsack with profits ``cp`` (nonincreasing) and capacity ``v_bar >= 0``."""
    n = cp.size
    if abs(v_bar - round(v_bar)) <= 1e-9 and round(v_bar) <= n:
        # telescoping sum of the profits
        return fbar(int(round(v_bar)) + 1 - v_m, p)
    cap = min(v_bar, float(n))
    full = int(np.floor(cap))
    val = cp[:full].sum() + (cap - full) * (cp[full] if full < n else 0.0)
    return float(val + fbar(1 - v_m, p))


def knapsack_value(x: np.ndarray, sample: np.ndarray, inst: Instance) -> float:
    """Optimum of the continuous knapsack linearizing the extended root.

    Equals ``fbar(v_bar + 1 - v_m)`` with capacity ``v_bar`` the tightest shifted margin.
    """
    _, v_bar = _tight_capacity(np.asarray(x, dtype=float), sample, inst)
    return knapsack_at_capacity(v_bar, cp_vector(inst.v_max, inst.p, inst.n), inst.v_max, inst.p)


def dual_objective(t: float, v_bar: float, cp: np.ndarray, v_m: int, p: float) -> float:
    """Dual knapsack objective reduced to the scalar ``t = 1'mu1 <= 0``."""
    return t * v_bar - float(np.maximum(cp + t, 0.0).sum()) - fbar(1 - v_m, p)


def _dual_t(cand, cp: np.ndarray):
    # candidate index clamped to [1, n + 1]; index n + 1 stands for t = 0
    ext = np.append(-cp, 0.0)
    return ext[np.clip(cand, 1, cp.size + 1) - 1]


def closed_form_dual(v_bar: float, cp: np.ndarray, v_m: int, p: float) -> tuple[float, int, float]:
    """Optimal ``(t, v_star, objective)`` of the reduced dual for capacity ``v_bar >= 0``.

    ``t = -cp[v_star]`` with ``v_star`` the rounded capacity clamped to
    ``[1, n]``; a capacity above ``n`` gives ``t = 0``. At fractional
    capacity the better of floor and ceiling is taken.
    """
    if abs(v_bar - round(v_bar)) <= 1e-9:
        candidates = [int(round(v_bar))]
    else:
        candidates = [int(np.floor(v_bar)), int(np.ceil(v_bar))]
    best = None
    for cand in candidates:
        v_star = min(max(cand, 1), cp.size + 1)
        t = float(_dual_t(v_star, cp))
        obj = dual_objective(t, v_bar, cp, v_m, p)
        if best is None or obj > best[2] + 1e-15:
            best = (t, min(v_star, cp.size), obj)
    return best


def dual_solution(x: np.ndarray, sample: np.ndarray, inst: Instance) -> DualSolution:
    """Closed-form optimal dual of the scenario knapsack at ``x``."""
    x = np.asarray(x, dtype=float)
    cp = cp_vector(inst.v_max, inst.p, inst.n)
    i_star, v_bar = _tight_capacity(x, sample, inst)
    t, v_star, obj = closed_form_dual(v_bar, cp, inst.v_max, inst.p)
    mu2 = np.minimum(-cp - t, 0.0)
    return DualSolution(
        mu1_sum=t, i_star=i_star, mu2=mu2, objective=obj, v_bar=v_bar, v_star=v_star
    )


def epi_separate(
    phi: Callable[[np.ndarray], float], x_hat: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Extended polymatroid inequality of a submodular ``phi`` at ``x_hat``.

    ``phi`` maps a 0/1 indicator vector to a value. Returns the permutation
    sorting ``x_hat`` in nonincreasing order (ties by lowest index), the
    increments along it and ``phi`` of the empty set.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    n = x_hat.size
    sigma = np.argsort(-x_hat, kind="stable")
    mask = np.zeros(n)
    prev = phi0 = float(phi(mask))
    inc = np.zeros(n)
    for k, idx in enumerate(sigma):
        mask[idx] = 1.0
        cur = float(phi(mask))
        inc[k] = cur - prev
        prev = cur
    return sigma, inc, phi0


def epi_affine_min(
    slope: np.ndarray, const: float, sigma: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """EPI data of ``min(const + slope.x, 0)`` along ``sigma`` in one pass.

    Returns the values ``phi(T_0..T_n)``, the increments and ``phi(empty)``.
    """
    path = const + np.concatenate([[0.0], np.cumsum(slope[sigma])])
    vals = np.minimum(path, 0.0)
    return vals, np.diff(vals), float(vals[0])


def epi_cut(
    slope: np.ndarray,
    const: float,
    x_hat: np.ndarray,
    j: int,
    family: str,
    d: float,
) -> LinearCut:
    """Cut ``-z_j - gamma >= EPI(min(const + slope.x, 0))`` at ``x_hat``'s order."""
    sigma = np.argsort(-np.asarray(x_hat, dtype=float), kind="stable")
    _, inc, phi0 = epi_affine_min(slope, const, sigma)
    coef = np.zeros(slope.size)
    coef[sigma] = -inc
    support = np.zeros(slope.size, dtype=np.int64)
    support[sigma[inc < 0]] = 1
    return LinearCut(
        x=coef,
        rhs=phi0,
        gamma=-1.0,
        z={j: -1.0},
        family=family,
        scenario=j,
        slope=d,
        support=support,
        constant=phi0,
    )


def benders_affine(dual: DualSolution, sample: np.ndarray, inst: Instance) -> tuple[np.ndarray, float]:
    """Slope vector and constant of ``Q_j(mu_hat, x)`` as an affine function of ``x``."""
    t = dual.mu1_sum
    i = dual.i_star
    slope = t * np.asarray(sample[i], dtype=float)
    const = t * (inst.v_max - inst.v[i]) + float(dual.mu2.sum()) - fbar(1 - inst.v_max, inst.p)
    return slope, float(const)


def benders_cut(
    x_hat: np.ndarray,
    gamma_hat: float,
    z_hat_j: float,
    sample: np.ndarray,
    j: int,
    inst: Instance,
    tol: float = 1e-6,
    dual: DualSolution | None = None,
) -> LinearCut | None:
    """Benders feasibility cut for scenario ``j`` if ``(x_hat, gamma_hat, z_hat_j)`` violates it."""
    x_hat = np.asarray(x_hat, dtype=float)
    if dual is None:
        dual = dual_solution(x_hat, sample, inst)
    slope, const = benders_affine(dual, sample, inst)
    cut = epi_cut(slope, const, x_hat, j, "benders", dual.mu1_sum)
    lhs = float(cut.x @ x_hat) - gamma_hat - z_hat_j
    if cut.rhs - lhs > tol:
        return cut
    return None


def benders_cuts_batch(
    x_hat: np.ndarray,
    gamma_hat: float,
    z_hat: np.ndarray,
    inst: Instance,
    tol: float = 1e-6,
    scenarios: np.ndarray | None = None,
) -> list[tuple[LinearCut, int]]:
    """Violated Benders cuts of many scenarios at once, with each one's ``i_star``.

    Same cuts as calling :func:`benders_cut` scenario by scenario; all
    scenarios share the sorting permutation of ``x_hat``.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    js = np.arange(inst.N) if scenarios is None else np.asarray(scenarios, dtype=np.int64)
    if js.size == 0:
        return []
    n, vm, p = inst.n, inst.v_max, inst.p
    cp = cp_vector(vm, p, n)
    f0 = fbar(1 - vm, p)
    samples = inst.samples[js]
    caps = samples @ x_hat - inst.v + vm
    i_star = np.argmin(caps, axis=1)
    v_bar = caps[np.arange(js.size), i_star]
    rounded = np.round(v_bar)
    integral = np.abs(v_bar - rounded) <= 1e-9
    lo = np.where(integral, rounded, np.floor(v_bar)).astype(np.int64)
    hi = np.where(integral, rounded, np.ceil(v_bar)).astype(np.int64)

    def objective(cand):
        t = _dual_t(cand, cp)
        return t, t * v_bar - np.maximum(cp[None, :] + t[:, None], 0.0).sum(axis=1) - f0

    t_lo, obj_lo = objective(lo)
    t_hi, obj_hi = objective(hi)
    t = np.where(obj_hi > obj_lo + 1e-15, t_hi, t_lo)
    mu2_sum = np.minimum(-cp[None, :] - t[:, None], 0.0).sum(axis=1)
    xi = samples[np.arange(js.size), i_star].astype(float)
    slope = t[:, None] * xi
    const = t * (vm - inst.v[i_star]) + mu2_sum - f0
    sigma = np.argsort(-x_hat, kind="stable")
    path = const[:, None] + np.concatenate(
        [np.zeros((js.size, 1)), np.cumsum(slope[:, sigma], axis=1)], axis=1
    )
    vals = np.minimum(path, 0.0)
    inc = np.diff(vals, axis=1)
    phi0 = vals[:, 0]
    viol = phi0 + inc @ x_hat[sigma] + gamma_hat + np.asarray(z_hat)[js]
    out = []
    for r in np.flatnonzero(viol > tol):
        j = int(js[r])
        coef = np.zeros(n)
        coef[sigma] = -inc[r]
        support = np.zeros(n, dtype=np.int64)
        support[sigma[inc[r] < 0]] = 1
        cut = LinearCut(
            x=coef, rhs=float(phi0[r]), gamma=-1.0, z={j: -1.0}, family="benders",
            scenario=j, slope=float(t[r]), support=support, constant=float(phi0[r]),
        )
        out.append((cut, int(i_star[r])))
    return out
