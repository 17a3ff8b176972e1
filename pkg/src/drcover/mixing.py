"""Cross-scenario inequalities: the finite gamma grid, base inequalities,
mixing and lifting on the gamma-encoding binaries."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .model import Instance
from .risk import var_cvar
from .scenario_cuts import LinearCut

SNAP = 1e-9


@dataclass(frozen=True)
class GammaGrid:
    values: np.ndarray
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return self.values.size == 0

    @property
    def r1(self) -> float:
        return float(self.values[0])

    def __len__(self) -> int:
        return int(self.values.size)


def gamma_grid(inst: Instance) -> GammaGrid:
    """Admissible values ``k**(1/p)`` of gamma; empty means the instance is infeasible."""
    p = inst.p
    k_min = max(int(math.ceil(inst.ratio ** p - SNAP)), 1)
    lower = k_min ** (1.0 / p)
    g_all = np.min(np.maximum(inst.samples.sum(axis=-1) - inst.v + 1, 0), axis=-1) ** (1.0 / p)
    var, _ = var_cvar(-g_all, inst.epsilon)
    upper = -var
    ks = np.arange(k_min, inst.n + 1)
    vals = ks ** (1.0 / p)
    vals = vals[vals <= upper + SNAP]
    return GammaGrid(values=vals, lower=lower, upper=upper)


@dataclass(frozen=True)
class BaseInequality:
    """``-z_j - gamma >= d * (x . xi_bar) + d0`` with ``d < 0``."""

    j: int
    d: float
    d0: float
    xi_bar: np.ndarray

    def key(self) -> tuple:
        return (self.j, round(self.d, 12), round(self.d0, 12), self.xi_bar.tobytes())


def base_from_cut(cut: LinearCut) -> BaseInequality:
    """Relax an EPI-shaped Benders or hull cut to a base inequality."""
    if (
        cut.scenario is None
        or cut.slope is None
        or cut.support is None
        or cut.constant is None
        or cut.gamma != -1.0
        or cut.z != {cut.scenario: -1.0}
    ):
        raise ValueError("cut not of EPI shape")
    if not cut.slope < 0:
        raise ValueError(f"base slope must be negative, got {cut.slope}")
    return BaseInequality(
        j=int(cut.scenario),
        d=float(cut.slope),
        d0=float(cut.constant),
        xi_bar=np.asarray(cut.support, dtype=np.int64),
    )


def _tau_nu(u: float) -> tuple[int, float]:
    r = round(u)
    if abs(u - r) <= SNAP:
        return int(r), 1.0
    tau = math.ceil(u)
    return tau, u - (tau - 1)


@dataclass(frozen=True)
class MixedCutData:
    """Mixing data with bases sorted by ``nu`` at the smallest grid value.

    ``tau[j, k]`` and ``nu[j, k]`` are indexed by sorted base ``j`` and grid index ``k``.
    """

    bases: tuple[BaseInequality, ...]
    tau: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        nu1 = self.nu[:, 0]
        return np.diff(np.concatenate([[0.0], nu1]))

    def rhs_terms(self, x: np.ndarray) -> float:
        cover = np.array([float(b.xi_bar @ x) for b in self.bases])
        return float(self.weights @ (self.tau[:, 0] - cover))

    def max_form_violation(self, x: np.ndarray, z: dict[int, float] | np.ndarray, bits) -> float:
        lhs = max(z[b.j] / b.d for b in self.bases)
        return self.rhs_terms(x) + float(self.alpha @ np.asarray(bits)) - lhs

    def aggregated_cut(self) -> LinearCut:
        w = self.weights
        n = self.bases[0].xi_bar.size
        xcoef = np.zeros(n)
        for wj, b in zip(w, self.bases):
            xcoef += wj * b.xi_bar
        return LinearCut(
            x=xcoef,
            rhs=float(w @ self.tau[:, 0]),
            z={b.j: 1.0 / b.d for b in self.bases},
            bits=-self.alpha.copy(),
            family="mixing",
        )


def _order_key(base: BaseInequality, nu1: float) -> tuple:
    return (nu1, base.j, base.d, base.d0, tuple(base.xi_bar))


def mixed_inequality(bases, grid: GammaGrid) -> MixedCutData:
    """Mix the bases at ``gamma = r_1`` and compute the lifting coefficients."""
    bases = list(bases)
    if not bases:
        raise ValueError("empty base list")
    if grid.empty:
        raise ValueError("empty gamma grid")
    K = len(grid)
    tau = np.zeros((len(bases), K), dtype=np.int64)
    nu = np.zeros((len(bases), K))
    for jdx, b in enumerate(bases):
        if not b.d < 0:
            raise ValueError("base slope must be negative")
        for k, r in enumerate(grid.values):
            tau[jdx, k], nu[jdx, k] = _tau_nu(-(r + b.d0) / b.d)
    order = sorted(range(len(bases)), key=lambda t: _order_key(bases[t], nu[t, 0]))
    tau, nu = tau[order], nu[order]
    sorted_bases = tuple(bases[t] for t in order)
    alpha = lift_coefficients(tau, nu)
    return MixedCutData(bases=sorted_bases, tau=tau, nu=nu, alpha=alpha)


def lift_coefficients(tau: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Lifting coefficients of the grid binaries for bases sorted by ``nu[:, 0]``."""
    nu1 = nu[:, 0]
    w = np.diff(np.concatenate([[0.0], nu1]))
    nuJ = nu1[-1]
    first = np.minimum(nu - nuJ, 0.0).min(axis=0)
    second = w @ (tau - tau[:, [0]])
    alpha = np.maximum(first + second, 0.0)
    alpha[0] = 0.0
    return alpha


class BasePool:
    """FIFO pool of base inequalities (duplicates ignored)."""

    def __init__(self, cap: int = 200):
        self.cap = cap
        self._items: OrderedDict[tuple, BaseInequality] = OrderedDict()

    def add(self, base: BaseInequality) -> None:
        key = base.key()
        if key in self._items:
            return
        self._items[key] = base
        while len(self._items) > self.cap:
            self._items.popitem(last=False)

    def __iter__(self):
        return iter(self._items.values())

    def __len__(self) -> int:
        return len(self._items)


def separate_mixing(
    x_hat: np.ndarray,
    z_hat,
    gamma_bits_hat: np.ndarray,
    base_pool,
    grid: GammaGrid,
    tol: float = 1e-6,
    max_candidates: int = 40,
) -> LinearCut | None:
    """Greedy lifted mixing separation over bases from distinct scenarios.

    One base per scenario (largest ``nu`` at ``r_1``) is a candidate; bases are
    added greedily while the aggregated inequality's violation grows.
    """
    bases = list(base_pool)
    if not bases or grid.empty:
        return None
    x_hat = np.asarray(x_hat, dtype=float)
    bits = np.asarray(gamma_bits_hat, dtype=float)
    r1 = grid.r1
    per_scenario: dict[int, tuple[float, BaseInequality]] = {}
    for b in sorted(bases, key=lambda b: (b.j, b.d, b.d0, tuple(b.xi_bar))):
        _, nu1 = _tau_nu(-(r1 + b.d0) / b.d)
        cur = per_scenario.get(b.j)
        if cur is None or nu1 > cur[0] + SNAP:
            per_scenario[b.j] = (nu1, b)
    candidates = [b for _, (_, b) in sorted(per_scenario.items())]

    def agg_violation(chosen) -> float:
        data = mixed_inequality(chosen, grid)
        lhs = sum(z_hat[b.j] / b.d for b in data.bases)
        return data.rhs_terms(x_hat) + float(data.alpha @ bits) - lhs

    single = sorted(
        ((agg_violation([b]), b.j, b) for b in candidates), key=lambda t: (-t[0], t[1])
    )[:max_candidates]
    chosen: list[BaseInequality] = []
    best = -math.inf
    pool = [b for _, _, b in single]
    while pool:
        scores = [(agg_violation(chosen + [b]), -b.j, b) for b in pool]
        score, _, pick = max(scores, key=lambda t: (t[0], t[1]))
        if score <= best + 1e-12:
            break
        best = score
        chosen.append(pick)
        pool = [b for b in pool if b is not pick]
    if not chosen or best <= tol:
        return None
    data = mixed_inequality(chosen, grid)
    if data.max_form_violation(x_hat, z_hat, bits) <= tol:
        return None
    cut = data.aggregated_cut()
    if cut.violation(x_hat, 0.0, z_hat, bits) <= tol:
        return None
    return cut
