"""End-to-end solves: the robust model in three cut modes, the SAA baseline
and the exhaustive enumeration oracle."""

from __future__ import annotations

import math
import time

import numpy as np

from .bnc import BIG, EngineError, MasterModel, MilpModel, Row, build_master, solve_milp
from .hull_cuts import single_scenario_cut
from .lp import LpSession, OPTIMAL
from .mixing import BasePool, GammaGrid, base_from_cut, gamma_grid, separate_mixing
from .model import (
    MODES,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    Instance,
    SolveConfig,
    Solution,
    validate_instance,
)
from .risk import cvar_rows, g_values, z_membership
from .scenario_cuts import LinearCut, benders_cut, benders_cuts_batch, dual_solution

ENUM_MAX_N = 25


class Separator:
    """Scenario-by-scenario separation shared by the lazy and user callbacks."""

    def __init__(self, inst: Instance, master: MasterModel, config: SolveConfig):
        self.inst = inst
        self.master = master
        self.mode = master.mode
        self.tol = config.tolerances.cut_violation
        self.pool = BasePool()

    def _feed(self, cut: LinearCut) -> None:
        if self.mode == "plus_cross" and cut.slope is not None and cut.slope < 0:
            self.pool.add(base_from_cut(cut))

    def __call__(self, values: np.ndarray) -> list[LinearCut]:
        inst = self.inst
        x, gamma, z, bits = self.master.split(values)
        cuts: list[LinearCut] = []
        scan = None
        if np.all((x == 0) | (x == 1)):
            # at integral x the Benders cut is exact: violated iff z_j + gamma > g_j
            scan = np.flatnonzero(z + gamma - g_values(x, inst) > self.tol)
        for cut, i_star in benders_cuts_batch(x, gamma, z, inst, self.tol, scan):
            j = cut.scenario
            cuts.append(cut)
            self._feed(cut)
            if self.mode in ("plus_single", "plus_cross"):
                for hc in single_scenario_cut(x, gamma, z[j], inst.samples[j], j, i_star, inst, self.tol):
                    cuts.append(hc)
                    self._feed(hc)
        if self.mode == "plus_cross" and cuts:
            mix = separate_mixing(x, z, bits, self.pool, self.master.grid, self.tol)
            if mix is not None:
                cuts.append(mix)
        return cuts


def _infeasible(n: int, start: float) -> Solution:
    return Solution(
        x=np.zeros(n, dtype=np.int64),
        objective=math.inf,
        status=STATUS_INFEASIBLE,
        gap_percent=0.0,
        wall_seconds=time.perf_counter() - start,
    )


def solve_drc(inst: Instance, config: SolveConfig | None = None) -> Solution:
    """Minimum-cost selection satisfying the worst-case chance constraint."""
    config = config or SolveConfig()
    validate_instance(inst)
    if config.mode not in MODES:
        raise ValueError(f"unknown mode {config.mode!r}")
    start = time.perf_counter()
    grid = gamma_grid(inst)
    # every member admits a certificate with gamma on the grid
    if grid.empty:
        return _infeasible(inst.n, start)
    master = build_master(inst, config.mode, grid if config.mode == "plus_cross" else None)
    sep = Separator(inst, master, config)
    user = sep if config.user_cuts else None
    res = solve_milp(master, sep, user, config)
    x = np.zeros(inst.n, dtype=np.int64)
    if res.x is not None:
        x = np.round(res.x[master.x_idx]).astype(np.int64)
        if not z_membership(x, inst, tol=1e-5):
            raise EngineError("incumbent fails the membership cross-check")
    return Solution(
        x=x,
        objective=float(inst.c @ x) if res.x is not None else math.inf,
        status=res.status,
        gap_percent=float(res.gap_percent),
        wall_seconds=time.perf_counter() - start,
        cut_counts=dict(res.cut_counts),
        nodes=res.nodes,
        root_bound=float(res.root_bound) if math.isfinite(res.root_bound) else None,
    )


def saa_threshold(inst: Instance) -> int:
    """Number of scenarios that must be covered; round-off in ``N(1-eps)`` is snapped."""
    return int(math.ceil(inst.N * (1.0 - inst.epsilon) - 1e-9))


def build_saa(inst: Instance) -> MilpModel:
    n, N, I = inst.n, inst.N, inst.I
    ncols = n + N
    obj = np.concatenate([inst.c, np.zeros(N)])
    model = MilpModel(obj=obj, lb=np.zeros(ncols), ub=np.ones(ncols),
                      integer=np.ones(ncols, dtype=bool))
    zc = np.arange(n, n + N)
    model.rows.append(Row(zc, np.ones(N), float(saa_threshold(inst)), BIG, "quantile"))
    vm = inst.v_max
    for j in range(N):
        for i in range(I):
            support = np.flatnonzero(inst.samples[j, i])
            idx = np.concatenate([support, [n + j]])
            val = np.concatenate([np.ones(support.size), [-float(vm)]])
            model.rows.append(Row(idx, val, float(inst.v[i] - vm), BIG, "bigm"))
    return model


def solve_saa(inst: Instance, config: SolveConfig | None = None) -> Solution:
    """Sample-average baseline: cover at least a ``1-eps`` share of the scenarios."""
    config = config or SolveConfig()
    validate_instance(inst)
    start = time.perf_counter()
    model = build_saa(inst)
    res = solve_milp(model, None, None, config)
    x = np.zeros(inst.n, dtype=np.int64)
    if res.x is not None:
        x = np.round(res.x[: inst.n]).astype(np.int64)
    return Solution(
        x=x,
        objective=float(inst.c @ x) if res.x is not None else math.inf,
        status=res.status,
        gap_percent=float(res.gap_percent),
        wall_seconds=time.perf_counter() - start,
        nodes=res.nodes,
        root_bound=float(res.root_bound) if math.isfinite(res.root_bound) else None,
    )


def _all_selections(n: int, lo: int, hi: int) -> np.ndarray:
    codes = np.arange(lo, hi, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.int64)


def _scan(inst: Instance, accept, chunk: int = 1 << 14) -> Solution:
    if inst.n > ENUM_MAX_N:
        raise ValueError(f"enumeration guard: n={inst.n} exceeds {ENUM_MAX_N}")
    start = time.perf_counter()
    best_cost, best_x = math.inf, None
    total = 1 << inst.n
    for lo in range(0, total, chunk):
        X = _all_selections(inst.n, lo, min(lo + chunk, total))
        cost = X @ inst.c
        # skip selections no cheaper than the incumbent before the membership test
        keep = cost < best_cost
        if not keep.any():
            continue
        X, cost = X[keep], cost[keep]
        ok = accept(X)
        if ok.any():
            k = int(np.flatnonzero(ok)[np.argmin(cost[ok])])
            if cost[k] < best_cost:
                best_cost, best_x = float(cost[k]), X[k].copy()
    if best_x is None:
        return _infeasible(inst.n, start)
    return Solution(x=best_x, objective=best_cost, status=STATUS_OPTIMAL, gap_percent=0.0,
                    wall_seconds=time.perf_counter() - start)


def scores_batch(X: np.ndarray, inst: Instance) -> np.ndarray:
    """Scenario scores for a batch of selections, shape ``(B, N)``."""
    cover = np.einsum("jik,bk->bji", inst.samples, X)
    m = (cover - inst.v + 1).min(axis=-1)
    return np.maximum(m, 0) ** (1.0 / inst.p)


def membership_batch(X: np.ndarray, inst: Instance, tol: float = 1e-7) -> np.ndarray:
    return inst.ratio + cvar_rows(-scores_batch(X, inst), inst.epsilon) <= tol


def grid_membership_batch(X: np.ndarray, inst: Instance, grid: GammaGrid, tol: float = 1e-9) -> np.ndarray:
    """Membership with gamma restricted to the grid values."""
    if grid.empty:
        return np.zeros(X.shape[0], dtype=bool)
    g = scores_batch(X, inst)
    ok = np.zeros(X.shape[0], dtype=bool)
    for r in grid.values:
        zmean = np.minimum(g - r, 0.0).mean(axis=-1)
        ok |= zmean >= inst.delta - r * inst.epsilon - tol
    return ok


def enumerate_optimum(inst: Instance, gamma_restricted: bool = False) -> Solution:
    """Cheapest member by exhaustive scan of all ``2**n`` selections.

    With ``gamma_restricted`` the existential certificate may only use grid values.
    """
    validate_instance(inst)
    if gamma_restricted:
        grid = gamma_grid(inst)
        return _scan(inst, lambda X: grid_membership_batch(X, inst, grid))
    return _scan(inst, lambda X: membership_batch(X, inst))


def enumerate_saa(inst: Instance) -> Solution:
    """Cheapest selection covering at least the SAA share of scenarios."""
    validate_instance(inst)
    need = saa_threshold(inst)

    def accept(X):
        cover = np.einsum("jik,bk->bji", inst.samples, X)
        ok = np.all(cover >= inst.v, axis=-1).sum(axis=-1)
        return ok >= need

    return _scan(inst, accept)


def root_bounds(inst: Instance, config: SolveConfig | None = None) -> dict[str, float] | None:
    """Root LP bounds of the three modes after one shared separation round.

    The two-stage master's first LP point is separated once; Benders cuts go
    to every mode, hull cuts to the single and cross modes, and one mixing
    cut (when found) to the cross mode. Returns ``None`` for an empty grid.
    """
    config = config or SolveConfig()
    grid = gamma_grid(inst)
    if grid.empty:
        return None
    tol = config.tolerances.cut_violation
    base = build_master(inst, "two_stage")
    point = _lp_point(base, [])
    x, gamma, z, _ = base.split(point)
    benders, hull = [], []
    pool = BasePool(cap=10**6)
    for j in range(inst.N):
        sample = inst.samples[j]
        dual = dual_solution(x, sample, inst)
        cut = benders_cut(x, gamma, z[j], sample, j, inst, tol, dual=dual)
        if cut is None:
            continue
        benders.append(cut)
        pool.add(base_from_cut(cut))
        for hc in single_scenario_cut(x, gamma, z[j], sample, j, dual.i_star, inst, tol):
            hull.append(hc)
            pool.add(base_from_cut(hc))
    cross = build_master(inst, "plus_cross", grid)
    mixing = []
    if len(pool):
        out = _lp_session(cross, benders + hull).solve()
        if out.status == OPTIMAL:
            cx, _, cz, cbits = cross.split(out.x)
            mix = separate_mixing(cx, cz, cbits, pool, grid, tol)
            if mix is not None:
                mixing.append(mix)
    return {
        "two_stage": _lp_bound(base, benders),
        "plus_single": _lp_bound(build_master(inst, "plus_single"), benders + hull),
        "plus_cross": _lp_bound(cross, benders + hull + mixing),
    }


def _lp_session(model: MasterModel, cuts) -> LpSession:
    session = LpSession(model.obj, model.lb, model.ub)
    for row in model.rows:
        session.add_row(row.index, row.value, row.lo, row.hi)
    for cut in cuts:
        row = model.to_row(cut)
        session.add_row(row.index, row.value, row.lo, row.hi)
    return session


def _lp_point(model: MasterModel, cuts) -> np.ndarray:
    out = _lp_session(model, cuts).solve()
    if out.status != OPTIMAL:
        raise EngineError(f"root LP not optimal: {out.status}")
    return out.x


def _lp_bound(model: MasterModel, cuts) -> float:
    out = _lp_session(model, cuts).solve()
    if out.status != OPTIMAL:
        return math.inf
    return float(out.objective)
