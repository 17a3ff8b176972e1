"""Deterministic best-bound branch-and-cut over binary columns.

Cuts arrive through callbacks: the lazy callback is consulted at every
LP solution that is integral on the integer columns and must return a violated
cut whenever the point is infeasible for the true model; the optional user
callback strengthens fractional relaxations.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lp as lpmod
from .mixing import GammaGrid
from .model import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_TIME_LIMIT,
    STATUS_UNBOUNDED,
    Instance,
    SolveConfig,
)
from .scenario_cuts import LinearCut

log = logging.getLogger(__name__)

BIG = lpmod.INF_SENTINEL


class EngineError(RuntimeError):
    pass


@dataclass
class Row:
    index: np.ndarray
    value: np.ndarray
    lo: float
    hi: float = BIG
    family: str = "row"


@dataclass
class MilpModel:
    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    rows: list[Row] = field(default_factory=list)
    infeasible: bool = False

    @property
    def num_cols(self) -> int:
        return self.obj.size

    def to_row(self, item) -> Row:
        if isinstance(item, Row):
            return item
        raise TypeError(f"cannot convert {type(item).__name__} to a row")


@dataclass
class MasterModel(MilpModel):
    """Relaxed master: ``x`` binaries, the gamma block and scenario variables ``z <= 0``.

    The gamma block is one continuous column, or (cross mode) one binary per
    grid value with ``gamma = sum_k r_k gamma_k`` substituted into every row.
    """

    inst: Instance | None = None
    mode: str = "two_stage"
    grid: GammaGrid | None = None
    x_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    gamma_idx: int | None = None
    bit_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    z_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def cross(self) -> bool:
        return self.gamma_idx is None

    def split(self, values: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
        """``(x, gamma, z, bits)`` from a full column vector."""
        x = values[self.x_idx]
        z = values[self.z_idx]
        if self.cross:
            bits = values[self.bit_idx]
            gamma = float(self.grid.values @ bits)
        else:
            bits = np.zeros(0)
            gamma = float(values[self.gamma_idx])
        return x, gamma, z, bits

    def to_row(self, item) -> Row:
        if isinstance(item, Row):
            return item
        if not isinstance(item, LinearCut):
            raise TypeError(f"cannot convert {type(item).__name__} to a row")
        coef = np.zeros(self.num_cols)
        coef[self.x_idx] = item.x
        for j, val in item.z.items():
            coef[self.z_idx[j]] += val
        if self.cross:
            coef[self.bit_idx] += item.gamma * self.grid.values
            if item.bits is not None:
                coef[self.bit_idx] += item.bits
        else:
            coef[self.gamma_idx] += item.gamma
            if item.bits is not None and np.any(item.bits != 0):
                raise ValueError("grid-bit coefficients in a model without grid encoding")
        nz = np.flatnonzero(np.abs(coef) > 1e-13)
        return Row(nz, coef[nz], float(item.rhs), BIG, item.family)


def build_master(inst: Instance, mode: str, grid: GammaGrid | None = None) -> MasterModel:
    """Master problem with only the coupling row; scenario cuts arrive lazily."""
    n, N = inst.n, inst.N
    cross = mode == "plus_cross"
    if cross and grid is None:
        raise ValueError("cross mode requires a gamma grid")
    x_idx = np.arange(n)
    if cross:
        K = len(grid)
        bit_idx = np.arange(n, n + K)
        gamma_idx = None
        z_idx = np.arange(n + K, n + K + N)
        ncols = n + K + N
    else:
        bit_idx = np.zeros(0, dtype=np.int64)
        gamma_idx = n
        z_idx = np.arange(n + 1, n + 1 + N)
        ncols = n + 1 + N
    obj = np.zeros(ncols)
    obj[x_idx] = inst.c
    lb = np.zeros(ncols)
    ub = np.ones(ncols)
    integer = np.zeros(ncols, dtype=bool)
    integer[x_idx] = True
    integer[bit_idx] = True
    lb[z_idx] = -BIG
    ub[z_idx] = 0.0
    if not cross:
        ub[gamma_idx] = BIG
    model = MasterModel(
        obj=obj, lb=lb, ub=ub, integer=integer, inst=inst, mode=mode, grid=grid,
        x_idx=x_idx, gamma_idx=gamma_idx, bit_idx=bit_idx, z_idx=z_idx,
    )
    if cross and grid.empty:
        model.infeasible = True
        return model
    # delta - gamma*eps <= mean(z)  <=>  eps*gamma + mean(z) >= delta
    coef = np.zeros(ncols)
    coef[z_idx] = 1.0 / N
    if cross:
        coef[bit_idx] = inst.epsilon * grid.values
        model.rows.append(Row(np.arange(ncols), coef, inst.delta, BIG, "coupling"))
        onehot = np.zeros(ncols)
        onehot[bit_idx] = 1.0
        nz = np.flatnonzero(onehot)
        model.rows.append(Row(nz, onehot[nz], 1.0, 1.0, "onehot"))
    else:
        coef[gamma_idx] = inst.epsilon
        nz = np.flatnonzero(coef)
        model.rows.append(Row(nz, coef[nz], inst.delta, BIG, "coupling"))
    return model


@dataclass
class NodeRecord:
    bound: float
    lb: np.ndarray
    ub: np.ndarray
    depth: int
    basis: object | None = None


@dataclass
class MilpResult:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    gap_percent: float
    nodes: int
    cut_counts: dict[str, int]
    root_bound: float
    wall_seconds: float
    trace: list[tuple[float, float]] = field(default_factory=list)


Callback = Callable[[np.ndarray], Sequence]


def gap_percent(ub: float, lb: float) -> float:
    if not math.isfinite(ub):
        return 100.0
    return max(100.0 * (ub - lb) / max(abs(ub), 1e-9), 0.0)


def solve_milp(
    model: MilpModel,
    lazy_cb: Callback | None,
    user_cb: Callback | None = None,
    config: SolveConfig | None = None,
    root_cb: Callable[[object], None] | None = None,
) -> MilpResult:
    """Best-bound branch-and-cut; most-fractional branching with lowest-index ties."""
    config = config or SolveConfig()
    tol = config.tolerances
    start = time.perf_counter()
    deadline = start + config.time_limit_seconds
    counts: dict[str, int] = {}

    def elapsed() -> float:
        return time.perf_counter() - start

    if model.infeasible:
        return MilpResult(STATUS_INFEASIBLE, None, math.inf, math.inf, 0.0, 0, counts,
                          math.inf, elapsed())

    session = lpmod.LpSession(model.obj, model.lb, model.ub)
    for row in model.rows:
        session.add_row(row.index, row.value, row.lo, row.hi)
    int_cols = np.flatnonzero(model.integer)

    def add_cuts(items) -> int:
        added = 0
        for item in items:
            row = model.to_row(item)
            if row.index.size == 0:
                if row.lo > 1e-9:
                    raise EngineError("empty cut row with positive right-hand side")
                continue
            session.add_row(row.index, row.value, row.lo, row.hi)
            counts[row.family] = counts.get(row.family, 0) + 1
            added += 1
        return added

    def closeness(target: float) -> float:
        return tol.gap * max(1.0, abs(target))

    counter = itertools.count()
    root = NodeRecord(-math.inf, model.lb[int_cols].copy(), model.ub[int_cols].copy(), 0)
    heap: list[tuple[float, int, NodeRecord]] = [(root.bound, next(counter), root)]
    ub_val, incumbent = math.inf, None
    root_bound = -math.inf
    nodes = 0
    trace: list[tuple[float, float]] = []
    timed_out = False
    unbounded = False
    current_bound = -math.inf

    while heap:
        bound, _, node = heap[0]
        if bound >= ub_val - closeness(ub_val):
            heap.clear()
            break
        if time.perf_counter() >= deadline:
            timed_out = True
            break
        heapq.heappop(heap)
        current_bound = bound
        nodes += 1
        session.set_bounds(int_cols, node.lb, node.ub)
        session.set_basis(node.basis)
        user_rounds = 0
        last_obj = -math.inf
        while True:
            if time.perf_counter() >= deadline:
                timed_out = True
                heapq.heappush(heap, (node.bound, next(counter), node))
                break
            out = session.solve()
            if out.status == lpmod.FAILED:
                session.set_basis(None)
                out = session.solve()
            if out.status == lpmod.INFEASIBLE:
                break
            if out.status == lpmod.UNBOUNDED:
                unbounded = True
                break
            if out.status != lpmod.OPTIMAL:
                raise EngineError(f"LP failure at node {nodes} (depth {node.depth})")
            obj = out.objective
            if node.depth == 0:
                root_bound = max(root_bound, obj)
            if obj >= ub_val - closeness(ub_val):
                break
            vals = out.x
            ivals = vals[int_cols]
            frac = np.abs(ivals - np.round(ivals))
            if frac.max(initial=0.0) <= tol.integrality:
                vals = vals.copy()
                vals[int_cols] = np.round(ivals)
                cuts = list(lazy_cb(vals)) if lazy_cb is not None else []
                if cuts and add_cuts(cuts):
                    continue
                ub_val, incumbent = obj, vals
                trace.append((min([current_bound] + [h[0] for h in heap]), ub_val))
                break
            max_rounds = config.root_rounds if node.depth == 0 else 1
            if user_cb is not None and user_rounds < max_rounds and obj > last_obj + 1e-9 * max(1.0, abs(obj)):
                cuts = list(user_cb(vals))
                user_rounds += 1
                last_obj = obj
                if cuts and add_cuts(cuts):
                    continue
            # branch on the most fractional integer column
            score = np.minimum(ivals - np.floor(ivals), np.ceil(ivals) - ivals)
            pick = int(np.argmax(score))
            col_val = ivals[pick]
            down_ub = node.ub.copy()
            down_ub[pick] = math.floor(col_val)
            up_lb = node.lb.copy()
            up_lb[pick] = math.ceil(col_val)
            basis = out.basis
            for lbv, ubv in ((node.lb, down_ub), (up_lb, node.ub)):
                child = NodeRecord(obj, lbv, ubv, node.depth + 1, basis)
                heapq.heappush(heap, (obj, next(counter), child))
            break
        if node.depth == 0 and root_cb is not None:
            root_cb(session)
        if unbounded:
            break
        if timed_out:
            break
        trace.append((min([ub_val] + [h[0] for h in heap]) if heap else ub_val, ub_val))

    wall = elapsed()
    if unbounded:
        return MilpResult(STATUS_UNBOUNDED, None, -math.inf, -math.inf, math.inf, nodes,
                          counts, root_bound, wall, trace)
    if timed_out:
        open_bounds = [h[0] for h in heap]
        lb_val = min(open_bounds) if open_bounds else current_bound
        lb_val = min(lb_val, ub_val)
        return MilpResult(STATUS_TIME_LIMIT, incumbent, ub_val, lb_val,
                          gap_percent(ub_val, lb_val), nodes, counts, root_bound, wall, trace)
    if incumbent is None:
        return MilpResult(STATUS_INFEASIBLE, None, math.inf, math.inf, 0.0, nodes, counts,
                          root_bound, wall, trace)
    return MilpResult(STATUS_OPTIMAL, incumbent, ub_val, ub_val, 0.0, nodes, counts,
                      root_bound, wall, trace)
