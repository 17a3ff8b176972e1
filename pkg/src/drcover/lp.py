"""Bounded-variable linear programs solved with the HiGHS dual simplex.

Two entry points: :func:`solve_lp` for one-shot programs and
:class:`LpSession` for the incrementally grown relaxations used during
branch-and-cut (rows appended, bounds changed, warm-started resolves).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import highspy
import numpy as np

INF_SENTINEL = 1e30

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
FAILED = "NumericalFailure"

_HINF = highspy.kHighsInf


def _to_highs_inf(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[out >= INF_SENTINEL] = _HINF
    out[out <= -INF_SENTINEL] = -_HINF
    return out


@dataclass
class LinearProgram:
    """``min`` (or ``max``) ``c.x`` over bounded variables and sensed rows.

    ``senses`` holds one of ``"<="``, ``">="``, ``"="`` per row of ``A``.
    Bounds at or beyond +/-1e30 are treated as infinite.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    rhs: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    sense: str = "min"
    warm_start: object | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        nvar = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, nvar) if nvar else np.zeros((len(self.senses), 0))
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.lb = np.zeros(nvar) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(nvar, INF_SENTINEL) if self.ub is None else np.asarray(self.ub, dtype=float)
        m = self.A.shape[0]
        if len(self.senses) != m or self.rhs.size != m:
            raise ValueError(
                f"dimension mismatch: A has {m} rows, {len(self.senses)} senses, {self.rhs.size} rhs"
            )
        if self.lb.shape != (nvar,) or self.ub.shape != (nvar,):
            raise ValueError("dimension mismatch: bounds do not match objective length")
        for s in self.senses:
            if s not in ("<=", ">=", "="):
                raise ValueError(f"unknown row sense {s!r}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        for name, arr in (("c", self.c), ("A", self.A), ("rhs", self.rhs)):
            if np.isnan(arr).any():
                raise ValueError(f"NaN coefficient in {name}")


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    basis: object | None = None
    iterations: int = 0


def _row_bounds(senses: Sequence[str], rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(len(senses), -_HINF)
    hi = np.full(len(senses), _HINF)
    for r, s in enumerate(senses):
        if s in ("<=", "="):
            hi[r] = rhs[r]
        if s in (">=", "="):
            lo[r] = rhs[r]
    return lo, hi


class LpSession:
    """A persistent LP whose rows and bounds change between warm-started solves."""

    def __init__(self, c: np.ndarray, lb: np.ndarray, ub: np.ndarray, sense: str = "min"):
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.setOptionValue("presolve", "off")
        self._h.setOptionValue("random_seed", 0)
        self._h.setOptionValue("threads", 1)
        c = np.asarray(c, dtype=float)
        self.num_cols = c.size
        self.num_rows = 0
        self.sign = 1.0 if sense == "min" else -1.0
        self._h.addVars(self.num_cols, _to_highs_inf(lb), _to_highs_inf(ub))
        if self.num_cols:
            self._h.changeColsCost(
                self.num_cols, np.arange(self.num_cols, dtype=np.int32), self.sign * c
            )

    def add_row(self, index: np.ndarray, value: np.ndarray, lo: float, hi: float) -> None:
        index = np.asarray(index, dtype=np.int32)
        value = np.asarray(value, dtype=float)
        lo = -_HINF if lo <= -INF_SENTINEL else lo
        hi = _HINF if hi >= INF_SENTINEL else hi
        self._h.addRow(float(lo), float(hi), index.size, index, value)
        self.num_rows += 1

    def add_dense_row(self, coef: np.ndarray, lo: float, hi: float) -> None:
        coef = np.asarray(coef, dtype=float)
        nz = np.flatnonzero(coef)
        self.add_row(nz, coef[nz], lo, hi)

    def set_bounds(self, cols: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> None:
        cols = np.asarray(cols, dtype=np.int32)
        if cols.size:
            self._h.changeColsBounds(cols.size, cols, _to_highs_inf(lb), _to_highs_inf(ub))

    def get_basis(self) -> object:
        return self._h.getBasis()

    def set_basis(self, basis: object | None) -> None:
        if basis is None:
            return
        # a stored basis may predate rows added since; extend with basic slacks
        nrow_basis = len(basis.row_status)
        if nrow_basis < self.num_rows:
            b = highspy.HighsBasis()
            b.col_status = list(basis.col_status)
            b.row_status = list(basis.row_status) + [highspy.HighsBasisStatus.kBasic] * (
                self.num_rows - nrow_basis
            )
            b.valid = True
            basis = b
        elif nrow_basis > self.num_rows:
            return
        self._h.setBasis(basis)

    def solve(self) -> LpOutcome:
        h = self._h
        h.run()
        status = h.getModelStatus()
        info = h.getInfo()
        iters = int(info.simplex_iteration_count)
        if status == highspy.HighsModelStatus.kOptimal:
            sol = h.getSolution()
            return LpOutcome(
                status=OPTIMAL,
                x=np.array(sol.col_value),
                duals=self.sign * np.array(sol.row_dual),
                objective=self.sign * float(info.objective_function_value),
                basis=h.getBasis(),
                iterations=iters,
            )
        if status == highspy.HighsModelStatus.kInfeasible:
            return LpOutcome(status=INFEASIBLE, iterations=iters)
        if status in (
            highspy.HighsModelStatus.kUnbounded,
            highspy.HighsModelStatus.kUnboundedOrInfeasible,
        ):
            # disambiguate with a zero objective feasibility solve
            probe = LpOutcome(status=UNBOUNDED, iterations=iters)
            if status == highspy.HighsModelStatus.kUnboundedOrInfeasible and not self._feasible():
                probe.status = INFEASIBLE
            return probe
        return LpOutcome(status=FAILED, iterations=iters)

    def _feasible(self) -> bool:
        lp = self._h.getLp()
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        lp.col_cost_ = np.zeros(self.num_cols)
        h.passModel(lp)
        h.run()
        return h.getModelStatus() == highspy.HighsModelStatus.kOptimal

    def write(self, path: str) -> None:
        """Dump the current model in LP-file format (debugging aid)."""
        self._h.writeModel(path)


def solve_lp(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` from scratch (or from ``lp.warm_start`` when given)."""
    session = LpSession(lp.c, lp.lb, lp.ub, lp.sense)
    lo, hi = _row_bounds(lp.senses, lp.rhs)
    for r in range(lp.A.shape[0]):
        session.add_dense_row(lp.A[r], lo[r], hi[r])
    if lp.warm_start is not None:
        session.set_basis(lp.warm_start)
    out = session.solve()
    if out.status == OPTIMAL:
        _check_residuals(lp, out)
    return out


def _check_residuals(lp: LinearProgram, out: LpOutcome, tol: float = 1e-7) -> None:
    """Downgrade an optimal outcome whose primal residual is out of tolerance."""
    x = out.x
    scale = 1.0 + np.abs(lp.rhs)
    act = lp.A @ x if lp.A.size else np.zeros(0)
    resid = np.zeros_like(act)
    for r, s in enumerate(lp.senses):
        if s == "<=":
            resid[r] = max(act[r] - lp.rhs[r], 0.0)
        elif s == ">=":
            resid[r] = max(lp.rhs[r] - act[r], 0.0)
        else:
            resid[r] = abs(act[r] - lp.rhs[r])
    lb = np.where(lp.lb <= -INF_SENTINEL, -np.inf, lp.lb)
    ub = np.where(lp.ub >= INF_SENTINEL, np.inf, lp.ub)
    bound_resid = np.maximum(lb - x, 0.0) + np.maximum(x - ub, 0.0)
    if (resid / scale).max(initial=0.0) > tol or bound_resid.max(initial=0.0) > tol:
        out.status = FAILED
