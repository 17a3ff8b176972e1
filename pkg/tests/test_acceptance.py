"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines bypass output
capture) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import instance_suite  # noqa: E402

from drcover.cli import OOS_DELTAS  # noqa: E402
from drcover.experiments import run_oos_study  # noqa: E402
from drcover.hull_cuts import breakpoints, build_family, h_value, single_scenario_cut  # noqa: E402
from drcover.mixing import (  # noqa: E402
    BaseInequality,
    BasePool,
    GammaGrid,
    base_from_cut,
    gamma_grid,
    mixed_inequality,
    separate_mixing,
)
from drcover.model import MODES, Instance, SolveConfig  # noqa: E402
from drcover.risk import g_value, z_membership, z_membership_existential  # noqa: E402
from drcover.scenario_cuts import (  # noqa: E402
    benders_cut,
    closed_form_dual,
    cp_vector,
    dual_objective,
    dual_solution,
    knapsack_at_capacity,
    knapsack_value,
)
from drcover.solvers import enumerate_optimum, root_bounds, solve_drc  # noqa: E402

_SUITE = None


def suite():
    global _SUITE
    if _SUITE is None:
        _SUITE = instance_suite()
    return _SUITE


def all_binary(n: int) -> np.ndarray:
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=float)


def report(k: int, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    return ok


# 1. oracle equivalence ------------------------------------------------------

def criterion_1() -> tuple[bool, str]:
    start = time.perf_counter()
    mismatches = 0
    solves = 0
    for inst in suite():
        ref = enumerate_optimum(inst)
        for mode in MODES:
            sol = solve_drc(inst, SolveConfig(mode=mode))
            solves += 1
            if sol.status != ref.status or (ref.status == "Optimal" and sol.objective != ref.objective):
                mismatches += 1
    elapsed = time.perf_counter() - start
    feasible = sum(enumerate_optimum(i).status == "Optimal" for i in suite())
    ok = mismatches == 0 and elapsed <= 300
    return ok, (f"{solves} solves on {len(suite())} instances ({feasible} feasible), "
                f"{mismatches} mismatches, {elapsed:.1f}s")


# 2. hull exactness ----------------------------------------------------------

def hull_rows(xi: np.ndarray, beta: int, pw) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``theta - coef.x <= h(empty)`` of every EPI of every surrogate, all support orders."""
    fam = build_family(xi, beta, pw)
    support = np.flatnonzero(xi)
    n = xi.size
    A, b = [], []
    for pair in fam.pairs:
        h = lambda k: h_value(pair, float(k), beta, pw)
        for perm in itertools.permutations(support):
            # theta <= h(S_0) + sum_k (h(S_k) - h(S_{k-1})) x_{perm_k}
            coef = np.zeros(n)
            for k, col in enumerate(perm, start=1):
                coef[col] = h(k) - h(k - 1)
            A.append(np.concatenate([[1.0], -coef]))
            b.append(h(0))
    return np.array(A), np.array(b)


def criterion_2() -> tuple[bool, str]:
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    cases = 0
    while cases < 50:
        z_size = int(rng.integers(3, 7))
        extra = int(rng.integers(0, 2))
        n = z_size + extra
        xi = np.zeros(n, dtype=np.int64)
        xi[rng.permutation(n)[:z_size]] = 1
        beta = int(rng.integers(1, z_size - 1))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        pw = breakpoints(p, n)
        A, b = hull_rows(xi, beta, pw)
        X = all_binary(n)
        fx = np.array([pw.f(int(max(x @ xi - beta, 0))) for x in X])
        for _ in range(50):
            c = rng.normal(size=n)
            res = linprog(-np.concatenate([[1.0], c]), A_ub=A, b_ub=b,
                          bounds=[(None, None)] + [(0, 1)] * n, method="highs")
            if res.status != 0:
                return False, f"LP status {res.status} in case {cases}"
            worst = max(worst, abs(-res.fun - float(np.max(fx + X @ c))))
        cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed <= 120
    return ok, f"50 cases x 50 objectives, max |LP - integer| = {worst:.2e}, {elapsed:.1f}s"


# 3. surrogate identity --------------------------------------------------------

def criterion_3() -> tuple[bool, str]:
    violations = 0
    checks = 0
    for p in (1.5, 2.0, 3.0):
        for z_size in range(3, 11):
            pw = breakpoints(p, z_size)
            xi = np.ones(z_size, dtype=np.int64)
            for beta in range(1, z_size - 1):
                fam = build_family(xi, beta, pw)
                for T in range(z_size + 1):
                    target = pw.f(max(T - beta, 0))
                    l1 = min(h_value(pr, T, beta, pw) for pr in fam.L1)
                    checks += 1
                    if abs(l1 - target) > 1e-12:
                        violations += 1
                    for pr in fam.L2:
                        checks += 1
                        if target > h_value(pr, T, beta, pw) + 1e-12:
                            violations += 1
    return violations == 0, f"{checks} checks, {violations} violations"


# 4. worked example -------------------------------------------------------------

def criterion_4() -> tuple[bool, str]:
    pw = breakpoints(2.0, 4)
    fam = build_family(np.ones(4, dtype=np.int64), 2, pw)
    r2 = math.sqrt(2)
    sets_ok = (
        len(fam.L1) == 2 and len(fam.L2) == 2
        and fam.L1[0] == (1, 0.0) and fam.L1[1][0] == 2 and abs(fam.L1[1][1] - r2) <= 1e-12
        and fam.L2 == ((1, 1.0), (2, 2.0))
    )
    closed = {
        fam.L1[0]: lambda z: max(z - 2, 0.0),
        fam.L1[1]: lambda z: (r2 - 1) * max(z - (2 - r2), 0.0),
        (1, 1.0): lambda z: 0.5 * max(z - 1, 0.0),
        (2, 2.0): lambda z: r2 / 4 * max(z, 0.0),
    }
    worst = max(abs(h_value(pr, z, 2, pw) - fn(z)) for pr, fn in closed.items() for z in range(5))
    ok = sets_ok and worst <= 1e-12
    return ok, f"L1={fam.L1}, L2={fam.L2}, max formula error {worst:.1e}"


# 5. strong duality -------------------------------------------------------------

def scan_dual(v_bar: float, cp: np.ndarray, v_m: int, p: float) -> float:
    """Best dual value over every breakpoint of the piecewise-linear dual."""
    return max(dual_objective(t, v_bar, cp, v_m, p) for t in np.append(-cp, 0.0))


def criterion_5() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    worst = 0.0
    zero_cap = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        I = int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        v = rng.integers(1, n + 1, size=I)
        sample = (rng.random((I, n)) < rng.uniform(0.2, 0.9)).astype(np.int64)
        inst = Instance(n=n, I=I, N=1, p=p, delta=0.1, epsilon=0.1, c=np.ones(n), v=v,
                        samples=sample[None])
        u = rng.random()
        if u < 0.1:
            x = np.zeros(n)
        elif u < 0.5:
            x = (rng.random(n) < 0.5).astype(float)
        else:
            x = rng.random(n)
        dual = dual_solution(x, sample, inst)
        primal = knapsack_value(x, sample, inst)
        cp = cp_vector(inst.v_max, p, n)
        zero_cap += dual.v_bar == 0.0
        worst = max(worst, abs(dual.objective + primal),
                    abs(dual.objective - scan_dual(dual.v_bar, cp, inst.v_max, p)))
    # capacities above n do not arise from instances; check the formula directly
    edge = 0
    for n in range(1, 9):
        for p in (1.5, 2.0, 3.0):
            for v_m in (1, 2, 3):
                cp = cp_vector(v_m, p, n)
                for v_bar in (0.0, 0.4, float(n), n + 0.5, n + 1.0, n + 3.7):
                    _, _, obj = closed_form_dual(v_bar, cp, v_m, p)
                    primal = knapsack_at_capacity(v_bar, cp, v_m, p)
                    worst = max(worst, abs(obj + primal), abs(obj - scan_dual(v_bar, cp, v_m, p)))
                    edge += 1
    ok = worst <= 1e-9 and zero_cap > 0
    return ok, (f"10000 pairs ({zero_cap} with zero capacity) + {edge} clamped capacities, "
                f"max |diff| = {worst:.1e}")


# 6. cut validity ---------------------------------------------------------------

def grid_of(ks, p) -> GammaGrid:
    vals = np.array(ks, dtype=float) ** (1.0 / p)
    return GammaGrid(values=vals, lower=vals[0], upper=vals[-1])


def criterion_6() -> tuple[bool, str]:
    rng = np.random.default_rng(6)
    counts = {"benders": 0, "hull": 0, "mixed": 0, "lifted": 0}
    viol = dict.fromkeys(counts, 0)
    # per-scenario sets: theta = gamma + z_j <= g_j(x) at every binary x
    for _ in range(300):
        n = int(rng.integers(2, 9))
        I = int(rng.integers(1, 4))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        v = rng.integers(1, max(n // 2, 1) + 1, size=I)
        sample = (rng.random((I, n)) < 0.7).astype(np.int64)
        inst = Instance(n=n, I=I, N=1, p=p, delta=0.1, epsilon=0.1, c=np.ones(n), v=v,
                        samples=sample[None])
        x_hat = rng.random(n)
        dual = dual_solution(x_hat, sample, inst)
        cuts = [benders_cut(x_hat, 99.0, 0.0, sample, 0, inst, tol=-np.inf, dual=dual)]
        cuts += single_scenario_cut(x_hat, 99.0, 0.0, sample, 0, dual.i_star, inst, tol=-np.inf)
        X = all_binary(n)
        g = np.array([g_value(x, sample, v, p) for x in X])
        for cut in cuts:
            counts[cut.family] += len(X)
            for x, gx in zip(X, g):
                # gamma = gx, z = 0 is the feasible point with largest gamma + z
                viol[cut.family] += cut.violation(x, gx, {0: 0.0}) > 1e-9
    # cross-scenario set: bases with z_j <= 0 and one-hot grid binaries
    for _ in range(300):
        n = int(rng.integers(1, 6))
        J = int(rng.integers(1, 4))
        p = float(rng.choice([2.0, 3.0]))
        k0 = int(rng.integers(1, 4))
        grid = grid_of(range(k0, k0 + int(rng.integers(1, 4))), p)
        bases = [
            BaseInequality(j=j, d=-rng.uniform(0.2, 2.0), d0=rng.uniform(-1.0, 1.5),
                           xi_bar=(rng.random(n) < 0.6).astype(np.int64))
            for j in range(J)
        ]
        data = mixed_inequality(bases, grid)
        agg = data.aggregated_cut()
        for x in all_binary(n):
            for k, r in enumerate(grid.values):
                bits = np.zeros(len(grid))
                bits[k] = 1.0
                z = {b.j: min(-r - b.d * (b.xi_bar @ x) - b.d0, 0.0) for b in bases}
                lhs = max(z[b.j] / b.d for b in data.bases)
                counts["mixed"] += 1
                viol["mixed"] += data.rhs_terms(x) - lhs > 1e-9
                counts["lifted"] += 2
                viol["lifted"] += data.max_form_violation(x, z, bits) > 1e-9
                viol["lifted"] += agg.violation(x, 0.0, z, bits) > 1e-9
    # separated mixing cuts from real scenario cuts against all members of small instances
    real = 0
    for inst in suite()[:60]:
        if inst.n > 8:
            continue
        grid = gamma_grid(inst)
        if grid.empty:
            continue
        pool = BasePool(cap=10**6)
        x_hat = rng.random(inst.n)
        for j in range(inst.N):
            dual = dual_solution(x_hat, inst.samples[j], inst)
            cut = benders_cut(x_hat, grid.values[-1], 0.0, inst.samples[j], j, inst, tol=-np.inf,
                              dual=dual)
            pool.add(base_from_cut(cut))
            for hc in single_scenario_cut(x_hat, grid.values[-1], 0.0, inst.samples[j], j,
                                          dual.i_star, inst, tol=-np.inf):
                pool.add(base_from_cut(hc))
        bits_hat = np.full(len(grid), 1.0 / len(grid))
        mix = separate_mixing(x_hat, np.zeros(inst.N) - 0.5, bits_hat, pool, grid, tol=-np.inf)
        if mix is None:
            continue
        real += 1
        for x in all_binary(inst.n):
            g = np.array([g_value(x, inst.samples[j], inst.v, inst.p) for j in range(inst.N)])
            for k, r in enumerate(grid.values):
                bits = np.zeros(len(grid))
                bits[k] = 1.0
                counts["lifted"] += 1
                viol["lifted"] += mix.violation(x, 0.0, np.minimum(g - r, 0.0), bits) > 1e-9
    total = sum(viol.values())
    detail = ", ".join(f"{k}: {viol[k]}/{counts[k]}" for k in counts)
    return total == 0 and all(counts.values()), f"violations {detail}; {real} separated mixing cuts"


# 7. finite gamma values --------------------------------------------------------

def criterion_7() -> tuple[bool, str]:
    changed = 0
    beyond = 0
    bad_empty = 0
    for inst in suite():
        a = enumerate_optimum(inst)
        b = enumerate_optimum(inst, gamma_restricted=True)
        changed += a.status != b.status or a.objective != b.objective
        empty = gamma_grid(inst).empty
        if empty and a.status != "Infeasible":
            bad_empty += 1
        if inst.ratio > inst.n ** (1.0 / inst.p):
            beyond += 1
            if not (empty and a.status == "Infeasible"):
                bad_empty += 1
    ok = changed == 0 and bad_empty == 0 and beyond > 0
    return ok, (f"{changed} changed optima; {beyond} instances beyond the max score, "
                f"{bad_empty} grid/oracle disagreements")


# 8. membership forms -----------------------------------------------------------

def criterion_8() -> tuple[bool, str]:
    rng = np.random.default_rng(8)
    from conftest import random_instance

    disagree = 0
    members = 0
    for _ in range(1000):
        inst = random_instance(rng)
        x = (rng.random(inst.n) < rng.uniform(0.3, 1.0)).astype(np.int64)
        a = z_membership(x, inst)
        b = z_membership_existential(x, inst)
        members += a
        disagree += a != b
    ok = disagree == 0 and 0 < members < 1000
    return ok, f"1000 pairs ({members} members), {disagree} disagreements"


# 9. root-bound ordering --------------------------------------------------------

def criterion_9() -> tuple[bool, str]:
    bad = 0
    strict = 0
    empty = 0
    for inst in suite():
        rb = root_bounds(inst)
        if rb is None:
            empty += 1
            continue
        a, b, c = rb["two_stage"], rb["plus_single"], rb["plus_cross"]
        tol = 1e-7 * max(1.0, abs(c) if math.isfinite(c) else 1.0)
        if not (a <= b + tol and b <= c + tol):
            bad += 1
        strict += (b > a + tol) or (c > b + tol)
    return bad == 0, (f"{len(suite()) - empty} instances compared ({empty} with empty grid), "
                      f"{bad} order violations, {strict} strict improvements")


# 10. out-of-sample shape -------------------------------------------------------

def criterion_10() -> tuple[bool, str]:
    deltas = [float(d) for d in OOS_DELTAS.split(",")]
    start = time.perf_counter()
    rows = run_oos_study(deltas, [100, 200, 300, 400, 500], epsilon=0.1, replications=5, seed=0,
                         n=30, I=10, config=SolveConfig(mode="two_stage", time_limit_seconds=60))
    elapsed = time.perf_counter() - start
    crosses = [r["delta"] for r in rows if r["drc_mean_reliability"] >= 0.9]
    below = True
    for r in rows:
        if math.isfinite(r["drc_mean_reliability"]) and not r["saa_mean_reliability"] < r["drc_mean_reliability"]:
            below = False
    by_n = {r["N"]: r["saa_mean_reliability"] for r in rows}
    ok = bool(crosses) and below and elapsed <= 600
    saa = ", ".join(f"N={k}: {v:.3f}" for k, v in sorted(by_n.items()))
    return ok, (f"DRC >= 0.9 at {len(set(crosses))}/{len(deltas)} deltas; SAA below DRC everywhere: "
                f"{below}; SAA {saa}; {elapsed:.0f}s")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("k", range(1, 11))
def test_acceptance(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print()
        report(k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    results = [report(k, *fn()) for k, fn in enumerate(CRITERIA, start=1)]
    sys.exit(0 if all(results) else 1)
