"""Instance generation, out-of-sample reliability studies and benchmark sweeps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .model import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    Instance,
    SolveConfig,
    Solution,
    write_solution,
)
from .risk import true_reliability
from .solvers import solve_drc, solve_saa

Z90 = 1.6448536269514722

OOS_COLUMNS = [
    "delta", "N", "replications",
    "drc_status", "drc_feasible", "drc_mean_reliability", "drc_half_width", "drc_mean_cost",
    "saa_status", "saa_feasible", "saa_mean_reliability", "saa_half_width", "saa_mean_cost",
]

BENCH_COLUMNS = [
    "n", "I", "N", "delta", "epsilon", "mode", "replications",
    "mean_seconds", "mean_gap_percent", "unsolved", "inf_count", "mean_nodes",
]


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int
    n: int
    I: int
    N: int
    q_low: float = 0.4
    q_high: float = 0.8
    noise_scale: float = 0.25
    cost_low: int = 1
    cost_high: int = 100
    v: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.q_low <= self.q_high <= 1.0:
            raise ValueError("need 0 <= q_low <= q_high <= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if self.cost_low > self.cost_high:
            raise ValueError("empty cost range")
        if self.v is not None and len(self.v) != self.I:
            raise ValueError(f"dimension mismatch: {len(self.v)} coverage levels for I={self.I}")


def round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def draw_scenarios(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(q, c, clean, noisy)``; clean draws are the Bernoulli scenarios before noise.

    Independent child streams keep the first ``N`` scenarios identical for any
    larger ``N`` under the same seed.
    """
    param_ss, clean_ss, noise_ss = np.random.SeedSequence(spec.seed).spawn(3)
    prng = np.random.default_rng(param_ss)
    q = prng.uniform(spec.q_low, spec.q_high, size=spec.I)
    c = prng.integers(spec.cost_low, spec.cost_high + 1, size=spec.n).astype(float)
    u = np.random.default_rng(clean_ss).random((spec.N, spec.I, spec.n))
    clean = (u < q[None, :, None]).astype(np.int64)
    e = np.random.default_rng(noise_ss).standard_normal((spec.N, spec.I, spec.n))
    noisy = np.clip(round_half_away(clean + spec.noise_scale * e), 0, 1).astype(np.int64)
    return q, c, clean, noisy


def generate_instance(
    spec: GeneratorSpec, delta: float, epsilon: float, p: float = 2.0
) -> tuple[Instance, np.ndarray]:
    q, c, _, samples = draw_scenarios(spec)
    v = np.ones(spec.I, dtype=np.int64) if spec.v is None else np.asarray(spec.v, dtype=np.int64)
    inst = Instance(n=spec.n, I=spec.I, N=spec.N, p=p, delta=delta, epsilon=epsilon,
                    c=c, v=v, samples=samples)
    return inst, q


def flip_probability(noise_scale: float) -> float:
    """Probability that noise flips a binary entry after rounding."""
    if noise_scale == 0:
        return 0.0
    return float(norm.sf(0.5 / noise_scale))


def mean_and_half_width(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and 90% normal-approximation half-width (0 for one value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(Z90 * arr.std(ddof=1) / math.sqrt(arr.size))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_csv(rows: Iterable[dict], target, columns: Sequence[str]) -> None:
    """Write rows with a header to a path or an open text stream."""
    if hasattr(target, "write"):
        _write_rows(rows, target, columns)
        return
    with open(target, "w", newline="") as fh:
        _write_rows(rows, fh, columns)


def _write_rows(rows, fh, columns) -> None:
    writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in columns})


def _summary(prefix: str, sols: list[Solution], q_list: list[np.ndarray], v_list) -> dict:
    rel, cost = [], []
    for sol, q, v in zip(sols, q_list, v_list):
        if sol.status == STATUS_OPTIMAL or (sol.status != STATUS_INFEASIBLE and math.isfinite(sol.objective)):
            rel.append(true_reliability(sol.x, q, v))
            cost.append(sol.objective)
    mean, hw = mean_and_half_width(rel)
    if not rel:
        status = "INF" if all(s.status == STATUS_INFEASIBLE for s in sols) else "NOSOL"
    elif len(rel) == len(sols) and all(s.status == STATUS_OPTIMAL for s in sols):
        status = "OPT"
    else:
        status = "MIXED"
    return {
        f"{prefix}_status": status,
        f"{prefix}_feasible": len(rel),
        f"{prefix}_mean_reliability": mean,
        f"{prefix}_half_width": hw,
        f"{prefix}_mean_cost": float(np.mean(cost)) if cost else math.nan,
    }


def run_oos_study(
    deltas: Sequence[float],
    sample_sizes: Sequence[int],
    epsilon: float = 0.1,
    replications: int = 5,
    seed: int = 0,
    n: int = 30,
    I: int = 10,
    p: float = 2.0,
    config: SolveConfig | None = None,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Mean true reliability of the robust and SAA solutions per ``(delta, N)``.

    Replication ``r`` uses generator seed ``seed + r``; all ``N`` share its
    parameters and scenario stream. SAA does not depend on ``delta`` and is
    solved once per ``(N, r)``.
    """
    config = config or SolveConfig()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    for N in sorted(sample_sizes):
        base = [GeneratorSpec(seed=seed + r, n=n, I=I, N=N) for r in range(replications)]
        saa_sols, qs, vs = [], [], []
        for r, spec in enumerate(base):
            inst, q = generate_instance(spec, delta=min(deltas), epsilon=epsilon, p=p)
            sol = solve_saa(inst, config)
            saa_sols.append(sol)
            qs.append(q)
            vs.append(inst.v)
            if out is not None:
                write_solution(sol, out / f"saa_N{N}_r{r}.json")
                (out / f"q_N{N}_r{r}.json").write_text(
                    json.dumps({"q": q.tolist(), "v": inst.v.tolist()})
                )
        saa_row = _summary("saa", saa_sols, qs, vs)
        for delta in sorted(deltas):
            drc_sols = []
            for r, spec in enumerate(base):
                inst, _ = generate_instance(spec, delta=delta, epsilon=epsilon, p=p)
                sol = solve_drc(inst, config)
                drc_sols.append(sol)
                if out is not None:
                    write_solution(sol, out / f"drc_d{delta:g}_N{N}_r{r}.json")
            row = {"delta": delta, "N": N, "replications": replications}
            row.update(_summary("drc", drc_sols, qs, vs))
            row.update(saa_row)
            rows.append(row)
    rows.sort(key=lambda r: (r["delta"], r["N"]))
    return rows


def run_benchmark(
    ns: Sequence[int],
    Is: Sequence[int],
    deltas: Sequence[float],
    epsilons: Sequence[float],
    Ns: Sequence[int],
    modes: Sequence[str],
    replications: int = 5,
    time_limit: float = 60.0,
    seed: int = 0,
    p: float = 2.0,
    v: Sequence[int] | None = None,
) -> list[dict]:
    """Per-cell mean wall time, mean gap over non-INF instances and counts.

    ``unsolved`` counts instances stopped by the time limit; ``inf_count`` those
    proven infeasible, which are excluded from the gap mean.
    """
    rows = []
    for n in ns:
        for I in Is:
            for N in Ns:
                for delta in deltas:
                    for eps in epsilons:
                        for mode in modes:
                            config = SolveConfig(mode=mode, time_limit_seconds=time_limit, seed=seed)
                            times, gaps, nodes = [], [], []
                            inf = unsolved = 0
                            for r in range(replications):
                                spec = GeneratorSpec(seed=seed + r, n=n, I=I, N=N,
                                                     v=tuple(v) if v is not None else None)
                                inst, _ = generate_instance(spec, delta, eps, p)
                                sol = solve_drc(inst, config)
                                times.append(sol.wall_seconds)
                                nodes.append(sol.nodes)
                                if sol.status == STATUS_INFEASIBLE:
                                    inf += 1
                                    continue
                                if sol.status != STATUS_OPTIMAL:
                                    unsolved += 1
                                gaps.append(sol.gap_percent)
                            rows.append({
                                "n": n, "I": I, "N": N, "delta": delta, "epsilon": eps,
                                "mode": mode, "replications": replications,
                                "mean_seconds": float(np.mean(times)),
                                "mean_gap_percent": float(np.mean(gaps)) if gaps else None,
                                "unsolved": unsolved, "inf_count": inf,
                                "mean_nodes": float(np.mean(nodes)),
                            })
    return rows

