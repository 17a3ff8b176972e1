"""Problem data, solution records, solver configuration and JSON I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

MODES = ("two_stage", "plus_single", "plus_cross")

STATUS_OPTIMAL = "Optimal"
STATUS_INFEASIBLE = "Infeasible"
STATUS_TIME_LIMIT = "TimeLimit"
STATUS_UNBOUNDED = "Unbounded-guard"
STATUSES = (STATUS_OPTIMAL, STATUS_INFEASIBLE, STATUS_TIME_LIMIT, STATUS_UNBOUNDED)


class InstanceError(ValueError):
    """Raised for malformed instances or instance files."""


@dataclass(frozen=True, eq=False)
class Instance:
    """A distributionally robust chance-constrained set covering instance.

    ``samples[j, i, k]`` is 1 when element ``k`` covers target ``i`` in
    training scenario ``j``.
    """

    n: int
    I: int
    N: int
    p: float
    delta: float
    epsilon: float
    c: np.ndarray
    v: np.ndarray
    samples: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        v = np.asarray(self.v)
        samples = np.asarray(self.samples)
        if v.size and np.issubdtype(v.dtype, np.floating):
            if not np.all(np.isfinite(v)) or np.any(v != np.round(v)):
                raise InstanceError("coverage levels must be integers")
        v = v.astype(np.int64)
        if samples.size and np.issubdtype(samples.dtype, np.floating):
            if not np.all(np.isfinite(samples)):
                raise InstanceError("non-finite sample entry")
        samples = samples.astype(np.int64) if np.all(samples == np.round(samples)) else samples
        for arr in (c, v, samples):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "samples", samples)

    @cached_property
    def v_max(self) -> int:
        return int(self.v.max())

    @property
    def ratio(self) -> float:
        """Radius over risk level, the threshold the CVaR term must beat."""
        return self.delta / self.epsilon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            (self.n, self.I, self.N) == (other.n, other.I, other.N)
            and self.p == other.p
            and self.delta == other.delta
            and self.epsilon == other.epsilon
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None  # type: ignore[assignment]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": int(self.n),
            "I": int(self.I),
            "N": int(self.N),
            "p": float(self.p),
            "delta": float(self.delta),
            "epsilon": float(self.epsilon),
            "c": [float(x) for x in self.c],
            "v": [int(x) for x in self.v],
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Instance:
        required = ("n", "I", "N", "p", "delta", "epsilon", "c", "v", "samples")
        for key in required:
            if key not in data:
                raise InstanceError(f"missing key {key!r}")
        try:
            samples = np.array(data["samples"])
            return cls(
                n=int(data["n"]),
                I=int(data["I"]),
                N=int(data["N"]),
                p=float(data["p"]),
                delta=float(data["delta"]),
                epsilon=float(data["epsilon"]),
                c=np.array(data["c"], dtype=float),
                v=np.array(data["v"]),
                samples=samples,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InstanceError):
                raise
            raise InstanceError(f"malformed instance data: {exc}") from exc


def validate_instance(inst: Instance) -> None:
    """Raise :class:`InstanceError` unless every instance invariant holds."""
    if inst.n < 1 or inst.I < 1 or inst.N < 1:
        raise InstanceError(f"sizes must be positive (n={inst.n}, I={inst.I}, N={inst.N})")
    if inst.c.shape != (inst.n,):
        raise InstanceError(f"dimension mismatch: c has shape {inst.c.shape}, expected ({inst.n},)")
    if inst.v.shape != (inst.I,):
        raise InstanceError(f"dimension mismatch: v has shape {inst.v.shape}, expected ({inst.I},)")
    expected = (inst.N, inst.I, inst.n)
    if inst.samples.shape != expected:
        raise InstanceError(
            f"dimension mismatch: samples has shape {inst.samples.shape}, expected {expected}"
        )
    bad = np.argwhere((inst.samples != 0) & (inst.samples != 1))
    if bad.size:
        j, i, k = (int(t) for t in bad[0])
        raise InstanceError(
            f"non-binary sample {inst.samples[j, i, k]!r} at (j={j}, i={i}, k={k})"
        )
    if not np.all(np.isfinite(inst.c)):
        k = int(np.flatnonzero(~np.isfinite(inst.c))[0])
        raise InstanceError(f"non-finite cost at k={k}")
    low = np.flatnonzero(inst.v < 1)
    if low.size:
        raise InstanceError(f"coverage level below 1 at i={int(low[0])} (v={int(inst.v[low[0]])})")
    high = np.flatnonzero(inst.v > inst.n)
    if high.size:
        raise InstanceError(
            f"coverage level above n={inst.n} at i={int(high[0])} (v={int(inst.v[high[0]])})"
        )
    if not (0.0 < inst.epsilon < 1.0):
        raise InstanceError(f"epsilon={inst.epsilon} outside (0, 1)")
    if not (inst.p >= 1.0) or not math.isfinite(inst.p):
        raise InstanceError(f"norm order p={inst.p} below 1")
    if not (inst.delta > 0.0) or not math.isfinite(inst.delta):
        raise InstanceError(f"radius delta={inst.delta} must be positive")


def write_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict()))


def read_instance(path: str | Path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"parse error in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError(f"parse error in {path}: top level is not an object")
    return Instance.from_dict(data)


@dataclass(frozen=True)
class Tolerances:
    integrality: float = 1e-6
    lp_feasibility: float = 1e-7
    cut_violation: float = 1e-6
    gap: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("integrality", "lp_feasibility", "cut_violation", "gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class SolveConfig:
    mode: str = "plus_single"
    time_limit_seconds: float = 60.0
    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    # Also separate at fractional LP points (the cuts stay valid for any dual point).
    user_cuts: bool = True
    root_rounds: int = 20

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.time_limit_seconds < 0:
            raise ValueError("time limit must be nonnegative")


@dataclass
class Solution:
    x: np.ndarray
    objective: float
    status: str
    gap_percent: float
    wall_seconds: float
    cut_counts: dict[str, int] = field(default_factory=dict)
    nodes: int = 0
    root_bound: float | None = None

    def to_dict(self) -> dict[str, Any]:
        objective = self.objective
        if objective is not None and not math.isfinite(objective):
            objective = None
        gap = self.gap_percent if math.isfinite(self.gap_percent) else None
        return {
            "status": self.status,
            "objective": objective,
            "x": [int(round(t)) for t in self.x],
            "gap_percent": gap,
            "wall_seconds": float(self.wall_seconds),
            "cut_counts": {k: int(v) for k, v in self.cut_counts.items()},
            "nodes": int(self.nodes),
            "root_bound": self.root_bound,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Solution:
        objective = data.get("objective")
        gap = data.get("gap_percent")
        return cls(
            x=np.array(data["x"], dtype=np.int64),
            objective=math.inf if objective is None else float(objective),
            status=data["status"],
            gap_percent=math.inf if gap is None else float(gap),
            wall_seconds=float(data["wall_seconds"]),
            cut_counts=dict(data.get("cut_counts", {})),
            nodes=int(data.get("nodes", 0)),
            root_bound=data.get("root_bound"),
        )


def write_solution(sol: Solution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(sol.to_dict(), indent=2))


def read_solution(path: str | Path) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()))
