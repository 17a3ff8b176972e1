from __future__ import annotations

import json

import numpy as np
import pytest

from drcover.model import (
    Instance,
    InstanceError,
    SolveConfig,
    Solution,
    Tolerances,
    read_instance,
    read_solution,
    validate_instance,
    write_instance,
    write_solution,
)

from conftest import random_instance


def small() -> Instance:
    return Instance(n=2, I=1, N=1, p=2.0, delta=0.1, epsilon=0.2, c=[1.0, 2.0], v=[1],
                    samples=[[[1, 0]]])


def test_valid_instance_passes():
    validate_instance(small())


def test_non_binary_sample_reports_index():
    inst = Instance(n=2, I=1, N=1, p=2.0, delta=0.1, epsilon=0.2, c=[1.0, 2.0], v=[1],
                    samples=[[[2, 0]]])
    with pytest.raises(InstanceError, match=r"non-binary sample .*j=0, i=0, k=0"):
        validate_instance(inst)


def test_coverage_level_below_one():
    inst = Instance(n=2, I=1, N=1, p=2.0, delta=0.1, epsilon=0.2, c=[1.0, 2.0], v=[0],
                    samples=[[[1, 0]]])
    with pytest.raises(InstanceError, match="coverage level below 1"):
        validate_instance(inst)


@pytest.mark.parametrize(
    "change, message",
    [
        ({"v": [3]}, "coverage level above"),
        ({"epsilon": 1.0}, "epsilon"),
        ({"epsilon": 0.0}, "epsilon"),
        ({"p": 0.5}, "norm order"),
        ({"delta": 0.0}, "radius"),
        ({"c": [1.0]}, "dimension mismatch"),
        ({"samples": [[[1, 0, 1]]]}, "dimension mismatch"),
        ({"c": [1.0, float("inf")]}, "non-finite cost"),
    ],
)
def test_invariant_violations(change, message):
    data = small().to_dict()
    data.update(change)
    with pytest.raises(InstanceError, match=message):
        validate_instance(Instance.from_dict(data))


def test_round_trip(tmp_path, rng):
    for _ in range(5):
        inst = random_instance(rng)
        path = tmp_path / "inst.json"
        write_instance(inst, path)
        assert read_instance(path) == inst


def test_missing_key(tmp_path):
    data = small().to_dict()
    del data["samples"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InstanceError, match="missing key"):
        read_instance(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InstanceError, match="parse error"):
        read_instance(path)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_instance(tmp_path / "absent.json")


def test_arrays_are_read_only():
    inst = small()
    with pytest.raises(ValueError):
        inst.c[0] = 5.0


def test_v_max():
    inst = Instance(n=3, I=2, N=1, p=1.0, delta=0.1, epsilon=0.2, c=[1, 1, 1], v=[1, 3],
                    samples=np.ones((1, 2, 3)))
    assert inst.v_max == 3


def test_solution_round_trip(tmp_path):
    sol = Solution(x=np.array([1, 0, 1]), objective=7.0, status="Optimal", gap_percent=0.0,
                   wall_seconds=0.5, cut_counts={"benders": 3}, nodes=4, root_bound=6.5)
    write_solution(sol, tmp_path / "s.json")
    back = read_solution(tmp_path / "s.json")
    assert back.x.tolist() == [1, 0, 1]
    assert back.objective == 7.0 and back.cut_counts == {"benders": 3}
    assert back.nodes == 4 and back.root_bound == 6.5


def test_infeasible_solution_round_trip(tmp_path):
    sol = Solution(x=np.zeros(2), objective=float("inf"), status="Infeasible", gap_percent=0.0,
                   wall_seconds=0.0)
    write_solution(sol, tmp_path / "s.json")
    assert read_solution(tmp_path / "s.json").objective == float("inf")


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(mode="other")
    with pytest.raises(ValueError):
        Tolerances(gap=0.0)
    assert SolveConfig().tolerances.integrality == 1e-6
