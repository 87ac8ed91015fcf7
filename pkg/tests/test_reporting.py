import json
from fractions import Fraction

import numpy as np
import pytest

from qhashlab import numerics as nx
from qhashlab.reporting import (CqStateModel, atomic_write_text, cq_to_dict, csv_text,
                                dumps_canonical, joint_to_dict, load_cq, load_joint, schemas,
                                write_json)
from qhashlab.states import CqState, JointDistribution


def test_canonical_json_is_sorted_and_compact():
    text = dumps_canonical({"b": 1, "a": [1.5, np.float64(0.1)], "c": np.int64(3)})
    assert text == '{"a":[1.5,0.1],"b":1,"c":3}'


def test_float_round_trip_and_special_values():
    vals = [0.1, 1 / 3, 2.0**-1074, 1e300, -0.0]
    back = json.loads(dumps_canonical(vals))
    assert back[:4] == vals[:4]
    assert dumps_canonical(-0.0) == dumps_canonical(0.0)
    assert dumps_canonical([float("nan"), float("inf")]) == "[null,null]"


def test_complex_and_fraction():
    assert dumps_canonical(1 + 2j) == "[1.0,2.0]"
    assert dumps_canonical(Fraction(49, 100)) == '"49/100"'
    assert dumps_canonical(np.array([[1j]])) == "[[[0.0,1.0]]]"


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "r.json"
    write_json(target, {"x": 1})
    assert target.read_text() == '{"x":1}\n'
    atomic_write_text(target, "new")
    assert target.read_text() == "new"
    assert sorted(p.name for p in target.parent.iterdir()) == ["r.json"]


def test_csv_formatting():
    text = csv_text([{"a": 0.1, "b": True, "c": None}], ["a", "b", "c"])
    assert text == "a,b,c\n0.1,true,\n"


def test_joint_round_trip(tmp_path, rng):
    t = rng.random((3, 2))
    j = JointDistribution(t / t.sum(), ("a", "b", "c"), ("u", "v"))
    path = tmp_path / "j.json"
    write_json(path, joint_to_dict(j))
    back = load_joint(path)
    np.testing.assert_array_equal(back.table, j.table)
    assert back.x_labels == j.x_labels


def test_cq_round_trip(tmp_path, rng):
    blocks = np.stack([w * nx.random_density_matrix(rng, 2) for w in (0.25, 0.75)])
    rho = CqState(blocks)
    path = tmp_path / "cq.json"
    write_json(path, cq_to_dict(rho))
    np.testing.assert_array_equal(load_cq(path).blocks, rho.blocks)


def test_schema_rejects_unknown_keys():
    with pytest.raises(Exception):
        CqStateModel.model_validate({"blocks": [], "extra": 1})
    s = schemas()
    assert set(s) == {"JointDistribution", "CqState"}
    assert s["CqState"]["additionalProperties"] is False
