import numpy as np
import pytest

from sega.trace import COLUMNS, Trace, read_csv


def test_round_trip_and_precision():
    tr = Trace({"solver": "sega", "seed": 3})
    tr.append(k=0, oracle_calls=0, cost_units=0.0, f_gap=1 / 3, dist_sq_B=2.0)
    tr.append(k=5, oracle_calls=5, cost_units=5.0, f_gap=0.1, dist_sq_B=1e-300, lyapunov=np.inf)
    text = tr.to_csv()
    assert text.startswith("# sega-trace v1\n")
    assert "0.33333333333333331" in text
    back = read_csv(text)
    assert back.columns == list(COLUMNS)
    assert back.metadata["seed"] == "3"
    np.testing.assert_array_equal(back["f_gap"], tr["f_gap"])
    assert np.isnan(back["lyapunov"][0]) and back["lyapunov"][1] == np.inf


def test_monotone_counters_enforced():
    tr = Trace()
    tr.append(k=2, oracle_calls=2)
    with pytest.raises(ValueError):
        tr.append(k=1, oracle_calls=3)


def test_first_hit_and_body():
    tr = Trace({"a": 1})
    for k, g in enumerate([1.0, 0.5, 0.01, 0.001]):
        tr.append(k=k, oracle_calls=2 * k, f_gap=g)
    assert tr.first_hit("f_gap", 0.05) == 2
    assert tr.first_hit("f_gap", 0.05, by="oracle_calls") == 4
    assert tr.first_hit("f_gap", 1e-9) is None
    assert not Trace.body(tr.to_csv()).startswith("#")


def test_timing_column_optional(tmp_path):
    tr = Trace(timing=True)
    tr.append(k=0, oracle_calls=0, wall_ns=12)
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    assert read_csv(p).columns[-1] == "wall_ns"
    assert "wall_ns" not in Trace().columns


def test_read_rejects_other_schemas():
    with pytest.raises(ValueError):
        read_csv("# sega-trace v0\nk,oracle_calls\n")
    with pytest.raises(ValueError):
        read_csv("# sega-trace v1\nfoo,bar\n")
