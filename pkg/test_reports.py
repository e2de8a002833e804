import json
import math

import numpy as np

from reports import dumps_json, fmt, write_csv, write_plot_data


def test_json_handles_numpy_and_complex():
    text = dumps_json({
        "count": np.int64(3),
        "flag": np.bool_(True),
        "values": np.array([0.1, 2.0]),
        "beta": complex(0.5, -0.25),
    })
    back = json.loads(text)
    assert back == {"count": 3, "flag": True, "values": [0.1, 2.0], "beta": {"re": 0.5, "im": -0.25}}
    assert text.endswith("}\n")


def test_json_maps_non_finite_floats_to_null():
    back = json.loads(dumps_json({"gap": math.nan, "inv": [1.0, math.inf], "e": np.float64(-math.inf)}))
    assert back == {"gap": None, "inv": [1.0, None], "e": None}


def test_json_floats_read_back_exactly():
    x = 0.1 + 0.2
    assert json.loads(dumps_json({"x": x}))["x"] == x


def test_fmt_cases():
    assert fmt(None) == ""
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(np.int32(7)) == "7"
    assert fmt(math.nan) == "nan"
    assert fmt(-math.inf) == "-inf"
    assert fmt(False) == "false"


def test_csv_writer_leaves_missing_values_empty(tmp_path):
    path = tmp_path / "out.csv"
    assert write_csv(path, ["n", "gap", "label"], [(5, None, "a,b"), (6, 0.5, "c")]) == 2
    assert path.read_text() == 'n,gap,label\n5,,"a,b"\n6,0.5,c\n'


def test_plot_data_layout(tmp_path):
    path = tmp_path / "out.dat"
    write_plot_data(path, ["n", "mean"], [(5, 1.25), (6, 2.5)])
    assert path.read_text() == "# n mean\n5 1.25\n6 2.5\n"
