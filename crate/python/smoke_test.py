"""Smoke test for the tslv extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/tslv-*.whl
"""

import math
import os
import sys
import tempfile

import tslv

HERE = os.path.dirname(os.path.abspath(__file__))
MODELS = os.path.join(HERE, "..", "crates", "core", "models")


def main():
    model = tslv.Model.load(os.path.join(MODELS, "example1_h2.model.json"))
    assert (model.n, model.m) == (2, 2), model
    assert not model.is_lattice

    report = tslv.check(model)
    assert report["verdict"] is True, report["warnings"]
    bounds = report["bounds"]
    for lo, up in zip(bounds["x_lo"], bounds["x_up"]):
        assert lo < up

    traj = tslv.simulate(model, horizon=20.0, init=["3", "3", "2", "2"])
    assert traj.impulse_count() == 20
    assert len(traj) == len(traj.t) == 2001 + 20
    assert all(v > 0 for row in traj.z for v in row)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "traj.csv")
        traj.to_csv(path)
        with open(path) as f:
            assert f.readline().strip() == "t,z1,z2,w1,w2,impulse"

    for example in (1, 2):
        table = tslv.reproduce(example)
        assert table["all_ok"], table
    try:
        tslv.reproduce(3)
    except ValueError:
        pass
    else:
        raise AssertionError("example 3 should be rejected")

    lattice = tslv.Model.load(os.path.join(MODELS, "example2.model.json"))
    honest = tslv.check(lattice)
    assert honest["verdict"] is False
    assert math.isfinite(honest["gamma"]["gamma"])

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
