"""Smoke test for the pywco extension: build with `maturin develop -m crates/pywco/Cargo.toml` first."""

import json
import pathlib

import pywco

DATA = pathlib.Path(__file__).resolve().parents[1] / "crates" / "cli" / "data"


def load(name):
    return (DATA / name).read_text()


def test_identity_system():
    report = pywco.analyze(load("identity.json"))
    assert all(p["verdict"] for p in report["properties"])
    assert pywco.density(load("identity.json")) == [1.0, 1.0, 1.0]


def test_fork_is_not_weakly_centered():
    assert not pywco.weakly_centered(load("fork.json"))
    oracle = pywco.oracle(load("fork.json"))
    assert all(c["status"] != "fail" for c in oracle["agreements"])
    assert abs(oracle["matrix_norm"] - 2.0) < 1e-12


def test_invariant_and_tree():
    found = pywco.invariant(load("levels.json"))
    assert found["search"]["status"] == "found"
    assert found["verification"]["verdict"]
    tree = pywco.tree(load("cherry.json"))
    assert tree["weighted"]["witness"]["vertex"] == "r"


def test_matrix_and_gauss():
    dump = pywco.matrix(load("kernel2.json"))
    assert dump["rows"][0][0] == [1.0, 0.0]
    gauss = pywco.gauss(2.0, coeffs=[0.5, 2.0], samples=200)
    assert gauss["density_inequality"]["verdict"]
    assert gauss["reduction_error"] <= 1e-12


def test_growth_and_fuzz():
    rows = pywco.rudy(20)
    ratios = [r["ratio"] for r in rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] / ratios[0] > 100
    summary = pywco.fuzz(count=100, seed=42)
    assert summary["systems_failed"] == 0
    mutated = pywco.fuzz(count=30, mutation="negate_h")
    assert mutated["systems_failed"] > 0


def test_errors_raise_value_error():
    bad = json.dumps({"space": {"atoms": [{"id": "a", "mass": 1.0}]}, "phi": {"a": "zz"}, "w": {}})
    for call in (lambda: pywco.analyze(bad), lambda: pywco.fuzz(mutation="other")):
        try:
            call()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
