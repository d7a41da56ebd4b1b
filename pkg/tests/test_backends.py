import importlib.util
from pathlib import Path

import pytest

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_backends.py"


@pytest.fixture(scope="module")
def bench():
    spec = importlib.util.spec_from_file_location("bench_backends", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_numba_and_numpy_backends_agree_bit_for_bit(bench):
    report = bench.compare(scale=1)
    assert report["backends"] == ["numba", "numpy"]
    for name, row in report["workloads"].items():
        assert row["identical"], name
        assert row["events"] > 0
