"""Smoke test for the fracwave extension module. Run with pytest or plain python."""

import json
import math
import pathlib
import tempfile

import fracwave

SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "crates" / "core" / "scenarios"


def test_mittag_leffler_reduces_to_exponential_and_cosine():
    assert abs(fracwave.mittag_leffler(1.0, 1.0, -2.0) - math.exp(-2.0)) < 1e-12
    assert abs(fracwave.mittag_leffler(2.0 - 1e-9, 1.0, -1.0) - math.cos(1.0)) < 1e-6


def test_fractional_operators_on_affine_data():
    m = 64
    t = [i / m for i in range(m + 1)]
    y = [1.0 + 2.0 * s for s in t]
    d = fracwave.caputo_derivative(y, 1.5)
    assert max(abs(v) for v in d[1:]) < 1e-10
    r = fracwave.rl_integral([1.0] * (m + 1), 0.5)
    assert abs(r[-1] - 1.0 / math.gamma(1.5)) < 1e-12


def test_eigenvalues():
    lam, x = fracwave.eigenvalues(5, 64)
    assert len(x) == 65
    for n, v in enumerate(lam, start=1):
        assert abs(v - (n * math.pi) ** 2) < 1e-8 * v


def test_twin_round_trips():
    m, n, j = 256, 8, 128
    t = [i / m for i in range(m + 1)]
    x = [k / j for k in range(j + 1)]
    h = [s * (1.0 - s) for s in x]
    f = [1.0 + math.sin(2 * math.pi * s) for s in t]
    fld = fracwave.solve_direct(1.5, f, h, n, j)
    assert len(fld.t) == m + 1 and len(fld.x) == j + 1
    g = fld.observe_g(h)
    rec, diag = fracwave.solve_ip1(1.5, g, h, n, j)
    assert max(abs(a - b) for a, b in zip(rec, f)) < 1e-2
    assert diag["compat_residual"] < 1e-10

    ones = [1.0] * (m + 1)
    fld = fracwave.solve_direct(1.5, ones, h, n, j)
    omega = fld.observe_omega(ones)
    hrec, diag = fracwave.solve_ip2(1.5, omega, ones, n, j)
    err = math.sqrt(sum((a - b) ** 2 for a, b in zip(hrec, h)) / sum(b * b for b in h))
    assert err < 1e-2
    assert diag["excluded"] == []


def test_errors_become_value_errors():
    try:
        fracwave.mittag_leffler(2.5, 1.0, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha out of range accepted")


def test_run_scenario():
    with tempfile.TemporaryDirectory() as out:
        code, report = fracwave.run_scenario(str(SCENARIOS / "mlf-table.json"), out)
        assert code == 0 and report["passed"]
        assert (pathlib.Path(out) / "mlf_table.csv").exists()
        assert json.loads((pathlib.Path(out) / "report.json").read_text())["scenario"] == report["scenario"]


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
