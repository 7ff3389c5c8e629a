import math

import numpy as np
import pytest

from loss_sim import harness
from loss_sim.config import parse_config
from loss_sim.errors import DimensionError, DomainError
from loss_sim.harness import (
    LineSpec,
    Metrics,
    SweepResult,
    compute_metrics,
    convergence_sweep,
    fit_order,
    lattice,
    pml_study,
    trace_csv,
    trace_extract,
)
from loss_sim.snapio import Snapshot, read_table

SMALL = """
scenario.kind = acoustic2d
grid.nx = 32
grid.nz = 32
domain.x_min = -1.0
domain.x_max = 1.0
domain.z_min = -1.0
domain.z_max = 1.0
material.c_p = 1.0
initial.kind = gaussian
initial.exponent = 20.0
pml.cells = 8
time.dt = 0.005
time.T = 0.2
output.times = 0.1, 0.2
reference.n = 128
"""


class TestMetrics:
    def test_identical(self, rng):
        a = rng.standard_normal((5, 5))
        m = compute_metrics(a, a.copy())
        assert (m.eps2, m.eps_inf) == (0.0, 0.0) and m.norm == np.abs(a).max()

    def test_constant_offset(self):
        ref = np.linspace(-2.0, 1.0, 30)
        num = ref.copy()
        num[[3, 7, 11]] += 0.1
        m = compute_metrics(num, ref)
        assert m.eps_inf == pytest.approx(0.1 / 2.0)
        assert m.eps2 == pytest.approx(math.sqrt(3) * 0.1 / 2.0)

    def test_explicit_norm(self):
        m = compute_metrics(np.ones(4), np.zeros(4), norm=2.0)
        assert m.eps_inf == 0.5 and m.eps2 == 1.0

    def test_errors(self):
        with pytest.raises(DomainError):
            compute_metrics(np.ones(3), np.zeros(3))
        with pytest.raises(DimensionError):
            compute_metrics(np.ones(3), np.ones(4))
        a = Snapshot(np.ones(3), ((0, 1),), 0.0, "v")
        b = Snapshot(np.ones(3), ((0, 2),), 0.0, "v")
        with pytest.raises(DimensionError):
            compute_metrics(a, b)
        with pytest.raises(DimensionError):
            compute_metrics(b, a)


class TestOrders:
    def test_fit_exact(self):
        h = np.array([0.1, 0.05, 0.025])
        assert fit_order(h, 3.0 * h**4) == pytest.approx(4.0, abs=1e-12)

    def test_fit_floor(self):
        assert fit_order([0.1, 0.05], [1e-3, 1e-14]) is None
        assert fit_order([0.1], [1e-3]) is None

    def test_doubling_and_table(self):
        ms = {(32, 0.1): Metrics(1.6e-2, 2e-2, 1.0), (64, 0.1): Metrics(1e-3, 1.5e-3, 1.0), (96, 0.1): Metrics(2e-4, 3e-4, 1.0)}
        res = SweepResult([32, 64, 96], [0.1], ms, {32: 1 / 16, 64: 1 / 32, 96: 1 / 48}, {0.1: 4.0})
        assert res.doubling_ratio(32, 0.1) == pytest.approx(4.0)
        assert res.doubling_ratio(64, 0.1) is None
        header, rows = read_table(res.table())
        assert header == ["t_s", "eps2_N32", "eps2_N64", "eps2_N96", "einf_N32", "einf_N64", "einf_N96",
                          "log2_ratio_N32_N64", "fitted_order"]
        assert float(rows[0][7]) == pytest.approx(4.0)

    def test_floor_notice(self, monkeypatch):
        cfg = parse_config(SMALL)

        def fake_compare(run_cfg, reference, points, name, **kw):
            return {t: Metrics(0.0, 0.0, 1.0) for t in run_cfg["output.times"]}

        monkeypatch.setattr(harness, "compare_to_reference", fake_compare)
        res = convergence_sweep(cfg, [32, 64], reference=object())
        assert res.orders == {0.1: None, 0.2: None}
        assert len(res.notices) == 2 and "rounding floor" in res.notices[0]
        assert read_table(res.table())[1][0][-1] == ""


def test_small_sweep():
    res = convergence_sweep(parse_config(SMALL), [32, 64], times=[0.1])
    e32, e64 = res.eps2(32, 0.1), res.eps2(64, 0.1)
    assert e64 < e32 / 8
    assert res.orders[0.1] == pytest.approx(res.doubling_ratio(32, 0.1))
    assert res.length_unit == "m" and res.spacing[32] == pytest.approx(2 / 32)


def test_lattice_keys_use_requested_times():
    # 3 * 0.003 is not 0.009 in floating point
    cfg = parse_config(SMALL).with_values(time__dt=0.003, time__T=0.009, output__times="0.009")
    setup = harness.build_setup(cfg)
    out = harness.run_on_lattice(setup, ["v3"], lattice(cfg), deterministic=True)
    assert list(out) == [("v3", 0.009)]


def test_lattice():
    pts = lattice(parse_config(SMALL))
    assert len(pts) == 2 and pts[0].size == 33 and pts[0][0] == -1.0 and pts[0][-1] == 1.0
    assert lattice(parse_config(SMALL), 8)[1].size == 9


def test_study_errors():
    with pytest.raises(DomainError):
        pml_study(parse_config(SMALL), "Q", [1])
    cfg3 = parse_config("scenario.kind = elastic3d\ntime.dt = 0.1\ntime.T = 0.1\n")
    with pytest.raises(DimensionError):
        pml_study(cfg3, "L", [10])


def test_small_study():
    res = pml_study(parse_config(SMALL), "R", [1e-1, 1e-6], times=[0.2])
    assert res.eps2(1e-6, 0.2) <= res.eps2(1e-1, 0.2)
    header, rows = read_table(res.table())
    assert header == ["R", "eps2_t0.2s", "einf_t0.2s"] and len(rows) == 2


class TestTraces:
    def snaps(self, f, name="v3", unit="m/s"):
        x = np.linspace(-2, 2, 9)
        z = np.linspace(-1, 1, 5)
        return [Snapshot(f(x[:, None], z[None, :], t), ((-2, 2), (-1, 1)), t, name, unit) for t in (0.2, 0.1)]

    def test_palindrome(self):
        series = self.snaps(lambda x, z, t: np.exp(-x**2 - 3 * z**2) * (1 + t))
        header, rows = trace_extract(series, LineSpec.parse("x@0", ("x", "z")))
        col = [r[1] for r in rows]
        assert col == col[::-1]
        assert header == ["position_0", "v3[m/s]_t0.1s", "v3[m/s]_t0.2s"]

    def test_constant(self):
        series = self.snaps(lambda x, z, t: np.full(np.broadcast_shapes(x.shape, z.shape), 2.5))
        _, rows = trace_extract(series, LineSpec.parse("z@1.0", ("x", "z")))
        assert all(r[1] == 2.5 and r[2] == 2.5 for r in rows) and len(rows) == 5

    def test_off_lattice_linear(self):
        series = self.snaps(lambda x, z, t: 3 * x + z + 0 * t)
        _, rows = trace_extract(series, LineSpec.parse("z@0.3", ("x", "z")))
        assert [r[1] for r in rows] == pytest.approx([3 * 0.3 + z for z in np.linspace(-1, 1, 5)], abs=1e-12)

    def test_outside(self):
        with pytest.raises(DomainError):
            trace_extract(self.snaps(lambda x, z, t: x + z), LineSpec.parse("z@3.0", ("x", "z")))

    def test_bad_specs(self):
        for text in ("q@0", "z@a", "z@0,0"):
            with pytest.raises(DomainError):
                LineSpec.parse(text, ("x", "z"))
        assert LineSpec.parse("z@0,1", ("x", "y", "z")) == LineSpec(2, (0.0, 1.0))

    def test_series_checks(self):
        with pytest.raises(DimensionError):
            trace_extract([], LineSpec(0, (0.0,)))
        a = Snapshot(np.ones((3, 3)), ((0, 1), (0, 1)), 0.0, "v")
        b = Snapshot(np.ones((3, 4)), ((0, 1), (0, 1)), 0.1, "v")
        with pytest.raises(DimensionError):
            trace_extract([a, b], LineSpec(0, (0.0,)))

    def test_csv(self):
        text = trace_csv(self.snaps(lambda x, z, t: x * z), LineSpec.parse("x@0.5", ("x", "z")))
        header, rows = read_table(text)
        assert len(header) == 3 and len(rows) == 9
