import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from loss_sim.errors import DimensionError, DomainError
from loss_sim.physics import MaterialModel, WavefieldSet2D
from loss_sim.pml import (
    AxisProfile,
    PmlState,
    build_profile,
    damping_d0,
    dump_profile,
    exact_flow_velocity_update,
    exp_euler_memory_update,
    layer_depth,
    subsystem_A_step,
    subsystem_B_step,
)
from loss_sim.runtime import acoustic_pml_step, acoustic_plain_step
from loss_sim.spline_core import Grid1D, derivative_along


def ode_oracle(rhs, y0, dt):
    sol = solve_ivp(rhs, (0.0, dt), y0, method="DOP853", rtol=1e-13, atol=1e-15, max_step=dt / 1000)
    return sol.y[:, -1]


class TestProfile:
    grid = Grid1D(-5.0, 5.0, 200)

    def prof(self, **kw):
        args = dict(l_cells=20, R=1e-6, k_max=3.0, f0=5.0, c_pmax=50.0)
        args.update(kw)
        return build_profile(self.grid, **args)

    def test_edges(self):
        p = self.prof()
        inner = (20, 180)
        for i in inner:
            assert p.d[i] == 0.0 and p.k[i] == 1.0 and p.alpha[i] == pytest.approx(math.pi * 5.0, rel=1e-15)
        for i in (0, 200):
            assert p.d[i] == pytest.approx(p.d0, rel=1e-14)
            assert p.k[i] == pytest.approx(3.0, rel=1e-14) and p.alpha[i] == 0.0
        mid = slice(21, 180)
        assert not p.d[mid].any() and np.all(p.k[mid] == 1.0) and not p.alpha[mid].any()

    def test_monotone(self):
        p = self.prof()
        left = slice(0, 21)
        assert np.all(np.diff(p.d[left]) <= 0) and np.all(np.diff(p.k[left]) <= 0)
        assert np.all(np.diff(p.alpha[left]) >= 0)
        right = slice(180, 201)
        assert np.all(np.diff(p.d[right]) >= 0) and np.all(np.diff(p.k[right]) >= 0)
        assert np.all(np.diff(p.alpha[right]) <= 0)

    def test_laws(self):
        p = self.prof()
        s = layer_depth(201, 20)[180:]
        assert np.allclose(p.d[180:], p.d0 * s**2, rtol=1e-14)
        assert np.allclose(p.k[180:], 1 + 2.0 * s, rtol=1e-14)
        assert np.allclose(p.alpha[180:], math.pi * 5.0 * (1 - s), rtol=1e-14)

    def test_d0_value(self):
        h = 10.0 / 512
        d0 = damping_d0(50.0, 1e-6, 50 * h)
        assert d0 == pytest.approx(1.0614e3, rel=1e-3)
        assert d0 == pytest.approx(-3 * 50 * math.log(1e-6) / (2 * 50 * h), rel=1e-15)
        assert build_profile(Grid1D(-5, 5, 512), 50, 1e-6, 1.0, 1.0, 50.0).d0 == pytest.approx(d0, rel=1e-15)

    @pytest.mark.parametrize(
        "kw",
        [dict(l_cells=0), dict(R=1.0), dict(R=0.0), dict(k_max=0.5), dict(f0=0.0), dict(l_cells=101)],
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            self.prof(**kw)

    def test_slabs(self):
        assert self.prof().slabs == [(0, 21), (180, 201)]
        assert AxisProfile.transparent(9).slabs == []

    def test_rejects_interior_absorption(self):
        d = np.zeros(9)
        d[4] = 1.0
        with pytest.raises(DomainError):
            AxisProfile(d, np.ones(9), np.zeros(9)).slabs

    def test_dump(self):
        lines = dump_profile(self.prof()).splitlines()
        assert lines[0] == "knot d k alpha" and len(lines) == 202


class TestMemoryUpdate:
    def test_value(self):
        assert exp_euler_memory_update(1.0, 1.0, 1.0, 1.0, 1.0, 0.1) == pytest.approx(0.7280961, abs=1e-7)

    def test_pure_decay(self):
        assert exp_euler_memory_update(2.0, 0.0, 3.0, 1.5, 0.5, 0.2) == pytest.approx(2.0 * math.exp(-0.5), rel=1e-15)

    def test_small_dt(self):
        dt = 1e-7
        assert exp_euler_memory_update(0.0, 1.0, 2.0, 2.0, 1.0, dt) == pytest.approx(-0.5 * dt, rel=1e-6)

    def test_interior_rejected(self):
        with pytest.raises(DomainError):
            exp_euler_memory_update(1.0, 1.0, 0.0, 1.0, 0.0, 0.1)

    @given(
        st.floats(-1e6, 1e6),
        st.floats(0.0, 1e4),
        st.floats(1.0, 20.0),
        st.floats(0.0, 1e3),
        st.floats(1e-8, 1.0),
    )
    def test_memory_flow_contracts(self, psi, d, k, alpha, dt):
        if d / k + alpha <= 0.0:
            return
        assert abs(exp_euler_memory_update(psi, 0.0, d, k, alpha, dt)) <= abs(psi)


class TestVelocityUpdate:
    def test_interior_limit(self):
        assert exact_flow_velocity_update(1.0, 0.0, 0.0, 2.0, 4.0, 0.0, 1.0, 0.0, 0.1) == pytest.approx(1.0 - 0.05)

    def test_rest(self):
        assert exact_flow_velocity_update(0.7, 0.0, 0.0, 0.0, 1.0, 2.0, 1.5, 1.0, 0.1) == 0.7

    def test_value(self):
        psi_new = exp_euler_memory_update(1.0, 0.0, 1.0, 1.0, 1.0, 0.1)
        v = exact_flow_velocity_update(0.0, 1.0, psi_new, 0.0, 1.0, 1.0, 1.0, 1.0, 0.1)
        assert v == pytest.approx(-0.0906346, abs=1e-7)

    @pytest.mark.parametrize("d, k, alpha", [(1.0, 1.0, 1.0), (800.0, 2.5, 3.0), (0.0, 1.0, 15.0), (50.0, 1.0, 0.0)])
    def test_matches_ode(self, d, k, alpha):
        rho, dt, g, v0, psi0 = 1.7, 2e-3, 0.8, -0.3, 0.25

        def rhs(t, y):
            v, psi = y
            return [(-g / k - psi) / rho, -(d / k + alpha) * psi - d / k**2 * g]

        ref = ode_oracle(rhs, [v0, psi0], dt)
        psi = exp_euler_memory_update(psi0, g, d, k, alpha, dt)
        v = exact_flow_velocity_update(v0, psi0, psi, g, rho, d, k, alpha, dt)
        assert v == pytest.approx(ref[0], abs=1e-12)
        assert psi == pytest.approx(ref[1], abs=1e-12)


def layered_setup(n=40, cells=8):
    g = Grid1D(-1.0, 1.0, n)
    prof = build_profile(g, cells, 1e-6, 2.0, 3.0, 10.0)
    return g, (prof, prof)


class TestSubsystems:
    def test_A_one_knot_oracle(self, rng):
        g, profs = layered_setup()
        shape = (41, 41)
        state = PmlState.zeros(profs, shape)
        for arrs in state.psi.values():
            for a in arrs:
                a[...] = rng.standard_normal(a.shape)
        f = WavefieldSet2D(rng.standard_normal(shape), rng.standard_normal(shape), np.zeros(shape))
        gx, gz = rng.standard_normal(shape), rng.standard_normal(shape)
        i, j = 2, 37  # inside both layers
        psi_x0 = state.psi[0][0][i, j]
        psi_z0 = state.psi[1][1][i, j - 32]
        v10, v30 = f.v1[i, j], f.v3[i, j]
        rho, dt = 1.3, 1e-3
        subsystem_A_step(f, state, profs, dt, rho, gx, gz)
        for prof, idx, gv, v0, psi0, got_v, got_psi in (
            (profs[0], i, gx[i, j], v10, psi_x0, f.v1[i, j], state.psi[0][0][i, j]),
            (profs[1], j, gz[i, j], v30, psi_z0, f.v3[i, j], state.psi[1][1][i, j - 32]),
        ):
            d, k, a = prof.d[idx], prof.k[idx], prof.alpha[idx]

            def rhs(t, y):
                return [(-gv / k - y[1]) / rho, -(d / k + a) * y[1] - d / k**2 * gv]

            ref = ode_oracle(rhs, [v0, psi0], dt)
            assert got_v == pytest.approx(ref[0], abs=1e-11)
            assert got_psi == pytest.approx(ref[1], abs=1e-11)

    def test_B_corner_oracle(self, rng):
        g, profs = layered_setup()
        shape = (41, 41)
        state = PmlState.zeros(profs, shape)
        f = WavefieldSet2D(np.zeros(shape), np.zeros(shape), rng.standard_normal(shape))
        gx, gz = rng.standard_normal(shape), rng.standard_normal(shape)
        i, j = 1, 3
        s0 = f.sigma[i, j]
        mod, dt = 2.0, 1e-3
        subsystem_B_step(f, state, profs, dt, mod, gx, gz)
        dx, kx, ax = profs[0].d[i], profs[0].k[i], profs[0].alpha[i]
        dz, kz, az = profs[1].d[j], profs[1].k[j], profs[1].alpha[j]

        def rhs(t, y):
            s, px, pz = y
            return [
                -mod * (gx[i, j] / kx + px + gz[i, j] / kz + pz),
                -(dx / kx + ax) * px - dx / kx**2 * gx[i, j],
                -(dz / kz + az) * pz - dz / kz**2 * gz[i, j],
            ]

        ref = ode_oracle(rhs, [s0, 0.0, 0.0], dt)
        assert f.sigma[i, j] == pytest.approx(ref[0], abs=1e-11)
        assert state.phi[0][0][i, j] == pytest.approx(ref[1], abs=1e-11)
        assert state.phi[1][0][i, j] == pytest.approx(ref[2], abs=1e-11)

    def test_constant_stress(self, rng):
        _, profs = layered_setup()
        shape = (41, 41)
        state = PmlState.zeros(profs, shape)
        state.psi[0][0][...] = 1.0
        f = WavefieldSet2D(rng.standard_normal(shape), rng.standard_normal(shape), np.full(shape, 3.0))
        before = f.copy()
        z = np.zeros(shape)
        subsystem_A_step(f, state, profs, 1e-3, 1.0, z, z)
        assert np.all(np.abs(state.psi[0][0]) <= 1.0)
        # v moves only through the decaying memory
        assert np.array_equal(f.v1[9:32], before.v1[9:32])
        assert np.array_equal(f.v3, before.v3)

    def test_interior_only(self, rng):
        shape = (12, 10)
        profs = (AxisProfile.transparent(12), AxisProfile.transparent(10))
        state = PmlState.zeros(profs, shape)
        assert state.stored_knots == 0
        f = WavefieldSet2D(*(rng.standard_normal(shape) for _ in range(3)))
        v1, v3 = f.v1.copy(), f.v3.copy()
        gx, gz = rng.standard_normal(shape), rng.standard_normal(shape)
        subsystem_A_step(f, state, profs, 0.1, 2.0, gx, gz)
        assert np.array_equal(f.v1, v1 - 0.05 * gx) and np.array_equal(f.v3, v3 - 0.05 * gz)
        s = f.sigma.copy()
        subsystem_B_step(f, state, profs, 0.1, 3.0, gx, gz)
        assert np.array_equal(f.sigma, s - 0.1 * 3.0 * (gx + gz))

    def test_state_shapes(self):
        _, profs = layered_setup()
        state = PmlState.zeros(profs, (41, 41))
        assert state.slabs[0] == [(0, 9), (32, 41)]
        assert state.psi[0][0].shape == (9, 41) and state.psi[1][1].shape == (41, 9)
        with pytest.raises(DimensionError):
            PmlState.zeros(profs, (40, 41))
        with pytest.raises(DimensionError):
            PmlState.zeros(profs[:1], (41, 41))


def gaussian_fields(g):
    x = g.knots
    f = WavefieldSet2D.zeros((x.size, x.size))
    f.sigma = np.exp(-5 * (x[:, None] ** 2 + x[None, :] ** 2))
    return f


def spline_provider(g):
    return lambda field, axis, out=None: derivative_along(field, axis, g, out=out)


def test_transparent_layers_are_bitwise_plain():
    g = Grid1D(-2.0, 2.0, 48)
    prov = spline_provider(g)
    mat = MaterialModel(1.0, 1.0)
    profs = (AxisProfile.transparent(49), AxisProfile.transparent(49))
    state = PmlState.zeros(profs, (49, 49))
    a, b = gaussian_fields(g), gaussian_fields(g)
    for _ in range(20):
        acoustic_plain_step(a, mat, 0.01, prov)
        acoustic_pml_step(b, state, profs, mat, 0.01, prov)
    for (n, x), (_, y) in zip(a.items(), b.items()):
        assert np.array_equal(x, y), n


def test_memory_stays_zero_off_layer():
    # memory is stored only on the slabs; the interior has none to drift
    g = Grid1D(-2.0, 2.0, 64)
    prof = build_profile(g, 10, 1e-6, 1.0, 1.0, 1.0)
    state = PmlState.zeros((prof, prof), (65, 65))
    assert state.stored_knots == 4 * 2 * 11 * 65
