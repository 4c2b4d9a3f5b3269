from dataclasses import astuple

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_hermitian
from oracles import strang_unitary
from mixedctrl.errors import InvariantError, NumericError, ShapeError
from mixedctrl.liouville import hs_norm
from mixedctrl.models import HF_ENERGIES, MorseModel, build_dipole, build_h0, ground_state, thermal_state
from mixedctrl.optimizer import (
    ControlField,
    IterationRecord,
    OptimizerConfig,
    Trajectory,
    backward_sweep,
    check_deltaW_identity,
    evaluate_W,
    forward_sweep,
    identity_contract,
    initialize,
    mono_tolerance,
    run,
    uniform_bound,
)
from mixedctrl.propagator import (
    TimeGrid,
    build_tables,
    field_midpoint_backward,
    field_midpoint_forward,
    propagate,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)


@pytest.fixture(scope="module")
def small():
    """Three lowest HF levels on a short grid."""
    model = MorseModel(np.array(HF_ENERGIES[:3]))
    H0, V = build_h0(model), build_dipole(model)
    return H0, build_tables(H0, V), TimeGrid(0.0, 60.0, 512)


class TestTypes:
    def test_fluence_closed_form(self):
        g = TimeGrid(0.0, 156.0, 4096)
        assert ControlField(g, np.ones(4096), 4.0).fluence == pytest.approx(312.0, rel=1e-12)

    def test_field_rejects(self):
        g = TimeGrid(0.0, 1.0, 4)
        with pytest.raises(ShapeError):
            ControlField(g, np.zeros(3), 1.0)
        with pytest.raises(NumericError):
            ControlField(g, [0, np.inf, 0, 0], 1.0)
        with pytest.raises(InvariantError):
            ControlField(g, np.zeros(4), 0.0)

    @pytest.mark.parametrize("kw", [dict(lam=0), dict(max_iters=0), dict(tol_deltaW=0),
                                    dict(seed_amplitude=-1), dict(scheme="euler")])
    def test_config_rejects(self, kw):
        with pytest.raises(InvariantError):
            OptimizerConfig(**kw)

    def test_mono_tolerance(self):
        assert mono_tolerance(0.0) == 1e-10
        assert mono_tolerance(-2.0) == pytest.approx(2e-8 + 1e-10)


class TestInitialize:
    def test_zero_amplitude(self, hf_ops):
        _, _, tab = hf_ops
        g = TimeGrid(0.0, 156.0, 4096)
        rho0 = thermal_state(HF_ENERGIES, 2.7591)
        f, traj = initialize(OptimizerConfig(seed_amplitude=0.0), g, rho0, tab)
        assert np.all(f.samples == 0)
        pops = traj.populations()
        np.testing.assert_allclose(pops, np.broadcast_to(pops[0], pops.shape), atol=1e-14)

    def test_same_seed_bitwise(self, hf_ops):
        g = TimeGrid(0.0, 156.0, 4096)
        a = initialize(OptimizerConfig(seed=5), g, ground_state(4), hf_ops[2])
        b = initialize(OptimizerConfig(seed=5), g, ground_state(4), hf_ops[2])
        assert np.array_equal(a[0].samples, b[0].samples)
        assert np.array_equal(a[1].states, b[1].states)
        c = initialize(OptimizerConfig(seed=6), g, ground_state(4), hf_ops[2])
        assert not np.array_equal(a[0].samples, c[0].samples)

    def test_small_seed_is_perturbative(self, hf_ops):
        g = TimeGrid(0.0, 156.0, 4096)
        f, traj = initialize(OptimizerConfig(seed_amplitude=1e-3), g, ground_state(4), hf_ops[2])
        assert np.abs(f.samples).max() <= 1e-3
        assert np.abs(traj.populations()[-1] - traj.populations()[0]).max() <= 1e-2

    def test_seed_does_not_depend_on_resolution(self, hf_ops):
        g = TimeGrid(0.0, 156.0, 1024)
        coarse = initialize(OptimizerConfig(seed=2), g, ground_state(4), hf_ops[2])[0].samples
        # with an odd factor every coarse midpoint is also a fine midpoint
        fine = initialize(OptimizerConfig(seed=2), g.refined(3), ground_state(4), hf_ops[2])[0].samples
        np.testing.assert_allclose(fine[1::3], coarse, atol=1e-15)
        assert coarse.std() > 1e-4

    def test_rejects_bad_state(self, hf_ops):
        with pytest.raises(InvariantError):
            initialize(OptimizerConfig(), TimeGrid(0, 1, 4), np.eye(4), hf_ops[2])


class TestSweeps:
    @pytest.mark.parametrize("scheme", ["exact", "midpoint"])
    def test_backward_zero_for_commuting_state(self, small, scheme):
        H0, tab, grid = small
        rho = Trajectory(grid, np.broadcast_to(np.eye(3) / 3, (grid.steps + 1, 3, 3)).copy())
        prev = ControlField(grid, np.zeros(grid.steps), 4.0)
        A_traj, h = backward_sweep(H0, rho, tab, 4.0, grid, prev, scheme)
        assert np.all(np.abs(h.samples) < 1e-15)
        # zero field and A = H0: the costate does not move
        np.testing.assert_allclose(A_traj.states, np.broadcast_to(H0.matrix, A_traj.states.shape), atol=1e-13)

    @pytest.mark.parametrize("scheme", ["exact", "midpoint"])
    def test_forward_zero_for_identity_costate(self, small, scheme):
        _, tab, grid = small
        A = Trajectory(grid, np.broadcast_to(np.eye(3, dtype=complex), (grid.steps + 1, 3, 3)).copy())
        rho0 = random_density(np.random.default_rng(0), 3)
        h = ControlField(grid, np.full(grid.steps, 0.01), 4.0)
        rho, f = forward_sweep(rho0, A, tab, 4.0, grid, h, scheme)
        assert np.all(np.abs(f.samples) < 1e-14)

    @pytest.mark.parametrize("scheme", ["exact", "midpoint"])
    def test_sweep_conservation(self, small, scheme):
        H0, tab, grid = small
        rho0 = thermal_state(HF_ENERGIES[:3], 1.0)
        f0, rho = initialize(OptimizerConfig(seed_amplitude=0.05), grid, rho0, tab)
        A_traj, h = backward_sweep(H0, rho, tab, 4.0, grid, f0, scheme)
        assert np.abs(A_traj.norms() - hs_norm(H0)).max() <= 1e-10
        rho_new, _ = forward_sweep(rho0, A_traj, tab, 4.0, grid, h, scheme)
        assert np.abs(rho_new.traces() - 1).max() <= 1e-10
        assert np.linalg.eigvalsh(rho_new.final).min() >= -1e-10

    def test_exact_scheme_needs_other_field(self, small):
        H0, tab, grid = small
        _, rho = initialize(OptimizerConfig(), grid, ground_state(3), tab)
        with pytest.raises(ValueError):
            backward_sweep(H0, rho, tab, 4.0, grid, None, "exact")


# -- per-step fixed-point oracle on a two-level system ---------------------

H0_2 = np.diag([0.0, 1.0]).astype(complex)
A_2 = np.diag([0.0, 1.0]).astype(complex)
RHO0_2 = np.array([[0.8, 0.3], [0.3, 0.2]], dtype=complex)
LAM_2 = 1.0


def _pairing(a, r, x, dt):
    u = strang_unitary(H0_2, SX, x, dt)
    return np.vdot(a, u @ r @ u.conj().T).real


def _fixed_point(a, r, y, dt):
    """Brute-force solve of lam*dt*x*(x - y) = F(x) - F(y) by plain iteration."""
    x = y + 1e-3
    for _ in range(500):
        if abs(x - y) > 1e-7:
            xn = (_pairing(a, r, x, dt) - _pairing(a, r, y, dt)) / (LAM_2 * dt * (x - y))
        else:
            e = 1e-6
            xn = (_pairing(a, r, y + e, dt) - _pairing(a, r, y - e, dt)) / (2 * e * LAM_2 * dt)
        if abs(xn - x) < 1e-12:
            return xn
        x = xn
    raise AssertionError("oracle did not converge")


@pytest.fixture(scope="module")
def two_level():
    grid = TimeGrid(0.0, 5.0, 200)
    tab = build_tables(H0_2, SX)
    g = ControlField(grid, 0.3 * np.sin(grid.midpoints), LAM_2)
    rho = Trajectory(grid, propagate(RHO0_2, g.samples, grid, tab))
    return grid, tab, g, rho


def test_exact_sweeps_match_fixed_point_oracle(two_level):
    grid, tab, g, rho = two_level
    dt, J = grid.dt, grid.steps
    A_traj, h = backward_sweep(A_2, rho, tab, LAM_2, grid, g, "exact")
    _, f = forward_sweep(RHO0_2, A_traj, tab, LAM_2, grid, h, "exact")

    a, hb = A_2.copy(), np.zeros(J)
    for j in range(J - 1, -1, -1):
        hb[j] = _fixed_point(a, rho.states[j], g.samples[j], dt)
        u = strang_unitary(H0_2, SX, hb[j], dt)
        a = u.conj().T @ a @ u
    r, ff = RHO0_2.copy(), np.zeros(J)
    for j in range(J):
        ff[j] = _fixed_point(A_traj.states[j + 1], r, h.samples[j], dt)
        u = strang_unitary(H0_2, SX, ff[j], dt)
        r = u @ r @ u.conj().T
    assert np.abs(h.samples - hb).max() <= 1e-9
    assert np.abs(f.samples - ff).max() <= 1e-9


def test_midpoint_sweeps_match_dense_oracle(two_level):
    grid, tab, g, rho = two_level
    dt, J = grid.dt, grid.steps
    A_traj, h = backward_sweep(A_2, rho, tab, LAM_2, grid, g, "midpoint")
    _, f = forward_sweep(RHO0_2, A_traj, tab, LAM_2, grid, h, "midpoint")

    a, hb = A_2.copy(), np.zeros(J)
    for j in range(J - 1, -1, -1):
        hb[j] = field_midpoint_backward(a, rho.states[j + 1], H0_2, SX, LAM_2, dt)
        u = strang_unitary(H0_2, SX, hb[j], dt)
        a = u.conj().T @ a @ u
    r, ff = RHO0_2.copy(), np.zeros(J)
    for j in range(J):
        ff[j] = field_midpoint_forward(A_traj.states[j], r, H0_2, SX, LAM_2, dt)
        u = strang_unitary(H0_2, SX, ff[j], dt)
        r = u @ r @ u.conj().T
    assert np.abs(h.samples - hb).max() <= 1e-12
    assert np.abs(f.samples - ff).max() <= 1e-12


class TestEvaluate:
    def test_zero_field_ground(self, hf_ops):
        H0, _, tab = hf_ops
        g = TimeGrid(0.0, 156.0, 256)
        field = ControlField(g, np.zeros(256), 4.0)
        traj = Trajectory(g, propagate(ground_state(4).matrix, field.samples, g, tab))
        ev = evaluate_W(H0, traj, field)
        assert ev["W1"] == pytest.approx(0.4843, abs=1e-13)
        assert ev["W3"] == 0
        assert ev["W"] == ev["W1"] - ev["W3"]

    def test_w2_residual_of_consistent_pair(self, small):
        H0, tab, grid = small
        f0, rho = initialize(OptimizerConfig(seed_amplitude=0.1), grid, ground_state(3), tab)
        from mixedctrl.propagator import propagate_adjoint
        A_traj = Trajectory(grid, propagate_adjoint(H0.matrix, f0.samples, grid, tab))
        assert evaluate_W(H0, rho, f0, A_traj, tab)["W2_residual"] <= 1e-8 * hs_norm(H0)


class TestIdentity:
    def test_fixed_point_gives_zero(self):
        recs = [IterationRecord(0, 1, 0, 1, 0, np.nan, np.nan, np.nan),
                IterationRecord(1, 1, 0, 1, 0, 0.0, 0.0, 0.0)]
        f = np.linspace(-1, 1, 8)
        res = check_deltaW_identity(recs, [(None, f), (f.copy(), f.copy())], 4.0, 0.1)
        assert res.tolist() == [0.0]
        assert identity_contract(recs, res).all()

    def test_needs_two_records(self):
        with pytest.raises(ValueError):
            check_deltaW_identity([IterationRecord(0, 1, 0, 1, 0, np.nan, np.nan, np.nan)])


class TestRun:
    @pytest.mark.parametrize("rho0", ["ground", "thermal"])
    def test_contracts(self, small, rho0):
        H0, tab, grid = small
        state = ground_state(3) if rho0 == "ground" else thermal_state(HF_ENERGIES[:3], 1.9)
        cfg = OptimizerConfig(max_iters=15, seed=1, seed_amplitude=1e-2, tol_deltaW=1e-14)
        res = run(cfg, state, H0, tab, grid)
        W = np.array([r.W for r in res.records])
        assert np.all(np.diff(W) >= -(1e-8 * np.abs(W[:-1]) + 1e-10))
        resid = check_deltaW_identity(res.records, res.history, cfg.lam, grid.dt)
        assert identity_contract(res.records, resid).all()
        assert np.allclose(resid, check_deltaW_identity(res.records), atol=1e-12)
        assert W.max() <= uniform_bound(H0, grid, cfg.lam, tab)
        scale = hs_norm(H0) * hs_norm(state)
        assert max(r.W2_residual for r in res.records) <= 1e-8 * scale
        assert all(r.W == r.W1 - r.W3 for r in res.records)
        assert not res.converged and len(res.records) == 16
        pur = np.einsum("jab,jba->j", res.rho_traj.states, res.rho_traj.states).real
        assert np.abs(pur - pur[0]).max() <= 1e-9

    def test_deterministic(self, small):
        H0, tab, grid = small
        cfg = OptimizerConfig(max_iters=5, seed=3, seed_amplitude=1e-2)
        a = run(cfg, ground_state(3), H0, tab, grid)
        b = run(cfg, ground_state(3), H0, tab, grid)
        as_rows = lambda res: np.array([astuple(r) for r in res.records])
        assert np.array_equal(as_rows(a), as_rows(b), equal_nan=True)
        assert np.array_equal(a.field.samples, b.field.samples)

    def test_stops_at_tolerance(self, small):
        H0, tab, grid = small
        cfg = OptimizerConfig(max_iters=200, seed=0, seed_amplitude=1e-2, tol_deltaW=1e-3)
        res = run(cfg, ground_state(3), H0, tab, grid)
        assert res.converged
        assert res.final.deltaW < 1e-3
        assert all(r.deltaW >= 1e-3 for r in res.records[1:-1])

    def test_callback_sees_every_iteration(self, small):
        H0, tab, grid = small
        seen = []
        run(OptimizerConfig(max_iters=4, seed_amplitude=1e-2), ground_state(3), H0, tab, grid, seen.append)
        assert [r.n for r in seen] == [1, 2, 3, 4]

    @settings(max_examples=8)
    @given(st.integers(0, 10_000), st.sampled_from(["exact", "midpoint"]))
    def test_monotone_on_random_systems(self, seed, scheme):
        rng = np.random.default_rng(seed)
        H0 = np.diag(np.sort(rng.uniform(0, 3, 3))).astype(complex)
        V = random_hermitian(rng, 3, 0.5)
        A = random_hermitian(rng, 3)
        rho0 = random_density(rng, 3)
        grid = TimeGrid(0.0, 10.0, 400)
        cfg = OptimizerConfig(lam=2.0, max_iters=10, seed=seed, seed_amplitude=1e-2, tol_deltaW=1e-14, scheme=scheme)
        res = run(cfg, rho0, A, build_tables(H0, V), grid)  # raises on a monotonicity breach
        if scheme == "exact":
            resid = check_deltaW_identity(res.records)
            assert identity_contract(res.records, resid).all()
