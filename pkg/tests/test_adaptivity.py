import numpy as np
import pytest

from lowrank_boltzmann.adaptivity import (AdaptiveSettings, BoundViolation, ControllerState, RankHistory,
                                          add_boundary_basis, drop_basis, drop_tol_controller, run_adaptive)
from lowrank_boltzmann.lowrank import LowRankState, init_from_function, reconstruct
from lowrank_boltzmann.problems import normal_shock
from lowrank_boltzmann.velocity import maxwellian, precompute_collision_tables


@pytest.fixture(scope="module")
def setup():
    pc = normal_shock(1.4, n_x=24, N_v=8, L_v=13.11)
    return pc, precompute_collision_tables(pc.grid_v), pc.boundary()


def test_add_keeps_function_and_orthonormality(setup):
    pc, _, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=2)
    F_b = bc.assemble_boundary_matrix(st.X, st.S, st.V)
    new, rep = add_boundary_basis(st, F_b, 7, gx, gv)
    assert rep.r_before == 2 and rep.r_after == 2 + rep.r_b and rep.r_b >= 1
    assert np.abs(reconstruct(new) - reconstruct(st)).max() < 1e-12 * np.abs(reconstruct(st)).max()
    assert np.allclose(gx.weight * new.X.T @ new.X, np.eye(new.r), atol=1e-10)
    assert np.allclose(gv.weight * new.V.T @ new.V, np.eye(new.r), atol=1e-10)
    # every boundary row now lies in span(V)
    P = new.V @ new.V.T * gv.weight
    assert np.abs(F_b @ P - F_b).max() < 1e-10 * np.abs(F_b).max()
    again, _ = add_boundary_basis(st, F_b, 7, gx, gv)
    assert np.array_equal(again.X, new.X)


def test_add_clamps_at_full_rank():
    pc = normal_shock(1.4, n_x=6, N_v=4)
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=6)
    F_b = np.random.default_rng(0).random((2, gv.size))
    new, rep = add_boundary_basis(st, F_b, 0, gx, gv)
    assert rep.r_b == 0 and new is st
    zero, rep = add_boundary_basis(init_from_function(pc.initial_distribution(), gx, gv, rank=1),
                                   np.zeros((2, gv.size)), 0, gx, gv)
    assert rep.r_b == 0


def test_drop_basis():
    rng = np.random.default_rng(1)
    X = np.linalg.qr(rng.standard_normal((10, 4)))[0] * np.sqrt(10)
    V = np.linalg.qr(rng.standard_normal((20, 4)))[0] * np.sqrt(20)
    st = LowRankState(X, np.diag([3.0, 1.0, 0.1, 0.01]), V)
    new, rep = drop_basis(st, 0.05)
    assert rep.r_before == 4 and rep.r_after == 3
    assert np.allclose(rep.dropped, [0.01])
    full = reconstruct(st)
    assert np.allclose(reconstruct(new) + X @ rep.dropped_part @ V.T, full)
    one, rep = drop_basis(st, 10.0)
    assert one.r == 1 and rep.kept_largest_only
    same, rep = drop_basis(st, 0.0)
    assert same.r == 4 and not np.any(rep.dropped_part)


def test_drop_tol_controller():
    assert drop_tol_controller(None) == 0.0
    assert drop_tol_controller(1e-3, 0.2) == pytest.approx(2e-4)
    for c in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            drop_tol_controller(1.0, c)


def run(setup, steps, seed=0, **kw):
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=3)
    dt = 0.3 * gx.dx[0] / gv.L_v
    settings = AdaptiveSettings(res_tol=0.0, max_steps=steps, seed=seed, **kw)
    return run_adaptive(st, tables, gx, gv, dt, bc, settings)


def test_run_adaptive_is_deterministic(setup):
    a = run(setup, 15)
    b = run(setup, 15)
    assert np.array_equal(a[0].S, b[0].S) and a[1].records == b[1].records
    assert a[2].step == 15 and not a[3]
    assert a[2].bound_violations == 0
    h = a[1]
    assert len(h) == 15 and h.ranks.min() >= 1
    assert np.all(np.isfinite(h.residuals))


def test_run_adaptive_resume_matches(setup):
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    dt = 0.3 * gx.dx[0] / gv.L_v
    st0 = init_from_function(pc.initial_distribution(), gx, gv, rank=3)
    full = run_adaptive(st0, tables, gx, gv, dt, bc, AdaptiveSettings(res_tol=0.0, max_steps=12))
    st, h, ctrl, _ = run_adaptive(st0, tables, gx, gv, dt, bc, AdaptiveSettings(res_tol=0.0, max_steps=5))
    st, h, ctrl, _ = run_adaptive(st, tables, gx, gv, dt, bc, AdaptiveSettings(res_tol=0.0, max_steps=12), h, ctrl)
    assert np.array_equal(st.S, full[0].S) and h.records == full[1].records


def test_run_adaptive_stops_at_tolerance(setup):
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=3)
    dt = 0.3 * gx.dx[0] / gv.L_v
    st, h, ctrl, conv = run_adaptive(st, tables, gx, gv, dt, bc, AdaptiveSettings(res_tol=1.0, max_steps=50))
    assert conv and ctrl.step == 1 and h.residuals[-1] <= 1.0


def test_cadence_and_every_step_bound(setup):
    _, h, ctrl, _ = run(setup, 10, add_every=3, drop_every=2)
    recs = h.records
    # on steps without truncation nothing is dropped
    assert all(r[2] == r[3] for r in recs[1::2])
    for rec in recs:
        step, _, r, rp, err, ada, tol = rec
        assert abs(err - ada) <= np.sqrt(r - rp) * tol + 1e-12 * max(err, ada)


def test_equilibrium_rank_stays_small():
    pc = normal_shock(1.4, n_x=16, N_v=16, L_v=9.0)
    gx, gv = pc.grid_x, pc.grid_v
    tables = precompute_collision_tables(gv)
    from lowrank_boltzmann.boundary import BoundarySpec, Inflow
    u = (0.5, 0.0)
    bc = BoundarySpec(gx, gv, {"x1_low": Inflow(1.0, u, 1.0), "x1_high": Inflow(1.0, u, 1.0)})
    M = maxwellian(gv, 1.0, np.array(u), 1.0)
    st = init_from_function(np.tile(M, (gx.size, 1)), gx, gv, rank=1)
    st, h, _, _ = run_adaptive(st, tables, gx, gv, 0.01, bc, AdaptiveSettings(res_tol=0.0, max_steps=10))
    assert h.ranks.max() <= 2


def test_strict_bound_violation_raises(setup, monkeypatch):
    import lowrank_boltzmann.adaptivity as ad
    monkeypatch.setattr(ad, "bound_holds", lambda *a, **k: False)
    with pytest.raises(BoundViolation):
        run(setup, 2)
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=3)
    _, _, ctrl, _ = run_adaptive(st, tables, gx, gv, 0.01, bc, AdaptiveSettings(res_tol=0.0, max_steps=3),
                                 strict=False)
    assert ctrl.bound_violations == 3


def test_history_columns():
    assert RankHistory.COLUMNS[0] == "step" and len(RankHistory.COLUMNS) == 7
    assert ControllerState().err_ada_prev is None
