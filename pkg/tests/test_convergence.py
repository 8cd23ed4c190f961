import numpy as np
import pytest

from lowrank_boltzmann.adaptivity import drop_basis
from lowrank_boltzmann.convergence import (ErrorReport, adaptive_error, bound_holds, fulltensor_error, lowrank_error,
                                           stopping_rule)
from lowrank_boltzmann.lowrank import StepDeltas, init_from_function, reconstruct, step
from lowrank_boltzmann.problems import normal_shock
from lowrank_boltzmann.velocity import precompute_collision_tables


def l2(F, gx, gv):
    return np.sqrt(np.sum(F * F) * gx.weight * gv.weight)


@pytest.fixture(scope="module")
def setup():
    pc = normal_shock(1.4, n_x=16, N_v=8, L_v=13.11)
    return pc, precompute_collision_tables(pc.grid_v), pc.boundary()


def test_error_formula_matches_reconstruction(setup):
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=5)
    dt = 0.3 * gx.dx[0] / gv.L_v
    for n in range(10):
        new, d = step(st, tables, gx, gv, dt, bc)
        rep = lowrank_error(d, new.X, st.V, gx, gv, step=n)
        ref = l2(reconstruct(new) - reconstruct(st), gx, gv)
        assert abs(rep.err - ref) <= 1e-9 * ref
        assert np.isclose(sum(rep.parts), rep.err**2)
        assert rep.r == rep.r_prime == 5 and rep.final == rep.err
        st = new


def test_adaptive_error_matches_reconstruction(setup):
    pc, tables, bc = setup
    gx, gv = pc.grid_x, pc.grid_v
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=8)
    dt = 0.3 * gx.dx[0] / gv.L_v
    for _ in range(3):
        new, d = step(st, tables, gx, gv, dt, bc)
        rep = lowrank_error(d, new.X, st.V, gx, gv)
        s = np.linalg.svd(new.S, compute_uv=False)
        tol = s[4]  # drop the last three or four directions
        trunc, tr = drop_basis(new, tol * 1.0000001)
        ada = adaptive_error(rep, d, new.X, st.V, new.V, tr.dropped_part, gx, gv)
        ref = l2(reconstruct(trunc) - reconstruct(st), gx, gv)
        assert abs(ada - ref) <= 1e-9 * max(ref, rep.err)
        assert bound_holds(rep.err, ada, tr.r_before, tr.r_after, tol * 1.0000001)
        # nothing dropped means nothing changes
        assert adaptive_error(rep, d, new.X, st.V, new.V, np.zeros((8, 8)), gx, gv) == rep.err
        st = new


def test_shape_checks():
    gx = normal_shock(1.4, n_x=4, N_v=4).grid_x
    gv = normal_shock(1.4, n_x=4, N_v=4).grid_v
    d = StepDeltas(np.zeros((4, 2)), np.zeros((2, 2)), np.zeros((16, 3)))
    with pytest.raises(ValueError):
        lowrank_error(d, np.zeros((4, 2)), np.zeros((16, 3)), gx, gv)
    d = StepDeltas(np.zeros((4, 2)), np.zeros((2, 2)), np.zeros((16, 2)))
    with pytest.raises(ValueError):
        lowrank_error(d, np.zeros((5, 2)), np.zeros((16, 2)), gx, gv)


def test_negative_square_is_refused():
    # increments inconsistent with orthonormal bases can produce a negative total
    gx = normal_shock(1.4, n_x=4, N_v=4).grid_x
    gv = normal_shock(1.4, n_x=4, N_v=4).grid_v
    X = np.ones((4, 1)) / np.sqrt(gx.weight * 4)
    V = np.ones((16, 1)) / np.sqrt(gv.weight * 16)
    d = StepDeltas(X * 1.0, np.array([[-1.0]]), -V)
    with pytest.raises(FloatingPointError):
        lowrank_error(d, 3 * X, V, gx, gv)


def test_fulltensor_error_and_stopping_rule():
    gx = normal_shock(1.4, n_x=4, N_v=4).grid_x
    gv = normal_shock(1.4, n_x=4, N_v=4).grid_v
    a = np.ones((4, 16))
    assert np.isclose(fulltensor_error(2 * a, a, gx, gv), np.sqrt(64 * gx.weight * gv.weight))
    with pytest.raises(ValueError):
        fulltensor_error(a, a[:2], gx, gv)
    rep = ErrorReport(1e-6, (), err_ada=2e-7)
    assert stopping_rule(rep, 3e-7) == "converged"
    assert stopping_rule(rep, 3e-7, "fulltensor") == "continue"
    assert stopping_rule(1e-8, 1e-7, "fulltensor") == "converged"
    with pytest.raises(ValueError):
        stopping_rule(rep, 1.0, "spectral")


def test_bound_holds_edges():
    assert bound_holds(1.0, 1.0, 5, 5, 0.0)
    assert bound_holds(1.0, 1.2, 8, 4, 0.1)
    assert not bound_holds(1.0, 1.3, 8, 4, 0.1)
    assert not bound_holds(1.0, 1.0 + 1e-9, 5, 5, 0.0)
