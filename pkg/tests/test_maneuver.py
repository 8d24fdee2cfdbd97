import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from formation_lab import (
    DegenerateEdgeError,
    DesignInconsistencyError,
    DynamicsSpec,
    Framework,
    Graph,
    InfeasibleDesignError,
    MotionParams,
    UnsupportedTopologyError,
    ValidationError,
    agent_control,
    build_maneuver,
    decompose_reference,
    design_motion_params,
    kappa_bound,
    maneuver_control,
    modal_solution,
    relative_positions,
    simulate,
    spectrum_check,
)
from formation_lab.formation import blocks
from formation_lab.maneuver import lifted_scalar_M, nominal_design, particular_solution

from conftest import random_tree_framework, random_valid_motion


def _p(shape, i):
    return blocks(shape.p_star, 2)[i - 1]


def test_scalar_design_square_horizontal(square):
    fw, shape = square
    v = np.array([1.0, 0.0])
    motion = design_motion_params(fw, shape, v, "scalar", kappa=1.0)
    mu = motion.values
    # agent 4 has the single neighbor 1 and a relative position parallel to v*
    np.testing.assert_allclose(mu[3, 0] * (_p(shape, 4) - _p(shape, 1)), v, atol=1e-12)
    # hand-solved minimum-norm values
    expected = np.zeros((4, 4))
    expected[0, 3] = -0.1
    expected[1, 2] = -0.1
    expected[2, 1] = 0.1
    expected[3, 0] = 0.1
    np.testing.assert_allclose(mu, expected, atol=1e-14)


def test_scalar_design_splits_kappa(square):
    fw, shape = square
    a = design_motion_params(fw, shape, [1.0, 0.0], "scalar", kappa=1.0)
    b = design_motion_params(fw, shape, [1.0, 0.0], "scalar", kappa=4.0)
    np.testing.assert_allclose(4.0 * b.values, a.values, atol=1e-15)


def test_scalar_design_infeasible_names_agent(square):
    fw, shape = square
    with pytest.raises(InfeasibleDesignError, match="agent 3.*matrix") as info:
        design_motion_params(fw, shape, [0.0, 1.0], "scalar")
    assert info.value.agent == 3


def test_matrix_design_perpendicular(square):
    fw, shape = square
    v = np.array([0.0, 1.0])
    motion = design_motion_params(fw, shape, v, "matrix", kappa=2.0)
    # d = p4* - p1* = (10, 0), v/kappa = (0, 0.5): pure quarter-turn scaled by 0.05
    np.testing.assert_allclose(motion.values[3, 0], [[0.0, -0.05], [0.05, 0.0]], atol=1e-15)
    design = build_maneuver(motion, fw, shape, 2.0)
    np.testing.assert_allclose(design.kappa * design.Lambda_hat @ shape.p_star, np.tile(v, 4), atol=1e-9)
    np.testing.assert_allclose(design.v_star, v, atol=1e-12)


def test_matrix_design_uses_lowest_neighbor(square):
    fw, shape = square
    motion = design_motion_params(fw, shape, [0.3, -0.7], "matrix")
    for i in range(4):
        nz = [j for j in range(4) if np.any(motion.values[i, j])]
        assert nz == [fw.graph.neighbors(i)[0]]


def test_matrix_design_three_dimensions():
    rng = np.random.default_rng(5)
    fw, shape = random_tree_framework(rng, 7, m=3)
    v = np.array([0.2, -0.4, 0.1])
    motion = design_motion_params(fw, shape, v, "matrix", kappa=0.5)
    design = build_maneuver(motion, fw, shape, 0.5)
    np.testing.assert_allclose(design.v_star, v, atol=1e-12)


def test_zero_velocity_gives_zero_params(square):
    fw, shape = square
    for mode in ("scalar", "matrix"):
        motion = design_motion_params(fw, shape, [0.0, 0.0], mode)
        assert not np.any(motion.values)


def test_zero_kappa_rejected_for_motion(square):
    fw, shape = square
    with pytest.raises(ValidationError, match="kappa"):
        design_motion_params(fw, shape, [1.0, 0.0], kappa=0.0)


def test_degenerate_edge_in_matrix_mode():
    fw = Framework(Graph(3, [(1, 2), (2, 3)]), 2)
    shape = decompose_reference([0.0, 0.0, 0.0, 0.0, 1.0, 1.0], 2)
    with pytest.raises(DegenerateEdgeError, match="agent 1"):
        design_motion_params(fw, shape, [1.0, 0.0], "matrix")


def test_design_needs_connected_graph():
    fw = Framework(Graph(4, [(1, 2), (3, 4)]), 2)
    shape = decompose_reference(np.arange(8.0), 2)
    with pytest.raises(ValidationError, match="not connected"):
        design_motion_params(fw, shape, [1.0, 0.0])


def test_build_zero_motion(square):
    fw, shape = square
    d = nominal_design(fw, shape)
    assert not np.any(d.Lambda_hat)
    np.testing.assert_array_equal(d.v_star, 0.0)


def test_build_square_design_consistency(square):
    fw, shape = square
    kappa = 0.7
    design = build_maneuver(design_motion_params(fw, shape, [1.0, 0.0], kappa=kappa), fw, shape, kappa)
    np.testing.assert_allclose(kappa * design.Lambda_hat @ shape.p_star, np.tile([1.0, 0.0], 4), atol=1e-9)
    np.testing.assert_allclose(design.Lambda_hat, design.M_hat @ fw.B_bar.T, atol=1e-12)
    np.testing.assert_array_equal(design.M_hat, lifted_scalar_M(design, 2))
    np.testing.assert_array_equal(design.M_hat, np.kron(design.M, np.eye(2)))


def test_build_rejects_inconsistent_motion(square):
    fw, shape = square
    mu = np.zeros((4, 4))
    mu[3, 0] = 0.1
    with pytest.raises(DesignInconsistencyError, match="agent"):
        build_maneuver(MotionParams("scalar", mu), fw, shape, 1.0)


def test_build_rejects_non_neighbor_params(square):
    fw, shape = square
    mu = np.zeros((4, 4))
    mu[3, 2] = 1.0
    with pytest.raises(ValidationError, match="not a neighbor"):
        build_maneuver(MotionParams("scalar", mu), fw, shape, 1.0)


def test_kappa_bound_zero_motion(grid):
    fw, _ = grid
    assert kappa_bound(fw, np.zeros((18, 16))) == float("inf")


def test_kappa_bound_two_agents():
    fw = Framework(Graph(2, [(1, 2)]), 1)
    # lambda_min(B^T B) = 2, ||B^T M|| = 2
    assert kappa_bound(fw, np.array([[1.0], [-1.0]]), 1.0) == pytest.approx(1.0, rel=1e-14)


def test_kappa_bound_grid_positive(grid):
    fw, shape = grid
    rng = np.random.default_rng(0)
    motion = random_valid_motion(fw, shape, [0.5, 0.2], rng)
    design = build_maneuver(motion, fw, shape, 1.0)
    B = fw.B_bar
    lam = np.min(np.linalg.eigvals(B.T @ B).real)
    nrm = np.sqrt(np.max(np.linalg.eigvalsh((B.T @ design.M_hat).T @ (B.T @ design.M_hat))))
    bound = kappa_bound(fw, design.M_hat)
    assert bound > 0
    assert bound == pytest.approx(lam / nrm, rel=1e-9)


def test_kappa_bound_topology_and_weights():
    tri = Framework(Graph(3, [(1, 2), (2, 3), (3, 1)]), 2)
    with pytest.raises(UnsupportedTopologyError, match="spectrum_check"):
        kappa_bound(tri, np.zeros((6, 6)))
    path = Framework(Graph(3, [(1, 2), (2, 3)], (1.0, 2.0)), 2)
    with pytest.raises(ValidationError, match="uniform"):
        kappa_bound(path, np.zeros((6, 4)))


def test_kappa_bound_scales_with_omega():
    fw = Framework(Graph(3, [(1, 2), (2, 3)], (3.0, 3.0)), 1)
    M = np.array([[1.0, 0.0], [-1.0, 0.5], [0.0, -0.5]])
    unit = Framework(Graph(3, [(1, 2), (2, 3)]), 1)
    assert kappa_bound(fw, M) == pytest.approx(3.0 * kappa_bound(unit, M))


def test_spectrum_nominal(grid):
    fw, _ = grid
    rep = spectrum_check(fw.L_bar, m=2)
    assert rep.stable and rep.zero_count == 2
    nonzero = rep.eigenvalues[np.abs(rep.eigenvalues) >= rep.tolerance]
    assert np.all(np.abs(nonzero.imag) < 1e-12) and np.all(nonzero.real > 0)
    assert rep.kernel_residual == 0.0


def test_spectrum_below_bound_is_stable(square):
    fw, shape = square
    motion = design_motion_params(fw, shape, [1.0, 0.0])
    bound = kappa_bound(fw, build_maneuver(motion, fw, shape, 1.0).M_hat)
    design = build_maneuver(motion, fw, shape, 0.9 * bound)
    assert spectrum_check(fw.L_bar, design.kappa, design.Lambda_hat, m=2).stable


def test_spectrum_detects_instability_for_large_gain(square):
    fw, shape = square
    motion = design_motion_params(fw, shape, [1.0, 0.0])
    Lh = build_maneuver(motion, fw, shape, 1.0).Lambda_hat
    kappas = np.concatenate([-np.geomspace(0.01, 1e3, 200), np.geomspace(0.01, 1e3, 200)])
    mins = np.array([spectrum_check(fw.L_bar, k, Lh, m=2).min_nonzero_real for k in kappas])
    stable = np.array([spectrum_check(fw.L_bar, k, Lh, m=2).stable for k in kappas])
    assert stable[np.abs(kappas) < 0.1].all()
    assert not stable.all()
    # sign change of the slowest real part along the sweep
    assert np.any(mins > 0) and np.any(mins <= 0)


def test_spectrum_shape_mismatch():
    with pytest.raises(ValidationError):
        spectrum_check(np.eye(4), 1.0, np.eye(6), m=2)


def test_maneuver_control_translated_shape(square):
    fw, shape = square
    kappa = 0.3
    design = build_maneuver(design_motion_params(fw, shape, [1.0, 0.0], kappa=kappa), fw, shape, kappa)
    u = maneuver_control(shape.p_star + np.tile([7.0, -3.0], 4), design, fw, shape)
    np.testing.assert_allclose(u, np.tile([1.0, 0.0], 4), atol=1e-12)


def test_maneuver_control_reduces_to_nominal(square):
    fw, shape = square
    d0 = nominal_design(fw, shape)
    np.testing.assert_array_equal(maneuver_control(shape.p_star, d0, fw, shape), 0.0)
    p = np.random.default_rng(1).normal(size=8) * 5
    np.testing.assert_allclose(
        maneuver_control(p, d0, fw, shape), -fw.L_bar @ (p - shape.p_star), atol=1e-12
    )


@pytest.mark.parametrize("mode, v", [("scalar", [0.0, -0.2]), ("matrix", [0.4, -0.2])])
def test_agent_control_matches_compact_form(grid, mode, v):
    fw, shape = grid
    design = build_maneuver(design_motion_params(fw, shape, v, mode, 0.5), fw, shape, 0.5)
    p = np.random.default_rng(2).normal(size=18) * 10
    u = maneuver_control(p, design, fw, shape)
    local = np.concatenate([agent_control(i, p, design, fw, shape) for i in range(9)])
    np.testing.assert_allclose(local, u, atol=1e-12)


def test_agent_control_weighted_graph():
    fw = Framework(Graph(4, [(1, 2), (2, 3), (1, 4)], (2.0, 0.5, 1.5)), 2)
    shape = decompose_reference([-5, -5, -5, 5, 5, 5, 5, -5], 2)
    design = build_maneuver(design_motion_params(fw, shape, [1.0, 0.0]), fw, shape, 1.0)
    p = np.random.default_rng(3).normal(size=8)
    local = np.concatenate([agent_control(i, p, design, fw, shape) for i in range(4)])
    np.testing.assert_allclose(local, maneuver_control(p, design, fw, shape), atol=1e-12)


def _random_design(seed, n, m=2):
    rng = np.random.default_rng(seed)
    fw, shape = random_tree_framework(rng, n, m)
    v = rng.normal(size=m)
    kappa = float(rng.uniform(0.1, 2.0))
    motion = random_valid_motion(fw, shape, v, rng, kappa)
    return fw, shape, build_maneuver(motion, fw, shape, kappa), rng


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_particular_solution_kernel_and_nilpotency(seed, n):
    fw, shape, design, _ = _random_design(seed, n)
    A = design.system_matrix(fw)
    for t in (0.0, 1.0, 17.3):
        pp = particular_solution(design, shape, t)
        dpp = design.kappa * design.Lambda_hat @ shape.p_star
        assert np.max(np.abs(dpp - (-A @ pp + fw.L_bar @ shape.p_star))) < 1e-9
    kernel = np.kron(np.ones((n, 1)), np.eye(2))
    for kappa in (0.0, design.kappa, -3.0, 50.0):
        assert np.max(np.abs((fw.L_bar - kappa * design.Lambda_hat) @ kernel)) < 1e-12
    sq = design.kappa**2 * design.Lambda_hat @ (design.Lambda_hat @ shape.p_star)
    assert np.max(np.abs(sq)) < 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_modal_solution_matches_matrix_exponential(seed):
    fw, shape, design, rng = _random_design(seed, 6)
    p0 = rng.uniform(-20, 20, 12)
    A = design.system_matrix(fw)
    t = 3.7
    # augmented-state exponential: independent of the eigendecomposition route
    aug = np.zeros((13, 13))
    aug[:12, :12] = -A
    aug[:12, 12] = fw.L_bar @ shape.p_star
    ref = (scipy.linalg.expm(aug * t) @ np.append(p0, 1.0))[:12]
    np.testing.assert_allclose(modal_solution(design, fw, shape, p0, t), ref, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_lyapunov_decay_below_bound(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(3, 10))
    fw, shape = random_tree_framework(rng, n)
    motion = random_valid_motion(fw, shape, rng.normal(size=2), rng)
    bound = kappa_bound(fw, build_maneuver(motion, fw, shape, 1.0).M_hat)
    design = build_maneuver(motion, fw, shape, 0.9 * bound)
    traj = simulate(DynamicsSpec.maneuver(fw, shape, design), rng.uniform(-20, 20, 2 * n), 0.01, 30.0)
    e = np.linalg.norm(traj.states @ fw.B_bar - shape.z_star(fw), axis=1)
    assert np.all(np.diff(e[1:]) <= 1e-12 * e[0])
    assert e[-1] < e[0]


def test_relative_positions_of_design_shape(square):
    fw, shape = square
    np.testing.assert_array_equal(relative_positions(fw, shape.p_star), shape.z_star(fw))
