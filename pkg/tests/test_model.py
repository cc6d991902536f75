import numpy as np
import pytest

from conelq.errors import (
    NeitherCase,
    NonFinite,
    NotPSD,
    SchemaError,
    ViolatedAssumption,
)
from conelq.model import (
    CaseClass,
    ConeKind,
    ConeSpec,
    PreDefaultCoeffs,
    ThetaDep,
    TimeGrid,
    coefficient_at,
    validate_problem,
)

from conftest import make_problem


# ------------------------------------------------------------------ grid


def test_grid_nodes_and_step():
    grid = TimeGrid(2.0, 8)
    assert grid.n == 8
    assert grid.step == 0.25
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == 2.0
    assert grid.nodes.size == 9
    # half grid interleaves nodes and midpoints
    assert grid.half_nodes.size == 17
    np.testing.assert_array_equal(grid.half_nodes[::2], grid.nodes)


def test_grid_index_of_clips():
    grid = TimeGrid(1.0, 4)
    assert grid.index_of(-0.5) == 0.0
    assert grid.index_of(0.375) == pytest.approx(1.5)
    assert grid.index_of(9.0) == 4.0


def test_grid_rejects_degenerate():
    with pytest.raises(SchemaError):
        TimeGrid(0.0, 10)
    with pytest.raises(SchemaError):
        TimeGrid(1.0, 1)


# ------------------------------------------------------------------ cone


def test_cone_projection_and_membership():
    full = ConeSpec(ConeKind.FULL_SPACE, 2)
    orth = ConeSpec(ConeKind.NONNEG_ORTHANT, 2)
    u = np.array([-1.0, 2.0])
    np.testing.assert_array_equal(full.project(u), u)
    np.testing.assert_array_equal(orth.project(u), [0.0, 2.0])
    assert full.contains(u)
    assert not orth.contains(u)
    assert orth.contains(orth.project(u))
    assert not full.contains(np.array([np.inf, 0.0]))
    # wrong dimension is not a member of anything
    assert not orth.contains(np.array([1.0]))


def test_cone_rejects_dim_zero():
    with pytest.raises(SchemaError):
        ConeSpec(ConeKind.FULL_SPACE, 0)


# ------------------------------------------------------------------ theta


def test_thetadep_constant_ignores_theta():
    grid = TimeGrid(1.0, 10)
    dep = ThetaDep.constant(grid, 0.7, (), "x")
    assert dep.at(grid, 0.3, 0.1) == dep.at(grid, 0.3, 0.9)
    row = dep.at_node_theta(grid, 4, np.array([0.0, 0.5, 1.0]))
    np.testing.assert_array_equal(row, 0.7)


def test_thetadep_affine_is_exact():
    grid = TimeGrid(1.0, 10)
    dep = ThetaDep.affine(grid, 0.2, -0.5, (), "x")
    thetas = np.array([0.0, 0.31, 0.77])
    np.testing.assert_allclose(
        dep.at_node_theta(grid, 3, thetas), 0.2 - 0.5 * thetas, rtol=0.0, atol=1e-15
    )
    assert dep.at(grid, 0.5, 0.31) == pytest.approx(0.2 - 0.5 * 0.31, abs=1e-15)


def test_thetadep_table_interpolates_rows():
    grid = TimeGrid(1.0, 4)
    rng = np.random.default_rng(5)
    values = rng.normal(size=(5, 5))
    dep = ThetaDep.table(grid, values, (), "x")
    # on-node lookups reproduce the table
    assert dep.at(grid, grid.nodes[2], grid.nodes[3]) == pytest.approx(
        values[2, 3], abs=1e-15
    )
    # theta midpoint is the average of adjacent columns
    mid = 0.5 * (grid.nodes[1] + grid.nodes[2])
    expect = 0.5 * (values[3, 1] + values[3, 2])
    assert dep.at_node_theta(grid, 3, np.array([mid]))[0] == pytest.approx(
        expect, abs=1e-14
    )


# ------------------------------------------------------------------ build


def test_build_broadcasts_scalars_and_accepts_curves():
    grid = TimeGrid(1.0, 6)
    curve = np.linspace(0.0, 1.0, 7)
    pre = PreDefaultCoeffs.build(
        grid, 1, 1,
        a=curve, b=[0.1], c=[0.2], d=[[0.5]], e=0.0, f=[0.0],
        q=0.3, r=[[1.0]], lam=0.0,
    )
    np.testing.assert_array_equal(pre.a, curve)
    assert pre.b.shape == (7, 1)
    assert pre.r.shape == (7, 1, 1)
    assert np.all(pre.q == 0.3)


def test_build_rejects_wrong_length_curve():
    grid = TimeGrid(1.0, 6)
    with pytest.raises(SchemaError, match="pre.A"):
        PreDefaultCoeffs.build(
            grid, 1, 1,
            a=np.zeros(5), b=[0.0], c=[0.0], d=[[1.0]], e=0.0, f=[0.0],
            q=0.0, r=[[1.0]], lam=0.0,
        )


# ------------------------------------------------------------- validation


def test_validate_standard_case():
    v = validate_problem(make_problem(n=10))
    assert v.case is CaseClass.STANDARD
    assert v.r_min_observed >= 0.4 - 1e-15


def test_validate_singular_case():
    v = validate_problem(make_problem(n=10, r=0.0, pr=0.0, d=1.0, pd=1.0))
    assert v.case is CaseClass.SINGULAR
    assert v.g_min_observed > 0.0
    assert v.dd_min_observed > 0.0


def test_validate_neither_case():
    with pytest.raises(NeitherCase):
        validate_problem(
            make_problem(n=10, r=0.0, pr=0.0, d=0.0, pd=0.0, q=0.0, pq=0.0,
                         g0=0.0, g1=0.0, c=0.0, pc=0.0, e=0.0, f=0.0)
        )


def test_validate_rejects_deep_jump_loss():
    with pytest.raises(ViolatedAssumption, match="pre.E"):
        validate_problem(make_problem(n=10, e=-1.5))


def test_validate_rejects_negative_intensity():
    with pytest.raises(ViolatedAssumption, match="intensity"):
        validate_problem(make_problem(n=10, lam=-0.1))


def test_validate_rejects_negative_state_cost():
    with pytest.raises(NotPSD, match="pre.Q"):
        validate_problem(make_problem(n=10, q=-0.2))
    with pytest.raises(NotPSD, match="post.Q"):
        validate_problem(make_problem(n=10, pq=-0.2))


def test_validate_rejects_indefinite_control_cost():
    with pytest.raises(NotPSD, match="pre.R"):
        validate_problem(make_problem(n=10, r=-0.4))


def test_validate_rejects_nonfinite():
    with pytest.raises(NonFinite):
        validate_problem(make_problem(n=10, a=np.nan))


# ---------------------------------------------------------------- slicing


def test_coefficient_at_pre_nodes_and_midpoint():
    problem = make_problem(n=4)
    cs = coefficient_at(problem, 0.0, "pre")
    assert cs.a == problem.pre.a[0]
    assert cs.lam == problem.pre.lam[0]
    assert cs.e == problem.pre.e[0]
    # constant coefficients: midpoints equal node values
    mid = coefficient_at(problem, 0.375, "pre")
    assert mid.a == cs.a
    assert mid.r[0, 0] == cs.r[0, 0]


def test_coefficient_at_post_has_no_jump_channel():
    problem = make_problem(n=4)
    cs = coefficient_at(problem, 0.6, "post", theta=0.2)
    assert cs.e is None and cs.f is None and cs.lam is None
    assert cs.a == -0.1
    assert cs.r[0, 0] == 0.4


def test_coefficient_at_interpolates_curves():
    n = 4
    grid_curve = np.linspace(1.0, 2.0, n + 1)
    problem = make_problem(n=n, a=grid_curve)
    h = problem.grid.step
    t = 1.5 * h
    cs = coefficient_at(problem, t, "pre")
    assert cs.a == pytest.approx(0.5 * (grid_curve[1] + grid_curve[2]), abs=1e-15)
