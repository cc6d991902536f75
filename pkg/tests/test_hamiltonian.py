import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conelq.errors import ConvexityViolated, NonCoercive, SchemaError
from conelq.hamiltonian import (
    HamiltonianInput,
    f_jump,
    grid_oracle_min,
    hamiltonian_objective,
    minimize_h_post,
    minimize_h_pre,
)
from conelq.model import ConeKind, ConeSpec, coefficient_at

from conftest import make_problem

# small-but-generic coefficient ranges; every draw is admissible
coef = dict(
    a=st.floats(-1.0, 1.0),
    b=st.floats(-1.0, 1.0),
    c=st.floats(-0.5, 0.5),
    d=st.floats(0.4, 1.2),
    e=st.floats(-0.8, 0.5),
    f=st.floats(-1.0, 1.0),
    q=st.floats(0.0, 1.0),
    r=st.floats(0.3, 1.5),
    lam=st.floats(0.1, 1.0),
)
weights = dict(
    p=st.floats(0.0, 3.0),
    qlin=st.floats(-2.0, 2.0),
    l1=st.floats(0.0, 3.0),
    l2=st.floats(0.0, 3.0),
)
sides = st.sampled_from(["plus", "minus"])
cones = st.sampled_from([ConeKind.FULL_SPACE, ConeKind.NONNEG_ORTHANT])


def _input(problem, side, phase, p, qlin, l1, l2, t=0.4, theta=0.2):
    cs = coefficient_at(problem, t, phase, theta if phase == "post" else None)
    return HamiltonianInput(
        side=side, phase=phase, p=p, q=np.array([qlin]), l1=l1, l2=l2,
        coeffs=cs, cone=problem.cone,
    )


# ------------------------------------------------------------------ f_jump


@given(side=sides, x=st.floats(-5.0, 5.0), e=st.floats(-1.0, 1.0))
def test_f_jump_vanishes_at_identity(side, x, e):
    # a jump that lands exactly on the old state costs nothing; the e = 0
    # case is exact in floating point, the cancelling-y case nearly so
    assert f_jump(side, x, 0.0, 0.0) == 0.0
    assert f_jump(side, x, -e * x, e) == pytest.approx(0.0, abs=1e-12 * (1 + x * x))


@given(x=st.floats(-5.0, 5.0), y=st.floats(-5.0, 5.0), e=st.floats(-1.0, 1.0))
def test_f_jump_sides_sum_to_square_difference(x, y, e):
    z = (1.0 + e) * x + y
    total = f_jump("plus", x, y, e) + f_jump("minus", x, y, e)
    assert total == pytest.approx(0.5 * z * z - 0.5 * x * x, rel=1e-12, abs=1e-12)


def test_f_jump_vectorizes():
    x = np.array([-1.0, 0.0, 2.0])
    out = f_jump("plus", x, 0.5, -0.2)
    assert out.shape == (3,)
    assert out[1] == 0.125  # x = 0: (0.5^+)^2 / 2


def test_f_jump_rejects_unknown_side():
    with pytest.raises(SchemaError):
        f_jump("up", 1.0, 0.0, 0.0)


# --------------------------------------------------- minimizer invariants


@settings(max_examples=150, deadline=None)
@given(side=sides, cone=cones, **coef, **weights)
def test_zero_control_upper_bound(side, cone, a, b, c, d, e, f, q, r, lam, p, qlin, l1, l2):
    problem = make_problem(n=4, cone=cone, a=a, b=b, c=c, d=d, e=e, f=f,
                           q=q, r=r, lam=lam)
    res = minimize_h_pre(side, 0.4, p, np.array([qlin]), l1, l2, problem)
    g = hamiltonian_objective(_input(problem, side, "pre", p, qlin, l1, l2))
    assert res.value <= g(np.zeros(1)) + 1e-10
    post = minimize_h_post(side, 0.2, 0.6, p, np.array([qlin]), problem)
    gp = hamiltonian_objective(_input(problem, side, "post", p, qlin, l1, l2))
    assert post.value <= gp(np.zeros(1)) + 1e-10


@settings(max_examples=100, deadline=None)
@given(side=sides, **coef, **weights)
def test_cone_monotonicity(side, a, b, c, d, e, f, q, r, lam, p, qlin, l1, l2):
    kw = dict(a=a, b=b, c=c, d=d, e=e, f=f, q=q, r=r, lam=lam)
    free = make_problem(n=4, cone=ConeKind.FULL_SPACE, **kw)
    caged = make_problem(n=4, cone=ConeKind.NONNEG_ORTHANT, **kw)
    lo = minimize_h_pre(side, 0.4, p, np.array([qlin]), l1, l2, free)
    hi = minimize_h_pre(side, 0.4, p, np.array([qlin]), l1, l2, caged)
    assert lo.value <= hi.value + 1e-12


@settings(max_examples=100, deadline=None)
@given(side=sides, cone=cones, scale=st.floats(0.01, 50.0), **coef, **weights)
def test_degree_one_homogeneity_without_control_cost(
    side, cone, scale, a, b, c, d, e, f, q, r, lam, p, qlin, l1, l2
):
    # with R = 0 every objective term is linear in (p, q, l1, l2) jointly
    problem = make_problem(n=4, cone=cone, a=a, b=b, c=c, d=d, e=e, f=f,
                           q=q, r=0.0, pr=0.0, lam=lam)
    p = p + 0.3  # keep the quadratic part coercive through p |Du|^2
    qv = np.array([qlin])
    base = minimize_h_pre(side, 0.4, p, qv, l1, l2, problem)
    scaled = minimize_h_pre(side, 0.4, scale * p, scale * qv, scale * l1,
                            scale * l2, problem)
    assert scaled.value == pytest.approx(scale * base.value, rel=1e-9, abs=1e-12)

    g = hamiltonian_objective(_input(problem, side, "pre", p, qlin, l1, l2))
    gs = hamiltonian_objective(
        _input(problem, side, "pre", scale * p, scale * qlin, scale * l1, scale * l2)
    )
    u = np.array([0.37])
    assert gs(u) == pytest.approx(scale * g(u), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(**coef, **weights)
def test_plus_minus_symmetry_fullspace(a, b, c, d, e, f, q, r, lam, p, qlin, l1, l2):
    problem = make_problem(n=4, cone=ConeKind.FULL_SPACE, a=a, b=b, c=c, d=d,
                           e=e, f=f, q=q, r=r, lam=lam)
    qv = np.array([qlin])
    hm = minimize_h_pre("minus", 0.4, p, qv, l1, l2, problem)
    hp = minimize_h_pre("plus", 0.4, p, qv, l2, l1, problem)
    assert hm.value == pytest.approx(hp.value, rel=1e-10, abs=1e-12)
    np.testing.assert_allclose(hm.argmin, -hp.argmin, rtol=1e-8, atol=1e-10)

    pm = minimize_h_post("minus", 0.2, 0.6, p, qv, problem)
    pp = minimize_h_post("plus", 0.2, 0.6, p, qv, problem)
    assert pm.value == pytest.approx(pp.value, rel=1e-10, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(side=sides, cone=cones, **coef, **weights)
def test_argmin_is_feasible(side, cone, a, b, c, d, e, f, q, r, lam, p, qlin, l1, l2):
    problem = make_problem(n=4, cone=cone, a=a, b=b, c=c, d=d, e=e, f=f,
                           q=q, r=r, lam=lam)
    res = minimize_h_pre(side, 0.4, p, np.array([qlin]), l1, l2, problem)
    assert problem.cone.contains(res.argmin)


# ------------------------------------------------------------- rejections


def test_negative_curvature_certificates_rejected():
    problem = make_problem(n=4)
    with pytest.raises(ConvexityViolated):
        minimize_h_pre("plus", 0.4, -0.5, np.zeros(1), 1.0, 1.0, problem)
    with pytest.raises(ConvexityViolated):
        minimize_h_pre("plus", 0.4, 0.5, np.zeros(1), 0.0, -0.1, problem)
    with pytest.raises(ConvexityViolated):
        minimize_h_pre("minus", 0.4, 0.5, np.zeros(1), -0.1, 0.0, problem)
    with pytest.raises(ConvexityViolated):
        minimize_h_post("plus", 0.2, 0.6, -1.0, np.zeros(1), problem)


def test_flat_objective_min_norm_and_linear_rejection():
    # R = 0 and no diffusion loading: with p = 0 the objective is constant
    # and the min-norm tie-break picks u = 0; with p > 0 the drift term
    # makes it linear and unbounded over the full space
    problem = make_problem(
        n=4, cone=ConeKind.FULL_SPACE,
        r=0.0, pr=0.0, d=0.0, pd=0.0, lam=0.0, e=0.0, f=0.0, b=0.4, c=0.0,
    )
    flat = minimize_h_pre("plus", 0.4, 0.0, np.zeros(1), 0.0, 0.0, problem)
    assert flat.value == 0.0
    np.testing.assert_array_equal(flat.argmin, [0.0])
    with pytest.raises(NonCoercive):
        minimize_h_pre("plus", 0.4, 1.0, np.zeros(1), 0.0, 0.0, problem)


# ------------------------------------------------------- oracle agreement


def test_solver_matches_grid_oracle():
    rng = np.random.default_rng(314)
    worst = 0.0
    for _ in range(150):
        cone = ConeKind.NONNEG_ORTHANT if rng.random() < 0.5 else ConeKind.FULL_SPACE
        problem = make_problem(
            n=4, cone=cone,
            a=rng.uniform(-1, 1), b=rng.uniform(-1, 1), c=rng.uniform(-0.5, 0.5),
            d=rng.uniform(0.4, 1.2), e=rng.uniform(-0.8, 0.5), f=rng.uniform(-1, 1),
            q=rng.uniform(0, 1), r=rng.uniform(0.3, 1.5), lam=rng.uniform(0.2, 1),
            pa=rng.uniform(-1, 1), pb=rng.uniform(-1, 1), pc=rng.uniform(-0.5, 0.5),
            pd=rng.uniform(0.4, 1.2), pq=rng.uniform(0, 1), pr=rng.uniform(0.3, 1.5),
        )
        p = rng.uniform(0.0, 3.0)
        qv = rng.uniform(-2.0, 2.0, size=1)
        l1, l2 = rng.uniform(0.0, 3.0, size=2)
        side = "plus" if rng.random() < 0.5 else "minus"
        phase = "pre" if rng.random() < 0.5 else "post"
        if phase == "pre":
            res = minimize_h_pre(side, 0.4, p, qv, l1, l2, problem)
        else:
            res = minimize_h_post(side, 0.2, 0.6, p, qv, problem)
        inp = _input(problem, side, phase, p, qv[0], l1, l2)
        bounds = max(4.0, 2.5 * float(np.max(np.abs(res.argmin))) + 1.0)
        ref = grid_oracle_min(side, phase, inp, bounds, 33)
        worst = max(worst, abs(res.value - ref.value))
    assert worst <= 1e-6


def test_grid_oracle_rejects_large_dimension():
    problem = make_problem(n=4)
    inp = _input(problem, "plus", "pre", 1.0, 0.0, 1.0, 1.0)
    bad = HamiltonianInput(
        side="plus", phase="pre", p=1.0, q=np.zeros(3), l1=1.0, l2=1.0,
        coeffs=inp.coeffs, cone=ConeSpec(ConeKind.FULL_SPACE, 3),
    )
    with pytest.raises(SchemaError):
        grid_oracle_min("plus", "pre", bad, 4.0, 9)
