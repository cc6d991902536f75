"""Problem data for cone-constrained scalar-state LQ control with one default.

State dynamics (scalar state X, control u in a closed convex cone):

    dX = (A X + B.u) dt + (C X + D u).dW + (E X + F.u) dM,

where M is the compensated single-jump default martingale with intensity
lambda. Coefficients are deterministic functions of time; after the default
time the (A, B, C, D) set may additionally depend on the default time theta,
and the jump channel (E, F, lambda) is gone. Cost is

    J(u) = E[ 1/2 G X_T^2 + 1/2 int_0^T (Q X^2 + u.R u) dt ],

with G = G0 on survival and G1(theta) after a default at theta.

Everything is stored on a uniform time grid; time dependence between nodes is
piecewise linear by convention, and all solvers evaluate coefficients on
nodes and half-nodes only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonFinite, NotPSD, SchemaError, ViolatedAssumption, NeitherCase


def _as_node_array(value, n: int, shape: tuple, name: str) -> np.ndarray:
    """Broadcast a constant or per-node value to a (n+1, *shape) float array."""
    arr = np.asarray(value, dtype=float)
    if arr.shape == shape:
        arr = np.broadcast_to(arr, (n + 1,) + shape).copy()
    elif arr.shape == (n + 1,) + shape:
        arr = arr.copy()
    else:
        raise SchemaError(
            f"{name}: expected shape {shape} or {(n + 1,) + shape}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name}: non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise SchemaError(f"grid.horizon must be positive, got {self.horizon}")
        if self.steps < 2:
            raise SchemaError(f"grid.steps must be >= 2, got {self.steps}")

    @property
    def n(self) -> int:
        return self.steps

    @property
    def step(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        """Nodes and midpoints interleaved: t_0, t_0+h/2, t_1, ... (2n+1 points)."""
        return np.linspace(0.0, self.horizon, 2 * self.steps + 1)

    def index_of(self, t: float) -> float:
        """Fractional node index of time t (clipped to the grid)."""
        return min(max(t / self.step, 0.0), float(self.steps))


class ConeKind(enum.Enum):
    FULL_SPACE = "full"
    NONNEG_ORTHANT = "nonneg"


@dataclass(frozen=True)
class ConeSpec:
    """Control constraint set: all of R^m, or the nonnegative orthant."""

    kind: ConeKind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise SchemaError(f"cone.dim must be >= 1, got {self.dim}")

    @property
    def is_orthant(self) -> bool:
        return self.kind is ConeKind.NONNEG_ORTHANT

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            return False
        if self.kind is ConeKind.FULL_SPACE:
            return bool(np.all(np.isfinite(u)))
        return bool(np.all(u >= -tol) and np.all(np.isfinite(u)))

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind is ConeKind.FULL_SPACE:
            return u
        return np.maximum(u, 0.0)


class ThetaMode(enum.Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    TABLE = "table"


@dataclass(frozen=True)
class ThetaDep:
    """Post-default coefficient: value(t, theta) on the triangle theta <= t.

    Three shapes of theta-dependence:
      constant  value(t, theta) = base(t)
      affine    value(t, theta) = base(t) + slope(t) * theta
      table     value(t_i, theta_j) given per node pair, bilinear in between
    """

    mode: ThetaMode
    base: np.ndarray  # (n+1, *shape); for TABLE: (n+1, n+1, *shape)
    slope: Optional[np.ndarray] = None  # (n+1, *shape) for AFFINE

    @staticmethod
    def constant(grid: TimeGrid, value, shape: tuple, name: str) -> "ThetaDep":
        return ThetaDep(ThetaMode.CONSTANT, _as_node_array(value, grid.n, shape, name))

    @staticmethod
    def affine(grid: TimeGrid, base, slope, shape: tuple, name: str) -> "ThetaDep":
        return ThetaDep(
            ThetaMode.AFFINE,
            _as_node_array(base, grid.n, shape, name + ".base"),
            _as_node_array(slope, grid.n, shape, name + ".slope"),
        )

    @staticmethod
    def table(grid: TimeGrid, values, shape: tuple, name: str) -> "ThetaDep":
        n = grid.n
        arr = np.asarray(values, dtype=float)
        if arr.shape != (n + 1, n + 1) + shape:
            raise SchemaError(
                f"{name}: table shape must be {(n + 1, n + 1) + shape}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"{name}: non-finite entries")
        return ThetaDep(ThetaMode.TABLE, arr.copy())

    @property
    def value_shape(self) -> tuple:
        if self.mode is ThetaMode.TABLE:
            return self.base.shape[2:]
        return self.base.shape[1:]

    @property
    def is_separable(self) -> bool:
        return self.mode is not ThetaMode.TABLE

    def at(self, grid: TimeGrid, t: float, theta: float) -> np.ndarray:
        """Value at arbitrary (t, theta), linear in t, affine/bilinear in theta."""
        x = grid.index_of(t)
        i0 = min(int(x), grid.n - 1)
        w = x - i0
        if self.mode is ThetaMode.TABLE:
            y = grid.index_of(theta)
            j0 = min(int(y), grid.n - 1)
            v = y - j0
            rows = (1 - w) * self.base[i0] + w * self.base[i0 + 1]
            return (1 - v) * rows[j0] + v * rows[j0 + 1]
        out = (1 - w) * self.base[i0] + w * self.base[i0 + 1]
        if self.mode is ThetaMode.AFFINE:
            out = out + ((1 - w) * self.slope[i0] + w * self.slope[i0 + 1]) * theta
        return out

    def at_node_theta(self, grid: TimeGrid, i: int, theta: np.ndarray) -> np.ndarray:
        """Value at node t_i for a vector of thetas (used by the path engine)."""
        theta = np.asarray(theta, dtype=float)
        sh = self.value_shape
        if self.mode is ThetaMode.CONSTANT:
            return np.broadcast_to(self.base[i], theta.shape + sh).copy()
        th = theta.reshape(theta.shape + (1,) * len(sh))
        if self.mode is ThetaMode.AFFINE:
            return self.base[i] + self.slope[i] * th
        y = np.clip(theta / grid.step, 0.0, float(grid.n))
        j0 = np.minimum(y.astype(int), grid.n - 1)
        v = (y - j0).reshape(theta.shape + (1,) * len(sh))
        row = self.base[i]
        return (1 - v) * row[j0] + v * row[j0 + 1]


@dataclass(frozen=True)
class PreDefaultCoeffs:
    """Coefficients in force up to and including the default time.

    Arrays are per grid node: a, e, q, lam are (n+1,); b, f are (n+1, m);
    c is (n+1, k); d is (n+1, k, m); r is (n+1, m, m).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray
    q: np.ndarray
    r: np.ndarray
    lam: np.ndarray

    @staticmethod
    def build(grid: TimeGrid, m: int, k: int, *, a, b, c, d, e, f, q, r, lam):
        n = grid.n
        return PreDefaultCoeffs(
            a=_as_node_array(a, n, (), "pre.A"),
            b=_as_node_array(b, n, (m,), "pre.B"),
            c=_as_node_array(c, n, (k,), "pre.C"),
            d=_as_node_array(d, n, (k, m), "pre.D"),
            e=_as_node_array(e, n, (), "pre.E"),
            f=_as_node_array(f, n, (m,), "pre.F"),
            q=_as_node_array(q, n, (), "pre.Q"),
            r=_as_node_array(r, n, (m, m), "pre.R"),
            lam=_as_node_array(lam, n, (), "pre.intensity"),
        )


@dataclass(frozen=True)
class PostDefaultCoeffs:
    """Coefficients in force strictly after the default time.

    No jump channel remains: there are deliberately no E, F, or intensity
    fields here. Each entry may depend on the default time theta.
    """

    a: ThetaDep
    b: ThetaDep
    c: ThetaDep
    d: ThetaDep
    q: ThetaDep
    r: ThetaDep

    @staticmethod
    def constants(grid: TimeGrid, m: int, k: int, *, a, b, c, d, q, r):
        return PostDefaultCoeffs(
            a=ThetaDep.constant(grid, a, (), "post.A"),
            b=ThetaDep.constant(grid, b, (m,), "post.B"),
            c=ThetaDep.constant(grid, c, (k,), "post.C"),
            d=ThetaDep.constant(grid, d, (k, m), "post.D"),
            q=ThetaDep.constant(grid, q, (), "post.Q"),
            r=ThetaDep.constant(grid, r, (m, m), "post.R"),
        )

    @property
    def is_separable(self) -> bool:
        return all(
            dep.is_separable for dep in (self.a, self.b, self.c, self.d, self.q, self.r)
        )


@dataclass(frozen=True)
class TerminalWeights:
    """Terminal quadratic weights: scalar G0 (survival), G1 per theta node."""

    g0: float
    g1: np.ndarray  # (n+1,) over theta nodes

    @staticmethod
    def build(grid: TimeGrid, g0: float, g1) -> "TerminalWeights":
        g0 = float(g0)
        if not np.isfinite(g0):
            raise NonFinite("terminal.G0: non-finite")
        return TerminalWeights(g0=g0, g1=_as_node_array(g1, grid.n, (), "terminal.G1"))

    def g1_at(self, grid: TimeGrid, theta: float) -> float:
        return float(np.interp(theta, grid.nodes, self.g1))


class CaseClass(enum.Enum):
    STANDARD = "standard"
    SINGULAR = "singular"


@dataclass(frozen=True)
class CoefficientSlice:
    """All coefficients at one (t[, theta]) point. Post-phase slices have
    e = f = lam = None."""

    a: float
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    q: float
    r: np.ndarray
    e: Optional[float] = None
    f: Optional[np.ndarray] = None
    lam: Optional[float] = None


@dataclass(frozen=True)
class LQProblem:
    grid: TimeGrid
    cone: ConeSpec
    brownian_dim: int
    pre: PreDefaultCoeffs
    post: PostDefaultCoeffs
    terminal: TerminalWeights

    @property
    def m(self) -> int:
        return self.cone.dim

    @property
    def k(self) -> int:
        return self.brownian_dim

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def case_class(self) -> CaseClass:
        return validate_problem(self).case


@dataclass(frozen=True)
class Validation:
    """Outcome of validate_problem: case classification plus the observed
    certificate margins that justified it."""

    case: CaseClass
    r_min_observed: float
    g_min_observed: float
    dd_min_observed: float
    details: dict = field(default_factory=dict)


def _check_shapes(problem: LQProblem) -> None:
    n, m, k = problem.n, problem.m, problem.k
    pre = problem.pre
    expect = {
        "pre.A": (pre.a, (n + 1,)),
        "pre.B": (pre.b, (n + 1, m)),
        "pre.C": (pre.c, (n + 1, k)),
        "pre.D": (pre.d, (n + 1, k, m)),
        "pre.E": (pre.e, (n + 1,)),
        "pre.F": (pre.f, (n + 1, m)),
        "pre.Q": (pre.q, (n + 1,)),
        "pre.R": (pre.r, (n + 1, m, m)),
        "pre.intensity": (pre.lam, (n + 1,)),
        "terminal.G1": (problem.terminal.g1, (n + 1,)),
    }
    for name, (arr, shape) in expect.items():
        if arr.shape != shape:
            raise SchemaError(f"{name}: expected shape {shape}, got {arr.shape}")
    post_shapes = {"A": (), "B": (m,), "C": (k,), "D": (k, m), "Q": (), "R": (m, m)}
    for name, shape in post_shapes.items():
        dep: ThetaDep = getattr(problem.post, name.lower())
        if dep.value_shape != shape:
            raise SchemaError(
                f"post.{name}: expected value shape {shape}, got {dep.value_shape}"
            )
        lead = (n + 1, n + 1) if dep.mode is ThetaMode.TABLE else (n + 1,)
        if dep.base.shape[: len(lead)] != lead:
            raise SchemaError(f"post.{name}: grid axis mismatch {dep.base.shape}")


def _post_triangle_values(problem: LQProblem, dep: ThetaDep) -> np.ndarray:
    """Values of a post-default coefficient on the node triangle theta <= t,
    flattened to (n_pairs, *shape). Used only by validation."""
    n = problem.n
    nodes = problem.grid.nodes
    ti, tj = np.tril_indices(n + 1)
    if dep.mode is ThetaMode.CONSTANT:
        return dep.base[ti]
    if dep.mode is ThetaMode.AFFINE:
        sh = dep.value_shape
        th = nodes[tj].reshape((-1,) + (1,) * len(sh))
        return dep.base[ti] + dep.slope[ti] * th
    return dep.base[ti, tj]


def _min_eig_batch(mats: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a batch of symmetric matrices (m x m trailing)."""
    m = mats.shape[-1]
    if m == 1:
        return mats[..., 0, 0]
    return np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2)))[..., 0]


def validate_problem(
    problem: LQProblem,
    r_min: float = 1e-10,
    g_min: float = 1e-10,
    dd_min: float = 1e-10,
) -> Validation:
    """Check standing assumptions and classify the problem.

    standard: R uniformly positive definite (min eig >= r_min at every node,
              both phases), Q >= 0, G >= 0.
    singular: R >= 0, Q >= 0, G uniformly positive (>= g_min), D'D uniformly
              positive definite (min eig >= dd_min, both phases).

    A problem satisfying both is classified standard. Raises
    ViolatedAssumption / NotPSD / NeitherCase naming the offending node.
    """
    _check_shapes(problem)
    pre, term = problem.pre, problem.terminal
    nodes = problem.grid.nodes

    for name, arr in (
        ("pre", np.concatenate([pre.a, pre.b.ravel(), pre.c.ravel(), pre.d.ravel(),
                                pre.e, pre.f.ravel(), pre.q, pre.r.ravel(), pre.lam])),
        ("terminal", np.append(term.g1, term.g0)),
    ):
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"{name}: non-finite coefficient")

    bad = np.flatnonzero(pre.e < -1.0)
    if bad.size:
        i = int(bad[0])
        raise ViolatedAssumption(
            f"pre.E at node {i} (t={nodes[i]:g}) is {pre.e[i]:g} < -1"
        )
    bad = np.flatnonzero(pre.lam < 0.0)
    if bad.size:
        i = int(bad[0])
        raise ViolatedAssumption(
            f"pre.intensity at node {i} (t={nodes[i]:g}) is {pre.lam[i]:g} < 0"
        )

    bad = np.flatnonzero(pre.q < 0.0)
    if bad.size:
        i = int(bad[0])
        raise NotPSD(f"pre.Q at node {i} (t={nodes[i]:g}) is {pre.q[i]:g} < 0")

    if not np.allclose(pre.r, np.swapaxes(pre.r, -1, -2), atol=0.0, rtol=0.0):
        raise NotPSD("pre.R: not symmetric")
    r_eigs_pre = _min_eig_batch(pre.r)
    bad = np.flatnonzero(r_eigs_pre < 0.0)
    if bad.size:
        i = int(bad[0])
        raise NotPSD(
            f"pre.R at node {i} (t={nodes[i]:g}): min eigenvalue {r_eigs_pre[i]:g} < 0"
        )

    q_post = _post_triangle_values(problem, problem.post.q)
    if np.any(q_post < 0.0):
        idx = int(np.argmax(q_post < 0.0))
        ti, tj = np.tril_indices(problem.n + 1)
        raise NotPSD(
            f"post.Q at node pair (t={nodes[ti[idx]]:g}, theta={nodes[tj[idx]]:g}) "
            f"is {q_post[idx]:g} < 0"
        )
    r_post = _post_triangle_values(problem, problem.post.r)
    if not np.allclose(r_post, np.swapaxes(r_post, -1, -2), atol=0.0, rtol=0.0):
        raise NotPSD("post.R: not symmetric")
    r_eigs_post = _min_eig_batch(r_post)
    if np.any(r_eigs_post < 0.0):
        idx = int(np.argmax(r_eigs_post < 0.0))
        ti, tj = np.tril_indices(problem.n + 1)
        raise NotPSD(
            f"post.R at node pair (t={nodes[ti[idx]]:g}, theta={nodes[tj[idx]]:g}): "
            f"min eigenvalue {r_eigs_post[idx]:g} < 0"
        )

    r_floor = min(float(r_eigs_pre.min()), float(r_eigs_post.min()))
    g_floor = min(float(term.g0), float(term.g1.min()))

    dd_pre = _min_eig_batch(np.einsum("nka,nkb->nab", pre.d, pre.d))
    d_post = _post_triangle_values(problem, problem.post.d)
    dd_post = _min_eig_batch(np.einsum("pka,pkb->pab", d_post, d_post))
    dd_floor = min(float(dd_pre.min()), float(dd_post.min()))

    details = {
        "r_floor": r_floor,
        "g_floor": g_floor,
        "dd_floor": dd_floor,
    }
    if r_floor >= r_min and g_floor >= 0.0:
        return Validation(CaseClass.STANDARD, r_floor, g_floor, dd_floor, details)
    if g_floor >= g_min and dd_floor >= dd_min:
        return Validation(CaseClass.SINGULAR, r_floor, g_floor, dd_floor, details)
    raise NeitherCase(
        "neither standard nor singular certificate holds: "
        f"min eig R = {r_floor:g} (standard needs >= {r_min:g}), "
        f"min G = {g_floor:g} (singular needs >= {g_min:g}), "
        f"min eig D'D = {dd_floor:g} (singular needs >= {dd_min:g})"
    )


def _interp_rows(arr: np.ndarray, x: float, n: int) -> np.ndarray:
    i0 = min(int(x), n - 1)
    w = x - i0
    return (1 - w) * arr[i0] + w * arr[i0 + 1]


def coefficient_at(
    problem: LQProblem, t: float, phase: str, theta: Optional[float] = None
) -> CoefficientSlice:
    """Coefficient values at time t (linear interpolation between nodes).

    phase is "pre" or "post"; post requires theta <= t within the horizon.
    """
    from .errors import OutOfRange

    grid = problem.grid
    if not (0.0 <= t <= grid.horizon * (1 + 1e-12)):
        raise OutOfRange(f"t={t:g} outside [0, {grid.horizon:g}]")
    x = grid.index_of(t)
    n = grid.n
    if phase == "pre":
        pre = problem.pre
        return CoefficientSlice(
            a=float(_interp_rows(pre.a, x, n)),
            b=_interp_rows(pre.b, x, n),
            c=_interp_rows(pre.c, x, n),
            d=_interp_rows(pre.d, x, n),
            q=float(_interp_rows(pre.q, x, n)),
            r=_interp_rows(pre.r, x, n),
            e=float(_interp_rows(pre.e, x, n)),
            f=_interp_rows(pre.f, x, n),
            lam=float(_interp_rows(pre.lam, x, n)),
        )
    if phase == "post":
        if theta is None:
            raise SchemaError("post-phase slice requires theta")
        if theta < -1e-12 or theta > t * (1 + 1e-12) + 1e-12:
            raise OutOfRange(f"theta={theta:g} outside [0, t={t:g}]")
        post = problem.post
        return CoefficientSlice(
            a=float(post.a.at(grid, t, theta)),
            b=post.b.at(grid, t, theta),
            c=post.c.at(grid, t, theta),
            d=post.d.at(grid, t, theta),
            q=float(post.q.at(grid, t, theta)),
            r=post.r.at(grid, t, theta),
        )
    raise SchemaError(f"phase must be 'pre' or 'post', got {phase!r}")
