"""Mean-variance portfolio selection over a defaultable market.

The wealth problem is embedded into the cone-constrained LQ machinery by
shifting wealth around the target discount curve: y_t = X_t - eta e^{-int_t^T r}.
The embedded problem has Q = R = 0 and unit terminal weight, so it lands in
the singular case, and its Riccati flow is positively homogeneous of degree
one; the module therefore reports values in the unhalved normalization
V(eta) = P0 y0^{+,2} + N0 y0^{-,2}, with P_T = N_T = 1.

The dual over the multiplier eta is a concave quadratic on eta >= x0 e^{int r}
whenever kappa = N0 e^{-2 int r} < 1.  Both the maximizer and the frontier are
evaluated through the gap z - x0 e^{int r}, so the zero-risk target reproduces
eta* = x0 e^{int r}, J* = 0 and the all-cash portfolio exactly, with no
floating-point residue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDual, InfeasibleTarget, ViolatedAssumption
from .model import (
    ConeKind,
    ConeSpec,
    LQProblem,
    PostDefaultCoeffs,
    PreDefaultCoeffs,
    TerminalWeights,
    ThetaDep,
    TimeGrid,
)
from .riccati import RiccatiSolution, assemble

_DD_MIN = 1e-10
_KAPPA_TOL = 1e-12


@dataclass(frozen=True)
class MarketSpec:
    """Single-stock defaultable market with deterministic coefficients.

    All curves are node arrays on the grid; sigma0/sigma1 carry the noise
    dimension in their second axis.  The cone has m = 1: NonNegOrthant
    forbids short selling."""

    grid: TimeGrid
    r: np.ndarray
    b0: np.ndarray
    sigma0: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    b1: np.ndarray
    sigma1: np.ndarray
    x0: float
    cone: ConeSpec

    @staticmethod
    def build(
        grid: TimeGrid,
        *,
        r,
        b0,
        sigma0,
        gamma,
        lam,
        b1,
        sigma1,
        x0: float,
        shorting: bool = False,
    ) -> "MarketSpec":
        n = grid.n

        def curve(v, name):
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                arr = np.full(n + 1, float(arr))
            if arr.shape != (n + 1,):
                raise ViolatedAssumption(
                    f"market.{name}: expected scalar or ({n + 1},) curve, got {arr.shape}"
                )
            return arr

        def vol(v, name):
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                arr = np.full((n + 1, 1), float(arr))
            elif arr.ndim == 1:
                arr = np.broadcast_to(arr, (n + 1, arr.shape[0])).copy()
            if arr.ndim != 2 or arr.shape[0] != n + 1:
                raise ViolatedAssumption(
                    f"market.{name}: expected scalar, k-vector, or ({n + 1}, k), got {arr.shape}"
                )
            return arr

        kind = ConeKind.FULL_SPACE if shorting else ConeKind.NONNEG_ORTHANT
        mkt = MarketSpec(
            grid=grid,
            r=curve(r, "r"),
            b0=curve(b0, "b0"),
            sigma0=vol(sigma0, "sigma0"),
            gamma=curve(gamma, "gamma"),
            lam=curve(lam, "lambda"),
            b1=curve(b1, "b1"),
            sigma1=vol(sigma1, "sigma1"),
            x0=float(x0),
            cone=ConeSpec(kind, 1),
        )
        validate_market(mkt)
        return mkt

    @property
    def k(self) -> int:
        return self.sigma0.shape[1]


def validate_market(market: MarketSpec) -> None:
    if market.sigma0.shape != market.sigma1.shape:
        raise ViolatedAssumption(
            "market: sigma0 and sigma1 must share the noise dimension, got "
            f"{market.sigma0.shape} vs {market.sigma1.shape}"
        )
    for name, sig in (("sigma0", market.sigma0), ("sigma1", market.sigma1)):
        dd = np.min(np.sum(sig * sig, axis=1))
        if dd <= _DD_MIN:
            raise ViolatedAssumption(
                f"market.{name}: sigma'sigma must be uniformly positive, min = {dd:g}"
            )
    if np.min(market.lam) < 0.0:
        raise ViolatedAssumption(
            f"market.lambda must be nonnegative, min = {np.min(market.lam):g}"
        )
    if not np.all(np.isfinite(market.r)) or not np.all(np.isfinite(market.b0)):
        raise ViolatedAssumption("market: non-finite rate or drift curve")


# --------------------------------------------------------------- integrals


def rate_integral(market: MarketSpec) -> float:
    """Trapezoid integral of the rate over the horizon; every discount or
    growth factor in this module derives from this single value."""
    return float(np.trapezoid(market.r, dx=market.grid.step))


def _survival_weight(market: MarketSpec) -> np.ndarray:
    # e^{-int_0^t lambda} at the nodes
    n, h = market.grid.n, market.grid.step
    clam = np.empty(n + 1)
    clam[0] = 0.0
    np.cumsum(0.5 * (market.lam[1:] + market.lam[:-1]) * h, out=clam[1:])
    return np.exp(-clam)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    mass: float


def feasibility_check(market: MarketSpec, tol: float = 1e-12) -> Feasibility:
    """Deterministic-coefficient version of the positive-excess-return mass:
    the pre-default integrand (b0 - r - lambda gamma)^+ is weighted by
    survival, the post-default one (b1 - r)^+ by the default-time density
    lambda(theta) e^{-int lambda}."""
    h = market.grid.step
    surv = _survival_weight(market)
    pre = surv * np.maximum(market.b0 - market.r - market.lam * market.gamma, 0.0)
    mass = float(np.trapezoid(pre, dx=h))

    dens = market.lam * surv
    cdens = np.empty(market.grid.n + 1)
    cdens[0] = 0.0
    np.cumsum(0.5 * (dens[1:] + dens[:-1]) * h, out=cdens[1:])
    post = np.maximum(market.b1 - market.r, 0.0) * cdens
    mass += float(np.trapezoid(post, dx=h))
    return Feasibility(feasible=mass > tol, mass=mass)


# --------------------------------------------------------------- embedding


def embed(market: MarketSpec, eta: float) -> tuple[LQProblem, float]:
    """Shift wealth around the multiplier's discount curve.  The shifted
    state follows the jump-LQ dynamics with A = r, B0 = b0 - lambda gamma - r,
    D = sigma, F0 = -gamma (jump loading on the position only), zero running
    cost and unit terminal weight: the singular case."""
    grid = market.grid
    n, k = grid.n, market.k
    zeros = np.zeros(n + 1)
    pre = PreDefaultCoeffs(
        a=market.r.copy(),
        b=(market.b0 - market.lam * market.gamma - market.r)[:, None],
        c=np.zeros((n + 1, k)),
        d=market.sigma0[:, :, None],
        e=zeros.copy(),
        f=(-market.gamma)[:, None],
        q=zeros.copy(),
        r=np.zeros((n + 1, 1, 1)),
        lam=market.lam.copy(),
    )
    post = PostDefaultCoeffs(
        a=ThetaDep.constant(grid, market.r, (), "post.A"),
        b=ThetaDep.constant(grid, (market.b1 - market.r)[:, None], (1,), "post.B"),
        c=ThetaDep.constant(grid, np.zeros((n + 1, k)), (k,), "post.C"),
        d=ThetaDep.constant(grid, market.sigma1[:, :, None], (k, 1), "post.D"),
        q=ThetaDep.constant(grid, 0.0, (), "post.Q"),
        r=ThetaDep.constant(grid, [[0.0]], (1, 1), "post.R"),
    )
    terminal = TerminalWeights.build(grid, 1.0, 1.0)
    problem = LQProblem(grid, market.cone, k, pre, post, terminal)
    y0 = market.x0 - eta * np.exp(-rate_integral(market))
    return problem, y0


def embedded_solution(market: MarketSpec) -> tuple[LQProblem, RiccatiSolution]:
    """The eta-independent Riccati solve of the embedded problem."""
    problem, _ = embed(market, 0.0)
    return problem, assemble(problem)


def normalized_pair(market: MarketSpec) -> tuple[np.ndarray, np.ndarray]:
    """P and N curves of the embedded problem, terminal value 1."""
    _, sol = embedded_solution(market)
    return sol.P0, sol.N0


# -------------------------------------------------------------------- dual


def _kappa(market: MarketSpec, N0: float) -> float:
    return N0 * np.exp(-2.0 * rate_integral(market))


def optimal_eta(market: MarketSpec, z: float, pair=None) -> float:
    """Closed-form maximizer of the concave dual.  Written through the
    target gap so z = x0 e^{int r} returns exactly that value."""
    if pair is None:
        pair = normalized_pair(market)
    N0 = float(pair[1][0])
    kappa = _kappa(market, N0)
    if kappa >= 1.0 - _KAPPA_TOL:
        raise DegenerateDual(
            f"dual multiplier undefined: N0 e^(-2 int r) = {kappa:.17g} >= 1; "
            "the market carries no excess return"
        )
    xear = market.x0 * np.exp(rate_integral(market))
    if z < xear:
        raise InfeasibleTarget(
            f"target {z:g} below the risk-free terminal wealth {xear:.17g}"
        )
    return float(xear + (z - xear) / (1.0 - kappa))


def dual_value(market: MarketSpec, eta: float, z: float, pair=None) -> float:
    """Value of the inner unconstrained problem at multiplier eta,
    P0 y0^{+,2} + N0 y0^{-,2} - (eta - z)^2 (no 1/2: the section-5
    normalization)."""
    if pair is None:
        pair = normalized_pair(market)
    P0, N0 = float(pair[0][0]), float(pair[1][0])
    y0 = market.x0 - eta * np.exp(-rate_integral(market))
    yp = max(y0, 0.0)
    ym = max(-y0, 0.0)
    return P0 * yp * yp + N0 * ym * ym - (eta - z) * (eta - z)


@dataclass(frozen=True)
class FrontierPoint:
    """One efficient-frontier point; y0 is the embedded initial state at
    eta_star, exactly 0.0 at the zero-risk target."""

    z: float
    eta_star: float
    J_star: float
    N0: float
    P0: float
    y0: float


def frontier(market: MarketSpec, targets) -> list[FrontierPoint]:
    """Minimal terminal variance for each expected-wealth target:
    J*(z) = kappa/(1 - kappa) (z - x0 e^{int r})^2."""
    pair = normalized_pair(market)
    P0, N0 = float(pair[0][0]), float(pair[1][0])
    kappa = _kappa(market, N0)
    I = rate_integral(market)
    xear = market.x0 * np.exp(I)
    out = []
    for z in targets:
        z = float(z)
        eta = optimal_eta(market, z, pair=pair)
        gap = z - xear
        J = kappa / (1.0 - kappa) * gap * gap
        y0 = -np.exp(-I) * gap / (1.0 - kappa)
        out.append(
            FrontierPoint(z=z, eta_star=eta, J_star=float(J), N0=N0, P0=P0, y0=float(y0))
        )
    return out
