"""Shared instance builders.

Deliberately independent of the builders inside conelq.verify: tests
construct their fixtures from the public model API so a regression in one
layer cannot hide behind a shared helper.
"""

from __future__ import annotations

import numpy as np

from conelq.model import (
    ConeKind,
    ConeSpec,
    LQProblem,
    PostDefaultCoeffs,
    PreDefaultCoeffs,
    TerminalWeights,
    TimeGrid,
)

_DEFAULTS = dict(
    a=0.05, b=0.0, c=0.15, d=0.4, e=-0.4, f=1.2, q=0.6, r=0.4, lam=0.3,
    pa=-0.1, pb=-0.45, pc=0.1, pd=0.5, pq=0.5, pr=0.4,
    g0=1.0, g1=2.0,
)


def make_problem(
    n: int = 80,
    horizon: float = 1.0,
    cone: ConeKind = ConeKind.NONNEG_ORTHANT,
    **over,
) -> LQProblem:
    """Scalar-control jump instance; keyword overrides replace any of the
    constants in _DEFAULTS (post-default keys carry a `p` prefix)."""
    unknown = set(over) - set(_DEFAULTS)
    if unknown:
        raise TypeError(f"unknown overrides: {sorted(unknown)}")
    v = {**_DEFAULTS, **over}
    grid = TimeGrid(horizon, n)
    pre = PreDefaultCoeffs.build(
        grid, 1, 1,
        a=v["a"], b=[v["b"]], c=[v["c"]], d=[[v["d"]]],
        e=v["e"], f=[v["f"]], q=v["q"], r=[[v["r"]]], lam=v["lam"],
    )
    post = PostDefaultCoeffs.constants(
        grid, 1, 1,
        a=v["pa"], b=[v["pb"]], c=[v["pc"]], d=[[v["pd"]]],
        q=v["pq"], r=[[v["pr"]]],
    )
    terminal = TerminalWeights.build(grid, v["g0"], v["g1"])
    return LQProblem(
        grid=grid,
        cone=ConeSpec(cone, 1),
        brownian_dim=1,
        pre=pre,
        post=post,
        terminal=terminal,
    )


def make_nojump(n: int = 80, cone: ConeKind = ConeKind.FULL_SPACE, **over) -> LQProblem:
    over.setdefault("lam", 0.0)
    over.setdefault("e", 0.0)
    over.setdefault("f", 0.0)
    return make_problem(n=n, cone=cone, **over)


def random_constants(rng: np.random.Generator) -> dict:
    """Admissible standard-case constants, jump channel included."""
    return dict(
        a=rng.uniform(-1.0, 1.0),
        b=rng.uniform(-1.0, 1.0),
        c=rng.uniform(-0.5, 0.5),
        d=rng.uniform(0.4, 1.2),
        e=rng.uniform(-0.8, 0.5),
        f=rng.uniform(-1.0, 1.0),
        q=rng.uniform(0.0, 1.0),
        r=rng.uniform(0.3, 1.5),
        lam=rng.uniform(0.2, 1.0),
        pa=rng.uniform(-1.0, 1.0),
        pb=rng.uniform(-1.0, 1.0),
        pc=rng.uniform(-0.5, 0.5),
        pd=rng.uniform(0.4, 1.2),
        pq=rng.uniform(0.0, 1.0),
        pr=rng.uniform(0.3, 1.5),
        g0=rng.uniform(0.5, 2.0),
        g1=rng.uniform(0.5, 2.5),
    )
