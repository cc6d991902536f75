"""Batch entry point: parse a config file, dispatch a mode, write CSVs.

Four modes share one config container (YAML; the schema is the contract,
the container syntax is not):

  solve     riccati.csv + policy.csv for a problem config
  simulate  mc.csv (and optionally paths.csv) for a problem config
  frontier  frontier.csv for a market config
  verify    report.csv from the self-contained verification battery

Every numeric cell is written with 17 significant digits and a dot decimal
separator, rows are newline-terminated, and all randomness flows from the
single `seed` key, so rerunning a mode with the same config produces
byte-identical files.  Errors map to distinct exit codes (each error class
carries its own); a failed verification report exits 1.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConelqError, ParseError, SchemaError
from .meanvariance import MarketSpec, frontier
from .model import (
    ConeKind,
    ConeSpec,
    LQProblem,
    PostDefaultCoeffs,
    PreDefaultCoeffs,
    TerminalWeights,
    TimeGrid,
    validate_problem,
)
from .riccati import assemble, extract_policy, value_at
from .simulate import _path_rng, mc_cost, simulate_path
from .verify import run_suite

_MODES = ("solve", "simulate", "frontier", "verify")

# schema: top-level sections and the keys each admits
_SECTIONS = {
    "grid": {"horizon", "steps"},
    "cone": None,  # scalar, not a mapping
    "pre": {"A", "B", "C", "D", "E", "F", "Q", "R", "intensity"},
    "post": {"A", "B", "C", "D", "Q", "R"},
    "terminal": {"G0", "G1"},
    "mc": {"paths", "seed", "x0", "record"},
    "market": {"r", "b0", "sigma0", "gamma", "intensity", "b1", "sigma1", "x0", "shorting"},
    "frontier": {"targets"},
    "output": {"dir"},
}
_PROBLEM_SECTIONS = ("cone", "pre", "post", "terminal")

_DEFAULT_STEPS = 1000
_DEFAULT_PATHS = 100_000
_DEFAULT_SEED = 42


@dataclass(frozen=True)
class RunConfig:
    """Validated run request: one mode, one model object, one output dir."""

    mode: str
    out_dir: str
    grid: TimeGrid
    paths: int
    seed: int
    x0: float
    record: int
    problem: Optional[LQProblem]
    market: Optional[MarketSpec]
    targets: tuple[float, ...]


# ----------------------------------------------------------------- parsing


def _load_yaml(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"{path}: {err.strerror or err}") from err
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f", line {mark.line + 1}" if mark is not None else ""
        problem = getattr(err, "problem", None) or str(err).splitlines()[0]
        raise ParseError(f"{path}{where}: {problem}") from err
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a key/value mapping")
    return raw


def _section(raw: dict, path: str, name: str) -> Optional[dict]:
    if name not in raw:
        return None
    sec = raw[name]
    if not isinstance(sec, dict):
        raise SchemaError(f"{path}: section '{name}' must be a key/value mapping")
    allowed = _SECTIONS[name]
    for key in sorted(sec, key=str):
        if key not in allowed:
            raise SchemaError(f"{path}: unknown key {name}.{key}")
    return sec


_REQUIRED = object()


def _num(sec: dict, path: str, section: str, key: str, default=_REQUIRED) -> float:
    if key not in sec:
        if default is _REQUIRED:
            raise SchemaError(f"{path}: missing {section}.{key}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(
            f"{path}: {section}.{key} must be a number, got {type(v).__name__}"
        )
    return float(v)


def _intval(sec: dict, path: str, section: str, key: str, default=_REQUIRED) -> int:
    if key not in sec:
        if default is _REQUIRED:
            raise SchemaError(f"{path}: missing {section}.{key}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(
            f"{path}: {section}.{key} must be an integer, got {type(v).__name__}"
        )
    return v


def _boolval(sec: dict, path: str, section: str, key: str, default: bool) -> bool:
    if key not in sec:
        return default
    v = sec[key]
    if not isinstance(v, bool):
        raise SchemaError(
            f"{path}: {section}.{key} must be true or false, got {type(v).__name__}"
        )
    return v


def _curve(sec: dict, path: str, section: str, key: str, n: int, default=_REQUIRED):
    """Scalar or per-node list of n+1 numbers."""
    if key not in sec:
        if default is _REQUIRED:
            raise SchemaError(f"{path}: missing {section}.{key}")
        return default
    v = sec[key]
    if isinstance(v, list):
        if len(v) != n + 1 or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in v
        ):
            raise SchemaError(
                f"{path}: {section}.{key} must be a number or a list of"
                f" {n + 1} numbers (one per grid node)"
            )
        return np.asarray(v, dtype=float)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(
            f"{path}: {section}.{key} must be a number, got {type(v).__name__}"
        )
    return float(v)


def _vec(v):
    # scalar slot value -> length-1 control/noise vector; curves get a trailing axis
    return v[:, None] if isinstance(v, np.ndarray) else [v]


def _mat(v):
    return v[:, None, None] if isinstance(v, np.ndarray) else [[v]]


def _build_problem(raw: dict, path: str, grid: TimeGrid) -> LQProblem:
    missing = [s for s in _PROBLEM_SECTIONS if s not in raw]
    if missing:
        raise SchemaError(
            f"{path}: problem config needs sections {', '.join(_PROBLEM_SECTIONS)};"
            f" missing {', '.join(missing)}"
        )
    kind_raw = raw["cone"]
    if kind_raw == "orthant":
        kind = ConeKind.NONNEG_ORTHANT
    elif kind_raw == "full":
        kind = ConeKind.FULL_SPACE
    else:
        raise SchemaError(f"{path}: cone must be 'orthant' or 'full', got {kind_raw!r}")

    n = grid.n
    pre = _section(raw, path, "pre")
    post = _section(raw, path, "post")
    term = _section(raw, path, "terminal")

    def pre_val(key, default=_REQUIRED):
        return _curve(pre, path, "pre", key, n, default)

    def post_val(key):
        # post coefficients are theta-constant in file form; richer theta
        # dependence stays a library-level feature
        return _num(post, path, "post", key)

    try:
        pre_c = PreDefaultCoeffs.build(
            grid,
            1,
            1,
            a=pre_val("A"),
            b=_vec(pre_val("B")),
            c=_vec(pre_val("C")),
            d=_mat(pre_val("D")),
            e=pre_val("E", 0.0),
            f=_vec(pre_val("F", 0.0)),
            q=pre_val("Q"),
            r=_mat(pre_val("R")),
            lam=pre_val("intensity", 0.0),
        )
        post_c = PostDefaultCoeffs.constants(
            grid,
            1,
            1,
            a=post_val("A"),
            b=[post_val("B")],
            c=[post_val("C")],
            d=[[post_val("D")]],
            q=post_val("Q"),
            r=[[post_val("R")]],
        )
        g0 = _num(term, path, "terminal", "G0")
        g1 = _curve(term, path, "terminal", "G1", n, default=None)
        terminal = TerminalWeights.build(grid, g0, g0 if g1 is None else g1)
    except SchemaError:
        raise
    except ConelqError as err:
        raise type(err)(f"{path}: {err}") from err
    return LQProblem(
        grid=grid,
        cone=ConeSpec(kind, 1),
        brownian_dim=1,
        pre=pre_c,
        post=post_c,
        terminal=terminal,
    )


def _build_market(raw: dict, path: str, grid: TimeGrid) -> MarketSpec:
    sec = _section(raw, path, "market")
    n = grid.n

    def val(key, default=_REQUIRED):
        return _curve(sec, path, "market", key, n, default)

    try:
        return MarketSpec.build(
            grid,
            r=val("r"),
            b0=val("b0"),
            sigma0=val("sigma0"),
            gamma=val("gamma"),
            lam=val("intensity"),
            b1=val("b1"),
            sigma1=val("sigma1"),
            x0=_num(sec, path, "market", "x0", 1.0),
            shorting=_boolval(sec, path, "market", "shorting", False),
        )
    except ConelqError as err:
        raise type(err)(f"{path}: {err}") from err


def parse_config(
    path: str, mode: str = "solve", overrides: Optional[dict] = None
) -> RunConfig:
    """Read and validate one config file for the given mode.

    `overrides` carries command-line values (out/paths/seed/grid) that win
    over the corresponding file keys.
    """
    if mode not in _MODES:
        raise SchemaError(f"mode must be one of {'/'.join(_MODES)}, got {mode!r}")
    overrides = overrides or {}
    raw = _load_yaml(path)
    for key in sorted(raw, key=str):
        if key not in _SECTIONS:
            raise SchemaError(f"{path}: unknown section '{key}'")

    grid_sec = _section(raw, path, "grid") or {}
    steps = overrides.get("grid", _intval(grid_sec, path, "grid", "steps", _DEFAULT_STEPS))
    horizon = _num(grid_sec, path, "grid", "horizon", 1.0)
    try:
        grid = TimeGrid(horizon, steps)
    except ConelqError as err:
        raise type(err)(f"{path}: {err}") from err

    mc_sec = _section(raw, path, "mc") or {}
    paths = overrides.get("paths", _intval(mc_sec, path, "mc", "paths", _DEFAULT_PATHS))
    seed = overrides.get("seed", _intval(mc_sec, path, "mc", "seed", _DEFAULT_SEED))
    x0 = _num(mc_sec, path, "mc", "x0", 1.0)
    record = _intval(mc_sec, path, "mc", "record", 0)
    if mode in ("simulate", "frontier") and paths < 2:
        raise SchemaError(f"{path}: mc.paths must be >= 2 in {mode} mode, got {paths}")
    if record < 0:
        raise SchemaError(f"{path}: mc.record must be >= 0, got {record}")

    out_sec = _section(raw, path, "output") or {}
    out_dir = overrides.get("out")
    if out_dir is None:
        out_dir = out_sec.get("dir", ".")
        if not isinstance(out_dir, str):
            raise SchemaError(f"{path}: output.dir must be a string")

    has_problem = any(s in raw for s in _PROBLEM_SECTIONS)
    has_market = "market" in raw
    problem = market = None
    targets: tuple[float, ...] = ()

    if mode in ("solve", "simulate"):
        if has_market:
            raise SchemaError(f"{path}: {mode} mode takes a problem, not a market section")
        problem = _build_problem(raw, path, grid)
        try:
            validate_problem(problem)
        except ConelqError as err:
            raise type(err)(f"{path}: {err}") from err
    elif mode == "frontier":
        if has_problem:
            raise SchemaError(
                f"{path}: frontier mode takes a market section, not a problem"
            )
        if not has_market:
            raise SchemaError(f"{path}: missing market section")
        market = _build_market(raw, path, grid)
        fr_sec = _section(raw, path, "frontier")
        if fr_sec is None or "targets" not in fr_sec:
            raise SchemaError(f"{path}: missing frontier.targets")
        tg = fr_sec["targets"]
        if (
            not isinstance(tg, list)
            or not tg
            or any(isinstance(z, bool) or not isinstance(z, (int, float)) for z in tg)
        ):
            raise SchemaError(f"{path}: frontier.targets must be a nonempty list of numbers")
        targets = tuple(float(z) for z in tg)
    else:  # verify: problem optional, validated inside the suite as a check
        if has_market:
            raise SchemaError(f"{path}: verify mode does not take a market section")
        if has_problem:
            problem = _build_problem(raw, path, grid)
    if "frontier" in raw and mode != "frontier":
        raise SchemaError(f"{path}: frontier section only applies to frontier mode")

    return RunConfig(
        mode=mode,
        out_dir=out_dir,
        grid=grid,
        paths=paths,
        seed=seed,
        x0=x0,
        record=record,
        problem=problem,
        market=market,
        targets=targets,
    )


# ----------------------------------------------------------------- writing


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    # manual writer: fixed \n terminators and .17g cells keep the bytes
    # identical across platforms and reruns
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _fmt(c) for c in row) + "\n")


def _run_solve(config: RunConfig, out: Path) -> list[Path]:
    problem = config.problem
    solution = assemble(problem)
    policy = extract_policy(problem, solution)
    t = solution.grid.nodes

    rpath = out / "riccati.csv"
    _write_csv(
        rpath,
        ("t", "P0", "N0", "diagP", "diagN", "Zbar", "Lambdabar"),
        (
            (
                t[i],
                solution.P0[i],
                solution.N0[i],
                solution.diagP[i],
                solution.diagN[i],
                solution.Zbar[i],
                solution.Lambdabar[i],
            )
            for i in range(t.size)
        ),
    )

    m = problem.m
    if m == 1:
        header = ("t", "xi0_plus", "xi0_minus")
    else:
        header = (
            "t",
            *(f"xi0_plus_{j + 1}" for j in range(m)),
            *(f"xi0_minus_{j + 1}" for j in range(m)),
        )
    ppath = out / "policy.csv"
    _write_csv(
        ppath,
        header,
        (
            (t[i], *policy.xi0_plus[i], *policy.xi0_minus[i])
            for i in range(t.size)
        ),
    )
    return [rpath, ppath]


def _run_simulate(config: RunConfig, out: Path) -> list[Path]:
    problem = config.problem
    solution = assemble(problem)
    policy = extract_policy(problem, solution)
    est = mc_cost(problem, policy, config.x0, config.paths, config.seed)
    value = value_at(solution, 0.0, config.x0)
    if est.se > 0.0:
        z = (est.mean - value) / est.se
    else:
        z = 0.0 if est.mean == value else math.inf
    mpath = out / "mc.csv"
    _write_csv(
        mpath,
        ("estimate", "SE", "paths", "seed", "value_at", "z-score"),
        [(est.mean, est.se, str(est.paths), str(est.seed), value, z)],
    )
    written = [mpath]

    if config.record > 0:
        # replay the first `record` paths on their own streams; the batch
        # estimator above consumed the very same per-path variates
        count = min(config.record, config.paths)
        rows = []
        for idx in range(count):
            rec = simulate_path(problem, policy, config.x0, _path_rng(config.seed, idx))
            last = rec.times.size - 1
            for i in range(rec.times.size):
                # no control applies on the terminal node
                u_i = rec.u[i, 0] if i < last else math.nan
                rows.append((str(idx), rec.times[i], rec.X[i], u_i))
        ppath = out / "paths.csv"
        _write_csv(ppath, ("path", "t", "X", "u"), rows)
        written.append(ppath)
    return written


def _run_frontier(config: RunConfig, out: Path) -> list[Path]:
    points = frontier(config.market, config.targets)
    fpath = out / "frontier.csv"
    _write_csv(
        fpath,
        ("z", "eta_star", "J_star", "N0", "P0"),
        ((p.z, p.eta_star, p.J_star, p.N0, p.P0) for p in points),
    )
    return [fpath]


def _run_verify(config: RunConfig, out: Path) -> tuple[list[Path], int]:
    suite_cfg = {"grid": config.grid.n, "paths": config.paths, "seed": config.seed}
    if config.problem is not None:
        suite_cfg["problem"] = config.problem
    report = run_suite(suite_cfg)
    rpath = out / "report.csv"
    _write_csv(
        rpath,
        ("check", "status", "measured", "tolerance"),
        (
            (c.name, "PASS" if c.passed else "FAIL", c.measured, c.tolerance)
            for c in report.checks
        ),
    )
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        line = f"{c.name:<24s} {status}  measured={c.measured:.3e}  tol={c.tolerance:.0e}"
        if c.detail and not c.passed:
            line += f"  ({c.detail})"
        print(line)
    return [rpath], 0 if report.passed else 1


def run(config: RunConfig) -> int:
    """Execute one parsed run; returns the process exit code."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.mode == "solve":
        written = _run_solve(config, out)
        code = 0
    elif config.mode == "simulate":
        written = _run_simulate(config, out)
        code = 0
    elif config.mode == "frontier":
        written = _run_frontier(config, out)
        code = 0
    else:
        written, code = _run_verify(config, out)
    for p in written:
        print(f"wrote {p}")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="conelq",
        description="Cone-constrained LQ control with a default jump: "
        "solve, simulate, frontier, verify.",
    )
    parser.add_argument("mode", choices=_MODES)
    parser.add_argument("config", help="path to a YAML config file")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    parser.add_argument("--paths", type=int, metavar="N", help="Monte Carlo paths (overrides mc.paths)")
    parser.add_argument("--seed", type=int, metavar="S", help="root seed (overrides mc.seed)")
    parser.add_argument("--grid", type=int, metavar="N", help="grid steps (overrides grid.steps)")
    args = parser.parse_args(argv)
    overrides = {
        k: v
        for k, v in (
            ("out", args.out),
            ("paths", args.paths),
            ("seed", args.seed),
            ("grid", args.grid),
        )
        if v is not None
    }
    try:
        config = parse_config(args.config, mode=args.mode, overrides=overrides)
        return run(config)
    except ConelqError as err:
        print(f"conelq: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
