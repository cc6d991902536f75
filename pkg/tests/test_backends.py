"""Cross-backend equivalence.

The compiled kernels must be drop-in replacements for the numpy reference:
same file bytes out of the CLI, same arrays out of the solver. Each backend
is pinned via CONELQ_BACKEND in a fresh subprocess because selection happens
once at import.
"""

import os
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from conelq import backend_name

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_with_backend(backend, *args):
    env = {**os.environ, "CONELQ_BACKEND": backend}
    return subprocess.run(
        [sys.executable, "-m", "conelq.cli", *map(str, args)],
        capture_output=True, text=True, env=env,
    )


def test_backend_name_reports_selection():
    assert backend_name() in ("python", "compiled")


def test_compiled_extension_is_built():
    # the build ships the extension; "auto" must then pick it
    res = subprocess.run(
        [sys.executable, "-c", "import conelq; print(conelq.backend_name())"],
        capture_output=True, text=True,
        env={**os.environ, "CONELQ_BACKEND": "auto"},
    )
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip() == "compiled"


def test_bogus_backend_fails_at_import():
    res = subprocess.run(
        [sys.executable, "-c", "import conelq"],
        capture_output=True, text=True,
        env={**os.environ, "CONELQ_BACKEND": "bogus"},
    )
    assert res.returncode != 0
    assert "CONELQ_BACKEND" in res.stderr


@pytest.mark.parametrize("mode", ["solve", "simulate"])
def test_backends_produce_identical_bytes(tmp_path, mode):
    cfg = yaml.safe_load((CONFIGS / "standard.yaml").read_text())
    cfg["grid"]["steps"] = 80
    cfg["mc"].update(paths=500, record=3)
    del cfg["output"]
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg))

    outs = {}
    for backend in ("python", "compiled"):
        out = tmp_path / backend
        res = run_with_backend(backend, mode, p, "--out", out)
        assert res.returncode == 0, res.stderr
        outs[backend] = out

    names = {"solve": ["riccati.csv", "policy.csv"],
             "simulate": ["mc.csv", "paths.csv"]}[mode]
    for name in names:
        a = (outs["python"] / name).read_bytes()
        b = (outs["compiled"] / name).read_bytes()
        assert a == b, f"{name} differs between backends"
