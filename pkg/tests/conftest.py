import functools
import os
import warnings
from pathlib import Path

import pytest

from helmres2d.cli import main
from helmres2d.fields import resonance_pair
from helmres2d.geometry import CurveSpec, discretize, make_pair
from helmres2d.resonance import MediumParams

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@functools.lru_cache(maxsize=None)
def pair_mesh(epsilon=1e-2, N=256):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return discretize(make_pair(CurveSpec.disk(1.0), epsilon), N)


@functools.lru_cache(maxsize=None)
def resonances(delta, epsilon=1e-2, N=256):
    """``(mesh, alpha, {mode: ResonanceResult})`` for the unit-disk pair."""
    mesh = pair_mesh(epsilon, N)
    alpha, results = resonance_pair(mesh, MediumParams.from_contrast(delta))
    return mesh, alpha, results


@pytest.fixture(scope="session")
def mesh():
    return pair_mesh()


DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"


def run_cli(command, out, config=DEFAULT_CONFIG, jobs=1):
    return main([command, "--config", str(config), "--out", str(out), "--jobs", str(jobs)])


@pytest.fixture(scope="session")
def sweep_run(tmp_path_factory):
    """Default-config sweep, shared by the CLI and acceptance tests."""
    out = tmp_path_factory.mktemp("sweep")
    return run_cli("sweep", out, jobs=os.cpu_count() or 1), out


@pytest.fixture(scope="session")
def validate_runs(tmp_path_factory):
    """Two independent validate runs on the default config."""
    runs = []
    for _ in range(2):
        out = tmp_path_factory.mktemp("validate")
        runs.append((run_cli("validate", out), out))
    return runs
