import dataclasses
import os
import sys
from pathlib import Path

import pytest

from scghg import engine as E
from scghg.config import RunConfig

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def small_cfg() -> RunConfig:
    """Cheap run: 64 trials, 200 parameter sets."""
    cfg = RunConfig(n_trials=64, seed=11, sources=("macro:Harding2023",))
    return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, n_sets=200))


@pytest.fixture(scope="session")
def small_shared(small_cfg):
    return E.prepare(small_cfg)


@pytest.fixture
def run_cli(tmp_path):
    """Run the CLI in a subprocess so environment variables take effect."""
    import subprocess

    def _run(*args, env=None, check=True):
        full_env = dict(os.environ)
        full_env.update(env or {})
        proc = subprocess.run([sys.executable, "-m", "scghg.cli", *args], capture_output=True,
                              text=True, env=full_env, cwd=tmp_path)
        if check and proc.returncode != 0:
            raise AssertionError(f"exit {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
        return proc

    return _run



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
