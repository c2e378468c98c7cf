"""Shared fixtures: acceptance-criterion registry and the bridge sweep."""

import json
import time
from pathlib import Path

import pytest

# number -> (label, passed); filled by the acceptance tests, printed once
# at the end of the session
CRITERION_RESULTS: dict[int, tuple[str, bool]] = {}

_SESSION_T0 = time.perf_counter()

SWEEP_GRID = "ipf.n_traj=32,128,512;ipf.seed=0,1,2"
SWEEP_N_TRAJS = (32, 128, 512)
SWEEP_SEEDS = (0, 1, 2)


@pytest.fixture
def criterion():
    """Recorder: criterion(number, label, passed) -> passed."""

    def record(number: int, label: str, passed) -> bool:
        passed = bool(passed)
        if number in CRITERION_RESULTS:
            label = CRITERION_RESULTS[number][0]
            passed = passed and CRITERION_RESULTS[number][1]
        CRITERION_RESULTS[number] = (label, passed)
        return passed

    return record


@pytest.fixture(scope="session")
def session_elapsed():
    def elapsed() -> float:
        return time.perf_counter() - _SESSION_T0

    return elapsed


@pytest.fixture(scope="session")
def bridge_oracle() -> dict:
    """Frozen W1 anchors committed from the oracle sweep."""
    path = Path(__file__).parent / "fixtures" / "bridge_oracle.json"
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def bridge_sweep(tmp_path_factory) -> dict:
    """Desk-scale bridge sweep: n_traj {32,128,512} x seeds {0,1,2}.

    One full library-default run per cell, exactly the grid the oracle
    fixture was generated from.  Shared by the bridge-improvement and
    trajectory-count-trend tests; several minutes of compute.
    """
    from bridgekit.config import parse_config
    from bridgekit.runner import run_sweep

    base = tmp_path_factory.mktemp("bridge_sweep")
    cfg = parse_config({"output": {"dir": str(base)}})
    t0 = time.perf_counter()
    run_sweep(cfg, SWEEP_GRID, base_dir=base)
    wall = time.perf_counter() - t0
    cells = {}
    for n_traj in SWEEP_N_TRAJS:
        for seed in SWEEP_SEEDS:
            doc = json.loads(
                (base / f"n_traj-{n_traj}_seed-{seed}" / "metrics.json")
                .read_text(encoding="utf-8"))
            cells[(n_traj, seed)] = doc
    return {"cells": cells, "wall_time_s": wall}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERION_RESULTS):
        label, ok = CRITERION_RESULTS[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {label}")
