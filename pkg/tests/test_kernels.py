"""Compiled extension kernels against their pure-numpy twins."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.optimize

from bridgekit import _kernels, _purekern
from bridgekit.errors import ContractError
from bridgekit.network import _packed, build_drift_network, time_features


def test_compiled_extension_is_active_in_this_build():
    if os.environ.get("BRIDGEKIT_PURE"):
        pytest.skip("pure mode forced by environment")
    assert _kernels.COMPILED


def test_drift_eval_twins_agree():
    rng = np.random.default_rng(0)
    for dim in (1, 3, 11):
        net = build_drift_network(dim, seed=dim, zero_final=False)
        x = np.ascontiguousarray(rng.standard_normal((17, dim)))
        femb = time_features(rng.uniform(0, 1, 17), net.n_freq)
        pure = _purekern.drift_eval(_packed(net), x, femb)
        via_dispatch = _kernels.drift_eval(_packed(net), x, femb)
        np.testing.assert_allclose(via_dispatch, pure, atol=1e-12, rtol=0)
        assert via_dispatch.shape == (17, dim)


def test_drift_eval_matches_network_evaluate():
    net = build_drift_network(2, seed=9, zero_final=False)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 2))
    out = net.evaluate(x, 0.3)
    pure = _purekern.drift_eval(_packed(net), np.ascontiguousarray(x),
                                time_features(np.full(8, 0.3), net.n_freq))
    np.testing.assert_allclose(out, pure, atol=1e-12, rtol=0)


def test_lap_assign_twins_agree():
    rng = np.random.default_rng(2)
    for n in (1, 2, 8, 33, 120):
        cost = rng.uniform(0, 10, (n, n))
        total_d, cols_d = _kernels.lap_assign(cost)
        total_p, cols_p = _purekern.lap_assign(cost)
        assert total_d == pytest.approx(total_p, abs=1e-10)
        np.testing.assert_array_equal(np.sort(cols_d), np.arange(n))
        # degenerate ties can differ in matching, never in total
        assert cost[np.arange(n), cols_d].sum() == pytest.approx(total_d,
                                                                 abs=1e-10)
        assert cost[np.arange(n), cols_p].sum() == pytest.approx(total_p,
                                                                 abs=1e-10)


def test_lap_assign_matches_scipy():
    rng = np.random.default_rng(3)
    for n in (5, 40, 150):
        cost = rng.standard_normal((n, n)) ** 2
        total, _ = _kernels.lap_assign(cost)
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        assert total == pytest.approx(cost[rows, cols].sum(), abs=1e-10)


def test_lap_assign_validates_input():
    with pytest.raises(ContractError):
        _purekern.lap_assign(np.zeros((2, 3)))
    with pytest.raises(ContractError):
        _purekern.lap_assign(np.array([[np.inf, 0.0], [0.0, 1.0]]))


def test_pure_mode_dispatch_via_environment():
    """BRIDGEKIT_PURE=1 must route around the extension and still give
    identical numbers."""
    code = """
import json
import numpy as np
import bridgekit._kernels as k
from bridgekit.network import _packed, build_drift_network, time_features
net = build_drift_network(2, seed=4, zero_final=False)
x = np.ascontiguousarray(np.random.default_rng(5).standard_normal((6, 2)))
out = k.drift_eval(_packed(net), x, time_features(np.full(6, 0.7), net.n_freq))
total, _ = k.lap_assign(np.arange(9, dtype=float).reshape(3, 3) % 4.0)
print(json.dumps({"compiled": k.COMPILED, "out": out.tolist(),
                  "total": total}))
"""
    env = dict(os.environ, BRIDGEKIT_PURE="1")
    probe = subprocess.run([sys.executable, "-c", code], env=env,
                           capture_output=True, text=True, check=True)
    got = json.loads(probe.stdout)
    assert got["compiled"] is False

    net = build_drift_network(2, seed=4, zero_final=False)
    x = np.ascontiguousarray(np.random.default_rng(5).standard_normal((6, 2)))
    here = _kernels.drift_eval(_packed(net), x,
                               time_features(np.full(6, 0.7), net.n_freq))
    np.testing.assert_allclose(np.array(got["out"]), here, atol=1e-12, rtol=0)
    total, _ = _kernels.lap_assign(np.arange(9, dtype=float).reshape(3, 3) % 4.0)
    assert got["total"] == pytest.approx(total, abs=1e-12)
