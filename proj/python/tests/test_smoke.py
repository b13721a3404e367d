import json

import numpy as np
import pytest

import pepg


def test_softmax_rows_sum_to_one():
    pi = pepg.softmax(np.array([[0.0, 1.0], [5.0, -5.0]]))
    assert np.allclose(pi.sum(axis=1), 1.0)


def test_induce_shapes():
    env = pepg.ExpFamilyEnv(3, 2, gamma=0.9)
    P, r = pepg.induce(env, np.zeros((3, 2)))
    assert P.shape[1] == 3
    assert np.allclose(P.sum(axis=1), 1.0)
    assert r.shape == (3, 2)


def test_exact_gradient_matches_finite_differences():
    env = pepg.ExpFamilyEnv(2, 2, gamma=0.9)
    theta = np.array([[0.5, -0.3], [-0.8, 0.2]])
    g = pepg.exact_gradient(env, theta, 0.0)
    h = 1e-6
    fd = np.zeros_like(theta)
    for i in range(2):
        for j in range(2):
            up, dn = theta.copy(), theta.copy()
            up[i, j] += h
            dn[i, j] -= h
            fd[i, j] = (pepg.exact_value(env, up, 0.0) - pepg.exact_value(env, dn, 0.0)) / (2 * h)
    assert np.allclose(np.asarray(g).reshape(fd.shape, order="F") if np.ndim(g) == 1 else g, fd, atol=1e-6)


def test_run_spec_minimal():
    spec = {
        "env": {"type": "static", "rewards": [[1.0, 0.0]], "gamma": 0.9},
        "algorithms": ["pepg"],
        "train": {"eta": 0.1, "trajectories": 10, "iterations": 5},
    }
    runs = pepg.run_spec(json.dumps(spec), 1)
    assert len(runs) == 1
    assert runs[0]["algo"] == "pepg"
    assert runs[0]["csv"].startswith(pepg.csv_header())
    assert not runs[0]["aborted"]


def test_bad_spec_raises_value_error():
    with pytest.raises(ValueError):
        pepg.run_spec(json.dumps({"env": {"type": "static"}}), 0)


def test_verify_identities_small():
    reports = pepg.verify("identities", 0, 2)
    assert reports
    assert all(r["pass"] for r in reports)


def test_loan_optima():
    opt = pepg.loan_optima(0.5)
    _, erm_at_equilibrium = pepg.loan_equilibrium(opt["erm_theta"], 0.5)
    assert opt["perf_utility"] > erm_at_equilibrium
