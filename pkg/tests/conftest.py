import functools
import sys

import numpy as np
import pytest
from scipy import stats

from amrlab import ddpg, envs, neural

# two-sided tail mass of a 3-sigma normal band
THREE_SIGMA_P = 2 * stats.norm.sf(3.0)


def familywise_z(n_tests: int) -> float:
    """z bound keeping the chance of any of ``n_tests`` excursions at the 3-sigma level."""
    per_test = 1.0 - (1.0 - THREE_SIGMA_P) ** (1.0 / n_tests)
    return float(stats.norm.isf(per_test / 2))


def central_diff(f, v, h=1e-5):
    """Central finite-difference gradient of scalar f at flat vector v."""
    v = np.array(v, dtype=float)
    g = np.zeros_like(v)
    for i in range(v.size):
        old = v[i]
        v[i] = old + h
        fp = f(v)
        v[i] = old - h
        fm = f(v)
        v[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a), np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def assert_grad_close(analytic, numeric, tol=1e-4, floor=1e-8):
    # entries where both sides are below the floor are compared absolutely
    a, b = np.asarray(analytic), np.asarray(numeric)
    small = np.maximum(np.abs(a), np.abs(b)) < floor
    err = rel_err(a, b, floor)
    err[small] = 0.0
    assert err.max() <= tol, f"max relative error {err.max():.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pendulum_factory():
    return functools.partial(envs.make_env, "pendulum")


def small_hp(**kw):
    base = dict(episodes=3, batch=8, buffer_capacity=200, max_steps_per_episode=30,
                critic_hidden=8, actor_hidden=6)
    base.update(kw)
    return ddpg.Hyperparams(**base)


def random_batch(rng, n, sd, ad, terminal_frac=0.0):
    from amrlab.replay import Batch
    return Batch(rng.normal(size=(n, sd)), rng.uniform(-1, 1, size=(n, ad)),
                 rng.normal(size=n), rng.normal(size=(n, sd)),
                 (rng.random(n) < terminal_frac).astype(float))


def zero_net_like(net):
    return neural.zeros_like(net)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(acc.RESULTS.items(), key=lambda kv: str(kv[0])):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
