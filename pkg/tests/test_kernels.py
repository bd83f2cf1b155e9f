import math

import numpy as np
import pytest

from shrinktest import kernels
from shrinktest.posterior import PosteriorQuery, log_denominator, mean_shrinkage_weight
from shrinktest.priors import horseshoe, standard_double_pareto

HS = horseshoe()
compiled_available = True
try:
    from shrinktest import _kernels  # noqa: F401
except ImportError:
    compiled_available = False


@pytest.fixture
def python_backend():
    prev = kernels.BACKEND
    kernels.use_backend("python")
    yield
    kernels.use_backend(prev)


@pytest.mark.parametrize("tau", [1e-4, 0.01, 0.3, 2.0])
def test_batch_matches_adaptive(any_prior, tau):
    xs = np.array([0.0, 0.4, 1.5, 3.0, 5.5, 9.0, 25.0])
    batch_w = kernels.batch_weights(any_prior, xs, tau)
    batch_ld = kernels.batch_moments(any_prior, xs, tau)[0]
    for x, bw, bld in zip(xs, batch_w, batch_ld):
        ref = mean_shrinkage_weight(any_prior, PosteriorQuery(float(x), tau))
        assert bw == pytest.approx(ref, abs=1e-9)
        assert bld == pytest.approx(log_denominator(any_prior, float(x), tau), abs=1e-9)


def test_variance_matches_finite_difference():
    z = np.array([0.5, 2.0, 4.0])
    h = 1e-5
    _, w, var = kernels.batch_moments(HS, z, 0.1)
    dw = (kernels.batch_weights(HS, z + h, 0.1) - kernels.batch_weights(HS, z - h, 0.1)) / (2 * h)
    assert np.allclose(dw, z * var, rtol=1e-5)


def test_batch_sigma_scaling():
    xs = np.array([-4.0, 0.3, 2.2])
    assert np.array_equal(kernels.batch_weights(HS, xs, 0.2, sigma=2.0), kernels.batch_weights(HS, xs / 2.0, 0.2))
    lm = kernels.batch_log_marginal(HS, xs, 0.2, sigma=2.0)
    assert np.allclose(lm, kernels.batch_log_marginal(HS, xs / 2.0, 0.2) - math.log(2.0), atol=1e-14)


def test_node_set_cached_by_decade():
    assert kernels.node_set(HS, 0.03, 0.03, 5.0) is kernels.node_set(HS, 0.05, 0.05, 7.0)
    assert kernels.node_set(HS, 0.03, 0.03, 0.0).y.size > 0


def test_python_backend_matches_compiled():
    if not compiled_available:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(4)
    xs = rng.standard_normal(300) * 3
    tables = kernels.ZTables(HS, [1e-3, 0.05, 1.0])
    zs = np.abs(xs)[None, :] / np.array([0.5, 1.0, 2.0])[:, None]
    prob = rng.random((3, 3))
    prob /= prob.sum()
    results = {}
    for name in ("compiled", "python"):
        kernels.use_backend(name)
        results[name] = (kernels.batch_moments(HS, xs, 0.07), tables.log_d_sums(zs), tables.mixed_weights(zs, prob))
    kernels.use_backend("compiled")
    (mc, sc, wc), (mp, sp, wp) = results["compiled"], results["python"]
    for a, b in zip(mc, mp):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-15)
    assert np.allclose(sc, sp, rtol=1e-13)
    assert np.allclose(wc, wp, rtol=1e-13)


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("SHRINKTEST_PURE_PYTHON", "1")
    mod, name = kernels._load_backend()
    assert name == "python"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_tables_match_direct_sums(python_backend):
    taus = [1e-4, 0.01, 0.5]
    tables = kernels.ZTables(HS, taus)
    zs = np.array([[0.0, 0.013, 1.234, 3.3333, 7.91, 39.99], [0.5, 2.0, 12.345, 45.0, 60.0, 0.001]])
    sums = tables.log_d_sums(zs)
    for j, tau in enumerate(taus):
        for s in range(zs.shape[0]):
            direct = kernels.batch_moments(HS, zs[s], tau)[0].sum()
            assert sums[j, s] == pytest.approx(direct, abs=1e-6)
    prob = np.array([[0.1, 0.2], [0.3, 0.1], [0.2, 0.1]])
    mixed = tables.mixed_weights(zs, prob)
    direct = sum(prob[j, s] * kernels.batch_weights(HS, zs[s], tau) for j, tau in enumerate(taus) for s in range(2))
    assert np.allclose(mixed, direct, atol=1e-7)


def test_tables_gdp_interpolation_error():
    sdp = standard_double_pareto()
    tables = kernels.ZTables(sdp, [0.02])
    z = np.linspace(0.005, 20, 401)
    approx = tables.log_d_sums(z[:, None])[0]
    direct = kernels.batch_moments(sdp, z, 0.02)[0]
    assert np.max(np.abs(approx - direct)) < 1e-7
