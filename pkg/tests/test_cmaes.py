import math

import numpy as np
import pytest

from navrl.cmaes import CmaEs, minimize


def sphere(x):
    return float(x @ x)


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2
                        + (1.0 - x[:-1]) ** 2))


class TestSetup:
    def test_default_population(self):
        es = CmaEs(np.zeros(5), 0.3)
        assert es.lam == 4 + int(3 * math.log(5))
        assert es.mu == es.lam // 2

    def test_weights_normalized_decreasing(self):
        es = CmaEs(np.zeros(8), 0.5)
        assert abs(es.weights.sum() - 1.0) < 1e-12
        assert np.all(np.diff(es.weights) < 0)
        assert es.mu_eff > 1.0

    def test_ask_shape_and_determinism(self):
        a = CmaEs(np.zeros(4), 0.2, seed=3).ask()
        b = CmaEs(np.zeros(4), 0.2, seed=3).ask()
        assert a.shape == (CmaEs(np.zeros(4), 0.2).lam, 4)
        assert np.array_equal(a, b)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            CmaEs(np.zeros(3), -1.0)
        with pytest.raises(ValueError):
            CmaEs(np.zeros(0), 0.3)
        with pytest.raises(ValueError):
            CmaEs(np.zeros(3), 0.3, bounds=([1, 1, 1], [0, 2, 2]))
        es = CmaEs(np.zeros(3), 0.3)
        with pytest.raises(ValueError):
            es.tell(np.zeros((es.lam, 3)), np.full(es.lam, np.nan))
        with pytest.raises(ValueError):
            es.tell(np.zeros((2, 3)), np.zeros(2))


class TestConvergence:
    def test_sphere_5d(self):
        x, f, evals = minimize(sphere, np.full(5, 0.5), 0.3,
                               max_evals=2000, target=1e-8, seed=1)
        assert f < 1e-8
        assert evals <= 2000

    def test_rosenbrock_5d(self):
        x, f, evals = minimize(rosenbrock, np.zeros(5), 0.3,
                               max_evals=20000, target=1e-3, seed=1)
        assert f < 1e-3
        assert np.allclose(x, 1.0, atol=0.2)

    def test_shifted_quadratic(self):
        target = np.array([1.5, -2.0, 0.7])
        x, f, _ = minimize(lambda v: sphere(v - target), np.zeros(3), 0.5,
                           max_evals=4000, target=1e-10, seed=2)
        assert np.allclose(x, target, atol=1e-4)


class TestBounds:
    def test_samples_stay_in_box(self):
        es = CmaEs(np.full(4, 0.5), 0.8, bounds=(np.zeros(4), np.ones(4)),
                   seed=5)
        for _ in range(10):
            xs = es.ask()
            assert np.all(xs >= 0.0) and np.all(xs <= 1.0)
            es.tell(xs, np.array([sphere(x) for x in xs]))

    def test_optimum_on_boundary(self):
        # unconstrained optimum at -1, box at 0: expect convergence to 0
        x, f, _ = minimize(lambda v: sphere(v + 1.0), np.full(3, 0.5), 0.3,
                           bounds=(np.zeros(3), np.ones(3)),
                           max_evals=4000, seed=3)
        assert np.allclose(x, 0.0, atol=1e-2)

    def test_scalar_bounds_broadcast(self):
        es = CmaEs(np.full(6, 0.5), 0.3, bounds=(0.0, 1.0))
        assert es.lower.shape == (6,)
        assert np.all(es.ask() <= 1.0)


class TestInvariance:
    def test_covariance_stays_symmetric_pd(self):
        rng = np.random.default_rng(0)
        es = CmaEs(np.zeros(6), 0.4, seed=7)
        for _ in range(40):
            xs = es.ask()
            es.tell(xs, np.array([rosenbrock(x) for x in xs]))
            assert np.allclose(es.C, es.C.T, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(es.C) > 0)

    def test_best_tracks_minimum_seen(self):
        es = CmaEs(np.zeros(3), 0.5, seed=9)
        seen = math.inf
        for _ in range(20):
            xs = es.ask()
            fs = np.array([sphere(x) for x in xs])
            seen = min(seen, fs.min())
            es.tell(xs, fs)
            assert es.best_f == seen
