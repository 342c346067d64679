"""Covariance matrix adaptation evolution strategy, minimizing.

Small self-contained implementation of the standard formulation with
cumulative step-size adaptation and rank-one plus rank-mu covariance
updates.  Box constraints are handled by clipping samples coordinate-wise
when they are drawn; the update then treats the clipped point as the sample.
"""
from __future__ import annotations

import math

import numpy as np


class CmaEs:
    def __init__(self, x0, sigma0: float, bounds=None, population=None,
                 seed: int = 0):
        self.mean = np.array(x0, dtype=float)
        if self.mean.ndim != 1 or len(self.mean) == 0:
            raise ValueError("x0 must be a non-empty vector")
        if sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        n = len(self.mean)
        self.n = n
        self.sigma = float(sigma0)
        if bounds is None:
            self.lower = None
            self.upper = None
        else:
            self.lower = np.broadcast_to(
                np.asarray(bounds[0], dtype=float), (n,)).copy()
            self.upper = np.broadcast_to(
                np.asarray(bounds[1], dtype=float), (n,)).copy()
            if np.any(self.lower >= self.upper):
                raise ValueError("lower bounds must be below upper bounds")
            self.mean = np.clip(self.mean, self.lower, self.upper)

        lam = population if population is not None else 4 + int(3 * math.log(n))
        if lam < 2:
            raise ValueError("population must be at least 2")
        self.lam = int(lam)
        self.mu = self.lam // 2
        w = math.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mu_eff = 1.0 / float(self.weights @ self.weights)

        self.c_sigma = (self.mu_eff + 2.0) / (n + self.mu_eff + 5.0)
        self.d_sigma = (1.0 + 2.0 * max(0.0, math.sqrt(
            (self.mu_eff - 1.0) / (n + 1.0)) - 1.0) + self.c_sigma)
        self.c_c = (4.0 + self.mu_eff / n) / (n + 4.0 + 2.0 * self.mu_eff / n)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(1.0 - self.c_1,
                        2.0 * (self.mu_eff - 2.0 + 1.0 / self.mu_eff)
                        / ((n + 2.0) ** 2 + self.mu_eff))
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n)
                                     + 1.0 / (21.0 * n * n))

        self.C = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self.rng = np.random.default_rng(seed)
        self.best_x = None
        self.best_f = math.inf
        self._decompose()

    def _decompose(self):
        c = 0.5 * (self.C + self.C.T)
        vals, vecs = np.linalg.eigh(c)
        vals = np.maximum(vals, 1e-20)  # keep C positive definite
        self._B = vecs
        self._d = np.sqrt(vals)
        self.C = (vecs * vals) @ vecs.T

    def ask(self):
        """Draw one population of candidate points, shape (lam, n)."""
        z = self.rng.standard_normal((self.lam, self.n))
        x = self.mean + self.sigma * z @ (self._B * self._d).T
        if self.lower is not None:
            x = np.clip(x, self.lower, self.upper)
        return x

    def tell(self, solutions, values):
        """Rank-and-update from evaluated points (lower value is better)."""
        xs = np.asarray(solutions, dtype=float)
        fs = np.asarray(values, dtype=float)
        if xs.shape != (self.lam, self.n) or fs.shape != (self.lam,):
            raise ValueError("tell expects one full population")
        if not np.isfinite(fs).all():
            raise ValueError("objective values must be finite")

        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < self.best_f:
            self.best_f = float(fs[order[0]])
            self.best_x = xs[order[0]].copy()

        old_mean = self.mean
        y = (xs[order[: self.mu]] - old_mean) / self.sigma
        y_w = self.weights @ y
        self.mean = old_mean + self.sigma * y_w

        inv_sqrt = (self._B / self._d) @ self._B.T
        self.p_sigma = ((1.0 - self.c_sigma) * self.p_sigma
                        + math.sqrt(self.c_sigma * (2.0 - self.c_sigma)
                                    * self.mu_eff) * inv_sqrt @ y_w)
        self.generation += 1
        norm_ps = float(np.linalg.norm(self.p_sigma))
        denom = math.sqrt(
            1.0 - (1.0 - self.c_sigma) ** (2.0 * self.generation))
        h_sigma = (norm_ps / denom
                   < (1.4 + 2.0 / (self.n + 1.0)) * self.chi_n)
        self.p_c = ((1.0 - self.c_c) * self.p_c
                    + (math.sqrt(self.c_c * (2.0 - self.c_c) * self.mu_eff)
                       * y_w if h_sigma else 0.0))

        rank_one = np.outer(self.p_c, self.p_c)
        rank_mu = (y.T * self.weights) @ y
        stall = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c)
        self.C = ((1.0 - self.c_1 - self.c_mu) * self.C
                  + self.c_1 * (rank_one + stall * self.C)
                  + self.c_mu * rank_mu)
        self.sigma *= math.exp(
            (self.c_sigma / self.d_sigma) * (norm_ps / self.chi_n - 1.0))
        if not math.isfinite(self.sigma):
            raise FloatingPointError("step size diverged")
        self._decompose()


def minimize(f, x0, sigma0, bounds=None, max_evals=10_000,
             target=-math.inf, population=None, seed=0):
    """Convenience driver: run full generations until budget or target."""
    es = CmaEs(x0, sigma0, bounds=bounds, population=population, seed=seed)
    evals = 0
    while evals + es.lam <= max_evals:
        xs = es.ask()
        fs = np.array([f(x) for x in xs])
        evals += es.lam
        es.tell(xs, fs)
        if es.best_f <= target:
            break
    return es.best_x, es.best_f, evals
