"""Empirical objective and its closed-form population surrogate.

The empirical objective is

    (1/n) sum_i f(alpha + beta' X_i)
        + (lam/2) (alpha + beta' mu_hat - target_shift)^2

with f the clipped double-well loss and mu_hat the sample mean.
``target_shift`` generalizes the balanced formulation to classes with
probabilities (p, 1-p) by matching the embedded mean to 2p-1; the default 0
is the balanced case.

The population surrogate replaces f by the pure quartic h and the data law by
the whitened mixture (mu0 = 0, Sigma = I); its gradient, Hessian and global
minimizer have closed forms and serve as the landscape oracle.  All
derivatives here are hand-derived; there is deliberately no automatic
differentiation, since finite-difference agreement is itself part of the test
surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loss import LossSpec, eval_f, eval_f_d1, eval_f_d2

__all__ = ["Gamma", "EmpiricalObjective", "PopulationQuartic"]


@dataclass(frozen=True)
class Gamma:
    """Decision variable: intercept alpha and direction beta."""

    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", float(self.alpha))
        if not np.isfinite(self.alpha) or not np.all(np.isfinite(beta)):
            raise ValueError("gamma entries must be finite")

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.alpha], self.beta))

    @staticmethod
    def from_vector(v: np.ndarray) -> "Gamma":
        v = np.asarray(v, dtype=float)
        return Gamma(alpha=v[0], beta=v[1:])

    def __neg__(self) -> "Gamma":
        return Gamma(alpha=-self.alpha, beta=-self.beta)


def _as_vec(g) -> np.ndarray:
    if isinstance(g, Gamma):
        return g.as_vector()
    return np.asarray(g, dtype=float)


class EmpiricalObjective:
    """Value, gradient, Hessian and Hessian-vector product of the sample loss.

    All evaluations are pure given (data, spec, target_shift); the per-sample
    reductions go through numpy's pairwise summation so results are
    independent of order to within 1e-12 relative.
    """

    def __init__(self, data, spec: LossSpec | None = None, target_shift: float = 0.0):
        x = data.x if hasattr(data, "x") else np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise ValueError("data must be an (n, d) matrix")
        self.data = data
        self.spec = spec if spec is not None else LossSpec()
        self.target_shift = float(target_shift)
        self.x = x
        self.n, self.d = x.shape
        self.mu_hat = x.mean(axis=0)
        # augmented rows (1, X_i) and augmented mean (1, mu_hat)
        self._xbar = np.hstack([np.ones((self.n, 1)), x])
        self._mubar = np.concatenate(([1.0], self.mu_hat))

    @property
    def dim(self) -> int:
        return self.d + 1

    def check_mean(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.mu_hat - self.x.mean(axis=0)) <= tol)

    def _embed(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dim,):
            raise ValueError(f"gamma has dimension {v.shape}, expected ({self.dim},)")
        return self._xbar @ v

    def value(self, g) -> float:
        v = _as_vec(g)
        u = self._embed(v)
        pen = v @ self._mubar - self.target_shift
        return float(np.mean(eval_f(u, self.spec)) + self.spec.lam / 2.0 * pen * pen)

    def gradient(self, g) -> np.ndarray:
        v = _as_vec(g)
        u = self._embed(v)
        grad = self._xbar.T @ eval_f_d1(u, self.spec) / self.n
        pen = v @ self._mubar - self.target_shift
        return grad + self.spec.lam * pen * self._mubar

    def value_and_gradient(self, g) -> tuple[float, np.ndarray]:
        """Both quantities from a single embedding pass."""
        v = _as_vec(g)
        u = self._embed(v)
        pen = v @ self._mubar - self.target_shift
        val = float(np.mean(eval_f(u, self.spec)) + self.spec.lam / 2.0 * pen * pen)
        grad = self._xbar.T @ eval_f_d1(u, self.spec) / self.n
        grad += self.spec.lam * pen * self._mubar
        return val, grad

    def values(self, gammas: np.ndarray) -> np.ndarray:
        """Batched objective values for a (T, d+1) stack of iterates."""
        gammas = np.asarray(gammas, dtype=float)
        out = np.empty(gammas.shape[0])
        # chunked so the (n, T) embedding matrix stays small
        step = max(1, int(4e6 / max(self.n, 1)))
        for lo in range(0, gammas.shape[0], step):
            block = gammas[lo : lo + step]
            u = self._xbar @ block.T
            pen = block @ self._mubar - self.target_shift
            out[lo : lo + block.shape[0]] = (
                eval_f(u, self.spec).mean(axis=0) + self.spec.lam / 2.0 * pen * pen
            )
        return out

    def hessian(self, g) -> np.ndarray:
        v = _as_vec(g)
        u = self._embed(v)
        w = eval_f_d2(u, self.spec)
        hess = (self._xbar * w[:, None]).T @ self._xbar / self.n
        hess += self.spec.lam * np.outer(self._mubar, self._mubar)
        return hess

    def hvp(self, g, vec: np.ndarray) -> np.ndarray:
        """Hessian-vector product without materializing the matrix."""
        v = _as_vec(g)
        vec = np.asarray(vec, dtype=float)
        u = self._embed(v)
        w = eval_f_d2(u, self.spec)
        out = self._xbar.T @ (w * (self._xbar @ vec)) / self.n
        return out + self.spec.lam * (self._mubar @ vec) * self._mubar


@dataclass(frozen=True)
class PopulationQuartic:
    """Closed-form landscape oracle for the whitened instance.

    Models the population loss E h(alpha + beta' X) + (lam/2) alpha^2 with
    X = mu*Y + Z, E Z Z' = I and coordinate fourth moment mz.  General
    parameters must be whitened by the caller before using this oracle.
    """

    mu: np.ndarray
    mz: float
    lam: float = 1.0

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "mu", mu)
        if not self.mz > 3:
            raise ValueError(f"leptokurtic oracle requires mz > 3, got {self.mz}")
        if not self.lam >= 1:
            raise ValueError(f"landscape results assume lam >= 1, got {self.lam}")

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def dim(self) -> int:
        return self.d + 1

    def value(self, g) -> float:
        v = _as_vec(g)
        alpha, beta = v[0], v[1:]
        m = float(beta @ self.mu)
        s2 = float(beta @ beta)
        # moments of u = alpha + m*Y + beta'Z
        eu2 = alpha**2 + m**2 + s2
        eu4 = (
            alpha**4
            + 6 * alpha**2 * m**2
            + m**4
            + 6 * (alpha**2 + m**2) * s2
            + self.mz * s2**2
        )
        return (eu4 - 2 * eu2 + 1) / 4.0 + self.lam / 2.0 * alpha**2

    def gradient(self, g) -> np.ndarray:
        v = _as_vec(g)
        alpha, beta = v[0], v[1:]
        m = float(beta @ self.mu)
        s2 = float(beta @ beta)
        ga = alpha * (alpha**2 + 3 * m**2 + 3 * s2 + self.lam - 1)
        gb = (3 * alpha**2 + m**2 + 3 * s2 - 1) * m * self.mu
        gb = gb + (3 * alpha**2 + 3 * m**2 + self.mz * s2 - 1) * beta
        return np.concatenate(([ga], gb))

    def hessian(self, g) -> np.ndarray:
        v = _as_vec(g)
        alpha, beta = v[0], v[1:]
        m = float(beta @ self.mu)
        s2 = float(beta @ beta)
        haa = 3 * alpha**2 + 3 * m**2 + 3 * s2 + self.lam - 1
        hba = 6 * alpha * (m * self.mu + beta)
        hbb = (3 * alpha**2 + 3 * m**2 + self.mz * s2 - 1) * np.eye(self.d)
        hbb += (3 * alpha**2 + 3 * m**2 + 3 * s2 - 1) * np.outer(self.mu, self.mu)
        hbb += 6 * m * (np.outer(self.mu, beta) + np.outer(beta, self.mu))
        hbb += 2 * self.mz * np.outer(beta, beta)
        out = np.empty((self.dim, self.dim))
        out[0, 0] = haa
        out[0, 1:] = hba
        out[1:, 0] = hba
        out[1:, 1:] = hbb
        return out

    def hvp(self, g, vec: np.ndarray) -> np.ndarray:
        return self.hessian(g) @ np.asarray(vec, dtype=float)

    def minimizer_scale(self) -> float:
        """Radial coefficient c with beta_min = c*mu."""
        m2 = float(self.mu @ self.mu)
        return float(np.sqrt((1 + 1 / m2) / (m2**2 + 6 * m2 + self.mz)))

    def minimizer(self) -> Gamma:
        """One of the two global minima (0, +beta); the other is its negation.

        In the strong-signal limit the embedding scale |beta' mu| approaches 1,
        i.e. the embedded data approach the labels +-1.
        """
        return Gamma(alpha=0.0, beta=self.minimizer_scale() * self.mu)

    def min_curvature_bound(self) -> float:
        """Lower bound on the Hessian spectrum at the global minima."""
        m2 = float(self.mu @ self.mu)
        return (2 * m2**2 + (self.mz - 3) * m2) / (m2**2 + 6 * m2 + self.mz)

    def saddle_curvature(self) -> float:
        """u' H u at the nonzero saddles for the unit escape direction
        u = (0, mu/|mu|): equal to (3/mz - 1)*|mu|^2 < 0."""
        m2 = float(self.mu @ self.mu)
        return (3.0 / self.mz - 1.0) * m2
