"""Numerical landscape verification: critical sets, classification, distances.

The population landscape of the whitened quartic surrogate has a closed-form
description: two global minima proportional to the discriminating direction,
plus a saddle set consisting of the origin and a ring of directions
orthogonal to the signal.  This module locates and classifies critical
points of either the exact quartic oracle or the empirical objective,
measures distances to the predicted sets, and evaluates the curvature along
the designated escape direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .mixture import MixtureParams
from .objective import Gamma, PopulationQuartic

__all__ = [
    "CriticalPointReport",
    "PredictedSets",
    "SaddleManifold",
    "predicted_critical_sets",
    "whitened_oracle",
    "classify_point",
    "distance_to_saddle_set",
    "escape_direction_curvature",
    "minimizer_error",
    "minimizer_anchor",
    "predicted_saddle_curvature",
    "gradient_floor",
]

LOCAL_MIN = "local_min"
STRICT_SADDLE = "strict_saddle"
UNCLASSIFIED = "unclassified"


@dataclass
class CriticalPointReport:
    gamma: Gamma
    grad_norm: float
    lambda_min: float
    lambda_max: float
    classification: str
    dist_to_predicted: float
    diagnostic: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma"] = [self.gamma.alpha, *map(float, self.gamma.beta)]
        return d


def _inv_sqrt(sigma: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(sigma)
    if evals.min() <= 0:
        raise ValueError("sigma must be positive definite")
    return (evecs / np.sqrt(evals)) @ evecs.T


@dataclass(frozen=True)
class SaddleManifold:
    """The nonzero saddle set {(-beta' mu0, beta): mu'beta = 0,
    beta' Sigma beta = 1/mz}; the origin is handled separately."""

    mu0: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    mz: float

    @property
    def radius(self) -> float:
        return 1.0 / np.sqrt(self.mz)

    def _whitening(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Sigma^{1/2}, Sigma^{-1/2}, whitened mu) from one eigendecomposition."""
        evals, evecs = np.linalg.eigh(self.sigma)
        if evals.min() <= 0:
            raise ValueError("sigma must be positive definite")
        w = (evecs * np.sqrt(evals)) @ evecs.T
        w_inv = (evecs / np.sqrt(evals)) @ evecs.T
        return w, w_inv, w_inv @ self.mu

    def sample(self, rng: np.random.Generator) -> Gamma:
        """Random member: whitened direction orthogonal to the signal,
        rescaled to the constraint sphere, mapped back."""
        _, w_inv, mu_t = self._whitening()
        d = self.mu.shape[0]
        v = rng.standard_normal(d)
        v -= (v @ mu_t) / (mu_t @ mu_t) * mu_t
        w = self.radius * v / np.linalg.norm(v)
        beta = w_inv @ w
        return Gamma(alpha=-float(beta @ self.mu0), beta=beta)

    def constraint_residuals(self, g: Gamma) -> tuple[float, float, float]:
        """(mu'beta, beta'Sigma beta - 1/mz, alpha + beta'mu0); all zero on
        the manifold."""
        return (
            float(self.mu @ g.beta),
            float(g.beta @ self.sigma @ g.beta - 1.0 / self.mz),
            float(g.alpha + g.beta @ self.mu0),
        )

    def distance(self, g: Gamma, refine_iters: int = 200) -> float:
        """Euclidean distance from gamma to the manifold.

        The whitened projection (drop the signal component, rescale to the
        sphere) is exact when Sigma = I and mu0 = 0; for general parameters
        it only initializes a projected-gradient refinement of the full
        squared distance, which also accounts for the slaved intercept.
        """
        w_mat, w_inv, mu_t = self._whitening()
        mu_hat = mu_t / np.linalg.norm(mu_t)
        m0t = w_inv @ self.mu0
        beta_g = g.beta
        alpha_g = g.alpha
        w = w_mat @ beta_g  # whitened coordinates: beta = Sigma^{-1/2} w

        def project(v: np.ndarray) -> np.ndarray:
            v = v - (v @ mu_hat) * mu_hat
            nv = np.linalg.norm(v)
            if nv < 1e-14:
                # degenerate: beta_g within span(mu); pick a deterministic
                # orthogonal direction
                basis = np.eye(len(v))
                j = int(np.argmin(np.abs(mu_hat)))
                v = basis[j] - (basis[j] @ mu_hat) * mu_hat
                nv = np.linalg.norm(v)
            return self.radius * v / nv

        def objective(v: np.ndarray) -> float:
            beta = w_inv @ v
            return (alpha_g + beta @ self.mu0) ** 2 + float(
                np.sum((beta_g - beta) ** 2)
            )

        w_cur = project(w)
        lip = 2.0 * (m0t @ m0t + np.linalg.norm(w_inv, 2) ** 2)
        step = 1.0 / lip
        best = objective(w_cur)
        for _ in range(refine_iters):
            pen = alpha_g + w_cur @ m0t
            grad = 2.0 * pen * m0t - 2.0 * w_inv @ (beta_g - w_inv @ w_cur)
            w_new = project(w_cur - step * grad)
            val = objective(w_new)
            if val > best - 1e-15:
                w_cur = w_new if val < best else w_cur
                best = min(best, val)
                break
            w_cur, best = w_new, val
        return float(np.sqrt(best))


@dataclass(frozen=True)
class PredictedSets:
    minima: tuple[Gamma, Gamma]
    saddle: SaddleManifold
    c_interval: tuple[float, float] = (0.5, 2.0)

    def distance(self, g: Gamma) -> float:
        v = g.as_vector()
        d_min = min(
            float(np.linalg.norm(v - m.as_vector())) for m in self.minima
        )
        d_zero = float(np.linalg.norm(v))
        return min(d_min, d_zero, self.saddle.distance(g))


def minimizer_anchor(params: MixtureParams, mz: float | None = None) -> Gamma:
    """Unit-coefficient anchor of the predicted minima: beta proportional to
    Sigma^{-1} mu with the closed-form scale, intercept slaved to mu0."""
    if mz is None:
        mz = params.noise.mz
    sinv_mu = np.linalg.solve(params.sigma, params.mu)
    m2 = float(params.mu @ sinv_mu)  # |mu|^2 in the Sigma^{-1} norm
    if m2 <= 0:
        raise ValueError("mu must be nonzero")
    scale = np.sqrt((1 + 1 / m2) / (m2**2 + 6 * m2 + mz))
    beta_h = scale * sinv_mu
    return Gamma(alpha=-float(beta_h @ params.mu0), beta=beta_h)


def predicted_critical_sets(params: MixtureParams, mz: float | None = None) -> PredictedSets:
    """Closed-form minima anchors (up to the scalar in c_interval) and the
    saddle set of the population landscape."""
    if mz is None:
        mz = params.noise.mz
    if not mz > 3:
        warnings.warn(
            f"coordinate fourth moment {mz} <= 3 violates the leptokurtic "
            "assumption; the predicted landscape is not guaranteed",
            stacklevel=2,
        )
    anchor = minimizer_anchor(params, mz)
    saddle = SaddleManifold(mu0=params.mu0, mu=params.mu, sigma=params.sigma, mz=mz)
    return PredictedSets(minima=(anchor, -anchor), saddle=saddle)


def whitened_oracle(params: MixtureParams, mz: float | None = None) -> PopulationQuartic:
    """Population quartic oracle for the instance mapped to mu0=0, Sigma=I."""
    if mz is None:
        mz = params.noise.mz
    mu_t = _inv_sqrt(params.sigma) @ params.mu
    return PopulationQuartic(mu=mu_t, mz=mz)


def _power_extreme(matvec, dim, rng, tol, max_iters):
    """Dominant-magnitude eigenvalue by power iteration; returns (value,
    vector, converged)."""
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = matvec(v)
        lam = float(v @ w)
        res = np.linalg.norm(w - lam * v)
        if res <= tol * max(1.0, abs(lam)):
            return lam, v, True
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            return lam, v, True  # numerically zero operator
        v = w / nw
    return lam, v, False


def extreme_eigenvalues(
    matvec, dim: int, *, seed: int = 0, tol: float = 1e-8, max_iters: int | None = None
) -> tuple[float, float, bool]:
    """(lambda_min, lambda_max, converged) of a symmetric operator via
    shifted power iteration on matrix-vector products."""
    if max_iters is None:
        max_iters = 10 * dim
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 271]))
    lam0, _, ok0 = _power_extreme(matvec, dim, rng, tol, max_iters)
    shift = abs(lam0) * 1.01 + tol
    lam_hi, _, ok1 = _power_extreme(
        lambda u: matvec(u) + shift * u, dim, rng, tol, max_iters
    )
    lam_lo, _, ok2 = _power_extreme(
        lambda u: matvec(u) - shift * u, dim, rng, tol, max_iters
    )
    return lam_lo + shift, lam_hi - shift, ok0 and ok1 and ok2


def classify_point(
    obj,
    g,
    grad_eps: float = 1e-3,
    eig_eta: float = 1e-3,
    predicted: PredictedSets | None = None,
    dense_limit: int = 200,
    seed: int = 0,
) -> CriticalPointReport:
    """Gradient norm, extreme Hessian eigenvalues and a three-way call.

    ``obj`` may be the empirical objective or the quartic oracle (anything
    with gradient/hessian/hvp and dim).  Dense eigensolve up to dense_limit,
    otherwise shifted power iteration on Hessian-vector products; if the
    iteration does not converge within its budget the point is reported
    unclassified with a diagnostic.
    """
    if not (grad_eps > 0 and eig_eta > 0):
        raise ValueError("tolerances must be positive")
    gam = g if isinstance(g, Gamma) else Gamma.from_vector(np.asarray(g, dtype=float))
    grad_norm = float(np.linalg.norm(obj.gradient(gam.as_vector())))
    dim = obj.dim
    diagnostic = ""
    if dim <= dense_limit:
        evals = np.linalg.eigvalsh(obj.hessian(gam.as_vector()))
        lam_min, lam_max = float(evals[0]), float(evals[-1])
        converged = True
    else:
        lam_min, lam_max, converged = extreme_eigenvalues(
            lambda u: obj.hvp(gam.as_vector(), u), dim, seed=seed
        )
        if not converged:
            diagnostic = f"eigen iteration did not converge within {10 * dim} steps"

    if not converged:
        classification = UNCLASSIFIED
    elif grad_norm <= grad_eps and lam_min >= eig_eta:
        classification = LOCAL_MIN
    elif grad_norm <= grad_eps and lam_min <= -eig_eta:
        classification = STRICT_SADDLE
    else:
        classification = UNCLASSIFIED

    dist = float("nan") if predicted is None else predicted.distance(gam)
    return CriticalPointReport(
        gamma=gam,
        grad_norm=grad_norm,
        lambda_min=lam_min,
        lambda_max=lam_max,
        classification=classification,
        dist_to_predicted=dist,
        diagnostic=diagnostic,
    )


def distance_to_saddle_set(g, params: MixtureParams, mz: float | None = None) -> float:
    """Distance to {0} union the saddle manifold."""
    if mz is None:
        mz = params.noise.mz
    gam = g if isinstance(g, Gamma) else Gamma.from_vector(np.asarray(g, dtype=float))
    manifold = SaddleManifold(mu0=params.mu0, mu=params.mu, sigma=params.sigma, mz=mz)
    return min(float(np.linalg.norm(gam.as_vector())), manifold.distance(gam))


def escape_direction_curvature(obj, g, params: MixtureParams) -> float:
    """u' H u for the designated escape direction u = (0, Sigma^-1 mu
    normalized); negative near saddles, positive in the minima basins."""
    gam = g if isinstance(g, Gamma) else Gamma.from_vector(np.asarray(g, dtype=float))
    direction = np.linalg.solve(params.sigma, params.mu)
    direction /= np.linalg.norm(direction)
    u = np.concatenate(([0.0], direction))
    return float(u @ obj.hvp(gam.as_vector(), u))


def predicted_saddle_curvature(params: MixtureParams, mz: float | None = None) -> float:
    """Closed-form u' H u at the nonzero saddles, in the original coordinates,
    for the escape direction u = (0, Sigma^-1 mu normalized).  Equals
    (3/mz - 1) * (mu' Sigma^-1 mu)^2 / |Sigma^-1 mu|^2; for Sigma = I this is
    the whitened value (3/mz - 1)|mu|^2."""
    if mz is None:
        mz = params.noise.mz
    sinv_mu = np.linalg.solve(params.sigma, params.mu)
    m2 = float(params.mu @ sinv_mu)
    return (3.0 / mz - 1.0) * m2**2 / float(sinv_mu @ sinv_mu)


def minimizer_error(g_hat, params: MixtureParams, mz: float | None = None) -> float:
    """min over the global sign of the distance to the best-scaled anchor.

    The population minimizer is the anchor times an unknown scalar in
    (1/2, 2); the scalar is fit by least squares within that interval before
    measuring the distance, so the error reflects direction and intercept
    agreement the way the estimation bound is stated.
    """
    gam = g_hat if isinstance(g_hat, Gamma) else Gamma.from_vector(np.asarray(g_hat, dtype=float))
    anchor = minimizer_anchor(params, mz).as_vector()
    v = gam.as_vector()
    ip = float(v @ anchor)
    s = 1.0 if ip >= 0 else -1.0
    c = float(np.clip(s * ip / (anchor @ anchor), 0.5, 2.0))
    return float(np.linalg.norm(s * v - c * anchor))


def _whitened_predicted_distance(v: np.ndarray, pq: PopulationQuartic) -> float:
    """Distance to the predicted sets of the whitened oracle, closed form."""
    anchor = pq.minimizer().as_vector()
    d_min = min(np.linalg.norm(v - anchor), np.linalg.norm(v + anchor))
    d_zero = np.linalg.norm(v)
    beta = v[1:]
    mu_hat = pq.mu / np.linalg.norm(pq.mu)
    perp = beta - (beta @ mu_hat) * mu_hat
    npv = np.linalg.norm(perp)
    radius = 1.0 / np.sqrt(pq.mz)
    if npv < 1e-14:
        d_ring2 = v[0] ** 2 + beta @ beta + radius**2
    else:
        w = radius * perp / npv
        d_ring2 = v[0] ** 2 + float(np.sum((beta - w) ** 2))
    return float(min(d_min, d_zero, np.sqrt(d_ring2)))


def gradient_floor(
    pq: PopulationQuartic,
    n_samples: int = 10_000,
    radius: float = 3.0,
    min_dist: float = 0.3,
    seed: int = 0,
) -> float:
    """Smallest oracle gradient norm over random points in the radius ball
    that keep min_dist away from every predicted critical point."""
    rng = np.random.default_rng(seed)
    dim = pq.dim
    floor = np.inf
    kept = 0
    while kept < n_samples:
        block = min(4096, n_samples - kept)
        g = rng.standard_normal((block, dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        g *= radius * rng.random((block, 1)) ** (1.0 / dim)
        for row in g:
            if _whitened_predicted_distance(row, pq) < min_dist:
                continue
            floor = min(floor, float(np.linalg.norm(pq.gradient(row))))
        kept += block
    return floor
