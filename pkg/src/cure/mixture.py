"""Two-component elliptical mixture: sampling and ground-truth quantities.

The generative model is ``X = mu0 + mu*Y + Sigma^{1/2} Z`` with a Rademacher
label ``Y`` and spherically symmetric isotropic noise ``Z = R*U`` (``U``
uniform on the unit sphere, ``R`` an independent radial law with
``E R^2 = d``).  The leptokurtic assumption (coordinate excess kurtosis > 0)
is realized constructively by a bounded two-point radial law, which gives
sub-Gaussianity for free and exact moment control.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .objective import Gamma

__all__ = [
    "NoiseLaw",
    "make_two_point_radial",
    "gaussian_radial",
    "MixtureParams",
    "Dataset",
    "sample",
    "bayes_classifier",
    "coordinate_fourth_moment",
    "save_csv",
    "load_csv",
    "CsvFormatError",
    "derive_seed",
]


@dataclass(frozen=True)
class NoiseLaw:
    """Radial law of the spherical noise Z = R*U.

    ``two_point`` draws R^2 from {r1_sq, r2_sq} with P(R^2 = r1_sq) = p_small;
    ``gaussian`` draws R^2 ~ chi-squared(d), which makes Z standard normal.
    """

    kind: str  # "two_point" | "gaussian"
    d: int
    r1_sq: float = 0.0
    r2_sq: float = 0.0
    p_small: float = 0.0

    def __post_init__(self):
        if self.kind not in ("two_point", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.d < 2:
            raise ValueError("noise dimension must be at least 2")

    @property
    def radial_second_moment(self) -> float:
        if self.kind == "gaussian":
            return float(self.d)
        return self.p_small * self.r1_sq + (1.0 - self.p_small) * self.r2_sq

    @property
    def radial_fourth_moment(self) -> float:
        if self.kind == "gaussian":
            return float(self.d * (self.d + 2))
        return self.p_small * self.r1_sq**2 + (1.0 - self.p_small) * self.r2_sq**2

    @property
    def mz(self) -> float:
        """Coordinate fourth moment E Z_1^4 = 3 E R^4 / (d (d+2))."""
        return 3.0 * self.radial_fourth_moment / (self.d * (self.d + 2))

    @property
    def kappa_excess(self) -> float:
        return self.mz - 3.0

    @property
    def is_leptokurtic(self) -> bool:
        return self.kappa_excess > 0.0

    def sample_radii(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return np.sqrt(rng.chisquare(self.d, size=n))
        small = rng.random(n) < self.p_small
        return np.sqrt(np.where(small, self.r1_sq, self.r2_sq))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n spherical noise vectors Z = R*U."""
        g = rng.standard_normal((n, self.d))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        r = self.sample_radii(n, rng)
        return r[:, None] * u


def make_two_point_radial(d: int, kappa_excess: float) -> NoiseLaw:
    """Bounded radial law with E R^2 = d and coordinate excess kurtosis exactly
    ``kappa_excess``.

    Tries the symmetric split p = 1/2 first; when that forces a negative
    squared radius, searches p in the feasible interval for the solution with
    the smallest |log(r2^2/r1^2)| so the radii stay well-conditioned.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    if kappa_excess <= 0:
        raise ValueError("kappa_excess must be positive for a leptokurtic law")
    m2 = float(d)
    m4 = (1.0 + kappa_excess / 3.0) * d * (d + 2)
    var = m4 - m2 * m2
    if var <= 0:
        raise ValueError(
            f"no two-point radial law with E R^2={m2}, E R^4={m4}: variance {var} <= 0"
        )
    sd = np.sqrt(var)

    def radii(p: float) -> tuple[float, float]:
        return m2 - sd * np.sqrt((1 - p) / p), m2 + sd * np.sqrt(p / (1 - p))

    r1s, r2s = radii(0.5)
    p = 0.5
    if r1s <= 0:
        p_lo = var / (var + m2 * m2)  # feasibility threshold for r1_sq > 0

        def log_ratio(q: float) -> float:
            u, v = radii(q)
            return np.log(v / u) if u > 0 else np.inf

        res = minimize_scalar(
            log_ratio, bounds=(p_lo + 1e-9, 1 - 1e-9), method="bounded"
        )
        p = float(res.x)
        r1s, r2s = radii(p)
        if r1s <= 0:
            raise ValueError(
                f"no feasible two-point radial law for d={d}, kappa={kappa_excess}"
            )
    law = NoiseLaw(kind="two_point", d=d, r1_sq=float(r1s), r2_sq=float(r2s), p_small=p)
    # the moment equations must be solved exactly, not approximately
    assert abs(law.radial_second_moment - m2) <= 1e-9 * m2
    assert abs(law.radial_fourth_moment - m4) <= 1e-9 * m4
    return law


def gaussian_radial(d: int) -> NoiseLaw:
    """Gaussian noise, flagged by kappa_excess == 0 as violating the
    leptokurtic model assumption."""
    return NoiseLaw(kind="gaussian", d=d)


def coordinate_fourth_moment(noise: NoiseLaw) -> float:
    """Exact M_Z = E Z_1^4 from the stored radial moments."""
    return noise.mz


@dataclass(frozen=True)
class MixtureParams:
    """Ground-truth generative parameters (mu0, mu, Sigma, noise law)."""

    mu0: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    noise: NoiseLaw

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        d = mu.shape[0]
        if mu0.shape != (d,) or sigma.shape != (d, d):
            raise ValueError("inconsistent parameter dimensions")
        if self.noise.d != d:
            raise ValueError("noise law dimension does not match mu")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        evals, evecs = np.linalg.eigh(sigma)
        if evals.min() <= 0:
            raise ValueError(f"sigma must be positive definite, min eigenvalue {evals.min()}")
        # symmetric square root, cached for the sampler
        sqrt = (evecs * np.sqrt(evals)) @ evecs.T
        object.__setattr__(self, "_sigma_sqrt", sqrt)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def sigma_sqrt(self) -> np.ndarray:
        return self._sigma_sqrt

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.mu0, self.mu, self.sigma):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(
            f"{self.noise.kind}:{self.noise.r1_sq}:{self.noise.r2_sq}:{self.noise.p_small}".encode()
        )
        return h.hexdigest()[:16]


@dataclass
class Dataset:
    """Sample matrix with optional ground-truth labels and provenance."""

    x: np.ndarray
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[0] < 1:
            raise ValueError("x must be a nonempty (n, d) matrix")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("x contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float)
            if self.labels.shape != (self.x.shape[0],):
                raise ValueError("labels must be a length-n vector")
            if not np.all(np.isin(self.labels, (-1.0, 1.0))):
                raise ValueError("labels must take values in {-1, +1}")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def sample(params: MixtureParams, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. samples X_i = mu0 + mu*Y_i + Sigma^{1/2} Z_i.

    Deterministic given the seed: the draw order is labels, sphere directions,
    radii.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n) * 2.0 - 1.0
    z = params.noise.sample(n, rng)
    x = params.mu0 + params.mu * y[:, None] + z @ params.sigma_sqrt
    meta = {"seed": int(seed), "params_hash": params.digest(), "n": int(n)}
    return Dataset(x=x, labels=y, meta=meta)


def bayes_classifier(params: MixtureParams) -> Gamma:
    """Optimal affine classifier (-mu0' Sigma^{-1} mu, Sigma^{-1} mu)."""
    beta = np.linalg.solve(params.sigma, params.mu)
    if np.linalg.norm(beta) == 0:
        raise ValueError("degenerate mixture: mu = 0 has no discriminating direction")
    alpha = -float(params.mu0 @ beta)
    return Gamma(alpha=alpha, beta=beta)


def derive_seed(seed: int, *key: int) -> int:
    """Stable per-trial seed derived from a base seed and an index path."""
    ss = np.random.SeedSequence([int(seed), *map(int, key)])
    return int(ss.generate_state(1, np.uint64)[0])


class CsvFormatError(ValueError):
    pass


def save_csv(dataset: Dataset, path) -> None:
    """Write ``f0,...,f{d-1}[,label]`` rows; floats use the shortest decimal
    representation that round-trips."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"f{j}" for j in range(dataset.d)]
        if dataset.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def load_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_csv` (or any file in that format).

    Rejects ragged rows, non-numeric or non-finite cells, and label values
    outside {-1, 1}, naming the offending row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        has_label = header and header[-1] == "label"
        feat_cols = header[:-1] if has_label else header
        d = len(feat_cols)
        if d == 0 or feat_cols != [f"f{j}" for j in range(d)]:
            raise CsvFormatError(f"{path}: bad header {header!r}")
        xs, ys = [], []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}"
                )
            vals = []
            for j, cell in enumerate(row[:d]):
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {i + 2}, column {header[j]}: non-numeric cell {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise CsvFormatError(
                        f"{path}: row {i + 2}, column {header[j]}: non-finite value {cell!r}"
                    )
                vals.append(v)
            xs.append(vals)
            if has_label:
                cell = row[d]
                try:
                    lab = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {i + 2}, column label: non-numeric cell {cell!r}"
                    ) from None
                if lab not in (-1.0, 1.0):
                    raise CsvFormatError(
                        f"{path}: row {i + 2}, column label: value {cell!r} not in {{-1, 1}}"
                    )
                ys.append(lab)
        if not xs:
            raise CsvFormatError(f"{path}: no data rows")
    x = np.array(xs, dtype=float)
    labels = np.array(ys, dtype=float) if has_label else None
    return Dataset(x=x, labels=labels, meta={"source": str(path), "params_hash": "external"})
