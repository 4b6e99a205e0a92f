"""Clipped double-well loss.

The reference loss is the quartic ``h(x) = (x^2 - 1)^2 / 4`` with valleys at
+-1.  The working loss ``f`` keeps ``h`` on ``[-a, a]``, continues with a cubic
on ``a < |x| <= b`` chosen so that f, f' and f'' are continuous at the knots,
and grows linearly beyond ``b``.  All branches and their first three
derivatives are implemented from the closed forms, so knot continuity is exact
by construction rather than up to spline-solver tolerance.

Everything here is a pure function of immutable inputs and vectorizes over
numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossSpec",
    "DerivBounds",
    "eval_h",
    "eval_h_d1",
    "eval_h_d2",
    "eval_h_d3",
    "eval_f",
    "eval_f_d1",
    "eval_f_d2",
    "eval_f_d3",
    "derivative_bounds",
]


@dataclass(frozen=True)
class LossSpec:
    """Clipping knots and penalty weight of the objective.

    ``a`` is the inner knot (quartic region), ``b`` the outer knot (start of
    the linear tails), ``lam`` the weight of the mean-matching penalty.  The
    regime ``b >= 2a >= 4`` is assumed throughout the landscape results and is
    enforced here.
    """

    a: float = 7.5
    b: float = 15.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.b >= 2 * self.a >= 4):
            raise ValueError(f"need b >= 2a >= 4, got a={self.a}, b={self.b}")
        if not self.lam >= 0:
            raise ValueError(f"penalty weight must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class DerivBounds:
    """Exact suprema of |f'|, |f''| and |f'''| (the latter off the knots)."""

    f1: float
    f2: float
    f3: float


def eval_h(x):
    """Reference quartic (x^2 - 1)^2 / 4."""
    x = np.asarray(x, dtype=float)
    return (x * x - 1.0) ** 2 / 4.0


def eval_h_d1(x):
    x = np.asarray(x, dtype=float)
    # x*x*x rather than x**3: the vectorized pow is not exactly odd
    return x * x * x - x


def eval_h_d2(x):
    x = np.asarray(x, dtype=float)
    return 3.0 * x * x - 1.0


def eval_h_d3(x):
    x = np.asarray(x, dtype=float)
    return 6.0 * x


def _knot_values(spec: LossSpec):
    """Values of h and its derivatives at the inner knot, plus f(b)."""
    a, b = spec.a, spec.b
    h_a = (a * a - 1.0) ** 2 / 4.0
    hp_a = a * a * a - a
    hpp_a = 3.0 * a * a - 1.0
    w = b - a
    f_b = h_a + hp_a * w + hpp_a / 2.0 * w * w - hpp_a / (6.0 * w) * w * w * w
    return h_a, hp_a, hpp_a, f_b


def eval_f(x, spec: LossSpec):
    """Piecewise loss: quartic core, cubic transition, linear tails."""
    x = np.asarray(x, dtype=float)
    a, b = spec.a, spec.b
    h_a, hp_a, hpp_a, f_b = _knot_values(spec)
    ax = np.abs(x)
    t = ax - a
    mid = h_a + hp_a * t + hpp_a / 2.0 * t * t - hpp_a / (6.0 * (b - a)) * t * t * t
    outer = f_b + (hp_a + (b - a) / 2.0 * hpp_a) * (ax - b)
    return np.where(ax <= a, eval_h(x), np.where(ax <= b, mid, outer))


def eval_f_d1(x, spec: LossSpec):
    """First derivative of the piecewise loss; odd, continuous."""
    x = np.asarray(x, dtype=float)
    a, b = spec.a, spec.b
    _, hp_a, hpp_a, _ = _knot_values(spec)
    ax = np.abs(x)
    s = np.sign(x)
    t = ax - a
    mid = (hp_a + hpp_a * t - hpp_a / (2.0 * (b - a)) * t * t) * s
    outer = (hp_a + (b - a) / 2.0 * hpp_a) * s
    return np.where(ax <= a, eval_h_d1(x), np.where(ax <= b, mid, outer))


def eval_f_d2(x, spec: LossSpec):
    """Second derivative; even, continuous, vanishes beyond the outer knot."""
    x = np.asarray(x, dtype=float)
    a, b = spec.a, spec.b
    _, _, hpp_a, _ = _knot_values(spec)
    ax = np.abs(x)
    mid = hpp_a * (1.0 - (ax - a) / (b - a))
    return np.where(ax <= a, eval_h_d2(x), np.where(ax <= b, mid, 0.0))


def eval_f_d3(x, spec: LossSpec):
    """Third derivative of the piecewise loss.

    Undefined at the knots +-a, +-b; there we return the limit from the
    interval of smaller |x| so the function is total and deterministic.
    Callers needing subgradient semantics must avoid exact knots.
    """
    x = np.asarray(x, dtype=float)
    a, b = spec.a, spec.b
    _, _, hpp_a, _ = _knot_values(spec)
    ax = np.abs(x)
    s = np.sign(x)
    mid = -hpp_a / (b - a) * s
    return np.where(ax <= a, eval_h_d3(x), np.where(ax <= b, mid, 0.0))


def derivative_bounds(spec: LossSpec) -> DerivBounds:
    """Exact suprema of the first three derivatives of f.

    sup|f'| is attained on the linear tails, sup|f''| at the inner knot,
    sup|f'''| at whichever of the quartic core or the cubic transition is
    steeper in third order.
    """
    a, b = spec.a, spec.b
    _, hp_a, hpp_a, _ = _knot_values(spec)
    f1 = hp_a + (b - a) / 2.0 * hpp_a
    f2 = hpp_a
    f3 = max(6.0 * a, hpp_a / (b - a))
    return DerivBounds(f1=f1, f2=f2, f3=f3)
