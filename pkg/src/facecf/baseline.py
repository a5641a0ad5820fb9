"""Gradient-based closest-counterfactual baseline with a MAD-weighted L1 cost."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class WachterConfig:
    """Optimiser settings.

    The search minimises ``lam * (p(x') - target_value)**2 + dist(x, x')`` and
    doubles ``lam`` (by ``lambda_growth``) until ``|p(x') - target_value|``
    is within ``tolerance``.
    """

    target_value: float = 0.55
    tolerance: float = 0.05
    lambda_init: float = 0.1
    lambda_growth: float = 2.0
    max_outer_iters: int = 30
    max_inner_iters: int = 500
    distance: str = "mad_l1"
    step_size: float = 0.01
    max_halvings: int = 20

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.lambda_growth > 1:
            raise ValueError("lambda_growth must exceed 1")
        if not (self.lambda_init > 0 and self.step_size > 0):
            raise ValueError("lambda_init and step_size must be positive")
        if not 0.0 <= self.target_value <= 1.0:
            raise ValueError("target_value must lie in [0, 1]")
        if self.distance not in ("mad_l1", "l2"):
            raise ValueError(f"unknown distance {self.distance!r}")

    def to_dict(self):
        return asdict(self)


def compute_mad(data) -> np.ndarray:
    """Per-feature median absolute deviation.

    Zero entries are replaced by the smallest positive MAD, or by 1 when every
    feature is constant, so the result can always be divided by.
    """
    X = np.asarray(getattr(data, "features", data), dtype=np.float64)
    mad = np.median(np.abs(X - np.median(X, axis=0)), axis=0)
    positive = mad[mad > 0]
    fill = positive.min() if positive.size else 1.0
    return np.where(mad > 0, mad, fill)


def mad_distance(x, x_prime, scale) -> float:
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if not (x.shape == x_prime.shape == scale.shape):
        raise ValueError("dimension mismatch")
    return float(np.sum(np.abs(x - x_prime) / scale))


def numeric_input_gradient(model, x, cls, h=1e-5):
    """Central-difference gradient of ``predict_proba(x)[cls]``."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (model.predict_proba(x + e)[cls] - model.predict_proba(x - e)[cls]) / (2 * h)
    return g


@dataclass
class WachterResult:
    x_prime: np.ndarray
    converged: bool
    outer_iterations: int
    inner_iterations: int
    final_lambda: float
    objective: float
    target_probability: float
    prediction_gap: float
    distance: float

    def to_dict(self):
        out = asdict(self)
        out["x_prime"] = self.x_prime.tolist()
        return out


def wachter_counterfactual(model, x, config: WachterConfig = WachterConfig(), scale=None,
                           target_class=1) -> WachterResult:
    """Search for the closest point whose target-class probability hits the target value.

    Inner loop: subgradient descent from the current iterate with step
    halving until the objective does not increase. The L1 term contributes a
    zero subgradient on coordinates that still equal ``x``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    d = x.size
    scale = np.ones(d) if scale is None else np.asarray(scale, dtype=np.float64)
    grad_fn = getattr(model, "input_gradient", None)
    if grad_fn is None:
        def grad_fn(v, c):
            return numeric_input_gradient(model, v, c)

    def prob(v):
        return float(model.predict_proba(v)[target_class])

    if config.distance == "mad_l1":
        def dist(v):
            return mad_distance(x, v, scale)

        def dist_grad(v):
            return np.sign(v - x) / scale
    else:
        def dist(v):
            return float(np.linalg.norm(v - x))

        def dist_grad(v):
            r = np.linalg.norm(v - x)
            return (v - x) / r if r > 0 else np.zeros(d)

    def objective(v, lam):
        return lam * (prob(v) - config.target_value) ** 2 + dist(v)

    xp = x.copy()
    lam = config.lambda_init
    inner_total = 0
    outer = 0
    converged = abs(prob(xp) - config.target_value) <= config.tolerance
    while not converged and outer < config.max_outer_iters:
        outer += 1
        f = objective(xp, lam)
        for _ in range(config.max_inner_iters):
            inner_total += 1
            p = prob(xp)
            g = 2.0 * lam * (p - config.target_value) * grad_fn(xp, target_class) + dist_grad(xp)
            if not np.any(g):
                break
            step = config.step_size
            for _ in range(config.max_halvings + 1):
                cand = xp - step * g
                fc = objective(cand, lam)
                if fc <= f:
                    break
                step *= 0.5
            else:
                break
            if fc == f and np.array_equal(cand, xp):
                break
            xp, f = cand, fc
        converged = abs(prob(xp) - config.target_value) <= config.tolerance
        if not converged:
            lam *= config.lambda_growth

    p = prob(xp)
    return WachterResult(
        x_prime=xp,
        converged=bool(converged),
        outer_iterations=outer,
        inner_iterations=inner_total,
        final_lambda=lam,
        objective=objective(xp, lam),
        target_probability=p,
        prediction_gap=abs(p - config.target_value),
        distance=dist(xp),
    )
