"""Gaussian KDE and the density-weighted path length machinery."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels

WEIGHT_KINDS = ("neg_log", "identity", "inverse", "custom")


@dataclass(frozen=True, eq=False)
class KdeModel:
    """Isotropic Gaussian kernel density estimate over ``reference_points``."""

    reference_points: np.ndarray
    bandwidth: float

    def __post_init__(self):
        R = np.array(self.reference_points, dtype=np.float64, copy=True)
        if R.ndim != 2 or R.shape[0] < 1:
            raise ValueError("reference points must be a nonempty 2-d matrix")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        R.flags.writeable = False
        object.__setattr__(self, "reference_points", R)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def dimension(self) -> int:
        return self.reference_points.shape[1]

    @property
    def norm(self) -> float:
        n, d = self.reference_points.shape
        return 1.0 / (n * self.bandwidth ** d * (2.0 * math.pi) ** (d / 2.0))

    def estimate(self, x) -> float:
        return float(self.estimate_many(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def estimate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dimension:
            raise ValueError(f"expected points of dimension {self.dimension}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("query points must be finite")
        return self.norm * kernels.gauss_kernel_sum(X, self.reference_points, self.bandwidth)

    def __call__(self, x):
        return self.estimate(x)


def scott_bandwidth(X) -> float:
    """Scott's rule with the mean per-feature sample standard deviation."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    sigma = float(np.mean(np.std(X, axis=0, ddof=1)))
    if not sigma > 0:
        raise ValueError("cannot pick a bandwidth automatically for zero-variance data")
    return n ** (-1.0 / (d + 4)) * sigma


def fit_kde(data, bandwidth="auto") -> KdeModel:
    """Fit a Gaussian KDE to a ``Dataset`` (or a raw N x d array)."""
    X = getattr(data, "features", data)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 reference points")
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise ValueError(f"bandwidth must be a positive number or 'auto', got {bandwidth!r}")
        h = scott_bandwidth(X)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return KdeModel(X, h)


def estimate(model: KdeModel, x) -> float:
    return model.estimate(x)


@dataclass(frozen=True)
class WeightFunction:
    """Maps a (surrogate) density value to a nonnegative cost per unit length.

    ``neg_log`` is ``-log z``, ``identity`` is ``z``, ``inverse`` is ``1/z``;
    ``custom`` calls ``func``. Every output is clamped from below at
    ``floor`` so that shortest-path weights stay nonnegative.
    """

    kind: str = "neg_log"
    floor: float = 0.0
    func: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom weight needs a func")
        if not (self.floor >= 0 and math.isfinite(self.floor)):
            raise ValueError("floor must be finite and >= 0")

    def raw(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "neg_log":
            return -np.log(z)
        if self.kind == "identity":
            return z.copy()
        if self.kind == "inverse":
            return 1.0 / z
        return np.vectorize(self.func, otypes=[np.float64])(z)

    def __call__(self, z):
        """Vectorised weight; raises ``ValueError`` for any ``z <= 0``."""
        z = np.asarray(z, dtype=np.float64)
        if np.any(~(z > 0)):
            raise ValueError("weight function is only defined for z > 0")
        out = np.maximum(self.raw(z), self.floor)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "floor": self.floor}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get("kind", "neg_log"), floor=float(d.get("floor", 0.0)))


def apply_weight(w: WeightFunction, z: float) -> float:
    return w(z)


def volume_unit_ball(d: int) -> float:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def path_f_length(points, density: Callable, w: WeightFunction = WeightFunction()) -> float:
    """Midpoint Riemann sum of the weighted density along a polyline.

    ``density`` is called on each segment midpoint; it must be strictly
    positive there.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] < 2:
        raise ValueError("a path needs at least 2 points")
    mids = 0.5 * (P[:-1] + P[1:])
    lengths = np.linalg.norm(P[1:] - P[:-1], axis=1)
    if hasattr(density, "estimate_many"):
        dens = density.estimate_many(mids)
    else:
        dens = np.array([float(density(m if m.size > 1 else m[0])) for m in mids])
    bad = np.flatnonzero(~(dens > 0))
    if bad.size:
        raise ValueError(f"density must be positive along the path (segment {bad[0]} has {dens[bad[0]]})")
    return float(np.sum(w(dens) * lengths))
