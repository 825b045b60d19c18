"""Densities on a uniform grid: exact evaluation, Gaussian KDE, Hellinger
distance and second moments.

Everything is integrated with the trapezoid rule on the shared grid, and
every density is renormalised on the grid so that tail mass outside the grid
does not bias comparisons.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .distributions import TrueDistribution, t_pdf
from .errors import ConfigError, UsageError

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GridSpec:
    grid_min: float = -10.0
    grid_max: float = 10.0
    n_points: int = 1024

    def __post_init__(self):
        if not self.grid_min < self.grid_max:
            raise ConfigError("grid_min must be < grid_max", field="grid")
        if int(self.n_points) != self.n_points or self.n_points < 64:
            raise ConfigError("grid n_points must be an integer >= 64", field="grid")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.grid_min, self.grid_max, int(self.n_points))

    @property
    def step(self) -> float:
        return (self.grid_max - self.grid_min) / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(int(self.n_points), self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w


@dataclass(frozen=True)
class KdeSpec:
    """Gaussian KDE settings.

    ``bandwidth`` is either ``"silverman"`` or a fixed positive float.
    """

    bandwidth: Union[str, float] = "silverman"
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        bw = self.bandwidth
        if isinstance(bw, str):
            if bw != "silverman":
                raise ConfigError(f"unknown bandwidth rule {bw!r}", field="bandwidth")
        elif not (math.isfinite(bw) and bw > 0):
            raise ConfigError("fixed bandwidth must be > 0", field="bandwidth")


@dataclass(frozen=True, eq=False)
class GriddedPdf:
    grid: GridSpec
    densities: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.densities, dtype=float)
        if d.shape != (self.grid.n_points,):
            raise UsageError("densities do not match the grid size")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise UsageError("densities must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "densities", d)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def integral(self) -> float:
        return float(self.grid.weights @ self.densities)

    def __eq__(self, other):
        if not isinstance(other, GriddedPdf):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.densities, other.densities)

    def to_csv(self, path, fmt="{:.9g}"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "density"])
            for xi, di in zip(self.x, self.densities):
                w.writerow([fmt.format(xi), fmt.format(di)])

    @classmethod
    def from_arrays(cls, x, densities) -> "GriddedPdf":
        x = np.asarray(x, dtype=float)
        grid = GridSpec(float(x[0]), float(x[-1]), len(x))
        if not np.allclose(grid.x, x, rtol=0, atol=1e-6 * grid.step):
            raise UsageError("x values are not a uniform grid")
        return cls(grid, np.asarray(densities, dtype=float))


def normalize(grid: GridSpec, densities: np.ndarray) -> GriddedPdf:
    total = grid.weights @ densities
    if not total > 0:
        raise UsageError("density has no mass on the grid")
    return GriddedPdf(grid, densities / total)


def _sorted_quantile(s: np.ndarray, q: float) -> float:
    # numpy's default "linear" method, without np.percentile's overhead
    pos = q * (s.size - 1)
    lo = int(pos)
    hi = min(lo + 1, s.size - 1)
    return float(s[lo] + (s[hi] - s[lo]) * (pos - lo))


def silverman_bandwidth(samples: np.ndarray, floor: float) -> float:
    """``1.06 * min(std, IQR/1.34) * n**(-1/5)`` for sorted ``samples``.

    When one spread estimate is zero the other is used; when both are zero
    (e.g. a single sample) ``floor`` stands in for the spread.
    """
    n = samples.size
    std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    iqr = (_sorted_quantile(samples, 0.75) - _sorted_quantile(samples, 0.25)) / 1.34
    spread = min(std, iqr) if std > 0 and iqr > 0 else max(std, iqr)
    if spread <= 0:
        spread = floor
    return 1.06 * spread * n ** (-0.2)


# Kernels are evaluated only within this many bandwidths of their centre;
# exp(-KERNEL_CUTOFF**2 / 2) ~ 1e-14 is below double-precision relevance.
KERNEL_CUTOFF = 8.0


def kde_densities(samples: np.ndarray, grid: GridSpec, h: float) -> np.ndarray:
    """Unnormalised Gaussian KDE of ``samples`` on ``grid``.

    Each kernel is evaluated on the ``2*half+1`` grid points around its
    nearest node and scattered with ``bincount`` into a padded accumulator,
    so no bounds masking is needed.
    """
    step = grid.step
    n_pts = int(grid.n_points)
    pos = (samples - grid.grid_min) / step
    centre = np.rint(pos)
    # the window never needs to reach further than the farthest grid node
    off = max(0.0, -float(centre.min()), float(centre.max()) - (n_pts - 1))
    half = int(min(math.ceil(KERNEL_CUTOFF * h / step), n_pts + off))
    # centres beyond the window are clipped; their kernels never reach the grid
    centre = np.clip(centre, -half - 1, n_pts + half)
    k = np.arange(-half, half + 1)
    z = (centre - pos)[:, None] + k[None, :]
    z *= step / h
    np.square(z, out=z)
    z *= -0.5
    np.exp(z, out=z)
    pad = 2 * half + 1
    idx = (centre.astype(np.int64) + pad)[:, None] + k[None, :]
    dens = np.bincount(idx.ravel(), weights=z.ravel(), minlength=n_pts + 2 * pad)
    return dens[pad:pad + n_pts] / (samples.size * h * SQRT_2PI)


def kde_bandwidth(sorted_samples: np.ndarray, spec: KdeSpec) -> float:
    """Effective bandwidth, never below half a grid step: a narrower kernel
    cannot be resolved on the grid and may miss every node."""
    if spec.bandwidth == "silverman":
        h = silverman_bandwidth(sorted_samples, floor=spec.grid.step)
    else:
        h = float(spec.bandwidth)
    return max(h, 0.5 * spec.grid.step)


def fit_kde(samples, spec: KdeSpec = KdeSpec()) -> GriddedPdf:
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise UsageError("fit_kde needs at least one sample")
    # sorting makes the float summation independent of input order
    s = np.sort(s)
    h = kde_bandwidth(s, spec)
    return normalize(spec.grid, kde_densities(s, spec.grid, h))


def eval_grid(dist: TrueDistribution, grid: GridSpec = GridSpec()) -> GriddedPdf:
    return normalize(grid, t_pdf(grid.x, dist))


def _check_same_grid(*pdfs: GriddedPdf):
    g = pdfs[0].grid
    for p in pdfs[1:]:
        if p.grid != g:
            raise UsageError("densities live on different grids")


def hellinger_sqrt(sqrt_p: np.ndarray, sqrt_q: np.ndarray, weights: np.ndarray) -> float:
    """Hellinger distance from pre-computed square-root densities."""
    d = sqrt_p - sqrt_q
    h2 = 0.5 * float(weights @ (d * d))
    return min(1.0, max(0.0, math.sqrt(max(h2, 0.0))))


def hellinger(p: GriddedPdf, q: GriddedPdf) -> float:
    """Hellinger distance ``sqrt(0.5 * integral (sqrt p - sqrt q)^2)``, in [0, 1]."""
    _check_same_grid(p, q)
    return hellinger_sqrt(np.sqrt(p.densities), np.sqrt(q.densities), p.grid.weights)


def pdf_mean(p: GriddedPdf) -> float:
    return float(p.grid.weights @ (p.x * p.densities))


def pdf_variance(p: GriddedPdf) -> float:
    w = p.grid.weights * p.densities
    mass = float(w.sum())
    x = p.x
    mu = float(w @ x) / mass
    return max(0.0, float(w @ ((x - mu) ** 2)) / mass)
