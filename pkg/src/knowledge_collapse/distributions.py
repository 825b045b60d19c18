"""Location-scale Student-t family used as the ground-truth knowledge distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError


@dataclass(frozen=True)
class TrueDistribution:
    """Student-t with ``df`` degrees of freedom, shifted by ``location`` and
    stretched by ``scale``.

    ``df`` must exceed 2 so that the standard deviation exists; generational
    rescaling works on the standard deviation, not the scale parameter.
    """

    df: float = 10.0
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.df) and self.df > 2):
            raise ConfigError(f"df must be > 2 (got {self.df})", field="df")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigError(f"scale must be > 0 (got {self.scale})", field="scale")
        if not math.isfinite(self.location):
            raise ConfigError("location must be finite", field="location")

    @property
    def std(self) -> float:
        return dist_std(self)


@dataclass(frozen=True)
class TruncationSpec:
    """Central truncation window of half-width ``sigma_tr`` standard deviations."""

    sigma_tr: float
    lower: float
    upper: float

    @classmethod
    def for_distribution(cls, dist: TrueDistribution, sigma_tr: float) -> "TruncationSpec":
        if not (math.isfinite(sigma_tr) and sigma_tr > 0):
            raise ConfigError(f"sigma_tr must be > 0 (got {sigma_tr})", field="sigma_tr")
        half = sigma_tr * dist_std(dist)
        return cls(sigma_tr, dist.location - half, dist.location + half)


def dist_std(dist: TrueDistribution) -> float:
    if dist.df <= 2:
        raise ConfigError("standard deviation undefined for df <= 2", field="df")
    return dist.scale * math.sqrt(dist.df / (dist.df - 2.0))


def t_pdf(x, dist: TrueDistribution):
    """Density of ``dist`` at ``x`` (scalar or array)."""
    nu = dist.df
    z = (np.asarray(x, dtype=float) - dist.location) / dist.scale
    log_norm = (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * math.log(nu * math.pi)
        - math.log(dist.scale)
    )
    out = np.exp(log_norm - (nu + 1.0) / 2.0 * np.log1p(z * z / nu))
    return float(out) if out.ndim == 0 else out


def t_sample(rng: np.random.Generator, dist: TrueDistribution, size=None):
    """Draw from ``dist``. Returns a float when ``size`` is None."""
    z = rng.standard_t(dist.df, size=size)
    out = dist.location + dist.scale * z
    return float(out) if size is None else out


def truncated_sample(
    rng: np.random.Generator, dist: TrueDistribution, trunc: TruncationSpec
) -> float:
    """Draw from ``dist`` conditioned on ``trunc.lower <= x <= trunc.upper``.

    Plain rejection against the untruncated sampler. The window is central,
    so acceptance stays high for every window width of practical interest.
    """
    while True:
        x = t_sample(rng, dist)
        if trunc.lower <= x <= trunc.upper:
            return x


def truncated_samples(
    rng: np.random.Generator, dist: TrueDistribution, trunc: TruncationSpec, n: int
) -> tuple[np.ndarray, int]:
    """Draw ``n`` truncated samples; also return the number of proposals used."""
    out = np.empty(n)
    proposals = 0
    for i in range(n):
        while True:
            proposals += 1
            x = t_sample(rng, dist)
            if trunc.lower <= x <= trunc.upper:
                out[i] = x
                break
    return out, proposals


def rescale_distribution(dist: TrueDistribution, target_std: float) -> TrueDistribution:
    """Same ``df`` and location, scale chosen so the std equals ``target_std``.

    Callers holding a :class:`TruncationSpec` for the old distribution must
    rebuild it.
    """
    if not (math.isfinite(target_std) and target_std > 0):
        raise ConfigError(f"target_std must be > 0 (got {target_std})", field="target_std")
    if math.isclose(target_std, dist_std(dist), rel_tol=0.0, abs_tol=0.0):
        return dist
    scale = target_std * math.sqrt((dist.df - 2.0) / dist.df)
    return TrueDistribution(df=dist.df, location=dist.location, scale=scale)
