"""Sampling oracle for heterodyne and homodyne records on Gaussian mixtures."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import RangeError
from .estimation import HomodyneModel
from .noise import GaussianMixture

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class SampleConfig:
    n_samples: int
    seed: int = 0
    bins: int = 64
    chunks: Optional[int] = None  # None: one stream; k: k spawned streams

    def __post_init__(self):
        if self.n_samples < 1:
            raise RangeError(f"n_samples must be positive, got {self.n_samples}")
        if self.bins < 8:
            raise RangeError(f"bins must be at least 8, got {self.bins}")
        if not 0 <= self.seed < 2 ** 64:
            raise RangeError("seed must be an unsigned 64-bit integer")
        if self.chunks is not None and self.chunks < 1:
            raise RangeError("chunks must be positive")


def rng_metadata(cfg: SampleConfig) -> dict:
    return {"algorithm": RNG_ALGORITHM, "seed": cfg.seed, "chunks": cfg.chunks}


def _streams(cfg: SampleConfig) -> list[tuple[np.random.Generator, int]]:
    """Generators with their sample counts; one stream unless chunking is requested."""
    if cfg.chunks is None:
        return [(np.random.Generator(np.random.PCG64(cfg.seed)), cfg.n_samples)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chunks)
    sizes = np.full(cfg.chunks, cfg.n_samples // cfg.chunks)
    sizes[: cfg.n_samples % cfg.chunks] += 1
    return [(np.random.Generator(np.random.PCG64(s)), int(n)) for s, n in zip(seeds, sizes)]


def _components(rng: np.random.Generator, weights: np.ndarray, n: int) -> np.ndarray:
    if len(weights) == 1:
        return np.zeros(n, dtype=int)
    idx = np.searchsorted(np.cumsum(weights), rng.random(n), side="right")
    return np.minimum(idx, len(weights) - 1)


def sample_heterodyne_points(mix: GaussianMixture, cfg: SampleConfig) -> np.ndarray:
    """Phase-space points ``(q, p)`` distributed by the Husimi function of ``mix``."""
    chol = np.linalg.cholesky(mix.covs + 0.5 * np.eye(2))
    out = []
    for rng, n in _streams(cfg):
        k = _components(rng, mix.weights, n)
        z = rng.standard_normal((n, 2))
        out.append(mix.means[k] + np.einsum("nij,nj->ni", chol[k], z))
    return np.concatenate(out)


def sample_heterodyne(mix: GaussianMixture, cfg: SampleConfig) -> np.ndarray:
    """Heterodyne phase outcomes in (-pi, pi]."""
    pts = sample_heterodyne_points(mix, cfg)
    return np.arctan2(pts[:, 1], pts[:, 0])


def sample_homodyne(mix: GaussianMixture, theta: float, phi: float, cfg: SampleConfig) -> np.ndarray:
    """Outcomes of ``x_phi`` on the ``theta``-rotated mixture."""
    mu, var, _, _ = HomodyneModel(mix, theta, phi).marginals()
    sd = np.sqrt(var)
    out = []
    for rng, n in _streams(cfg):
        k = _components(rng, mix.weights, n)
        out.append(mu[k] + sd[k] * rng.standard_normal(n))
    return np.concatenate(out)


def phase_histogram(samples: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Bin probabilities over (-pi, pi] and the bin edges."""
    edges = np.linspace(-math.pi, math.pi, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    return counts / len(samples), edges


def empirical_fi(mix: GaussianMixture, theta: float, phi: float, h: float, cfg: SampleConfig) -> float:
    """Histogram estimate of the homodyne Fisher information at ``theta``.

    Samples at ``theta +- h`` share one seed, so the difference of the two
    histograms is not swamped by independent sampling noise. Accuracy is
    about ten percent.
    """
    if not 1e-3 <= h <= 1e-1:
        raise RangeError(f"h must lie in [1e-3, 1e-1], got {h}")
    plus = sample_homodyne(mix, theta + h, phi, cfg)
    minus = sample_homodyne(mix, theta - h, phi, cfg)
    lo = min(plus.min(), minus.min())
    hi = max(plus.max(), minus.max())
    edges = np.linspace(lo, hi, cfg.bins + 1)
    cp, _ = np.histogram(plus, bins=edges)
    cm, _ = np.histogram(minus, bins=edges)
    p_plus, p_minus = cp / len(plus), cm / len(minus)
    mid = 0.5 * (p_plus + p_minus)
    keep = mid > 0
    return float(np.sum((p_plus[keep] - p_minus[keep]) ** 2 / mid[keep]) / (2.0 * h) ** 2)


def records_csv(values: np.ndarray, column: str) -> str:
    """Raw-record dump with header ``index,<column>``."""
    buf = io.StringIO()
    buf.write(f"index,{column}\n")
    for i, v in enumerate(values):
        buf.write(f"{i},{float(v)!r}\n")
    return buf.getvalue()
