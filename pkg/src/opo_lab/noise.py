"""Gaussian phase diffusion as a quadrature-discretised mixture of rotated coherent states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from . import gaussian as gs
from .errors import RangeError
from .numerics import gauss_hermite
from .opo import OpoParams, apply_opo

DEFAULT_NODES = 201


@dataclass(frozen=True)
class PhaseNoiseParams:
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 2 * math.pi:
            raise RangeError(f"sigma must lie in [0, 2pi], got {self.sigma}")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Convex combination of Gaussian states stored as stacked arrays.

    Attributes:
        weights: shape (K,), positive, summing to one.
        means: shape (K, 2).
        covs: shape (K, 2, 2).
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        m = np.array(self.means, dtype=float).reshape(-1, 2)
        c = np.array(self.covs, dtype=float).reshape(-1, 2, 2)
        if not (w.ndim == 1 and len(w) == len(m) == len(c) and len(w) > 0):
            raise RangeError("mixture arrays must agree in length and be non-empty")
        if np.any(w <= 0):
            raise RangeError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise RangeError(f"mixture weights sum to {w.sum()}, not 1")
        for a in (w, m, c):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    @classmethod
    def from_components(cls, components: Iterable[tuple[float, gs.GaussianState]]) -> "GaussianMixture":
        comps = list(components)
        return cls(
            weights=[w for w, _ in comps],
            means=[s.mean for _, s in comps],
            covs=[s.cov for _, s in comps],
        )

    @classmethod
    def single(cls, state: gs.GaussianState) -> "GaussianMixture":
        return cls.from_components([(1.0, state)])

    def __len__(self):
        return len(self.weights)

    @property
    def components(self) -> list[tuple[float, gs.GaussianState]]:
        return list(self._iter_components())

    def _iter_components(self) -> Iterator[tuple[float, gs.GaussianState]]:
        for w, m, c in zip(self.weights, self.means, self.covs):
            yield float(w), gs.GaussianState(mean=m, cov=c)

    def rotate(self, theta: float) -> "GaussianMixture":
        R = gs.rotation_matrix(theta)
        return GaussianMixture(
            weights=self.weights,
            means=self.means @ R.T,
            covs=np.einsum("ij,kjl,ml->kim", R, self.covs, R),
        )


@lru_cache(maxsize=32)
def _psi_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_hermite(nodes)
    keep = rule.weights > 0
    t, w = rule.nodes[keep], rule.weights[keep]
    return t, w / w.sum()


def phase_kicks(sigma: float, nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Angles and weights discretising the normal law N(0, sigma^2)."""
    if nodes < 1 or nodes % 2 == 0:
        raise RangeError(f"nodes must be a positive odd integer, got {nodes}")
    if sigma == 0.0:
        return np.zeros(1), np.ones(1)
    t, w = _psi_rule(nodes)
    return math.sqrt(2.0) * sigma * t, w


def dephase(alpha: float, noise: PhaseNoiseParams, nodes: int = DEFAULT_NODES) -> GaussianMixture:
    """Dephased coherent state as a mixture of ``coherent(alpha, psi_i)``."""
    psi, w = phase_kicks(noise.sigma, nodes)
    return GaussianMixture.from_components(
        (wi, gs.coherent(alpha, p)) for wi, p in zip(w, psi)
    )


def dephase_then_opo(alpha: float, noise: PhaseNoiseParams, opo: OpoParams,
                     nodes: int = DEFAULT_NODES) -> GaussianMixture:
    """Dephased coherent state sent through the OPO, component by component."""
    psi, w = phase_kicks(noise.sigma, nodes)
    return GaussianMixture.from_components(
        (wi, apply_opo(opo, gs.coherent(alpha, p))) for wi, p in zip(w, psi)
    )


def mixture_moments(mix: GaussianMixture) -> gs.GaussianState:
    """Exact mean and covariance of a mixture (law of total variance)."""
    w = mix.weights
    mean = w @ mix.means
    dev = mix.means - mean
    cov = np.einsum("k,kij->ij", w, mix.covs) + np.einsum("k,ki,kj->ij", w, dev, dev)
    return gs.GaussianState(mean=mean, cov=cov)
