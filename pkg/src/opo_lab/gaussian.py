"""Single-mode Gaussian states in the quadrature picture.

Convention: ``[q, p] = i``, vacuum covariance ``I/2`` and the coherent state
``|alpha e^{i phi}>`` has mean ``sqrt(2) * alpha * (cos phi, sin phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeThermal, NotDiagonal, RangeError

SYM_TOL = 1e-12
DET_TOL = 1e-12
MAX_SQUEEZE = 20.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First and second moments of a single-mode Gaussian state.

    Attributes:
        mean: quadrature expectations ``(<q>, <p>)``.
        cov: symmetrised covariance matrix; the vacuum has ``I/2``.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean)
        cov = _frozen(self.cov)
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise RangeError("GaussianState needs a length-2 mean and a 2x2 covariance")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise RangeError("GaussianState moments must be finite")
        if abs(cov[0, 1] - cov[1, 0]) > SYM_TOL * max(1.0, np.abs(cov).max()):
            raise RangeError(f"covariance not symmetric: {cov}")
        cov = _frozen(0.5 * (cov + cov.T))
        if cov[0, 0] <= 0 or cov[1, 1] <= 0 or det(cov) < 0.25 - DET_TOL * max(1.0, det(cov)):
            raise RangeError(f"covariance violates the uncertainty bound: det={det(cov)}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.mean, other.mean, rtol=0, atol=atol)
                    and np.allclose(self.cov, other.cov, rtol=0, atol=atol))

    def __repr__(self):
        return f"GaussianState(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True)
class SqueezedThermalDecomposition:
    """Displaced squeezed thermal parameters ``D(beta) S(xi) nu(nbar) S(xi)^+ D(beta)^+``."""

    beta: float
    xi: float
    nbar: float

    def to_state(self) -> GaussianState:
        scale = 0.5 + self.nbar
        return GaussianState(
            mean=(math.sqrt(2.0) * self.beta, 0.0),
            cov=np.diag([scale * math.exp(2 * self.xi), scale * math.exp(-2 * self.xi)]),
        )


def det(cov) -> float:
    return float(cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def vacuum() -> GaussianState:
    return GaussianState(mean=np.zeros(2), cov=0.5 * np.eye(2))


def thermal(nbar: float) -> GaussianState:
    if nbar < 0:
        raise RangeError("nbar must be non-negative")
    return GaussianState(mean=np.zeros(2), cov=(0.5 + nbar) * np.eye(2))


def coherent(alpha: float, phi: float = 0.0) -> GaussianState:
    """Coherent state ``|alpha e^{i phi}>`` with real amplitude ``alpha >= 0``."""
    if alpha < 0:
        raise RangeError(f"alpha must be non-negative, got {alpha}")
    return GaussianState(
        mean=math.sqrt(2.0) * alpha * np.array([math.cos(phi), math.sin(phi)]),
        cov=0.5 * np.eye(2),
    )


def rotate(state: GaussianState, theta: float) -> GaussianState:
    """Apply the rotation ``R_theta = [[cos, sin], [-sin, cos]]`` to the moments."""
    R = rotation_matrix(theta)
    return GaussianState(mean=R @ state.mean, cov=R @ state.cov @ R.T)


def squeeze(state: GaussianState, r: float) -> GaussianState:
    """Scale ``q`` by ``e^r`` and ``p`` by ``e^-r``."""
    if abs(r) > MAX_SQUEEZE:
        raise RangeError(f"|r| must not exceed {MAX_SQUEEZE}, got {r}")
    S = np.diag([math.exp(r), math.exp(-r)])
    return GaussianState(mean=S @ state.mean, cov=S @ state.cov @ S)


def loss(state: GaussianState, eta: float) -> GaussianState:
    """Pure-loss channel of transmissivity ``eta`` (beam splitter with vacuum)."""
    if not 0.0 <= eta <= 1.0:
        raise RangeError(f"transmissivity must lie in [0, 1], got {eta}")
    return GaussianState(
        mean=math.sqrt(eta) * state.mean,
        cov=eta * state.cov + (1.0 - eta) * 0.5 * np.eye(2),
    )


def purity(state: GaussianState) -> float:
    return 1.0 / (2.0 * math.sqrt(det(state.cov)))


def mean_photons(state: GaussianState) -> float:
    """Mean photon number ``(Tr cov + |mean|^2 - 1) / 2``."""
    return 0.5 * (float(np.trace(state.cov)) + float(state.mean @ state.mean) - 1.0)


def sts_decompose(state: GaussianState, tol: float = 1e-10) -> SqueezedThermalDecomposition:
    """Displaced squeezed thermal parameters of a state with diagonal covariance.

    The displacement is read from the q-quadrature; rotate the state onto its
    principal axes first.
    """
    cov = state.cov
    if abs(cov[0, 1]) > tol:
        raise NotDiagonal(f"off-diagonal covariance {cov[0, 1]} exceeds {tol}")
    if abs(state.mean[1]) > tol:
        raise RangeError("displacement must lie on the q axis (mean_p = 0)")
    vq, vp = cov[0, 0], cov[1, 1]
    xi = 0.25 * math.log(vq / vp)
    nbar = 0.5 * (2.0 * math.sqrt(vq * vp) - 1.0)
    if nbar < -tol:
        raise NegativeThermal(f"computed nbar={nbar} is negative")
    return SqueezedThermalDecomposition(
        beta=float(state.mean[0]) / math.sqrt(2.0), xi=xi, nbar=max(nbar, 0.0)
    )
