"""Phase measurements on (dephased, amplified) coherent states.

Direct route: the heterodyne phase POVM, whose outcome density is the phase
marginal of the Husimi Q-function, summarised by the half width at half
maximum of its central peak. Indirect route: two independent homodyne
detections of q and p combined into ``atan(<p>/<q>)`` with an error from
first-order variance propagation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import gaussian as gs
from .errors import NoBracket, NoHalfCrossing, NormalizationError, NoThreshold, RangeError
from .noise import DEFAULT_NODES, GaussianMixture, PhaseNoiseParams, dephase, dephase_then_opo
from .numerics import bisect, gauss_legendre, golden_max
from .opo import D_MAX, OpoParams, output_moments, squeezing_r

DEFAULT_GRID = 2048
PANEL_ORDER = 16
RADIAL_RTOL = 1e-10
MAX_PANELS = 1024
_CHUNK = 4_000_000  # max (angle x component x node) evaluations held in memory


@lru_cache(maxsize=None)
def _unit_panel() -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_legendre(PANEL_ORDER)
    return 0.5 * (rule.nodes + 1.0), 0.5 * rule.weights


def _panel_nodes(panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = _unit_panel()
    starts = np.arange(panels)[:, None] / panels
    return (starts + x / panels).ravel(), np.tile(w / panels, panels)


class _RadialModel:
    """Per-component quadratic-exponent coefficients of the Q-function along a ray.

    Along the ray ``sqrt(2) zeta (cos phi, sin phi)`` each component contributes
    ``zeta exp(-A zeta^2 + B zeta - C)``; the radial integral runs over
    ``[0, zeta_max]`` restricted to the bracket ``zeta* +- 10 s`` around the
    Gaussian factor's centre, outside of which the integrand is below e^-50
    of its peak.
    """

    def __init__(self, mix: GaussianMixture):
        W = mix.covs + 0.5 * np.eye(2)
        self.weights = mix.weights
        self.Winv = np.linalg.inv(W)
        self.norm = mix.weights / (math.pi * np.sqrt(np.linalg.det(W)))
        self.means = mix.means
        self.C = 0.5 * np.einsum("ki,kij,kj->k", mix.means, self.Winv, mix.means)
        lam_max = np.linalg.eigvalsh(W)[:, -1]
        self.zeta_max = (np.linalg.norm(mix.means, axis=1) + 10.0 * np.sqrt(lam_max)) / math.sqrt(2.0)

    def _coefficients(self, u: np.ndarray):
        A = np.einsum("pi,kij,pj->pk", u, self.Winv, u)
        B = math.sqrt(2.0) * np.einsum("pi,kij,kj->pk", u, self.Winv, self.means)
        centre = B / (2.0 * A)
        width = 10.0 / np.sqrt(2.0 * A)
        lo = np.clip(centre - width, 0.0, self.zeta_max)
        hi = np.clip(centre + width, 0.0, self.zeta_max)
        hi = np.where(hi > lo, hi, np.minimum(lo + width, self.zeta_max))
        return A, B, lo, hi

    def _integrals(self, coeffs, panels: int) -> np.ndarray:
        A, B, lo, hi = coeffs
        x, w = _panel_nodes(panels)
        span = hi - lo
        centre = B / (2.0 * A)
        peak = np.minimum(B * centre / 2.0 - self.C, 0.0)  # max of the exponent, <= 0
        z = lo[..., None] + span[..., None] * x  # (P, K, n)
        g = z - centre[..., None]
        np.square(g, out=g)
        g *= -A[..., None]
        g += peak[..., None]
        np.exp(g, out=g)
        g *= z
        return (g @ w) * span * self.norm  # (P, K)

    def density(self, phi: np.ndarray) -> np.ndarray:
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        out = np.empty(phi.shape)
        K = len(self.weights)
        step = max(1, _CHUNK // (K * PANEL_ORDER * 8))
        for start in range(0, phi.size, step):
            sl = slice(start, start + step)
            u = np.stack([np.cos(phi[sl]), np.sin(phi[sl])], axis=-1)
            coeffs = self._coefficients(u)
            panels = 2
            prev = self._integrals(coeffs, panels).sum(axis=1)
            while True:
                panels *= 2
                cur = self._integrals(coeffs, panels).sum(axis=1)
                if np.all(np.abs(cur - prev) <= RADIAL_RTOL * np.abs(cur)) or panels >= MAX_PANELS:
                    break
                prev = cur
            out[sl] = cur
        return out


def density(mix: GaussianMixture, phi) -> np.ndarray:
    """Heterodyne phase density ``p(phi)`` of a Gaussian mixture at arbitrary angles."""
    return _RadialModel(mix).density(phi)


def phase_grid(grid_size: int) -> np.ndarray:
    """Uniform grid on (-pi, pi] including pi."""
    return -math.pi + 2.0 * math.pi * np.arange(1, grid_size + 1) / grid_size


@dataclass(frozen=True, eq=False)
class PhaseDistribution:
    """Sampled phase density with summary statistics.

    ``hwhm`` is NaN when the density never falls to half its central peak.
    Calling the distribution evaluates the continuous density.
    """

    phi_grid: np.ndarray
    density: np.ndarray
    norm_error: float
    peak_location: float
    hwhm: float
    mixture: GaussianMixture = field(repr=False)
    _radial: _RadialModel = field(repr=False, default=None)

    def __call__(self, phi) -> np.ndarray:
        return self._radial.density(phi)


def phase_density(mix: GaussianMixture, grid_size: int = DEFAULT_GRID,
                  with_hwhm: bool = True) -> PhaseDistribution:
    """Evaluate the heterodyne phase density on a uniform grid of ``grid_size`` angles."""
    if grid_size < 64:
        raise RangeError(f"grid_size must be at least 64, got {grid_size}")
    model = _RadialModel(mix)
    phi = phase_grid(grid_size)
    p = model.density(phi)
    norm_error = abs(p.sum() * 2.0 * math.pi / grid_size - 1.0)
    if norm_error > 1e-5:
        raise NormalizationError(f"phase density misses unit mass by {norm_error:.3e}")
    peak = _central_peak(model, phi, p)
    dist = PhaseDistribution(phi_grid=phi, density=p, norm_error=norm_error,
                             peak_location=peak, hwhm=math.nan, mixture=mix, _radial=model)
    if with_hwhm:
        try:
            width = hwhm(dist)
        except NoHalfCrossing:
            width = math.nan
        object.__setattr__(dist, "hwhm", width)
    return dist


def _central_peak(model: _RadialModel, phi: np.ndarray, p: np.ndarray) -> float:
    central = np.abs(phi) < math.pi / 2
    idx = np.flatnonzero(central)[np.argmax(p[central])]
    h = phi[1] - phi[0]
    lo = max(phi[idx] - h, -math.pi / 2 + 1e-12)
    hi = min(phi[idx] + h, math.pi / 2 - 1e-12)
    # the adaptive radial rule is accurate to ~1e-10 relative, so allow that much jitter
    return golden_max(lambda x: float(model.density(x)[0]), lo, hi, tol=1e-9, flat_rtol=1e-9)


def hwhm(dist: PhaseDistribution, tol: float = 1e-10) -> float:
    """Half width at half maximum of the central peak, refined on the continuous density.

    The crossing is searched on (peak, pi); NoHalfCrossing is raised if the
    density re-rises (e.g. towards a secondary peak at pi) or stays above half
    maximum.
    """
    f = lambda x: float(dist(x)[0])
    peak = dist.peak_location
    half = 0.5 * f(peak)
    phi, p = dist.phi_grid, dist.density
    ahead = np.flatnonzero(phi > peak)
    prev_x, prev_p = peak, 2.0 * half
    for i in ahead:
        if p[i] <= half:
            return bisect(lambda x: f(x) - half, prev_x, phi[i], tol) - peak
        if p[i] > prev_p + 1e-12 * half:
            raise NoHalfCrossing(f"density re-rises at phi={phi[i]:.4f} before halving")
        prev_x, prev_p = phi[i], p[i]
    raise NoHalfCrossing("density stays above half maximum up to pi")


# ---------------------------------------------------------------------------
# HWHM figures of merit and their thresholds

def gamma_seed(alpha: float, grid_size: int = 256) -> float:
    return phase_density(GaussianMixture.single(gs.coherent(alpha)), grid_size).hwhm


def gamma_dephased(alpha: float, sigma: float, nodes: int = DEFAULT_NODES,
                   grid_size: int = 256) -> float:
    return phase_density(dephase(alpha, PhaseNoiseParams(sigma), nodes), grid_size).hwhm


def gamma_out(alpha: float, sigma: float, opo: OpoParams, nodes: int = DEFAULT_NODES,
              grid_size: int = 256) -> float:
    return phase_density(dephase_then_opo(alpha, PhaseNoiseParams(sigma), opo, nodes),
                         grid_size).hwhm


def gamma_squeezed(alpha: float, opo: OpoParams, grid_size: int = 256) -> float:
    return gamma_out(alpha, 0.0, opo, grid_size=grid_size)


def _broad(g: float) -> float:
    # no half crossing: the peak is broader than any resolvable width
    return math.pi if math.isnan(g) else g


@dataclass(frozen=True)
class SignScan:
    """Dense pre-scan of a function used to bracket a root."""

    xs: np.ndarray
    values: np.ndarray

    def first_bracket(self) -> Optional[tuple[float, float]]:
        s = np.sign(self.values)
        for i in range(len(s) - 1):
            if s[i] == 0:
                return float(self.xs[i]), float(self.xs[i])
            if s[i] * s[i + 1] < 0:
                return float(self.xs[i]), float(self.xs[i + 1])
        if s[-1] == 0:
            return float(self.xs[-1]), float(self.xs[-1])
        return None


def scan(f: Callable[[float], float], lo: float, hi: float, points: int = 64) -> SignScan:
    xs = np.linspace(lo, hi, points)
    return SignScan(xs=xs, values=np.array([f(x) for x in xs]))


@dataclass(frozen=True)
class ThresholdSearch:
    root: float
    bracket: tuple[float, float]
    search_range: tuple[float, float]
    scan_points: int


def search_threshold(f: Callable[[float], float], lo: float, hi: float, tol: float,
                     points: int = 64, what: str = "threshold") -> ThresholdSearch:
    """Bracket the first sign change of ``f`` on a coarse scan, then bisect."""
    bracket = scan(f, lo, hi, points).first_bracket()
    if bracket is None:
        raise NoBracket(f"{what}: no sign change on [{lo}, {hi}]")
    a, b = bracket
    root = a if a == b else bisect(f, a, b, tol)
    return ThresholdSearch(root=root, bracket=(a, b), search_range=(lo, hi), scan_points=points)


def _scan_and_bisect(f, lo, hi, tol, points, what) -> float:
    return search_threshold(f, lo, hi, tol, points, what).root


def alpha_gap(alpha: float, opo: OpoParams, grid_size: int = 256) -> float:
    """``Gamma_0(alpha) - Gamma_S(alpha)``; positive where the noiseless OPO narrows the peak."""
    return _broad(gamma_seed(alpha, grid_size)) - _broad(gamma_squeezed(alpha, opo, grid_size))


def sigma_gap(sigma: float, alpha: float, opo: OpoParams, nodes: int = DEFAULT_NODES,
              grid_size: int = 256) -> float:
    """``Gamma_D - Gamma_out`` at noise ``sigma``; positive where the OPO helps."""
    return (_broad(gamma_dephased(alpha, sigma, nodes, grid_size))
            - _broad(gamma_out(alpha, sigma, opo, nodes, grid_size)))


def threshold_alpha(opo: OpoParams, alpha_range: tuple[float, float] = (0.1, 5.0),
                    tol: float = 1e-4, points: int = 64) -> float:
    """Seed amplitude where the noiseless OPO stops narrowing the central phase peak."""
    return _scan_and_bisect(lambda a: alpha_gap(a, opo), *alpha_range, tol, points, "alpha_th")


def threshold_sigma_direct(opo: OpoParams, alpha: float,
                           sigma_range: tuple[float, float] = (0.0, 1.2),
                           tol: float = 1e-4, points: int = 64,
                           nodes: int = DEFAULT_NODES) -> float:
    """Noise level above which the OPO output has the narrower central peak."""
    return _scan_and_bisect(lambda s: sigma_gap(s, alpha, opo, nodes), *sigma_range, tol,
                            points, "sigma_th (direct)")


# ---------------------------------------------------------------------------
# Indirect two-homodyne estimator

@dataclass(frozen=True)
class IndirectPhaseResult:
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    variance: float


def propagated_variance(mean_q: float, mean_p: float, var_q: float, var_p: float) -> float:
    """First-order variance of ``atan(<p>/<q>)``."""
    r2 = mean_q ** 2 + mean_p ** 2
    return (mean_q ** 2 * var_p + mean_p ** 2 * var_q) / r2 ** 2


def indirect_variance(kind: str, alpha: float, sigma: float = 0.0,
                      opo: Optional[OpoParams] = None) -> IndirectPhaseResult:
    """Closed-form quadrature statistics and estimator variance.

    ``kind`` is ``"seed"`` (coherent probe), ``"dephased"`` or ``"opo"``
    (dephased probe sent through the OPO).
    """
    if alpha <= 0:
        raise RangeError(f"alpha must be positive, got {alpha}")
    s2 = sigma * sigma
    if kind == "seed":
        return IndirectPhaseResult(math.sqrt(2.0) * alpha, 0.0, 0.5, 0.5, 1.0 / (4.0 * alpha ** 2))
    if kind == "dephased":
        return IndirectPhaseResult(
            mean_q=math.exp(-s2 / 2) * math.sqrt(2.0) * alpha,
            mean_p=0.0,
            var_q=0.5 + alpha ** 2 * (-math.expm1(-s2)) ** 2,
            var_p=0.5 + alpha ** 2 * (-math.expm1(-2 * s2)),
            variance=math.exp(s2) / (4.0 * alpha ** 2) + math.sinh(s2),
        )
    if kind == "opo":
        if opo is None:
            raise RangeError("kind='opo' requires OPO parameters")
        m = output_moments(opo, alpha)
        aq, ap = m.alpha_q_tilde, m.alpha_p_tilde
        return IndirectPhaseResult(
            mean_q=math.exp(-s2 / 2) * math.sqrt(2.0) * aq,
            mean_p=0.0,
            var_q=m.sigma2_q + aq ** 2 * (-math.expm1(-s2)) ** 2,
            var_p=m.sigma2_p + ap ** 2 * (-math.expm1(-2 * s2)),
            variance=math.exp(s2) * m.sigma2_p / (2.0 * aq ** 2) + (ap / aq) ** 2 * math.sinh(s2),
        )
    raise RangeError(f"unknown kind {kind!r}; expected 'seed', 'dephased' or 'opo'")


def snr_residual(d: float, eta_in: float, eta_esc: float) -> float:
    """``f(d)``: positive once the OPO improves the signal-to-noise term for every seed."""
    r = squeezing_r(d)
    return 4.0 * eta_in * eta_esc / (1.0 - d) ** 2 * (1.0 + d / eta_in * math.exp(-2.0 * r)) - 1.0


def threshold_d(eta_in: float, eta_esc: float, tol: float = 1e-12, points: int = 64) -> float:
    """Pump ratio above which the OPO improves the signal-to-noise term of the estimator."""
    OpoParams(0.0, eta_in, eta_esc)  # validates the couplers
    return _scan_and_bisect(lambda d: snr_residual(d, eta_in, eta_esc), 0.0, D_MAX, tol,
                            points, "d_th")


def threshold_sigma_indirect(alpha: float, opo: OpoParams) -> float:
    """Noise level where the dephased and OPO-processed estimator variances cross."""
    if alpha <= 0:
        raise RangeError(f"alpha must be positive, got {alpha}")
    m = output_moments(opo, alpha)
    aq2, ap2 = m.alpha_q_tilde ** 2, m.alpha_p_tilde ** 2
    num = 2.0 * alpha ** 2 * (aq2 - ap2)
    den = aq2 + 2.0 * alpha ** 2 * (aq2 - ap2 - m.sigma2_p)
    if den <= 0 or num / den <= 1.0:
        raise NoThreshold(f"no finite positive threshold (log argument {num}/{den})")
    return math.sqrt(0.5 * math.log(num / den))
