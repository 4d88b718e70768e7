"""Phase-shift estimation with OPO-processed probes.

The phase shift ``theta`` is encoded by the rotation ``R_theta`` of the
quadrature moments and read out by homodyne detection of
``x_phi = cos(phi) q + sin(phi) p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import simpson

from . import gaussian as gs
from .errors import IntegrationNotConverged, RangeError, SingularPurity
from .noise import DEFAULT_NODES, GaussianMixture, PhaseNoiseParams, dephase_then_opo
from .numerics import bisect, golden_max
from .opo import D_MAX, OpoParams, apply_opo, output_moments, squeezing_r, d_from_r

SIGMA_SPAN = 12.0
PROB_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Quantum Fisher information

def rotation_derivatives(state: gs.GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of mean and covariance of ``rotate(state, theta)`` at ``theta = 0``."""
    G = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return G @ state.mean, G @ state.cov + state.cov @ G.T


def qfi_gaussian(state: gs.GaussianState, d_mean, d_cov, d_purity: Optional[float] = None) -> float:
    """QFI of a one-parameter single-mode Gaussian model.

    Args:
        state: the state at the parameter value of interest.
        d_mean, d_cov: parameter derivatives of the first and second moments.
        d_purity: derivative of the purity; computed from ``d_cov`` when omitted.
    """
    cov = state.cov
    d_mean = np.asarray(d_mean, dtype=float)
    d_cov = np.asarray(d_cov, dtype=float)
    inv = np.linalg.inv(cov)
    mu = gs.purity(state)
    M = inv @ d_cov
    if d_purity is None:
        d_purity = -0.5 * mu * float(np.trace(M))
        if abs(d_purity) < 1e-13 * max(1.0, np.abs(d_cov).max()):
            d_purity = 0.0
    h = 0.5 * float(np.trace(M @ M)) / (1.0 + mu * mu) + float(d_mean @ inv @ d_mean)
    if d_purity != 0.0:
        if mu > 1.0 - 1e-12:
            raise SingularPurity("purity derivative is non-zero at a pure state")
        h += 2.0 * d_purity ** 2 / (1.0 - mu ** 4)
    return h


def qfi_rotation(state: gs.GaussianState, theta: float = 0.0) -> float:
    """QFI for a phase shift; rotations keep the purity fixed, so its derivative is zero."""
    s = gs.rotate(state, theta)
    d_mean, d_cov = rotation_derivatives(s)
    return qfi_gaussian(s, d_mean, d_cov, d_purity=0.0)


def qfi_noiseless(opo: OpoParams, alpha: float) -> float:
    m = output_moments(opo, alpha)
    sq, sp = m.sigma2_q, m.sigma2_p
    return 4.0 * (sq - sp) ** 2 / (1.0 + 4.0 * sp * sq) + 2.0 * m.alpha_q_tilde ** 2 / sp


def opo_state(opo: OpoParams, alpha: float) -> gs.GaussianState:
    return apply_opo(opo, gs.coherent(alpha, 0.0))


def energy(opo: OpoParams, alpha: float) -> float:
    """Mean photon number of the OPO output for a real coherent seed."""
    return gs.mean_photons(opo_state(opo, alpha))


# ---------------------------------------------------------------------------
# Homodyne statistics

@dataclass(frozen=True)
class HomodyneModel:
    """Outcome law of ``x_phi`` on the ``theta``-rotated mixture.

    Every component contributes a normal law with mean ``c^T R m`` and
    variance ``c^T R V R^T c`` where ``c = (cos phi, sin phi)``.
    """

    mixture: GaussianMixture
    theta: float
    phi: float

    def marginals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Component means, variances and their theta-derivatives."""
        t = self.phi + self.theta
        u = np.array([math.cos(t), math.sin(t)])  # c^T R_theta
        du = np.array([-math.sin(t), math.cos(t)])
        m, V = self.mixture.means, self.mixture.covs
        mu = m @ u
        var = np.einsum("i,kij,j->k", u, V, u)
        dmu = m @ du
        dvar = 2.0 * np.einsum("i,kij,j->k", du, V, u)
        return mu, var, dmu, dvar

    def pdf(self, x) -> np.ndarray:
        mu, var, _, _ = self.marginals()
        return _mixture_pdf(np.asarray(x, dtype=float), self.mixture.weights, mu, var)

    def dpdf(self, x) -> np.ndarray:
        """Analytic theta-derivative of the density."""
        mu, var, dmu, dvar = self.marginals()
        x = np.asarray(x, dtype=float)[..., None]
        z = x - mu
        g = self.mixture.weights * np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * math.pi * var)
        return np.sum(g * (z * dmu / var + 0.5 * dvar / var * (z * z / var - 1.0)), axis=-1)

    def cdf(self, x) -> np.ndarray:
        from scipy.special import ndtr
        mu, var, _, _ = self.marginals()
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(self.mixture.weights * ndtr((x - mu) / np.sqrt(var)), axis=-1)

    def support(self) -> tuple[float, float]:
        mu, var, _, _ = self.marginals()
        sd = np.sqrt(var)
        return float(np.min(mu - SIGMA_SPAN * sd)), float(np.max(mu + SIGMA_SPAN * sd))

    def shifted(self, dtheta: float) -> "HomodyneModel":
        return HomodyneModel(self.mixture, self.theta + dtheta, self.phi)


def _mixture_pdf(x, w, mu, var):
    x = x[..., None]
    return np.sum(w * np.exp(-0.5 * (x - mu) ** 2 / var) / np.sqrt(2.0 * math.pi * var), axis=-1)


def gaussian_fisher(dmu: float, var: float, dvar: float) -> float:
    """Fisher information of a normal law with parameter-dependent mean and variance."""
    return dmu * dmu / var + dvar * dvar / (2.0 * var * var)


def fi_homodyne_noiseless(opo: OpoParams, alpha: float, theta: float, phi: float) -> float:
    model = HomodyneModel(GaussianMixture.single(opo_state(opo, alpha)), theta, phi)
    mu, var, dmu, dvar = model.marginals()
    return gaussian_fisher(dmu[0], var[0], dvar[0])


def _fisher_integral(model: HomodyneModel, points: int, derivative: str, h: float) -> float:
    lo, hi = model.support()
    x = np.linspace(lo, hi, points)
    p = model.pdf(x)
    if derivative == "analytic":
        dp = model.dpdf(x)
    elif derivative == "finite-difference":
        dp = (model.shifted(h).pdf(x) - model.shifted(-h).pdf(x)) / (2.0 * h)
    else:
        raise RangeError(f"unknown derivative mode {derivative!r}")
    keep = p > PROB_FLOOR
    integrand = np.zeros_like(p)
    integrand[keep] = dp[keep] ** 2 / p[keep]
    return float(simpson(integrand, x=x))


def fi_homodyne_noisy(probe: GaussianMixture, theta: float, phi: float, points: int = 4001,
                      derivative: str = "analytic", h: float = 1e-5,
                      rtol: float = 1e-6, max_doublings: int = 4) -> float:
    """Fisher information of homodyne detection of ``x_phi`` on a mixture probe.

    Composite Simpson over the union of component means +-12 standard
    deviations; the grid is refined until one doubling changes the result by
    at most ``rtol``.
    """
    model = HomodyneModel(probe, theta, phi)
    prev = _fisher_integral(model, points, derivative, h)
    for _ in range(max_doublings):
        points = 2 * points - 1
        cur = _fisher_integral(model, points, derivative, h)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise IntegrationNotConverged(f"Fisher integral still changing at {points} points")


# ---------------------------------------------------------------------------
# Optimised homodyne quadrature

class QuadratureChoice(NamedTuple):
    phi_max: float
    fi: float
    branch: int


def fi_branches(opo: OpoParams, alpha: float) -> tuple[float, float, float]:
    """Return ``(F1, F2, cos_chi)`` for the two candidate quadratures."""
    m = output_moments(opo, alpha)
    sq, sp, a2 = m.sigma2_q, m.sigma2_p, m.alpha_q_tilde ** 2
    f1 = 2.0 * a2 / sp
    D = sq - sp
    if D == 0.0:
        return f1, math.nan, math.nan
    cos_chi = (D ** 3 + sq * a2 * (sq + sp)) / ((sq + sp) * D ** 2 + sq * a2 * D)
    f2 = (D ** 2 + sq * a2) ** 2 / (2.0 * sq * sp * D ** 2)
    return f1, f2, cos_chi


def optimized_quadrature(opo: OpoParams, alpha: float, theta: float = 0.0) -> QuadratureChoice:
    """Homodyne angle maximising the noiseless Fisher information.

    Below the squeezing threshold the optimum sits at ``pi/2 - theta``; above
    it the maximum splits and ``pi/2 - theta - chi/2`` is returned.
    """
    f1, f2, cos_chi = fi_branches(opo, alpha)
    if opo.d > 0 and abs(cos_chi) <= 1.0:
        return QuadratureChoice(math.pi / 2 - theta - math.acos(cos_chi) / 2, f2, 2)
    return QuadratureChoice(math.pi / 2 - theta, f1, 1)


def numeric_optimum(opo: OpoParams, alpha: float, theta: float = 0.0,
                    scan_points: int = 256, tol: float = 1e-7) -> tuple[float, float]:
    """Maximise the noiseless FI over ``phi`` by coarse scan plus golden-section.

    The FI has period pi in ``phi``; the scan covers ``pi/2 - theta + (-pi/2, 0]``
    so the returned angle is the branch on the same side as the closed form.
    """
    f = lambda p: fi_homodyne_noiseless(opo, alpha, theta, p)
    centre = math.pi / 2 - theta
    grid = centre - math.pi / 2 + math.pi / 2 * np.arange(scan_points + 1) / scan_points
    vals = np.array([f(p) for p in grid])
    i = int(np.argmax(vals))
    step = grid[1] - grid[0]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, scan_points)]
    if i == scan_points:
        hi = grid[-1] + step
    phi = golden_max(f, lo, hi, tol)
    return phi, f(phi)


def branch_residual(r: float, alpha: float, eta_in: float, eta_esc: float) -> float:
    """``alpha_q~ - (S_q - S_p)/sqrt(S_q)``; the split branch exists where this is <= 0."""
    m = output_moments(OpoParams(d_from_r(r), eta_in, eta_esc), alpha)
    return m.alpha_q_tilde - (m.sigma2_q - m.sigma2_p) / math.sqrt(m.sigma2_q)


def threshold_r(alpha: float, eta_in: float, eta_esc: float, tol: float = 1e-10) -> float:
    """Squeezing ``r`` above which the optimal quadrature leaves ``pi/2 - theta``."""
    return bisect(lambda r: branch_residual(r, alpha, eta_in, eta_esc),
                  1e-9, squeezing_r(D_MAX), tol)


# ---------------------------------------------------------------------------
# Bounds and summaries

def dephasing_qfi_bound(N: float, sigma: float) -> float:
    """Upper bound on the QFI of a dephased probe without OPO."""
    if N < 0 or sigma <= 0:
        raise RangeError("requires N >= 0 and sigma > 0")
    return 4.0 * N / (1.0 + 4.0 * N * sigma ** 2)


def relative_fluctuation(f_noisy: float, f_noiseless: float) -> float:
    if f_noiseless == 0:
        raise ZeroDivisionError("noiseless Fisher information is zero")
    return abs(f_noisy - f_noiseless) / f_noiseless


def cramer_rao(fisher: float, M: int = 1) -> float:
    """Variance bound ``1/(M F)`` for ``M`` repetitions."""
    if fisher <= 0:
        raise RangeError(f"Fisher information must be positive, got {fisher}")
    if M < 1:
        raise RangeError(f"M must be a positive integer, got {M}")
    return 1.0 / (M * fisher)


@dataclass(frozen=True)
class EstimationReport:
    qfi: float
    fi: float
    phi_max: float
    energy: float
    bound: Optional[float] = None
    epsilon: Optional[float] = None
    fi_noiseless: Optional[float] = None
    branch: Optional[int] = None


def noiseless_report(opo: OpoParams, alpha: float, theta: float = 0.0) -> EstimationReport:
    choice = optimized_quadrature(opo, alpha, theta)
    return EstimationReport(qfi=qfi_noiseless(opo, alpha), fi=choice.fi, phi_max=choice.phi_max,
                            energy=energy(opo, alpha), fi_noiseless=choice.fi,
                            branch=choice.branch)


def noisy_report(opo: OpoParams, alpha: float, sigma: float, theta: float = 0.0,
                 nodes: int = DEFAULT_NODES) -> EstimationReport:
    """Homodyne FI of the dephased OPO probe at the noiseless optimal quadrature.

    ``energy`` is the noiseless output photon number, the abscissa used for
    the scaling comparisons; ``bound`` is the no-OPO dephasing QFI bound at
    that energy.
    """
    base = noiseless_report(opo, alpha, theta)
    probe = dephase_then_opo(alpha, PhaseNoiseParams(sigma), opo, nodes)
    f_n = fi_homodyne_noisy(probe, theta, base.phi_max)
    return EstimationReport(
        qfi=base.qfi, fi=f_n, phi_max=base.phi_max, energy=base.energy,
        bound=dephasing_qfi_bound(base.energy, sigma) if sigma > 0 else None,
        epsilon=relative_fluctuation(f_n, base.fi), fi_noiseless=base.fi, branch=base.branch,
    )


def d_for_energy(opo: OpoParams, alpha: float, N: float, tol: float = 1e-13) -> float:
    """Pump ratio giving output photon number ``N`` at fixed seed and couplers."""
    return bisect(lambda d: energy(opo.with_d(d), alpha) - N, 0.0, D_MAX, tol)
