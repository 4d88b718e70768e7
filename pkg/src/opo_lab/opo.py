"""The OPO as a Gaussian channel on coherent seeds.

Two routes to the same output state are provided: the stationary input-output
moments and a block scheme (input coupler loss, phase-sensitive gain and phase
shift, squeezer, escape loss). ``apply_opo`` runs the block scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gaussian as gs
from .errors import NotCoherent, RangeError

D_MAX = 0.999


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


@dataclass(frozen=True)
class OpoParams:
    """Pump ratio ``d`` and coupler ratios ``eta_in``, ``eta_esc``."""

    d: float
    eta_in: float
    eta_esc: float

    def __post_init__(self):
        if not 0.0 <= self.d <= D_MAX:
            raise RangeError(f"d must lie in [0, {D_MAX}], got {self.d}")
        if not 0.0 < self.eta_in < 1.0:
            raise RangeError(f"eta_in must lie in (0, 1), got {self.eta_in}")
        if not 0.0 < self.eta_esc <= 1.0:
            raise RangeError(f"eta_esc must lie in (0, 1], got {self.eta_esc}")
        if self.eta_in + self.eta_esc > 1.0 + 1e-15:
            raise RangeError("eta_in + eta_esc must not exceed 1")

    @property
    def eta_cr(self) -> float:
        """Crystal loss ratio ``gamma_cr / gamma``."""
        return max(0.0, (1.0 - self.eta_in - self.eta_esc) / 2.0)

    @property
    def r(self) -> float:
        return squeezing_r(self.d)

    def with_d(self, d: float) -> "OpoParams":
        return OpoParams(d=d, eta_in=self.eta_in, eta_esc=self.eta_esc)


@dataclass(frozen=True)
class OpoOutputMoments:
    alpha_q_tilde: float
    alpha_p_tilde: float
    sigma2_q: float
    sigma2_p: float
    phi_in: float = 0.0

    def state(self) -> gs.GaussianState:
        mean = math.sqrt(2.0) * np.array([
            self.alpha_q_tilde * math.cos(self.phi_in),
            self.alpha_p_tilde * math.sin(self.phi_in),
        ])
        return gs.GaussianState(mean=mean, cov=np.diag([self.sigma2_q, self.sigma2_p]))


@dataclass(frozen=True)
class BlockSchemeFactors:
    gain: float
    phase_shift: float
    r: float


def squeezing_r(d: float) -> float:
    """Effective squeezing ``r(d) = ln[(1+d)/(1-d)]``."""
    if not 0.0 <= d <= D_MAX:
        raise RangeError(f"d must lie in [0, {D_MAX}], got {d}")
    return math.log1p(d) - math.log1p(-d)


def d_from_r(r: float) -> float:
    return math.tanh(r / 2.0)


def output_variances(params: OpoParams) -> tuple[float, float]:
    d, e = params.d, params.eta_esc
    return 0.5 * (1.0 + e * 4.0 * d / (1.0 - d) ** 2), 0.5 * (1.0 - e * 4.0 * d / (1.0 + d) ** 2)


def output_moments(params: OpoParams, alpha: float, phi_in: float = 0.0) -> OpoOutputMoments:
    """Closed-form stationary moments at the output coupler for a coherent seed."""
    if alpha < 0:
        raise RangeError(f"alpha must be non-negative, got {alpha}")
    amp = 2.0 * math.sqrt(params.eta_in * params.eta_esc) * alpha
    s2q, s2p = output_variances(params)
    return OpoOutputMoments(
        alpha_q_tilde=amp / (1.0 - params.d),
        alpha_p_tilde=amp / (1.0 + params.d),
        sigma2_q=s2q,
        sigma2_p=s2p,
        phi_in=phi_in,
    )


def amplified_mean(params: OpoParams, alpha: float, phi_in: float) -> tuple[float, float]:
    """Amplitude ``alpha_out`` and direction ``phi_out`` of the output mean field.

    ``<a_out> = 2 sqrt(eta_in eta_esc) alpha_out exp(i phi_out)``. The direction
    is unwrapped to stay within pi/2 of ``phi_in``, so it is continuous in
    ``phi_in``.
    """
    d = params.d
    alpha_out = alpha * math.sqrt(1.0 + 2.0 * d * math.cos(2.0 * phi_in) + d * d) / (1.0 - d * d)
    target = math.atan2((1.0 - d) * math.sin(phi_in), (1.0 + d) * math.cos(phi_in))
    return alpha_out, phi_in + wrap_angle(target - phi_in)


def block_factors(params: OpoParams, phi_in: float) -> BlockSchemeFactors:
    """Gain, phase shift and squeezing of the block scheme for input phase ``phi_in``.

    The gain uses ``-2d cos 2phi``: it acts before the squeezer, which then
    supplies the rest of the phase-sensitive amplification.
    """
    d = params.d
    gain = 2.0 * math.sqrt(1.0 - 2.0 * d * math.cos(2.0 * phi_in) + d * d) / (1.0 - d * d)
    shifted = math.atan2((1.0 + d) * math.sin(phi_in), (1.0 - d) * math.cos(phi_in))
    return BlockSchemeFactors(gain=gain, phase_shift=wrap_angle(shifted - phi_in), r=squeezing_r(d))


def coherent_amplitude(state: gs.GaussianState, tol: float = 1e-10) -> tuple[float, float]:
    """Return ``(alpha, phi)`` of a coherent state; raise NotCoherent otherwise."""
    if np.max(np.abs(state.cov - 0.5 * np.eye(2))) > tol:
        raise NotCoherent(f"input covariance {state.cov.tolist()} is not I/2")
    q, p = state.mean
    return math.hypot(q, p) / math.sqrt(2.0), math.atan2(p, q)


def apply_opo(params: OpoParams, state: gs.GaussianState) -> gs.GaussianState:
    """Send a coherent state through the block scheme of the OPO."""
    alpha, phi_in = coherent_amplitude(state)
    blocks = block_factors(params, phi_in)
    s = gs.loss(state, params.eta_in)
    # gain and phase shift displace the mean only; a coherent state stays coherent
    phase = phi_in + blocks.phase_shift
    amp = blocks.gain * float(np.hypot(*s.mean))
    s = gs.GaussianState(mean=amp * np.array([math.cos(phase), math.sin(phase)]), cov=s.cov)
    s = gs.squeeze(s, blocks.r)
    return gs.loss(s, params.eta_esc)
