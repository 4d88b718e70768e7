import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opo_lab import gaussian as gs
from opo_lab import noise
from opo_lab.errors import RangeError
from opo_lab.opo import OpoParams, apply_opo, output_moments

REF = OpoParams(0.4, 0.01, 0.93)
SIG = noise.PhaseNoiseParams(math.pi / 4)


def test_noise_range():
    with pytest.raises(RangeError):
        noise.PhaseNoiseParams(-0.1)
    with pytest.raises(RangeError):
        noise.PhaseNoiseParams(7.0)


def test_even_or_zero_nodes_rejected():
    for n in (0, 2, 200):
        with pytest.raises(RangeError):
            noise.dephase(1.0, SIG, n)


def test_zero_noise_is_singleton():
    mix = noise.dephase(2.0, noise.PhaseNoiseParams(0.0))
    assert len(mix) == 1 and mix.weights[0] == 1.0
    w, s = mix.components[0]
    assert s.allclose(gs.coherent(2.0))
    out = noise.dephase_then_opo(2.0, noise.PhaseNoiseParams(0.0), REF)
    assert out.components[0][1].allclose(apply_opo(REF, gs.coherent(2.0)))


def test_dephased_moments_match_closed_forms():
    a, s2 = 2.0, (math.pi / 4) ** 2
    mom = noise.mixture_moments(noise.dephase(a, SIG, 201))
    assert mom.mean[0] == pytest.approx(math.sqrt(2) * a * math.exp(-s2 / 2), rel=1e-8)
    assert mom.cov[0, 0] == pytest.approx(0.5 + a * a * (1 - math.exp(-s2)) ** 2, rel=1e-8)
    assert mom.cov[1, 1] == pytest.approx(0.5 + a * a * (1 - math.exp(-2 * s2)), rel=1e-8)
    assert mom.cov[0, 0] == pytest.approx(1.347720, abs=1e-6)
    assert mom.cov[1, 1] == pytest.approx(3.335148, abs=1e-6)
    assert abs(mom.mean[1]) < 1e-14


def test_opo_mixture_moments_match_closed_forms():
    a, s2 = 2.0, (math.pi / 4) ** 2
    m = output_moments(REF, a)
    mix = noise.dephase_then_opo(a, SIG, REF, 201)
    mom = noise.mixture_moments(mix)
    assert mom.mean[0] == pytest.approx(math.sqrt(2) * m.alpha_q_tilde * math.exp(-s2 / 2), rel=1e-8)
    var_p = m.sigma2_p + m.alpha_p_tilde ** 2 * (1 - math.exp(-2 * s2))
    assert mom.cov[1, 1] == pytest.approx(var_p, rel=1e-8)
    assert var_p == pytest.approx(0.17424, abs=1e-4)
    # every component shares the OPO covariance
    assert np.max(np.abs(mix.covs - mix.covs[0])) < 1e-12


def test_symmetric_pair_has_zero_mean_p():
    psi0 = 0.7
    mix = noise.GaussianMixture.from_components([(0.5, gs.coherent(1.0, psi0)), (0.5, gs.coherent(1.0, -psi0))])
    mom = noise.mixture_moments(mix)
    assert mom.mean[0] == pytest.approx(math.sqrt(2) * math.cos(psi0), rel=1e-15)
    assert mom.mean[1] == 0.0
    single = noise.mixture_moments(noise.GaussianMixture.single(gs.coherent(1.0, psi0)))
    assert single.allclose(gs.coherent(1.0, psi0))


@pytest.mark.parametrize("nodes", [1, 3, 51, 201, 401, 511])
def test_weights_sum_to_one(nodes):
    assert abs(noise.dephase(1.0, SIG, nodes).weights.sum() - 1.0) < 1e-12


@pytest.mark.parametrize("sigma", [0.1, 0.5, math.pi / 4, math.pi / 2])
def test_node_count_convergence(sigma):
    a = noise.mixture_moments(noise.dephase(1.5, noise.PhaseNoiseParams(sigma), 201))
    b = noise.mixture_moments(noise.dephase(1.5, noise.PhaseNoiseParams(sigma), 401))
    assert a.allclose(b, atol=1e-10)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.1, 4.0))
@settings(max_examples=30, deadline=None)
def test_total_variance_dominates(sigma, alpha):
    mix = noise.dephase(alpha, noise.PhaseNoiseParams(sigma), 51)
    mom = noise.mixture_moments(mix)
    assert abs(mom.mean[1]) < 1e-14 * max(1.0, alpha)
    assert mom.cov[0, 0] >= 0.5 - 1e-12 and mom.cov[1, 1] >= 0.5 - 1e-12


def test_rotation_of_mixture():
    mix = noise.dephase(1.0, SIG, 11).rotate(0.4)
    ref = [gs.rotate(s, 0.4) for _, s in noise.dephase(1.0, SIG, 11).components]
    for (_, s), r in zip(mix.components, ref):
        assert s.allclose(r, atol=1e-14)


def test_mixture_validation():
    with pytest.raises(RangeError):
        noise.GaussianMixture(weights=[0.5, 0.4], means=np.zeros((2, 2)), covs=np.tile(0.5 * np.eye(2), (2, 1, 1)))
    with pytest.raises(RangeError):
        noise.GaussianMixture(weights=[1.0, 0.0], means=np.zeros((2, 2)), covs=np.tile(0.5 * np.eye(2), (2, 1, 1)))
