import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opo_lab import gaussian as gs
from opo_lab.errors import NegativeThermal, NotDiagonal, RangeError

angles = st.floats(-2 * math.pi, 2 * math.pi)
amps = st.floats(0, 5)


def test_vacuum():
    v = gs.vacuum()
    assert v.mean.tolist() == [0.0, 0.0]
    assert v.cov.tolist() == [[0.5, 0.0], [0.0, 0.5]]
    assert gs.purity(v) == 1.0
    assert gs.mean_photons(v) == 0.0


def test_coherent_examples():
    s = gs.coherent(2.0, 0.0)
    assert np.allclose(s.mean, [2 * math.sqrt(2), 0], rtol=0, atol=1e-15)
    assert np.array_equal(s.cov, 0.5 * np.eye(2))
    assert gs.coherent(0.0, 1.3).allclose(gs.vacuum())
    assert gs.mean_photons(s) == pytest.approx(4.0, rel=1e-15)


def test_states_are_immutable():
    s = gs.coherent(1.0)
    with pytest.raises(ValueError):
        s.mean[0] = 3.0


@pytest.mark.parametrize("cov", [[[0.5, 0.1], [0.0, 0.5]], [[0.2, 0], [0, 0.2]], [[-1, 0], [0, -1]]])
def test_invalid_covariances_rejected(cov):
    with pytest.raises(RangeError):
        gs.GaussianState(mean=[0, 0], cov=cov)


def test_negative_alpha_rejected():
    with pytest.raises(RangeError):
        gs.coherent(-1.0)


@given(angles)
def test_rotation_preserves_norm(theta):
    assert np.linalg.norm(gs.rotate(gs.coherent(1.0), theta).mean) == pytest.approx(math.sqrt(2), rel=1e-14)


def test_rotation_identity_and_group():
    s = gs.squeeze(gs.coherent(1.2, 0.4), 0.7)
    assert gs.rotate(s, 0.0).allclose(s)
    assert gs.rotate(gs.rotate(s, 0.3), 1.1).allclose(gs.rotate(s, 1.4), atol=1e-12)


@given(st.floats(-3, 3))
def test_squeezed_vacuum(r):
    s = gs.squeeze(gs.vacuum(), r)
    assert np.allclose(s.cov, np.diag([math.exp(2 * r) / 2, math.exp(-2 * r) / 2]), rtol=1e-14, atol=0)
    assert gs.purity(s) == pytest.approx(1.0, abs=1e-12)
    assert gs.mean_photons(s) == pytest.approx(math.sinh(r) ** 2, rel=1e-10, abs=1e-14)


def test_squeeze_coherent_mean():
    s = gs.squeeze(gs.coherent(1.0), math.log(2))
    assert s.mean[0] == pytest.approx(2 * math.sqrt(2), rel=1e-15)


def test_squeeze_limit():
    with pytest.raises(RangeError):
        gs.squeeze(gs.vacuum(), 20.5)


def test_loss_examples():
    s = gs.squeeze(gs.coherent(1.0, 0.3), 0.5)
    assert gs.loss(s, 1.0).allclose(s)
    assert gs.loss(s, 0.0).allclose(gs.vacuum())
    out = gs.loss(gs.coherent(2.0), 0.93)
    assert out.mean[0] == pytest.approx(math.sqrt(0.93) * 2 * math.sqrt(2), rel=1e-15)
    assert out.mean[0] == pytest.approx(2.7276, abs=1e-4)
    assert np.allclose(out.cov, 0.5 * np.eye(2), atol=1e-15)
    with pytest.raises(RangeError):
        gs.loss(s, 1.1)


@given(amps, angles, st.floats(0, 1))
def test_loss_scales_coherent_energy(alpha, phi, eta):
    s = gs.coherent(alpha, phi)
    assert gs.mean_photons(gs.loss(s, eta)) == pytest.approx(eta * alpha ** 2, rel=1e-12, abs=1e-12)


def test_thermal_purity():
    assert gs.purity(gs.thermal(0.5)) == pytest.approx(0.5)


@given(amps, angles, st.floats(-2, 2), angles, st.floats(0, 1))
@settings(max_examples=80)
def test_channel_chain_keeps_physical_state(alpha, phi, r, theta, eta):
    s = gs.coherent(alpha, phi)
    d0 = gs.det(s.cov)
    s = gs.squeeze(s, r)
    assert gs.det(s.cov) == pytest.approx(d0, rel=1e-10)
    s = gs.rotate(s, theta)
    assert gs.det(s.cov) == pytest.approx(d0, rel=1e-10)
    lossy = gs.loss(s, eta)
    # the chain starts pure, so loss can only raise the determinant
    assert gs.det(lossy.cov) >= gs.det(s.cov) - 1e-12 * gs.det(s.cov)
    assert 0 < gs.purity(lossy) <= 1 + 1e-12
    assert gs.mean_photons(lossy) >= -1e-12


def test_sts_vacuum():
    dec = gs.sts_decompose(gs.vacuum())
    assert (dec.beta, dec.xi, dec.nbar) == (0.0, 0.0, 0.0)


def test_sts_opo_output_values():
    s = gs.GaussianState(mean=[math.sqrt(2) * 0.64291, 0.0], cov=np.diag([2.56667, 0.12041]))
    dec = gs.sts_decompose(s)
    assert dec.xi == pytest.approx(0.25 * math.log(2.56667 / 0.12041), rel=1e-14)
    assert dec.xi == pytest.approx(0.764866, abs=1e-6)
    assert dec.nbar == pytest.approx((2 * math.sqrt(2.56667 * 0.12041) - 1) / 2, rel=1e-14)
    assert dec.nbar == pytest.approx(0.055925, abs=1e-6)
    assert dec.beta == pytest.approx(0.64291, rel=1e-14)


@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(0, 5))
def test_sts_round_trip(beta, xi, nbar):
    src = gs.SqueezedThermalDecomposition(beta, xi, nbar).to_state()
    back = gs.sts_decompose(src).to_state()
    assert np.allclose(back.mean, src.mean, rtol=1e-10, atol=1e-10)
    assert np.allclose(back.cov, src.cov, rtol=1e-10, atol=1e-10)


def test_sts_errors():
    with pytest.raises(NotDiagonal):
        gs.sts_decompose(gs.rotate(gs.squeeze(gs.vacuum(), 0.5), 0.3))
    # a covariance slightly below the uncertainty bound passes validation but gives nbar < 0
    barely = gs.GaussianState(mean=[0, 0], cov=np.diag([0.5 - 4e-13, 0.5 - 4e-13]))
    with pytest.raises(NegativeThermal):
        gs.sts_decompose(barely, tol=1e-14)
