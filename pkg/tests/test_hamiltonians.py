import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwaddress.errors import InfeasibleCompensationError, InvalidParameterError
from mwaddress.hamiltonians import (
    DriveParams, SpectatorTransition, ac_zeeman_imbalance, ac_zeeman_imbalance_numeric,
    ac_zeeman_shift, build_dd, build_off_resonant, build_sdf, carrier_excursion,
    net_pi_shift, pi_shift_per_amp2, sdf_decomposition, spectator_shift,
)
from mwaddress.quantum import SIGMA_X, SIGMA_Y, embed_qubit, fock_operators

TWO_PI = 2 * np.pi
phases = st.floats(-2 * np.pi, 2 * np.pi)


def comm_norm(a, b):
    return np.linalg.norm(a.data @ b.data - b.data @ a.data)


@settings(max_examples=50)
@given(st.floats(0, 1e4), st.floats(0, 1e6), st.floats(-1e4, 1e4), phases, phases, phases,
       st.floats(0, 1e-2))
def test_hamiltonians_hermitian(sb, dd, delta, pdd, pf, pg, t):
    p = DriveParams(omega_sb=sb, omega_dd=dd, delta=delta, phi_dd=pdd, phi_field=pf, phi_grad=pg)
    for h in (build_sdf(p, t, 6), build_dd(p, 6), build_dd(p, 6, -1),
              build_off_resonant(p, t, TWO_PI * 5.77e6, 6)):
        assert np.max(np.abs(h.data - h.data.conj().T)) <= 1e-12 * max(1.0, np.max(np.abs(h.data)))


def test_sdf_reduces_to_sigma_x_force():
    p = DriveParams(omega_sb=3.0)
    a, ad, _ = fock_operators(5)
    expected = 1.5 * np.kron(SIGMA_X, a.data + ad.data)
    assert np.allclose(build_sdf(p, 0.7, 5).data, expected)
    assert not np.any(build_sdf(DriveParams(), 0.1, 5).data)


def test_sdf_oscillation_flips_at_half_period():
    p = DriveParams(omega_sb=1.0, delta=TWO_PI * 770)
    h0 = build_sdf(p, 0.0, 4).data
    h1 = build_sdf(p, 1 / (2 * 770), 4).data
    assert np.allclose(h1, -h0, atol=1e-12)


@given(st.integers(-4, 4))
def test_commutes_at_multiples_of_pi(k):
    sdf = build_sdf(DriveParams(omega_sb=1.0), 0.0, 8)
    dd = build_dd(DriveParams(omega_dd=50.0, phi_dd=k * np.pi), 8)
    assert comm_norm(sdf, dd) <= 1e-12


def test_quadrature_does_not_commute():
    sdf = build_sdf(DriveParams(omega_sb=1.0), 0.0, 8)
    dd = build_dd(DriveParams(omega_dd=50.0, phi_dd=np.pi / 2), 8)
    assert comm_norm(sdf, dd) > 1


def test_dd_forms():
    p = DriveParams(omega_dd=4.0)
    assert np.allclose(build_dd(p, 3).data, 2.0 * np.kron(SIGMA_X, np.eye(3)))
    q = p.with_(phi_dd=np.pi / 2)
    assert np.allclose(build_dd(q, 3).data, embed_qubit(2.0 * SIGMA_Y, 3).data)
    assert np.allclose(build_dd(p, 3, walsh_sign=-1).data, build_dd(p.with_(phi_dd=np.pi), 3).data)


@settings(max_examples=50)
@given(st.floats(0, 1e3), st.floats(-1e3, 1e3), phases, phases, st.floats(0, 1e-2))
def test_sdf_decomposition_reconstructs(sb, delta, pg, pdd, t):
    p = DriveParams(omega_sb=sb, delta=delta, phi_grad=pg, phi_dd=pdd)
    along, across = sdf_decomposition(p, t, 5)
    assert np.allclose((along + across).data, build_sdf(p, t, 5).data, atol=1e-12, rtol=0)
    dd = build_dd(p.with_(omega_dd=1.0), 5)
    assert comm_norm(along, dd) <= 1e-12 * max(1.0, sb)


def test_off_resonant_carrier():
    p = DriveParams(omega_sb=TWO_PI * 380, eta=1.25e-3)
    assert p.carrier_rabi == pytest.approx(TWO_PI * 304e3)
    wm = TWO_PI * 5.77e6
    t0 = np.pi / 2 / wm
    assert np.allclose(build_off_resonant(p, t0, wm, 3).data, 0, atol=1e-6)
    with pytest.raises(InvalidParameterError):
        build_off_resonant(p.with_(eta=0.0), 0.0, wm, 3)
    assert carrier_excursion(p.carrier_rabi, wm) == pytest.approx(2 * (304e3 / 5.77e6) ** 2)


def test_ac_zeeman_imbalance_examples():
    k = pi_shift_per_amp2(TWO_PI * 304e3, TWO_PI * 5.77e6)
    assert k == pytest.approx(ac_zeeman_shift(TWO_PI * 304e3, TWO_PI * 5.77e6))
    assert ac_zeeman_imbalance(k, 0.0) == 1.0
    r = ac_zeeman_imbalance(k, TWO_PI * 50)
    assert net_pi_shift(r, k) + TWO_PI * 50 == pytest.approx(0, abs=1e-9)
    assert r == pytest.approx(ac_zeeman_imbalance_numeric(k, TWO_PI * 50), rel=1e-12)
    r2 = ac_zeeman_imbalance(k, TWO_PI * 100)
    assert r2 ** 2 - 1 == pytest.approx(2 * (r ** 2 - 1), rel=1e-12)


def test_ac_zeeman_infeasible():
    with pytest.raises(InfeasibleCompensationError):
        ac_zeeman_imbalance(1.0, 2.0)
    with pytest.raises(InvalidParameterError):
        ac_zeeman_imbalance(0.0, 1.0)


def test_spectator_shift_sums():
    s = [SpectatorTransition(10.0, 1.0), SpectatorTransition(-20.0, 2.0)]
    assert spectator_shift(2.0, s) == pytest.approx(4 / 40 + 16 / -80)


def test_drive_params_validation():
    with pytest.raises(InvalidParameterError):
        DriveParams(omega_sb=-1)
    assert DriveParams(phi_dd=3 * np.pi).phi_dd == pytest.approx(np.pi)
