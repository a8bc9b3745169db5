import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwaddress.chain import (
    ChainSpec, crosstalk, crosstalk_bruteforce, evaluate_currents, magnus_unitary,
    magnus_vs_dynamics, optimize_currents, pair_crosstalk, quadrature_floor, residual_strength,
    zeta_values,
)
from mwaddress.errors import InvalidParameterError

SPEC = ChainSpec()
PLUS = np.array([1, 1]) / math.sqrt(2)
MINUS = np.array([1, -1]) / math.sqrt(2)


def test_residual_strength_examples():
    assert residual_strength(2.0, 0.3, 0.3) == pytest.approx(2.0)
    assert abs(residual_strength(2.0, math.pi / 2, 0.0)) < 1e-15
    assert residual_strength(1.0, math.pi / 2 - 1e-3, 0.0) == pytest.approx(1e-3, rel=1e-6)
    assert quadrature_floor(100.0, 1.0) == pytest.approx(8e-4)


def test_crosstalk_examples():
    assert crosstalk(0.0) == 0.0
    assert crosstalk(1.0) == pytest.approx(1 / 3)
    assert crosstalk(0.01) == pytest.approx(8.2246e-5, rel=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1))
def test_crosstalk_matches_bruteforce(zeta):
    assert abs(crosstalk(zeta) - crosstalk_bruteforce(zeta)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1))
def test_magnus_unitary_properties(zeta):
    u = magnus_unitary(zeta)
    assert np.linalg.norm(u.conj().T @ u - np.eye(4)) < 1e-12
    pp = np.kron(PLUS, PLUS)
    pm = np.kron(PLUS, MINUS)
    # S has eigenvalue 1 - zeta on |++> and 1 + zeta on |+->
    assert u @ pp == pytest.approx(np.exp(-1j * np.pi / 8 * (1 - zeta) ** 2) * pp, abs=1e-12)
    assert u @ pm == pytest.approx(np.exp(-1j * np.pi / 8 * (1 + zeta) ** 2) * pm, abs=1e-12)
    rel = (pp.conj() @ u @ pp) / (pm.conj() @ u @ pm)
    assert rel == pytest.approx(np.exp(1j * np.pi * zeta / 2), abs=1e-12)


def test_magnus_zero_zeta_leaves_spectator_alone():
    u = magnus_unitary(0.0)
    single = np.exp(-1j * np.pi / 8) * np.eye(2)
    assert u == pytest.approx(np.kron(single, np.eye(2)), abs=1e-12)


@pytest.mark.parametrize("zeta", [0.0, 0.1])
def test_magnus_matches_dynamics(zeta):
    assert magnus_vs_dynamics(zeta) < 1e-4


def test_optimizer_addresses_pair():
    sol = optimize_currents(SPEC, (4, 7))
    assert sol.converged
    i, j = sol.pair
    assert sol.omega_sb[i] == pytest.approx(sol.omega_sb[j], rel=1e-10)
    assert sol.omega_sb[i] == pytest.approx(2 * math.pi * 2e3, rel=1e-10)
    z = zeta_values(sol)
    assert z[i] == pytest.approx(1.0, abs=1e-9) and z[j] == pytest.approx(1.0, abs=1e-9)
    others = [k for k in range(SPEC.n_ions) if k not in (i, j)]
    assert np.all(z[others] < 0.05)
    floors = quadrature_floor(sol.omega_dd[others], sol.omega_sb[others])
    assert np.max(floors) == pytest.approx(SPEC.floor_target, rel=1e-9)


def test_symmetric_pair_gives_symmetric_currents():
    sol = optimize_currents(SPEC, (4, 12))
    assert sol.sb_currents[0] == pytest.approx(sol.sb_currents[2], rel=1e-8)
    assert sol.dd_currents[0] == pytest.approx(sol.dd_currents[2], rel=1e-8)


def test_zero_epsilon_puts_non_addressed_in_quadrature():
    spec = ChainSpec(epsilon=0.0)
    sol = optimize_currents(spec, (4, 7))
    others = [k for k in range(spec.n_ions) if k not in sol.pair]
    d = np.angle(np.exp(1j * (sol.phi_dd - sol.phi_grad)))[others]
    assert np.max(np.abs(np.abs(d) - math.pi / 2)) < 1e-9
    pc = pair_crosstalk(spec, (4, 7))
    assert np.max(pc.cos_channel[pc.non_addressed]) < 1e-15
    assert np.max(pc.total[pc.non_addressed]) <= spec.floor_target * (1 + 1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0))
def test_sb_current_scaling_leaves_zeta_unchanged(c):
    sol = optimize_currents(SPEC, (2, 9))
    scaled = evaluate_currents(SPEC, sol.pair, c * sol.sb_currents, sol.dd_currents)
    assert scaled.residual == pytest.approx(c * sol.residual, rel=1e-9, abs=1e-9 * np.max(np.abs(sol.residual)))
    assert zeta_values(scaled) == pytest.approx(zeta_values(sol), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("pair", [(3, 10), (0, 16), (8, 9)])
def test_pair_order_does_not_matter(pair):
    a = pair_crosstalk(SPEC, pair)
    b = pair_crosstalk(SPEC, pair[::-1])
    assert a.total == pytest.approx(b.total, rel=1e-6, abs=1e-15)


def test_crosstalk_values_bounded():
    pc = pair_crosstalk(SPEC, (1, 5))
    vals = pc.cos_channel[pc.non_addressed]
    assert np.all(vals >= 0) and np.all(vals <= 1 / 3)


def test_bad_pairs_rejected():
    with pytest.raises(InvalidParameterError):
        optimize_currents(SPEC, (3, 3))
    with pytest.raises(InvalidParameterError):
        optimize_currents(SPEC, (0, 17))
    with pytest.raises(InvalidParameterError):
        ChainSpec(n_ions=1)
