import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwaddress.benchmarking import (
    QubitChannel, RbScenario, channel_table, clifford_group, fit_rb, ms_pulse_channel,
    pulse_channel, random_sequence, rb_decay, run_rb, sequence_error, sequence_error_exact,
)
from mwaddress.errors import InvalidParameterError
from mwaddress.hamiltonians import DriveParams
from mwaddress.lindblad import MotionalMode
from mwaddress.pulses import build_schedule

TWO_PI = 2 * np.pi


def test_clifford_group_closure():
    g = clifford_group()
    assert len(g) == 24
    for i in range(24):
        assert g.compose[i, g.inverse[i]] == 0
        assert g.compose[g.inverse[i], i] == 0
    with pytest.raises(InvalidParameterError):
        g.index_of(np.diag([1, np.exp(1j * np.pi / 4)]))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 20), st.integers(0, 10_000))
def test_recovery_inverts_sequence(length, seed):
    seq, rec = random_sequence(length, seed)
    assert sequence_error(seq, rec, [None] * length) < 1e-12


def test_same_seed_same_sequence():
    assert random_sequence(10, 7) == random_sequence(10, 7)
    assert random_sequence(10, 7) != random_sequence(10, 8)


def test_identity_channel_has_no_error():
    ch = QubitChannel.identity()
    assert ch.average_infidelity() <= 1e-9
    assert ch.trace_error() < 1e-15
    assert ch.choi_min_eig() > -1e-15
    assert ch.pauli_transfer() == pytest.approx(np.eye(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 23))
def test_unitary_channel_from_probes(k):
    u = clifford_group().unitaries[k]
    ref = QubitChannel.unitary(u)
    probes = [np.array(p) for p in ([[1, 0], [0, 0]], [[0, 0], [0, 1]],
                                    [[0.5, 0.5], [0.5, 0.5]], [[0.5, -0.5j], [0.5j, 0.5]])]
    images = np.array([u @ p @ u.conj().T for p in probes])
    assert QubitChannel.from_probe_images(images).superop == pytest.approx(ref.superop, abs=1e-12)


def test_pulse_channel_is_cptp():
    sc = RbScenario()
    ch = pulse_channel(sc.schedule(), sc.drive, sc.mode, fock_dim=20)
    assert ch.trace_error() < 1e-8
    assert ch.choi_min_eig() > -1e-8
    assert 0 < ch.average_infidelity() < 1e-3


def test_heating_increases_pulse_error():
    sc = RbScenario()
    errs = []
    for rate in (0.0, 100.0, 370.0):
        mode = MotionalMode(n_bar=0.1, heating_rate=rate)
        errs.append(pulse_channel(sc.schedule(), sc.drive, mode, fock_dim=20).average_infidelity())
    assert errs[0] < errs[1] < errs[2]


def test_undriven_pulse_is_identity():
    drive = DriveParams(omega_sb=0.0)
    ch = pulse_channel(build_schedule(1e-4, 0, with_dd=False), drive, MotionalMode(), fock_dim=6)
    assert ch.average_infidelity() < 1e-9


def test_ms_channel_guard_trips_on_tiny_cutoff():
    from mwaddress.errors import ConvergenceError
    drive = DriveParams(omega_sb=TWO_PI * 380, delta=TWO_PI * 770)
    with pytest.raises(ConvergenceError):
        ms_pulse_channel(drive, MotionalMode(heating_rate=370.0), fock_dim=3)


def test_fit_recovers_decay():
    lengths = np.array([1, 5, 10, 15, 20])
    y = rb_decay(lengths, 2e-4, 7e-5)
    eps, err, e0, ok, resid = fit_rb(lengths, y)
    assert ok
    assert eps == pytest.approx(7e-5, rel=1e-6)
    assert e0 == pytest.approx(2e-4, rel=1e-4)


def test_channel_model_tracks_exact_sequence():
    # the channel model drops qubit-motion correlations between pulses; the
    # known gap is about 30 % on short sequences
    sc = RbScenario(fock_dim=20)
    table = channel_table(sc)
    block = sc.schedule().total_duration
    seq, rec = random_sequence(4, 3)
    chans = [table.at(sc.mode.n_bar + sc.mode.heating_rate * k * block) for k in range(4)]
    approx = sequence_error(seq, rec, chans)
    exact = sequence_error_exact(seq, rec, sc)
    assert exact > 0 and approx > 0
    assert abs(approx - exact) < 0.5 * exact


def test_rb_without_pulses_has_no_error():
    res = run_rb(RbScenario(embedded="none"), seeds=range(3), lengths=(1, 5))
    assert np.all(res.mean_error < 1e-12)


def test_rb_rejects_long_sequences_and_bad_method():
    with pytest.raises(InvalidParameterError):
        run_rb(RbScenario(embedded="none"), seeds=range(2), lengths=(1, 21))
    with pytest.raises(InvalidParameterError):
        run_rb(RbScenario(embedded="none"), seeds=range(2), lengths=(1, 2), method="magic")


def test_seed_order_does_not_change_mean():
    sc = RbScenario(fock_dim=12)
    table = channel_table(sc)
    a = run_rb(sc, seeds=[0, 1, 2], lengths=(1, 3), table=table)
    b = run_rb(sc, seeds=[2, 0, 1], lengths=(1, 3), table=table)
    assert a.mean_error == pytest.approx(b.mean_error, rel=1e-12)
