"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
asserts at the stated tolerance. Criteria the model does not reach are
marked xfail(strict=True) with their assertions unchanged.
"""
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from mwaddress.benchmarking import RbScenario, ms_pulse_channel, run_rb
from mwaddress.chain import (
    ChainSpec, chain_crosstalk_map, crosstalk, crosstalk_bruteforce, evaluate_currents,
    gate_error_vs_position, magnus_vs_dynamics, optimize_currents, zeta_values,
)
from mwaddress.errors import ConvergenceError
from mwaddress.fieldmodel import field_at, measured_trap, phase_profile
from mwaddress.hamiltonians import DriveParams, build_dd, build_sdf
from mwaddress.lindblad import (
    MotionalMode, SuppressionScenario, check_result, evolve, heating_only, p0_analytic,
    size_pulse, suppression_error_scan,
)
from mwaddress.pulses import build_schedule, moment, walsh_signs

TWO_PI = 2 * math.pi
OMEGA_SB = TWO_PI * 380.0


def test_criterion_01_analytic_decay(criterion):
    t0 = time.perf_counter()
    t = 2 * 2.5 / OMEGA_SB
    res = evolve(build_schedule(t, 0, with_dd=False), DriveParams(omega_sb=OMEGA_SB),
                 MotionalMode(), np.array([1.0, 0.0]), fock_dim=30, n_samples=101)
    dev = float(np.max(np.abs(res.p0 - p0_analytic(OMEGA_SB * res.times / 2))))
    runtime = time.perf_counter() - t0
    criterion(1, "analytic decay", dev < 1e-6 and runtime < 10,
              f"max |dP0| = {dev:.2e} (< 1e-6), {runtime:.1f} s")


def test_criterion_02_phase_selective_suppression(criterion):
    t0 = time.perf_counter()
    sched = build_schedule(size_pulse(0.6, OMEGA_SB, 3), 3)
    p0 = {}
    for phi in (0.0, math.pi / 2):
        drive = DriveParams(omega_sb=OMEGA_SB, omega_dd=60 * OMEGA_SB, phi_dd=phi)
        p0[phi] = evolve(sched, drive, MotionalMode(), np.array([1.0, 0.0]), rel_tol=1e-9,
                         fock_dim=12, n_samples=2).p0_final
    runtime = time.perf_counter() - t0
    ok = p0[math.pi / 2] >= 0.99 and abs(p0[0.0] - 0.60) <= 0.01 and runtime < 60
    criterion(2, "phase-selective suppression", ok,
              f"P0(pi/2) = {p0[math.pi / 2]:.5f}, P0(0) = {p0[0.0]:.5f}, {runtime:.1f} s")


@pytest.mark.xfail(strict=True, reason="model envelope is 4 r^-2, just under half of 8 r^-2")
def test_criterion_03_suppression_scaling(criterion):
    t0 = time.perf_counter()
    scan = suppression_error_scan([10, 15, 20, 30, 50, 70, 100], SuppressionScenario())
    ratios = [row["max_error"] / row["bound"] for row in scan]
    runtime = time.perf_counter() - t0
    ok = all(0.5 <= r <= 2.0 for r in ratios) and runtime < 300
    criterion(3, "suppression scaling 8 r^-2 within x2", ok,
              "max error / bound = " + ", ".join(f"{r:.3f}" for r in ratios) + f", {runtime:.0f} s")


def test_criterion_04_crosstalk_formula(criterion):
    t0 = time.perf_counter()
    zetas = np.linspace(0, 1, 50)
    dev = max(abs(crosstalk(z) - crosstalk_bruteforce(z)) for z in zetas)
    runtime = time.perf_counter() - t0
    criterion(4, "crosstalk formula vs brute force", dev < 1e-10 and runtime < 1,
              f"max deviation {dev:.1e}, {runtime:.2f} s")


def test_criterion_05_magnus_vs_dynamics(criterion):
    t0 = time.perf_counter()
    dist = magnus_vs_dynamics(0.05)
    runtime = time.perf_counter() - t0
    criterion(5, "Magnus vs dynamics", dist < 1e-4 and runtime < 120,
              f"trace distance {dist:.2e}, {runtime:.1f} s")


def test_criterion_06_chain_crosstalk(criterion):
    t0 = time.perf_counter()
    spec = ChainSpec()
    rep = chain_crosstalk_map(spec)
    runtime = time.perf_counter() - t0
    x = spec.positions
    centre = [abs(x[p.pair[0]] + x[p.pair[1]]) / 2 for p in rep.pairs]
    rho = spearmanr(centre, [p.max_total for p in rep.pairs])[0]
    mean = rep.chain_mean
    ok = 1.04e-5 / 3 <= mean <= 3 * 1.04e-5 and rho > 0.5 and runtime < 600
    criterion(6, "chain mean crosstalk", ok,
              f"chain mean {mean:.3e} (pooled {rep.pooled_mean:.3e}), "
              f"rank corr(|pair centre|, pair max) = {rho:.2f}, {runtime:.0f} s")


@pytest.mark.xfail(strict=True, reason="first-order DD-gradient model misses the stated sensitivities")
def test_criterion_07_position_sensitivity(criterion):
    t0 = time.perf_counter()
    base = gate_error_vs_position()
    shifted = gate_error_vs_position(displacement=5e-9)
    warm = gate_error_vs_position(n_bar=0.3)
    runtime = time.perf_counter() - t0
    dn = warm - base
    ok = (3.8e-5 / 3 <= base <= 3 * 3.8e-5 and shifted > 1e-3
          and 2.7e-4 / 3 <= dn <= 3 * 2.7e-4 and runtime < 600)
    criterion(7, "gate position sensitivity", ok,
              f"error {base:.2e} at rest, {shifted:.2e} at 5 nm, +{dn:.2e} at n_bar 0.3, "
              f"{runtime:.0f} s")


@pytest.mark.xfail(strict=True, reason="heating in quanta/s leaves far more coherence than stated")
def test_criterion_08_ms_channel(criterion):
    t0 = time.perf_counter()
    drive = DriveParams(omega_sb=OMEGA_SB, delta=TWO_PI * 770.0)
    ch = ms_pulse_channel(drive, MotionalMode(n_bar=0.1, heating_rate=370.0))
    diag = np.real(np.diag(ch.apply(np.array([[1, 0], [0, 0]]))))
    plus_i = np.array([[0.5, -0.5j], [0.5j, 0.5]])
    coh = ch.apply(plus_i)[1, 0]
    runtime = time.perf_counter() - t0
    ok = (abs(diag[0] - 0.61) <= 0.02 and abs(diag[1] - 0.39) <= 0.02
          and abs(coh - 0.11j) <= 0.02 and runtime < 60)
    criterion(8, "MS pulse channel", ok,
              f"diag ({diag[0]:.3f}, {diag[1]:.3f}), coherence {coh.imag:.3f}i, {runtime:.0f} s")


def test_criterion_09_rb_bracket(criterion):
    t0 = time.perf_counter()
    sc = RbScenario()
    res = run_rb(sc, seeds=range(10))
    control = run_rb(RbScenario(drive=DriveParams(
        omega_sb=sc.drive.omega_sb, omega_dd=sc.drive.omega_dd, delta=sc.drive.delta,
        phi_dd=0.0)), seeds=range(10))
    runtime = time.perf_counter() - t0
    sat = control.mean_error[-1]
    ok = (res.fit_ok and 2.1e-5 <= res.epsilon <= 3.0e-4 and abs(sat - 0.5) <= 0.02
          and runtime < 600)
    criterion(9, "RB bracket", ok,
              f"eps = {res.epsilon:.2e} +- {res.epsilon_err:.1e}, control error {sat:.3f} "
              f"at length {res.lengths[-1]}, {runtime:.0f} s")


def _dd_only_p0(order, drift):
    s = build_schedule(1e-3, order, with_sb=False).with_drift(drift)
    res = evolve(s, DriveParams(omega_dd=TWO_PI * 152e3, phi_dd=math.pi / 2), MotionalMode(),
                 np.array([1.0, 0.0]), rel_tol=1e-10, fock_dim=2, guard=False, n_samples=2)
    return res.p0_final


def test_criterion_10_walsh(criterion):
    t0 = time.perf_counter()
    exact = all(moment(walsh_signs(n).signs, k) == 0
                for n, kmax in {1: 0, 3: 1, 7: 2, 15: 3}.items() for k in range(kmax + 1))
    f1, f3 = _dd_only_p0(1, 0.01), _dd_only_p0(3, 0.01)
    runtime = time.perf_counter() - t0
    ok = exact and f3 - f1 > 1e-6 and runtime < 60
    criterion(10, "Walsh properties", ok,
              f"moments cancel: {exact}, Walsh-3 gain under 1% drift {f3 - f1:.2e}, {runtime:.1f} s")


def test_criterion_11_field_model(criterion):
    t0 = time.perf_counter()
    geom = measured_trap(tilt_deg=None)
    mode = MotionalMode.from_lab(5.77e6)
    prof = phase_profile(geom, np.linspace(-20e-6, 20e-6, 401), mode)
    flip = abs(prof.phi_field[-1] - prof.phi_field[0])
    spread = float(np.ptp(prof.phi_grad))
    eta = field_at(geom, 0.0, mode).eta
    runtime = time.perf_counter() - t0
    ok = (abs(flip - math.pi) < 0.3 and spread < 0.1 and 1.25e-3 / 3 <= eta <= 3 * 1.25e-3
          and runtime < 1)
    criterion(11, "field model", ok,
              f"field phase flip {flip:.3f} rad, gradient phase spread {spread:.3f} rad, "
              f"eta {eta:.2e}, {runtime:.2f} s")


def test_criterion_12_property_suite(criterion):
    t0 = time.perf_counter()
    failures = []

    sched = build_schedule(size_pulse(0.6, OMEGA_SB, 3), 3)
    for phi, n_bar, rate in [(0.3, 0.2, 500.0), (math.pi / 2, 0.0, 0.0), (2.0, 0.5, 1000.0)]:
        drive = DriveParams(omega_sb=OMEGA_SB, omega_dd=20 * OMEGA_SB, phi_dd=phi)
        res = evolve(sched, drive, MotionalMode(n_bar=n_bar, heating_rate=rate),
                     np.array([1.0, 0.0]), fock_dim=20, n_samples=20)
        failures += [f"state: {p}" for p in check_result(res)]

    heat = heating_only(MotionalMode(n_bar=0.1, heating_rate=370.0), 2e-3, fock_dim=80)
    if not np.allclose(heat.n_mean, 0.1 + 370.0 * heat.times, rtol=1e-6, atol=1e-12):
        failures.append("heating not linear")

    for k in range(-2, 3):
        sdf = build_sdf(DriveParams(omega_sb=1.0), 0.0, 8).data
        dd = build_dd(DriveParams(omega_dd=50.0, phi_dd=k * math.pi), 8).data
        if np.linalg.norm(sdf @ dd - dd @ sdf) > 1e-12:
            failures.append(f"commutator nonzero at phi_DD = {k} pi")

    spec = ChainSpec()
    sol = optimize_currents(spec, (2, 9))
    for c in (0.3, 7.0):
        scaled = evaluate_currents(spec, sol.pair, c * sol.sb_currents, sol.dd_currents)
        if not np.allclose(zeta_values(scaled), zeta_values(sol), rtol=1e-9, atol=1e-15):
            failures.append(f"zeta changed under SB current scaling by {c}")

    try:
        evolve(build_schedule(4.0 / OMEGA_SB, 0, with_dd=False), DriveParams(omega_sb=OMEGA_SB),
               MotionalMode(), np.array([1.0, 0.0]), fock_dim=6, n_samples=2)
        failures.append("truncation guard did not trip at fock_dim 6")
    except ConvergenceError:
        pass

    runtime = time.perf_counter() - t0
    ok = not failures and runtime < 300
    criterion(12, "property suite", ok,
              ("all properties hold" if not failures else "; ".join(failures)) + f", {runtime:.0f} s")
