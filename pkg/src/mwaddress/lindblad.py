"""Master-equation evolution of qubits coupled to one heated motional mode.

The generator is

    d rho/dt = -i [H(t), rho] + g (D[a] + D[a^dagger]) rho,

with ``g`` the heating rate in quanta/s, so that <n> grows as n_bar + g t.
H(t) is supplied as qubit-space blocks (Q0, Qa) meaning
Q0 (x) 1 + Qa (x) a + Qa^dagger (x) a^dagger; the ladder operators are applied
by slicing, never as dense composite matrices.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit, minimize_scalar

from ._kernel import master_rhs
from .errors import ConvergenceError, IntegrationError, InvalidParameterError
from .hamiltonians import DriveParams
from .pulses import PulseSchedule, Segment
from .quantum import (
    DEFAULT_FOCK_DIM,
    SIGMA_Z,
    DensityMatrix,
    partial_trace_motion,
    sigma_phi,
    tensor_state,
    thermal_state,
)

TWO_PI = 2.0 * np.pi
CA43_MASS = 42.958766 * 1.66053906660e-27
HBAR = 1.054571817e-34

BlockFn = Callable[[float], tuple]


@dataclass(frozen=True)
class MotionalMode:
    """One motional mode.

    ``omega_m`` in rad/s, ``heating_rate`` in quanta/s, ``u_zpf`` in m,
    ``tilt_theta`` in rad.
    """

    omega_m: float = TWO_PI * 5.77e6
    n_bar: float = 0.0
    heating_rate: float = 0.0
    u_zpf: float = 4.5e-9
    tilt_theta: float = 0.0

    def __post_init__(self):
        if self.omega_m <= 0:
            raise InvalidParameterError("omega_m must be positive")
        if self.n_bar < 0 or self.heating_rate < 0:
            raise InvalidParameterError("n_bar and heating_rate must be non-negative")
        if self.u_zpf <= 0:
            raise InvalidParameterError("u_zpf must be positive")

    @classmethod
    def from_lab(cls, freq_hz: float, n_bar: float = 0.0, heating_rate: float = 0.0,
                 mass_kg: float = CA43_MASS, n_ions: int = 1,
                 tilt_deg: float = 0.0) -> MotionalMode:
        """Build from a linear frequency; u_zpf = sqrt(hbar / (2 N m w))."""
        omega = TWO_PI * freq_hz
        u_zpf = math.sqrt(HBAR / (2 * n_ions * mass_kg * omega))
        return cls(omega, n_bar, heating_rate, u_zpf, math.radians(tilt_deg))


# generic engine --------------------------------------------------------------

class _Generator:
    """Right-hand side of the master equation for a batch of states."""

    def __init__(self, qdim: int, fock_dim: int, gamma: float, batch: int = 1):
        self.shape = (batch, qdim, fock_dim, qdim * fock_dim)
        self.gamma = float(gamma)
        s = np.zeros(fock_dim)
        s[:-1] = np.sqrt(np.arange(1, fock_dim, dtype=float))
        self.s = s
        # diag(a^dag a) + diag(a a^dag) on the truncated space
        d = 2 * np.arange(fock_dim, dtype=float) + 1
        d[-1] = fock_dim - 1
        self.dsum = 0.5 * (d[:, None] + d[None, :])
        self.zero = np.zeros((qdim, qdim), dtype=complex)
        self.out = np.empty(self.shape, dtype=complex)
        self.blocks: BlockFn | None = None

    def __call__(self, t, y):
        q0, qa = self.blocks(t)
        if qa is None:
            qa = qad = self.zero
        else:
            qad = np.ascontiguousarray(qa.conj().T)
        master_rhs(y.reshape(self.shape), np.ascontiguousarray(q0, dtype=complex),
                   np.ascontiguousarray(qa, dtype=complex), qad, self.s, self.gamma,
                   self.dsum, self.out)
        return self.out.ravel().copy()


@dataclass
class EvolutionResult:
    rho_final: DensityMatrix
    times: np.ndarray
    p0: np.ndarray
    n_mean: np.ndarray
    purity: np.ndarray
    qubit_purity: np.ndarray
    trace: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def p0_final(self) -> float:
        return float(self.p0[-1])

    @property
    def qubit_final(self) -> np.ndarray:
        return partial_trace_motion(self.rho_final)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "P0", "n_mean", "purity"])
        for row in zip(self.times, self.p0, self.n_mean, self.purity):
            w.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "t_final": float(self.times[-1]),
            "P0_final": self.p0_final,
            "n_mean_final": float(self.n_mean[-1]),
            "purity_final": float(self.purity[-1]),
            "qubit_purity_final": float(self.qubit_purity[-1]),
            "max_trace_error": float(np.max(np.abs(self.trace - 1))),
            **self.stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _observables(x: np.ndarray, q: int, m: int):
    r4 = x.reshape(q, m, q, m)
    rq = np.einsum("imjm->ij", r4)
    rm_diag = np.real(np.einsum("imim->m", r4))
    rho = x.reshape(q * m, q * m)
    return (float(np.real(rq[0, 0])), float(rm_diag @ np.arange(m)),
            float(np.real(np.vdot(rho, rho))), float(np.real(np.vdot(rq, rq))),
            float(np.real(np.trace(rq))))


def _check_tol(rel_tol: float) -> None:
    if not 1e-12 <= rel_tol <= 1e-4:
        raise InvalidParameterError(f"rel_tol must lie in [1e-12, 1e-4], got {rel_tol}")


def integrate_batch(pieces: Sequence[tuple[float, float, BlockFn]], states: np.ndarray,
                    qdim: int, gamma: float, rel_tol: float = 1e-8,
                    abs_tol: float | None = None, method: str = "DOP853") -> tuple[np.ndarray, int]:
    """Propagate Hermitian states of shape (batch, n, n) through ``pieces``.

    Returns the final states and the number of right-hand-side evaluations.
    """
    _check_tol(rel_tol)
    abs_tol = rel_tol * 1e-4 if abs_tol is None else abs_tol
    states = np.asarray(states, dtype=complex)
    batch, n, _ = states.shape
    gen = _Generator(qdim, n // qdim, gamma, batch)
    y = states.ravel().copy()
    nfev = 0
    for t0, t1, blocks in pieces:
        if t1 <= t0:
            continue
        gen.blocks = blocks
        sol = solve_ivp(gen, (t0, t1), y, method=method, t_eval=[t1],
                        rtol=rel_tol, atol=abs_tol)
        nfev += sol.nfev
        if sol.status != 0:
            raise IntegrationError(f"integrator failed: {sol.message}", float(sol.t[-1]))
        y = sol.y[:, -1]
    return y.reshape(batch, n, n), nfev


def integrate(pieces: Sequence[tuple[float, float, BlockFn]], rho0: DensityMatrix,
              gamma: float, rel_tol: float = 1e-8, abs_tol: float | None = None,
              n_samples: int = 200, method: str = "DOP853") -> EvolutionResult:
    """Integrate piecewise; each piece has its own smooth block function.

    Samples are taken on ``n_samples`` uniform times plus all piece edges.
    """
    _check_tol(rel_tol)
    abs_tol = rel_tol * 1e-4 if abs_tol is None else abs_tol
    q, m = rho0.dims
    gen = _Generator(q, m, gamma)
    t_start, t_stop = pieces[0][0], pieces[-1][1]
    uniform = np.linspace(t_start, t_stop, n_samples) if n_samples > 1 else np.array([t_stop])
    y = rho0.data.ravel().copy()
    times, obs = [t_start], [_observables(y, q, m)]
    nfev = 0
    for t0, t1, blocks in pieces:
        if t1 <= t0:
            continue
        gen.blocks = blocks
        inner = uniform[(uniform > t0) & (uniform < t1)]
        t_eval = np.concatenate([inner, [t1]])
        sol = solve_ivp(gen, (t0, t1), y, method=method, t_eval=t_eval,
                        rtol=rel_tol, atol=abs_tol)
        nfev += sol.nfev
        if sol.status != 0:
            t_fail = float(sol.t[-1]) if sol.t.size else t0
            raise IntegrationError(f"integrator failed: {sol.message}", t_fail)
        for k, tk in enumerate(sol.t):
            times.append(float(tk))
            obs.append(_observables(sol.y[:, k], q, m))
        y = sol.y[:, -1]
    obs = np.array(obs)
    rho_final = DensityMatrix(y.reshape(q * m, q * m), q, m)
    return EvolutionResult(rho_final, np.array(times), obs[:, 0], obs[:, 1], obs[:, 2],
                           obs[:, 3], obs[:, 4], {"nfev": nfev, "fock_dim": m})


# schedule-driven single-ion evolution -----------------------------------------

def segment_blocks(seg: Segment, drive: DriveParams, omega_m: float, drift: float,
                   total: float, include_off_resonant: bool = False) -> BlockFn:
    """Block function for one segment of a single-ion schedule."""
    det = 0.5 * drive.qubit_detuning * SIGMA_Z
    sb, dd = seg.sb, seg.dd
    sign = seg.walsh_sign
    if sb is not None:
        s_sb = 0.5 * drive.omega_sb * sb.amp * sigma_phi(drive.phi_grad + sb.phase)
        s_off = (drive.carrier_rabi * sb.amp
                 * sigma_phi(drive.phi_field - drive.phi_grad + sb.phase)) if include_off_resonant else None
    if dd is not None:
        s_dd = 0.5 * drive.omega_dd * dd.amp * sign * sigma_phi(drive.phi_dd + dd.phase)
        s_grad = (0.5 * drive.dd_gradient * dd.amp * sign
                  * sigma_phi(drive.phi_dd + dd.phase + np.pi / 2)) if drive.dd_gradient else None

    def env(tone, t):
        if t <= tone.start or t >= tone.end:
            return 0.0
        r = tone.ramp
        if r <= 0:
            return 1.0
        x = min(t - tone.start, tone.end - t)
        if x >= r:
            return 1.0
        return math.sin(0.5 * math.pi * x / r) ** 2

    def blocks(t):
        q0 = det.copy()
        qa = None
        if sb is not None:
            e = env(sb, t)
            if e:
                qa = (e * complex(math.cos(drive.delta * t), math.sin(drive.delta * t))) * s_sb
                if s_off is not None:
                    q0 = q0 + (e * math.cos((omega_m + drive.delta) * t)) * s_off
        if dd is not None:
            e = env(dd, t) * (1.0 + drift * t / total if drift else 1.0)
            if e:
                q0 = q0 + e * s_dd
                if s_grad is not None:
                    g = (e * complex(math.cos(omega_m * t), -math.sin(omega_m * t))) * s_grad
                    qa = g if qa is None else qa + g
        return q0, qa

    return blocks


def schedule_pieces(schedule: PulseSchedule, drive: DriveParams, mode: MotionalMode,
                    include_off_resonant: bool = False, t_offset: float = 0.0):
    total = schedule.total_duration
    pieces = []
    for seg in schedule.segments:
        fn = segment_blocks(seg, drive, mode.omega_m, schedule.dd_drift, total,
                            include_off_resonant)
        pts = seg.breakpoints()
        for a, b in zip(pts[:-1], pts[1:]):
            pieces.append((a + t_offset, b + t_offset, _shifted(fn, t_offset)))
    return pieces


def _shifted(fn: BlockFn, offset: float) -> BlockFn:
    if offset == 0:
        return fn
    return lambda t: fn(t - offset)


def initial_state(rho0, mode: MotionalMode, fock_dim: int) -> DensityMatrix:
    """Composite state; a qubit ket or 2x2 matrix is paired with a thermal mode."""
    if isinstance(rho0, DensityMatrix):
        if rho0.fock_dim == fock_dim:
            return rho0
        return pad_fock(rho0, fock_dim)
    return tensor_state(np.asarray(rho0, dtype=complex), thermal_state(mode.n_bar, fock_dim))


def pad_fock(rho: DensityMatrix, fock_dim: int) -> DensityMatrix:
    """Embed (or crop) a composite state into a different Fock cutoff."""
    q, m = rho.dims
    k = min(m, fock_dim)
    out = np.zeros((q, fock_dim, q, fock_dim), dtype=complex)
    out[:, :k, :, :k] = rho.data.reshape(q, m, q, m)[:, :k, :, :k]
    out = out.reshape(q * fock_dim, q * fock_dim)
    return DensityMatrix(out / np.trace(out), q, fock_dim)


def evolve(schedule: PulseSchedule, drive: DriveParams, mode: MotionalMode, rho0,
           rel_tol: float = 1e-8, fock_dim: int = DEFAULT_FOCK_DIM,
           include_off_resonant: bool = False, guard: bool = True,
           guard_tol: float = 1e-6, n_samples: int = 200) -> EvolutionResult:
    """Evolve one ion and its mode through ``schedule``.

    ``rho0`` is a composite DensityMatrix or a qubit state (paired with a
    thermal mode of occupation ``mode.n_bar``). With ``guard`` the run is
    repeated at twice the Fock cutoff and a change in the final qubit state
    above ``guard_tol`` raises :class:`ConvergenceError`.
    """
    state = initial_state(rho0, mode, fock_dim)
    pieces = schedule_pieces(schedule, drive, mode, include_off_resonant)
    res = integrate(pieces, state, mode.heating_rate, rel_tol, n_samples=n_samples)
    res.stats["guard_deviation"] = None
    if guard:
        big = initial_state(rho0, mode, 2 * fock_dim)
        ref = integrate(pieces, big, mode.heating_rate, rel_tol, n_samples=2)
        dev = float(np.max(np.abs(ref.qubit_final - res.qubit_final)))
        res.stats["guard_deviation"] = dev
        if dev > guard_tol:
            raise ConvergenceError("qubit state", dev, guard_tol)
    return res


def check_result(res: EvolutionResult, rel_tol: float = 1e-8) -> list[str]:
    """Invariant violations of an evolution result (empty when fine)."""
    problems = []
    terr = float(np.max(np.abs(res.trace - 1)))
    if terr > 10 * rel_tol:
        problems.append(f"trace drift {terr:.3e}")
    problems += res.rho_final.check(trace_tol=10 * rel_tol, herm_tol=1e-10)
    return problems


# analytic references and scans -----------------------------------------------

def p0_analytic(alpha, n_bar: float = 0.0):
    """P0 = (1 + exp(-2 |alpha|^2 (2 n_bar + 1))) / 2 after a resonant SDF."""
    a2 = np.abs(alpha) ** 2
    return 0.5 * (1.0 + np.exp(-2.0 * a2 * (2 * n_bar + 1)))


def fit_alpha_scale(times, p0, omega_sb: float, n_bar: float = 0.0) -> tuple[float, float]:
    """Fit P0(t) to the decay law with alpha = s Omega_SB t / 2; returns (s, stderr).

    Only the scale s is free; the occupation is held at ``n_bar``, so heating
    during the pulse shows up as s > 1.
    """
    times = np.asarray(times, dtype=float)
    p0 = np.asarray(p0, dtype=float)

    def model(t, scale):
        return p0_analytic(scale * omega_sb * t / 2, n_bar)

    popt, pcov = curve_fit(model, times, p0, p0=[1.0])
    err = float(np.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else float("nan")
    return float(popt[0]), err


def alpha_for_p0(p0: float, n_bar: float = 0.0) -> float:
    if not 0.5 < p0 <= 1.0:
        raise InvalidParameterError("target P0 must lie in (0.5, 1]")
    return math.sqrt(-math.log(2 * p0 - 1) / (2 * (2 * n_bar + 1)))


def sb_area(schedule: PulseSchedule) -> float:
    """Integral of the sideband envelope over the schedule (s)."""
    area = 0.0
    for seg in schedule.segments:
        if seg.sb is not None:
            w = seg.sb
            area += w.amp * ((w.end - w.start) - w.ramp)
    return area


def size_pulse(p0_target: float, omega_sb: float, walsh_order: int = 3,
               dd_ramp: float = 0.0, sb_ramp: float = 0.0, n_bar: float = 0.0) -> float:
    """Drive time giving ``p0_target`` without DD at delta = 0.

    Each sin^2 edge contributes half its length to the sideband area.
    """
    from .pulses import walsh_signs
    n = walsh_signs(walsh_order).n_pulses
    alpha = alpha_for_p0(p0_target, n_bar)
    area = 2 * alpha / omega_sb
    return area + n * (2 * dd_ramp + sb_ramp)


@dataclass(frozen=True)
class SuppressionScenario:
    """Walsh-k suppression experiment at the RF null.

    The suppression error oscillates with the DD rotation angle per Walsh
    segment (period pi), so a ratio r is probed over ``neighborhood``
    oscillation periods centred on r, sampled at ``n_neighbors`` points and
    refined around the largest sample.
    """

    omega_sb: float = TWO_PI * 380.0
    p0_target: float = 0.6
    walsh_order: int = 3
    dd_ramp: float = 0.0
    sb_ramp: float = 0.0
    phi_dd: float = np.pi / 2
    fock_dim: int = 12
    rel_tol: float = 1e-9
    neighborhood: float = 1.0
    n_neighbors: int = 13
    include_off_resonant: bool = False

    def pulse_duration(self) -> float:
        return size_pulse(self.p0_target, self.omega_sb, self.walsh_order, self.dd_ramp,
                          self.sb_ramp)

    def ratio_period(self) -> float:
        """Change of Omega_DD / Omega_SB that advances the per-segment DD angle by pi."""
        from .pulses import walsh_signs
        tau = self.pulse_duration() / walsh_signs(self.walsh_order).n_pulses
        return np.pi / (self.omega_sb * tau)


def suppression_error(ratio: float, sc: SuppressionScenario) -> float:
    """1 - P0 after a suppressed pulse with Omega_DD = ratio * Omega_SB."""
    from .pulses import build_schedule
    sched = build_schedule(sc.pulse_duration(), sc.walsh_order, sc.dd_ramp, sc.sb_ramp)
    drive = DriveParams(omega_sb=sc.omega_sb, omega_dd=ratio * sc.omega_sb, phi_dd=sc.phi_dd)
    res = evolve(sched, drive, MotionalMode(), np.array([1.0, 0.0]), rel_tol=sc.rel_tol,
                 fock_dim=sc.fock_dim, guard=False, n_samples=2,
                 include_off_resonant=sc.include_off_resonant)
    return max(0.0, 1.0 - res.p0_final)


def suppression_error_scan(ratio_list, scenario: SuppressionScenario | None = None):
    """Local maxima of the suppression error against the bound 8 r^-2.

    For each ratio r the error is sampled across the neighbourhood, and the
    largest value of error(r') / (8 r'^-2) is refined with a bounded scalar
    search. Returns dicts with the ratio, the maximum error in the
    neighbourhood, the bound 8 r^-2, the peak ratio ``envelope`` =
    max error(r') r'^2 / 8 with its location, and all samples.
    """
    sc = scenario or SuppressionScenario()
    half = 0.5 * sc.neighborhood * sc.ratio_period()
    out = []
    for r in ratio_list:
        if r < 1:
            raise InvalidParameterError("ratios must be >= 1")
        lo, hi = max(1.0, r - half), r + half
        local = np.linspace(lo, hi, sc.n_neighbors)
        errs = [suppression_error(x, sc) for x in local]
        scaled = np.array(errs) * local ** 2 / 8
        k = int(np.argmax(scaled))
        r_peak, env = float(local[k]), float(scaled[k])
        if 0 < k < len(local) - 1:
            opt = minimize_scalar(lambda x: -suppression_error(x, sc) * x * x / 8,
                                  bounds=(local[k - 1], local[k + 1]), method="bounded",
                                  options={"xatol": 1e-3 * (hi - lo)})
            if -opt.fun > env:
                r_peak, env = float(opt.x), float(-opt.fun)
        out.append({"ratio": float(r), "max_error": float(max(errs)), "bound": 8.0 / r ** 2,
                    "envelope": env, "peak_ratio": r_peak,
                    "samples": list(zip(local.tolist(), errs))})
    return out


def heating_only(mode: MotionalMode, duration: float, fock_dim: int = DEFAULT_FOCK_DIM,
                 rel_tol: float = 1e-10) -> EvolutionResult:
    """Evolve a qubit in |0> and a thermal mode with no drive."""
    from .pulses import delay_schedule
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evolve(delay_schedule(duration), DriveParams(), mode, np.array([1.0, 0.0]),
                      rel_tol=rel_tol, fock_dim=fock_dim, guard=False)
