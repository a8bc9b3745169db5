"""Single-qubit randomized benchmarking with embedded motional pulses.

Cliffords are perfect instantaneous unitaries. Each embedded pulse acts as a
qubit channel obtained from the master equation; the mode heats between
pulses, so pulse ``k`` of a sequence sees a thermal mode of occupation
n_bar + heating_rate * (k - 1) * block_duration.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import InvalidParameterError
from .hamiltonians import DriveParams
from .lindblad import MotionalMode, integrate_batch, schedule_pieces
from .pulses import PulseSchedule, build_schedule, delay_schedule
from .quantum import SIGMA_X, SIGMA_Y, SIGMA_Z, thermal_state

TWO_PI = 2.0 * np.pi

# qubit inputs whose images fix a channel: |0>, |1>, |+>, |+i>
_PROBES = np.array([
    [[1, 0], [0, 0]],
    [[0, 0], [0, 1]],
    [[0.5, 0.5], [0.5, 0.5]],
    [[0.5, -0.5j], [0.5j, 0.5]],
], dtype=complex)


# Clifford group --------------------------------------------------------------

def _phase_normalize(u: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(u.ravel()) > 1e-9)
    ph = u.ravel()[idx] / abs(u.ravel()[idx])
    return u / ph


def _key(u: np.ndarray) -> tuple:
    return tuple(np.round(_phase_normalize(u), 8).ravel().tolist())


@dataclass(frozen=True)
class CliffordGroup:
    """The 24 single-qubit Cliffords (mod global phase) with lookup tables.

    ``compose[i, j]`` is the index of U_i U_j; ``inverse[i]`` the index of U_i^-1.
    """

    unitaries: np.ndarray
    compose: np.ndarray
    inverse: np.ndarray

    def index_of(self, u: np.ndarray) -> int:
        k = _key(u)
        for i, v in enumerate(self.unitaries):
            if _key(v) == k:
                return i
        raise InvalidParameterError("unitary is not a Clifford")

    def __len__(self) -> int:
        return len(self.unitaries)


_GROUP: CliffordGroup | None = None


def clifford_group() -> CliffordGroup:
    """Generate the group from H and S by breadth-first closure."""
    global _GROUP
    if _GROUP is not None:
        return _GROUP
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)
    elems = [np.eye(2, dtype=complex)]
    keys = {_key(elems[0]): 0}
    frontier = [elems[0]]
    while frontier:
        nxt = []
        for u in frontier:
            for g in (h, s):
                v = _phase_normalize(g @ u)
                k = _key(v)
                if k not in keys:
                    keys[k] = len(elems)
                    elems.append(v)
                    nxt.append(v)
        frontier = nxt
    n = len(elems)
    compose = np.empty((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            compose[i, j] = keys[_key(elems[i] @ elems[j])]
    inverse = np.array([int(np.where(compose[i] == 0)[0][0]) for i in range(n)])
    _GROUP = CliffordGroup(np.array(elems), compose, inverse)
    return _GROUP


# channels -------------------------------------------------------------------

@dataclass(frozen=True)
class QubitChannel:
    """Linear qubit map stored as a 4x4 superoperator on row-major vec(rho)."""

    superop: np.ndarray

    @classmethod
    def from_probe_images(cls, images: np.ndarray) -> QubitChannel:
        """Build from the images of |0><0|, |1><1|, |+><+|, |+i><+i|."""
        e00, e11, pp, pi = images
        mid = 0.5 * (e00 + e11)
        e01 = (pp - mid) + 1j * (pi - mid)
        e10 = (pp - mid) - 1j * (pi - mid)
        s = np.empty((4, 4), dtype=complex)
        for col, img in enumerate((e00, e01, e10, e11)):
            s[:, col] = img.ravel()
        return cls(s)

    @classmethod
    def identity(cls) -> QubitChannel:
        return cls(np.eye(4, dtype=complex))

    @classmethod
    def unitary(cls, u: np.ndarray) -> QubitChannel:
        return cls(np.kron(u, u.conj()))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.superop @ np.asarray(rho, dtype=complex).ravel()).reshape(2, 2)

    def then(self, other: QubitChannel) -> QubitChannel:
        """This channel followed by ``other``."""
        return QubitChannel(other.superop @ self.superop)

    def choi(self) -> np.ndarray:
        """Choi matrix sum_ij E_ij (x) Lambda(E_ij)."""
        j = np.zeros((4, 4), dtype=complex)
        for a in range(2):
            for b in range(2):
                img = self.superop[:, 2 * a + b].reshape(2, 2)
                e = np.zeros((2, 2))
                e[a, b] = 1
                j += np.kron(e, img)
        return j

    def choi_min_eig(self) -> float:
        c = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T))[0])

    def trace_error(self) -> float:
        """max |Tr Lambda(E_ij) - delta_ij|."""
        err = 0.0
        for a in range(2):
            for b in range(2):
                tr = np.trace(self.superop[:, 2 * a + b].reshape(2, 2))
                err = max(err, abs(tr - (a == b)))
        return float(err)

    def entanglement_fidelity(self) -> float:
        return float(np.real(np.trace(self.superop))) / 4.0

    def average_infidelity(self) -> float:
        return 1.0 - (2.0 * self.entanglement_fidelity() + 1.0) / 3.0

    def pauli_transfer(self) -> np.ndarray:
        paulis = [np.eye(2), SIGMA_X, SIGMA_Y, SIGMA_Z]
        r = np.empty((4, 4))
        for i, p in enumerate(paulis):
            for j, q in enumerate(paulis):
                r[i, j] = 0.5 * np.real(np.trace(p @ self.apply(q)))
        return r


def pulse_channel(schedule: PulseSchedule, drive: DriveParams, mode: MotionalMode,
                  n_bar: float | None = None, fock_dim: int = 25,
                  rel_tol: float = 1e-9) -> QubitChannel:
    """Qubit channel of one schedule with the mode starting thermal at ``n_bar``."""
    nb = mode.n_bar if n_bar is None else n_bar
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        motion = thermal_state(nb, fock_dim).data
    states = np.array([np.kron(p, motion) for p in _PROBES])
    pieces = schedule_pieces(schedule, drive, mode)
    final, _ = integrate_batch(pieces, states, 2, mode.heating_rate, rel_tol)
    m = fock_dim
    images = np.einsum("bimjm->bij", final.reshape(4, 2, m, 2, m))
    return QubitChannel.from_probe_images(images)


def ms_schedule(gate_duration: float = 1.30e-3, walsh_order: int = 0,
                ramp: float = 0.0, inter_pulse_delay: float = 0.0,
                trailing_delay: float = 0.0) -> PulseSchedule:
    return build_schedule(gate_duration, walsh_order, ramp, ramp, inter_pulse_delay,
                          trailing_delay)


def ms_pulse_channel(drive: DriveParams, mode: MotionalMode,
                     schedule: PulseSchedule | None = None, fock_dim: int = 40,
                     rel_tol: float = 1e-9, guard_tol: float | None = 1e-6) -> QubitChannel:
    """Channel of one MS pulse without DD; by default a flat 1.30 ms pulse.

    With ``guard_tol`` the channel is recomputed at twice the Fock cutoff
    and a larger change raises :class:`ConvergenceError`.
    """
    from .errors import ConvergenceError
    sched = schedule or ms_schedule()
    ch = pulse_channel(sched, drive, mode, fock_dim=fock_dim, rel_tol=rel_tol)
    if guard_tol is not None:
        ref = pulse_channel(sched, drive, mode, fock_dim=2 * fock_dim, rel_tol=rel_tol)
        dev = float(np.max(np.abs(ref.superop - ch.superop)))
        if dev > guard_tol:
            raise ConvergenceError("MS channel", dev, guard_tol)
    return ch


# RB -------------------------------------------------------------------------

@dataclass(frozen=True)
class RbScenario:
    """RB with a suppressed (or control) MS pulse after every Clifford.

    ``embedded`` is "ms", "delay" or "none". ``n_bar_grid_step`` sets the
    spacing of the occupations at which pulse channels are computed.
    """

    drive: DriveParams = field(default_factory=lambda: DriveParams(
        omega_sb=TWO_PI * 380.0, omega_dd=TWO_PI * 152e3, delta=TWO_PI * 770.0,
        phi_dd=np.pi / 2))
    mode: MotionalMode = field(default_factory=lambda: MotionalMode(
        n_bar=0.1, heating_rate=370.0))
    embedded: str = "ms"
    gate_duration: float = 1.30e-3
    walsh_order: int = 15
    dd_ramp: float = 120e-9
    sb_ramp: float = 1.6e-6
    inter_pulse_delay: float = 24e-6
    trailing_delay: float = 100e-6
    fock_dim: int = 25
    rel_tol: float = 1e-9
    n_bar_grid_step: float = 0.5

    def schedule(self) -> PulseSchedule:
        if self.embedded == "ms":
            return build_schedule(self.gate_duration, self.walsh_order, self.dd_ramp, self.sb_ramp,
                                  self.inter_pulse_delay, self.trailing_delay)
        if self.embedded == "delay":
            s = build_schedule(self.gate_duration, self.walsh_order, self.dd_ramp, self.sb_ramp,
                               self.inter_pulse_delay, self.trailing_delay)
            return delay_schedule(s.total_duration)
        if self.embedded == "none":
            return None
        raise InvalidParameterError(f"unknown embedded pulse {self.embedded!r}")


@dataclass
class RbResult:
    lengths: list
    mean_error: np.ndarray
    ci_error: np.ndarray
    per_sequence: np.ndarray
    epsilon: float | None
    epsilon_err: float | None
    offset: float | None
    fit_ok: bool
    fit_residuals: np.ndarray
    channel_diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "lengths": list(self.lengths),
            "mean_error": self.mean_error.tolist(),
            "ci95_error": self.ci_error.tolist(),
            "epsilon": self.epsilon,
            "epsilon_err": self.epsilon_err,
            "spam_offset": self.offset,
            "fit_ok": self.fit_ok,
            "fit_residuals": self.fit_residuals.tolist(),
            **self.channel_diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "mean_error", "ci95"])
        for row in zip(self.lengths, self.mean_error, self.ci_error):
            w.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


class ChannelTable:
    """Pulse channels on a grid of initial occupations, linear in between.

    Beyond the grid the channel is extrapolated linearly; the curvature of
    the grid fit is kept as a diagnostic.
    """

    def __init__(self, n_bars: np.ndarray, channels: list[QubitChannel]):
        self.n_bars = np.asarray(n_bars, dtype=float)
        self.stack = np.array([c.superop for c in channels])
        if len(self.n_bars) >= 2:
            design = np.vstack([np.ones_like(self.n_bars), self.n_bars - self.n_bars[0]]).T
            flat = self.stack.reshape(len(self.n_bars), -1)
            coef, *_ = np.linalg.lstsq(design, flat, rcond=None)
            self.intercept = coef[0].reshape(4, 4)
            self.slope = coef[1].reshape(4, 4)
            self.nonlinearity = float(np.max(np.abs(design @ coef - flat)))
        else:
            self.intercept = self.stack[0]
            self.slope = np.zeros((4, 4), dtype=complex)
            self.nonlinearity = 0.0

    def at(self, n_bar: float) -> QubitChannel:
        return QubitChannel(self.intercept + self.slope * (n_bar - self.n_bars[0]))


def channel_table(sc: RbScenario) -> ChannelTable | None:
    sched = sc.schedule()
    if sched is None:
        return None
    if sc.mode.heating_rate == 0:
        grid = np.array([sc.mode.n_bar])
    else:
        grid = sc.mode.n_bar + sc.n_bar_grid_step * np.arange(3)
    chans = [pulse_channel(sched, sc.drive, sc.mode, nb, sc.fock_dim, sc.rel_tol) for nb in grid]
    return ChannelTable(grid, chans)


def random_sequence(length: int, seed: int) -> tuple[list[int], int]:
    """Random Clifford indices and the recovery Clifford for a sequence."""
    g = clifford_group()
    rng = np.random.default_rng(seed)
    seq = [int(x) for x in rng.integers(0, len(g), size=length)]
    total = 0
    for c in seq:
        total = g.compose[c, total]
    return seq, int(g.inverse[total])


def sequence_error(seq: list[int], recovery: int, channels: list[QubitChannel | None]) -> float:
    """1 - P(|0>) after Clifford_k then channel_k for each k, then recovery."""
    g = clifford_group()
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    for c, ch in zip(seq, channels):
        u = g.unitaries[c]
        rho = u @ rho @ u.conj().T
        if ch is not None:
            rho = ch.apply(rho)
    u = g.unitaries[recovery]
    rho = u @ rho @ u.conj().T
    return float(1.0 - np.real(rho[0, 0]))


def sequence_error_exact(seq: list[int], recovery: int, sc: RbScenario) -> float:
    """Sequence error carrying the full qubit (x) motion state through every pulse.

    Reference for :func:`run_rb`, which composes per-pulse qubit channels and
    so drops qubit-motion correlations between pulses.
    """
    g = clifford_group()
    sched = sc.schedule()
    m = sc.fock_dim
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        motion = thermal_state(sc.mode.n_bar, m).data
    rho = np.kron(np.diag([1.0, 0.0]).astype(complex), motion)
    eye = np.eye(m)
    pieces = schedule_pieces(sched, sc.drive, sc.mode) if sched is not None else None
    for c in seq:
        u = np.kron(g.unitaries[c], eye)
        rho = u @ rho @ u.conj().T
        if pieces is not None:
            rho = integrate_batch(pieces, rho[None], 2, sc.mode.heating_rate, sc.rel_tol)[0][0]
    u = np.kron(g.unitaries[recovery], eye)
    rho = u @ rho @ u.conj().T
    p0 = np.real(np.trace(rho.reshape(2, m, 2, m)[0, :, 0, :]))
    return float(1.0 - p0)


def rb_decay(length, e0, eps):
    return 0.5 - (0.5 - e0) * (1.0 - 2.0 * eps) ** length


def fit_rb(lengths, mean_error):
    """Fit error(L) = 1/2 - (1/2 - e0)(1 - 2 eps)^L; returns (eps, err, e0, ok, resid)."""
    lengths = np.asarray(lengths, dtype=float)
    y = np.asarray(mean_error, dtype=float)
    p0 = [0.0, max(1e-6, y[-1] / max(lengths[-1], 1))]
    try:
        # a noiseless curve has no covariance estimate; err is then nan
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(rb_decay, lengths, y, p0=p0, bounds=([-0.5, 0.0], [0.5, 0.5]),
                                   x_scale=[1e-4, 1e-4], ftol=1e-15, xtol=1e-15, gtol=1e-15,
                                   maxfev=20000)
        resid = y - rb_decay(lengths, *popt)
        err = float(np.sqrt(np.diag(pcov))[1]) if np.all(np.isfinite(pcov)) else float("nan")
        return float(popt[1]), err, float(popt[0]), True, resid
    except (RuntimeError, ValueError):
        return None, None, None, False, np.zeros_like(y)


def nested_errors_exact(sc: RbScenario, seeds, lengths) -> np.ndarray:
    """Sequence errors from joint qubit-motion evolution, one batch over seeds.

    Each seed draws a single sequence of max(lengths) Cliffords; the error at
    length L applies the recovery after its first L pulses (nested sequences).
    """
    g = clifford_group()
    seeds = list(seeds)
    max_len = max(lengths)
    seqs = [random_sequence(max_len, s)[0] for s in seeds]
    sched = sc.schedule()
    m = sc.fock_dim
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        motion = thermal_state(sc.mode.n_bar, m).data
    rho = np.array([np.kron(np.diag([1.0, 0.0]).astype(complex), motion)] * len(seeds))
    pieces = schedule_pieces(sched, sc.drive, sc.mode) if sched is not None else None
    eye = np.eye(m)
    totals = [0] * len(seeds)
    errs = np.empty((len(lengths), len(seeds)))
    for k in range(max_len):
        for b, seq in enumerate(seqs):
            u = np.kron(g.unitaries[seq[k]], eye)
            rho[b] = u @ rho[b] @ u.conj().T
            totals[b] = g.compose[seq[k], totals[b]]
        if pieces is not None:
            rho = integrate_batch(pieces, rho, 2, sc.mode.heating_rate, sc.rel_tol)[0]
        if k + 1 in lengths:
            a = list(lengths).index(k + 1)
            for b in range(len(seeds)):
                u = g.unitaries[g.inverse[totals[b]]]
                rq = np.einsum("imjm->ij", rho[b].reshape(2, m, 2, m))
                errs[a, b] = 1.0 - float(np.real((u @ rq @ u.conj().T)[0, 0]))
    return errs


def run_rb(scenario: RbScenario | None = None, seeds=range(10), lengths=(1, 5, 10, 15, 20),
           table: ChannelTable | None = None, method: str = "channel") -> RbResult:
    """Simulate RB curves; sequence ``i`` uses the Cliffords drawn from seed ``i``.

    ``method="channel"`` composes per-pulse qubit channels interpolated in
    the mode occupation (fast); ``method="exact"`` propagates the joint
    qubit-motion state through nested sequences (slow, keeps correlations).
    """
    sc = scenario or RbScenario()
    lengths = list(lengths)
    if max(lengths) > 20:
        raise InvalidParameterError("sequence lengths are limited to 20")
    seeds = list(seeds)
    if method == "exact":
        errs = nested_errors_exact(sc, seeds, lengths)
        return _rb_result(lengths, seeds, errs, {"method": "exact"})
    if method != "channel":
        raise InvalidParameterError(f"unknown RB method {method!r}")
    if table is None:
        table = channel_table(sc)
    sched = sc.schedule()
    block = sched.total_duration if sched is not None else 0.0
    max_len = max(lengths)
    if table is None:
        chans = [None] * max_len
    else:
        chans = [table.at(sc.mode.n_bar + sc.mode.heating_rate * k * block) for k in range(max_len)]
    errs = np.empty((len(lengths), len(seeds)))
    for a, length in enumerate(lengths):
        for b, seed in enumerate(seeds):
            seq, rec = random_sequence(length, 1000 * length + seed)
            errs[a, b] = sequence_error(seq, rec, chans[:length])
    diag = {"method": "channel"}
    if table is not None:
        diag |= {
            "n_bar_grid": table.n_bars.tolist(),
            "channel_nonlinearity": table.nonlinearity,
            "first_pulse_infidelity": chans[0].average_infidelity(),
            "last_pulse_infidelity": chans[-1].average_infidelity(),
            "block_duration": block,
        }
    return _rb_result(lengths, seeds, errs, diag)


def _rb_result(lengths, seeds, errs, diag) -> RbResult:
    mean = errs.mean(axis=1)
    if len(seeds) > 1:
        ci = 1.96 * errs.std(axis=1, ddof=1) / np.sqrt(len(seeds))
    else:
        ci = np.zeros(len(lengths))
    eps, eps_err, e0, ok, resid = fit_rb(lengths, mean)
    return RbResult(lengths, mean, ci, errs, eps, eps_err, e0, ok, resid, diag)


def average_pulse_infidelity(result: RbResult) -> float | None:
    return result.channel_diagnostics.get("first_pulse_infidelity")
