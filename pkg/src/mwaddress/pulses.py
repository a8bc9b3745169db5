"""Walsh-modulated pulse schedules with sin^2 ramps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidOrderError, ScheduleInfeasibleError

WALSH_ORDERS = (0, 1, 3, 7, 15)


@dataclass(frozen=True)
class WalshSequence:
    order: int
    signs: tuple[int, ...]

    @property
    def n_pulses(self) -> int:
        return len(self.signs)


def walsh_signs(order: int) -> WalshSequence:
    """Sign pattern of a Walsh sequence of order 0, 1, 3, 7 or 15.

    Segment ``i`` gets (-1)^popcount(i & order); order 2^k - 1 splits the
    pulse into 2^k segments and cancels the first k moments of a drift.
    """
    if order not in WALSH_ORDERS:
        raise InvalidOrderError(f"unsupported Walsh order {order}; use one of {WALSH_ORDERS}")
    n = order + 1
    signs = tuple(1 - 2 * (bin(i & order).count("1") % 2) for i in range(n))
    return WalshSequence(order, signs)


def moment(signs, k: int) -> int:
    """Integer moment sum_i s_i i^k."""
    return sum(s * i ** k for i, s in enumerate(signs))


@dataclass(frozen=True)
class ToneWindow:
    """A tone switched on over [start, end] with sin^2 edges of length ``ramp``."""

    start: float
    end: float
    ramp: float = 0.0
    amp: float = 1.0
    phase: float = 0.0

    def envelope(self, t):
        return envelope(t, self.start, self.end, self.ramp) * self.amp

    def breakpoints(self) -> list[float]:
        pts = [self.start, self.end]
        if self.ramp > 0:
            pts += [self.start + self.ramp, self.end - self.ramp]
        return pts


def envelope(t, start: float, end: float, ramp: float):
    """sin^2(pi tau / (2 ramp)) on both edges, 1 on the plateau, 0 outside."""
    t = np.asarray(t, dtype=float)
    out = np.where((t >= start) & (t <= end), 1.0, 0.0)
    if ramp > 0:
        rise = np.sin(np.pi * np.clip(t - start, 0, ramp) / (2 * ramp)) ** 2
        fall = np.sin(np.pi * np.clip(end - t, 0, ramp) / (2 * ramp)) ** 2
        out = out * np.minimum(rise, fall)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Segment:
    """One time slice: a Walsh sign and the tones active in it.

    ``sb`` or ``dd`` is None when that tone is off (delays have neither).
    """

    t_start: float
    t_end: float
    walsh_sign: int = 1
    sb: ToneWindow | None = None
    dd: ToneWindow | None = None

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def breakpoints(self) -> list[float]:
        pts = {self.t_start, self.t_end}
        for tone in (self.sb, self.dd):
            if tone is not None:
                pts.update(tone.breakpoints())
        return sorted(p for p in pts if self.t_start <= p <= self.t_end)


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered, non-overlapping segments starting at t = 0.

    ``dd_drift`` scales the DD amplitude by 1 + dd_drift * t / total_duration,
    modelling a slow linear drift of the drive strength.
    """

    segments: tuple[Segment, ...]
    dd_drift: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        validate_schedule(self)

    @property
    def total_duration(self) -> float:
        return self.segments[-1].t_end if self.segments else 0.0

    def breakpoints(self) -> np.ndarray:
        pts = set()
        for seg in self.segments:
            pts.update(seg.breakpoints())
        return np.array(sorted(pts))

    def segment_at(self, t: float) -> Segment:
        for seg in self.segments:
            if seg.t_start <= t <= seg.t_end:
                return seg
        raise InvalidInputError(f"t = {t} outside the schedule")

    def with_drift(self, dd_drift: float) -> PulseSchedule:
        return PulseSchedule(self.segments, dd_drift, dict(self.meta))

    def scaled(self, sb_amp: float | None = None, dd_amp: float | None = None) -> PulseSchedule:
        """Copy with the amplitude of every SB or DD window replaced."""
        segs = []
        for s in self.segments:
            sb = s.sb if (s.sb is None or sb_amp is None) else _with_amp(s.sb, sb_amp)
            dd = s.dd if (s.dd is None or dd_amp is None) else _with_amp(s.dd, dd_amp)
            segs.append(Segment(s.t_start, s.t_end, s.walsh_sign, sb, dd))
        return PulseSchedule(tuple(segs), self.dd_drift, dict(self.meta))

    def without_dd(self) -> PulseSchedule:
        segs = tuple(Segment(s.t_start, s.t_end, s.walsh_sign, s.sb, None) for s in self.segments)
        return PulseSchedule(segs, self.dd_drift, dict(self.meta))

    def without_sb(self) -> PulseSchedule:
        segs = tuple(Segment(s.t_start, s.t_end, s.walsh_sign, None, s.dd) for s in self.segments)
        return PulseSchedule(segs, self.dd_drift, dict(self.meta))

    def to_text(self) -> str:
        return schedule_to_text(self)


def _with_amp(tone: ToneWindow, amp: float) -> ToneWindow:
    return ToneWindow(tone.start, tone.end, tone.ramp, amp, tone.phase)


def validate_schedule(schedule: PulseSchedule) -> None:
    prev_end = 0.0
    for i, seg in enumerate(schedule.segments):
        if seg.t_end <= seg.t_start:
            raise ScheduleInfeasibleError(f"segment {i} has non-positive length")
        if seg.t_start < prev_end - 1e-15:
            raise ScheduleInfeasibleError(f"segment {i} overlaps its predecessor")
        if seg.walsh_sign not in (1, -1):
            raise ScheduleInfeasibleError(f"segment {i} Walsh sign must be +-1")
        for name, tone in (("sb", seg.sb), ("dd", seg.dd)):
            if tone is None:
                continue
            if tone.start < seg.t_start - 1e-15 or tone.end > seg.t_end + 1e-15:
                raise ScheduleInfeasibleError(f"segment {i} {name} window leaves the segment")
            if 2 * tone.ramp > tone.end - tone.start + 1e-15:
                raise ScheduleInfeasibleError(
                    f"segment {i} {name} ramps ({2 * tone.ramp:.3g} s) exceed window")
        prev_end = seg.t_end


def build_schedule(gate_duration: float, walsh_order: int = 3, dd_ramp: float = 0.0,
                   sb_ramp: float = 0.0, inter_pulse_delay: float = 0.0,
                   trailing_delay: float = 0.0, with_sb: bool = True,
                   with_dd: bool = True) -> PulseSchedule:
    """Split ``gate_duration`` of drive time into 2^k Walsh segments.

    Each segment ramps the DD up first and the sidebands second, then the
    reverse at its end. ``inter_pulse_delay`` separates the segments and
    ``trailing_delay`` pads the end; delays are tone-free segments.
    """
    walsh = walsh_signs(walsh_order)
    if gate_duration <= 0:
        raise ScheduleInfeasibleError("gate_duration must be positive")
    if min(dd_ramp, sb_ramp, inter_pulse_delay, trailing_delay) < 0:
        raise ScheduleInfeasibleError("ramps and delays must be non-negative")
    tau = gate_duration / walsh.n_pulses
    if with_dd and with_sb:
        needed = 2 * (dd_ramp + sb_ramp)
    else:
        needed = 2 * max(dd_ramp if with_dd else 0.0, sb_ramp if with_sb else 0.0)
    if needed > tau * (1 + 1e-12):
        raise ScheduleInfeasibleError(
            f"ramps need {needed:.4g} s but each of {walsh.n_pulses} pulses lasts {tau:.4g} s")
    segments = []
    t = 0.0
    for i, sign in enumerate(walsh.signs):
        t0, t1 = t, t + tau
        dd = ToneWindow(t0, t1, dd_ramp) if with_dd else None
        inset = dd_ramp if with_dd else 0.0
        sb = ToneWindow(t0 + inset, t1 - inset, sb_ramp) if with_sb else None
        segments.append(Segment(t0, t1, sign, sb, dd))
        t = t1
        if inter_pulse_delay > 0 and i < walsh.n_pulses - 1:
            segments.append(Segment(t, t + inter_pulse_delay))
            t += inter_pulse_delay
    if trailing_delay > 0:
        segments.append(Segment(t, t + trailing_delay))
    return PulseSchedule(tuple(segments), meta={
        "gate_duration": gate_duration, "walsh_order": walsh_order,
        "dd_ramp": dd_ramp, "sb_ramp": sb_ramp,
        "inter_pulse_delay": inter_pulse_delay, "trailing_delay": trailing_delay,
    })


def delay_schedule(duration: float) -> PulseSchedule:
    return PulseSchedule((Segment(0.0, duration),))


# text serialization ---------------------------------------------------------

TEXT_COLUMNS = ("t_start", "t_end", "walsh_sign", "sb_amp", "sb_phase", "sb_start",
                "sb_end", "sb_ramp", "dd_amp", "dd_phase", "dd_start", "dd_end", "dd_ramp")


def schedule_to_text(schedule: PulseSchedule) -> str:
    """One segment per line; absent tones are written with amplitude 0."""
    lines = ["# " + " ".join(TEXT_COLUMNS)]
    if schedule.dd_drift:
        lines.append(f"# dd_drift {schedule.dd_drift!r}")
    for s in schedule.segments:
        row = [repr(s.t_start), repr(s.t_end), str(s.walsh_sign)]
        for tone, extra_phase in ((s.sb, 0.0), (s.dd, np.pi if s.walsh_sign < 0 else 0.0)):
            if tone is None:
                row += ["0", "0", repr(s.t_start), repr(s.t_start), "0"]
            else:
                row += [repr(tone.amp), repr(float(tone.phase + extra_phase)),
                        repr(tone.start), repr(tone.end), repr(tone.ramp)]
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> PulseSchedule:
    segments = []
    drift = 0.0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["dd_drift"]:
                drift = float(parts[1])
            continue
        v = line.split()
        if len(v) != len(TEXT_COLUMNS):
            raise InvalidInputError(f"expected {len(TEXT_COLUMNS)} columns, got {len(v)}")
        t0, t1, sign = float(v[0]), float(v[1]), int(v[2])
        tones = []
        for off, extra in ((3, 0.0), (8, np.pi if sign < 0 else 0.0)):
            amp = float(v[off])
            if amp == 0:
                tones.append(None)
            else:
                tones.append(ToneWindow(float(v[off + 2]), float(v[off + 3]),
                                        float(v[off + 4]), amp, float(v[off + 1]) - extra))
        segments.append(Segment(t0, t1, sign, tones[0], tones[1]))
    return PulseSchedule(tuple(segments), drift)
