"""Microwave field of parallel current-carrying wires (Biot-Savart).

Wires lie in the trap surface, run perpendicular to the x axis and sit at
lateral positions ``x_w``. The ion is at (x, h) with ``y`` the height above
the surface. Only B_x, the component along the quantization axis, drives
the qubit. All currents are complex phasors.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularPositionError
from .lindblad import MotionalMode
from .lindblad import p0_analytic

MU0 = 4e-7 * math.pi


@dataclass(frozen=True)
class Wire:
    x: float
    current: complex


@dataclass(frozen=True)
class TrapGeometry:
    """Wires plus ion height; ``tilt_profile`` is [(x, theta_rad), ...] or None.

    With a tilt profile the motional axis angle is interpolated piecewise
    linearly in x (held constant beyond the end points); otherwise the
    mode's own ``tilt_theta`` applies.
    """

    wires: tuple[Wire, ...]
    ion_height: float
    tilt_profile: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if len(self.wires) < 1:
            raise InvalidInputError("geometry needs at least one wire")
        if self.ion_height <= 0:
            raise InvalidInputError("ion_height must be positive")

    def scaled(self, c: complex) -> TrapGeometry:
        return TrapGeometry(tuple(Wire(w.x, c * w.current) for w in self.wires),
                            self.ion_height, self.tilt_profile)

    def with_currents(self, currents) -> TrapGeometry:
        return TrapGeometry(tuple(Wire(w.x, complex(c)) for w, c in zip(self.wires, currents)),
                            self.ion_height, self.tilt_profile)

    def tilt_at(self, x: float, default: float) -> float:
        if not self.tilt_profile:
            return default
        xs, ts = zip(*self.tilt_profile)
        return float(np.interp(x, xs, ts))

    def to_json(self) -> str:
        return json.dumps({
            "wires": [{"x": w.x, "current": [w.current.real, w.current.imag]} for w in self.wires],
            "ion_height": self.ion_height,
            "tilt_profile": [list(p) for p in self.tilt_profile] if self.tilt_profile else None,
        }, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> TrapGeometry:
        try:
            wires = tuple(Wire(float(w["x"]), complex(*w["current"])) for w in d["wires"])
            tilt = d.get("tilt_profile")
            tilt = tuple((float(a), float(b)) for a, b in tilt) if tilt else None
            return cls(wires, float(d["ion_height"]), tilt)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad geometry document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> TrapGeometry:
        return cls.from_dict(json.loads(text))


def measured_trap(rel_phase: float = 0.0480, rel_amp: float = 0.856,
                  wire_offset: float = 40e-6, ion_height: float = 40e-6,
                  weaker_side: int = +1, tilt_deg: float | None = 15.0) -> TrapGeometry:
    """Two-wire model of the measured trap.

    The wires carry nearly opposite currents; the one on ``weaker_side``
    has relative amplitude ``rel_amp`` and phase pi + ``rel_phase``.
    """
    strong = Wire(-weaker_side * wire_offset, 1.0 + 0j)
    weak = Wire(weaker_side * wire_offset, rel_amp * np.exp(1j * (np.pi + rel_phase)))
    wires = (strong, weak) if weaker_side > 0 else (weak, strong)
    tilt = None if tilt_deg is None else ((0.0, math.radians(tilt_deg)),)
    return TrapGeometry(wires, ion_height, tilt)


@dataclass(frozen=True)
class FieldSample:
    x: float
    bx: complex
    dbx_dx: complex
    dbx_dy: complex
    dbx_du: complex
    theta: float
    eta: float

    @property
    def phi_field(self) -> float:
        return float(np.angle(self.bx))

    @property
    def phi_grad(self) -> float:
        return float(np.angle(self.dbx_du))


def wire_terms(geometry: TrapGeometry, x: float):
    """Per-wire geometric factors of B_x, dB_x/dx and dB_x/dy for unit current."""
    h = geometry.ion_height
    out = []
    for w in geometry.wires:
        rx, ry = x - w.x, h
        r2 = rx * rx + ry * ry
        if r2 < 1e-30:
            raise SingularPositionError(f"ion at x={x} coincides with a wire")
        k = MU0 / (2 * math.pi)
        bx = -k * ry / r2
        dx = 2 * k * ry * rx / r2 ** 2
        dy = -k * (rx * rx - ry * ry) / r2 ** 2
        out.append((bx, dx, dy))
    return np.array(out)


def field_at(geometry: TrapGeometry, x: float, mode: MotionalMode | None = None) -> FieldSample:
    """B_x and its gradient along the motional axis u = cos(t) x + sin(t) y."""
    mode = mode or MotionalMode()
    terms = wire_terms(geometry, x)
    currents = np.array([w.current for w in geometry.wires])
    bx, dx, dy = currents @ terms
    theta = geometry.tilt_at(x, mode.tilt_theta)
    du = math.cos(theta) * dx + math.sin(theta) * dy
    eta = mode.u_zpf * abs(du) / abs(bx) if abs(bx) > 0 else float("inf")
    return FieldSample(float(x), complex(bx), complex(dx), complex(dy), complex(du), theta, eta)


def unwrap_along(phases: np.ndarray) -> np.ndarray:
    """Nearest-branch continuation of a phase sequence."""
    return np.unwrap(np.asarray(phases, dtype=float))


@dataclass
class PhaseProfile:
    x: np.ndarray
    phi_field: np.ndarray
    phi_grad: np.ndarray
    abs_bx: np.ndarray
    abs_grad: np.ndarray
    eta: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "phi_field", "phi_grad", "abs_Bx", "abs_dBx_du", "eta"])
        for row in zip(self.x, self.phi_field, self.phi_grad, self.abs_bx, self.abs_grad, self.eta):
            w.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


def phase_profile(geometry: TrapGeometry, x_grid, mode: MotionalMode | None = None) -> PhaseProfile:
    """Unwrapped field and gradient phases and magnitudes along ``x_grid``."""
    samples = [field_at(geometry, float(x), mode) for x in x_grid]
    return PhaseProfile(
        np.asarray(x_grid, dtype=float),
        unwrap_along([s.phi_field for s in samples]),
        unwrap_along([s.phi_grad for s in samples]),
        np.array([abs(s.bx) for s in samples]),
        np.array([abs(s.dbx_du) for s in samples]),
        np.array([s.eta for s in samples]),
    )


def zone_p0(profile: PhaseProfile, alpha0: float = 1.3985, dd_offset: float = np.pi / 2,
            x_ref: float = 0.0) -> np.ndarray:
    """Predicted P0 after a fixed SB + DD pulse at each profile point.

    The DD phase at the ion is the field phase plus ``dd_offset``; the
    residual displacement is alpha0 |G(x)| / |G(x_ref)| cos(phi_grad - phi_DD).
    """
    g_ref = np.interp(x_ref, profile.x, profile.abs_grad)
    dphi = profile.phi_grad - (profile.phi_field + dd_offset)
    alpha = alpha0 * profile.abs_grad / g_ref * np.cos(dphi)
    return p0_analytic(alpha)


def interaction_zone(profile: PhaseProfile, threshold: float = 0.75, **kw) -> list[tuple[float, float]]:
    """x-intervals where the predicted P0 falls below ``threshold``.

    Interval edges are located by linear interpolation between grid points.
    """
    if profile is None or len(profile.x) == 0:
        raise InvalidInputError("empty profile")
    if not 0.5 < threshold < 1:
        raise InvalidInputError("threshold must lie in (0.5, 1)")
    p0 = zone_p0(profile, **kw) if not isinstance(profile, ZoneProfile) else profile.p0
    return intervals_below(profile.x, p0, threshold)


@dataclass
class ZoneProfile:
    """A precomputed P0(x) curve accepted by :func:`interaction_zone`."""

    x: np.ndarray
    p0: np.ndarray


def intervals_below(x: np.ndarray, y: np.ndarray, threshold: float) -> list[tuple[float, float]]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    below = y < threshold
    zones = []
    i = 0
    n = len(x)
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        left = x[i] if i == 0 else _cross(x[i - 1], x[i], y[i - 1], y[i], threshold)
        right = x[j] if j == n - 1 else _cross(x[j], x[j + 1], y[j], y[j + 1], threshold)
        zones.append((float(left), float(right)))
        i = j + 1
    return zones


def _cross(x0, x1, y0, y1, level):
    if y1 == y0:
        return x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
