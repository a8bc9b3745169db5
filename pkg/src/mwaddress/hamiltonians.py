"""Interaction-picture drive Hamiltonians and AC-Zeeman compensation.

Every Hamiltonian here has the form

    H(t) = Q0 (x) 1 + Qa (x) a + Qa^dagger (x) a^dagger

with small qubit-space blocks ``Q0`` and ``Qa``. The ``*_blocks`` functions
return those blocks so the master-equation engine never has to build the
full composite matrix; the ``build_*`` functions return dense matrices.
Units: angular frequencies (rad/s), hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleCompensationError, InvalidParameterError
from .quantum import (
    SIGMA_Z,
    OperatorMatrix,
    fock_operators,
    sigma_phi,
    wrap_phase,
)


@dataclass(frozen=True)
class DriveParams:
    """Drive strengths and phases seen by one ion.

    ``phi_grad = 0`` means the state-dependent force pushes along +sigma_x.
    ``dd_gradient`` is the rate (rad/s per unit of a + a^dagger) at which the
    quadrature DD Rabi rate changes with ion displacement, and
    ``qubit_detuning`` an optional static qubit frequency error.
    """

    omega_sb: float = 0.0
    omega_dd: float = 0.0
    delta: float = 0.0
    phi_dd: float = 0.0
    phi_field: float = 0.0
    phi_grad: float = 0.0
    eta: float = 1.25e-3
    dd_gradient: float = 0.0
    qubit_detuning: float = 0.0

    def __post_init__(self):
        if self.omega_sb < 0 or self.omega_dd < 0:
            raise InvalidParameterError("Rabi rates must be non-negative")
        if self.eta < 0:
            raise InvalidParameterError("eta must be non-negative")
        for name in ("phi_dd", "phi_field", "phi_grad"):
            object.__setattr__(self, name, wrap_phase(getattr(self, name)))

    def with_(self, **changes) -> DriveParams:
        return replace(self, **changes)

    @property
    def carrier_rabi(self) -> float:
        """Bare carrier Rabi rate Omega = Omega_SB / eta."""
        if self.eta <= 0:
            raise InvalidParameterError("eta must be > 0 for the carrier rate")
        return self.omega_sb / self.eta


@dataclass(frozen=True)
class SpectatorTransition:
    """An off-resonant transition sharing a level with the qubit."""

    detuning: float
    rabi_ratio: float = 1.0

    def __post_init__(self):
        if self.detuning == 0:
            raise InvalidParameterError("spectator detuning must be non-zero")


# block builders -------------------------------------------------------------

def sdf_blocks(params: DriveParams, t: float, amp: float = 1.0):
    """(Q0, Qa) of the state-dependent force (Omega_SB/2) s_grad (a e^{i d t} + h.c.)."""
    qa = 0.5 * amp * params.omega_sb * np.exp(1j * params.delta * t) * sigma_phi(params.phi_grad)
    return np.zeros((2, 2), dtype=complex), qa


def dd_block(params: DriveParams, amp: float = 1.0, walsh_sign: int = 1) -> np.ndarray:
    """Q0 of the DD tone; a Walsh sign of -1 is a pi shift of its phase."""
    phi = params.phi_dd if walsh_sign > 0 else params.phi_dd + np.pi
    return 0.5 * amp * params.omega_dd * sigma_phi(phi)


def off_resonant_block(params: DriveParams, t: float, omega_m: float,
                       amp: float = 1.0) -> np.ndarray:
    """Q0 of the off-resonant carrier Omega cos((w_m + d) t) s_{field - grad}."""
    carrier = params.carrier_rabi
    return (amp * carrier * np.cos((omega_m + params.delta) * t)
            * sigma_phi(params.phi_field - params.phi_grad))


def dd_gradient_blocks(params: DriveParams, t: float, omega_m: float,
                       amp: float = 1.0, walsh_sign: int = 1) -> np.ndarray:
    """Qa of the DD Rabi-rate gradient, (1/2) g s_q (a e^{-i w_m t} + h.c.).

    s_q is the Pauli operator in quadrature with the DD (phase phi_DD + pi/2).
    The gradient rotates with the DD tone, so it carries the Walsh sign.
    """
    return (0.5 * amp * walsh_sign * params.dd_gradient * np.exp(-1j * omega_m * t)
            * sigma_phi(params.phi_dd + np.pi / 2))


def detuning_block(params: DriveParams) -> np.ndarray:
    return 0.5 * params.qubit_detuning * SIGMA_Z


def blocks_to_matrix(q0: np.ndarray, qa: np.ndarray, fock_dim: int) -> OperatorMatrix:
    a, ad, _ = fock_operators(fock_dim)
    data = (np.kron(q0, np.eye(fock_dim)) + np.kron(qa, a.data)
            + np.kron(qa.conj().T, ad.data))
    return OperatorMatrix(data, q0.shape[0], fock_dim)


# dense builders -------------------------------------------------------------

def build_sdf(params: DriveParams, t: float, fock_dim: int) -> OperatorMatrix:
    """State-dependent force in the interaction picture at time ``t``."""
    q0, qa = sdf_blocks(params, t)
    return blocks_to_matrix(q0, qa, fock_dim)


def build_dd(params: DriveParams, fock_dim: int, walsh_sign: int = 1) -> OperatorMatrix:
    """Resonant DD drive (Omega_DD/2) s_{phi_DD} (x) 1."""
    q0 = dd_block(params, walsh_sign=walsh_sign)
    return blocks_to_matrix(q0, np.zeros((2, 2), complex), fock_dim)


def build_off_resonant(params: DriveParams, t: float, omega_m: float,
                       fock_dim: int) -> OperatorMatrix:
    """Off-resonant carrier excitation from the sideband tones."""
    if params.eta <= 0:
        raise InvalidParameterError("eta must be > 0 for the off-resonant carrier")
    q0 = off_resonant_block(params, t, omega_m)
    return blocks_to_matrix(q0, np.zeros((2, 2), complex), fock_dim)


def sdf_decomposition(params: DriveParams, t: float, fock_dim: int):
    """Split the SDF into parts commuting and not commuting with the DD.

    Returns ``(commuting, quadrature)`` with amplitudes cos and sin of
    ``phi_grad - phi_dd``; their sum equals :func:`build_sdf`.
    """
    dphi = params.phi_grad - params.phi_dd
    coupling = 0.5 * params.omega_sb * np.exp(1j * params.delta * t)
    zero = np.zeros((2, 2), complex)
    along = blocks_to_matrix(zero, coupling * np.cos(dphi) * sigma_phi(params.phi_dd), fock_dim)
    across = blocks_to_matrix(
        zero, coupling * np.sin(dphi) * sigma_phi(params.phi_dd + np.pi / 2), fock_dim)
    return along, across


def carrier_excursion(carrier_rabi: float, omega: float) -> float:
    """Small-oscillation amplitude 2 (Omega/omega)^2 of <sigma> under a fast carrier."""
    return 2.0 * (carrier_rabi / omega) ** 2


# AC-Zeeman ------------------------------------------------------------------

def ac_zeeman_shift(rabi: float, detuning: float) -> float:
    """Second-order level shift Omega^2 / (4 Delta) from one off-resonant tone."""
    if detuning == 0:
        raise InvalidParameterError("detuning must be non-zero")
    return rabi ** 2 / (4.0 * detuning)


def spectator_shift(rabi: float, spectators: list[SpectatorTransition]) -> float:
    """Summed shift of the qubit from a list of spectator transitions."""
    return sum(ac_zeeman_shift(s.rabi_ratio * rabi, s.detuning) for s in spectators)


def pi_shift_per_amp2(carrier_rabi: float, omega_m: float) -> float:
    """Scale K of the net qubit shift K (r^2 - 1) from sidebands with ratio r."""
    return ac_zeeman_shift(carrier_rabi, omega_m)


def net_pi_shift(ratio: float, pi_shift_per_amp2_: float) -> float:
    return pi_shift_per_amp2_ * (ratio ** 2 - 1.0)


def ac_zeeman_imbalance(pi_shift_per_amp2_: float, sigma_shift: float) -> float:
    """Blue/red amplitude ratio r that cancels ``sigma_shift``.

    Solves K (r^2 - 1) + sigma_shift = 0 for r > 0.
    """
    if pi_shift_per_amp2_ == 0:
        raise InvalidParameterError("pi_shift_per_amp2 must be non-zero")
    r2 = 1.0 - sigma_shift / pi_shift_per_amp2_
    if r2 < 0:
        raise InfeasibleCompensationError(
            f"required squared imbalance {r2:.4g} is negative"
        )
    return float(np.sqrt(r2))


def ac_zeeman_imbalance_numeric(pi_shift_per_amp2_: float, sigma_shift: float,
                                r_max: float = 100.0) -> float:
    """Root-finder cross-check of :func:`ac_zeeman_imbalance`."""
    f = lambda r: net_pi_shift(r, pi_shift_per_amp2_) + sigma_shift
    if f(0.0) * f(r_max) > 0:
        raise InfeasibleCompensationError("no sign change in [0, r_max]")
    return float(brentq(f, 0.0, r_max, xtol=1e-15, rtol=1e-15))
