"""Closed-form coherent-state dynamics of the dispersively coupled resonator.

For constant drives the resonator amplitude obeys

    d alpha/dt = Omega_r + s i chi (alpha - alpha_vo) - kappa/2 alpha,

with ``s = +1`` for ``|g>`` and ``s = -1`` for ``|e>`` and the virtual origin
``alpha_vo = -Omega_q / g``.  Nothing here shares code with the numerical
Hamiltonian builders; these functions serve as the independent reference for
the integrator.
"""
import cmath
import math
from dataclasses import dataclass

import numpy as np

_SIGN = {"g": 1, "e": -1}


class ResonanceSingularityError(ZeroDivisionError):
    """``i kappa/2 +/- chi`` vanishes, so the steady state does not exist."""


def _sign(qubit):
    try:
        return _SIGN[qubit]
    except KeyError:
        raise ValueError(f"qubit must be 'g' or 'e', got {qubit!r}") from None


def virtual_origin(omega_q, g):
    """Point ``-Omega_q / g`` about which the resonator state rotates."""
    if g == 0:
        raise ZeroDivisionError("virtual origin undefined for g = 0")
    return -complex(omega_q) / g


@dataclass(frozen=True)
class AnalyticTrajectoryParams:
    omega_r: complex
    omega_q: complex
    chi: float
    g: float
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def alpha_vo(self):
        return virtual_origin(self.omega_q, self.g)

    def rate(self, qubit):
        """Complex relaxation rate ``s i chi - kappa/2``."""
        return _sign(qubit) * 1j * self.chi - 0.5 * self.kappa

    def source(self, qubit):
        """Drive term ``Omega_r - s i chi alpha_vo`` of the linear ODE."""
        return complex(self.omega_r) - _sign(qubit) * 1j * self.chi * self.alpha_vo


def trajectory_rhs(p, qubit, alpha):
    """Right-hand side of the amplitude equation of motion."""
    s = _sign(qubit)
    return p.omega_r + s * 1j * p.chi * (alpha - p.alpha_vo) - 0.5 * p.kappa * alpha


def _phi1(z):
    """``(exp(z) - 1) / z`` evaluated without cancellation near ``z = 0``."""
    if abs(z) < 1e-3:
        return 1 + z / 2 + z * z / 6 + z**3 / 24 + z**4 / 120
    return (cmath.exp(z) - 1) / z


def analytic_trajectory(p, qubit, t):
    """``alpha(t)`` from vacuum under constant drives.

    Equivalent to ``(i Omega_r -/+ Omega_q chi/g) / (i kappa/2 +/- chi)
    * [1 - exp(+/- i chi t - kappa t/2)]``; evaluated as
    ``source * t * phi1(rate * t)`` so the ``kappa = chi = 0`` limit gives
    ``Omega_r t`` instead of 0/0.
    """
    lam = p.rate(qubit)
    src = p.source(qubit)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([src * x * _phi1(lam * x) for x in ts], dtype=complex)
    return out if np.ndim(t) else complex(out[0])


def steady_state(p, qubit):
    """``(i Omega_r -/+ Omega_q chi/g) / (i kappa/2 +/- chi)``."""
    s = _sign(qubit)
    den = 0.5j * p.kappa + s * p.chi
    if den == 0:
        raise ResonanceSingularityError("i kappa/2 +/- chi = 0: no steady state (undamped, non-dispersive)")
    return (1j * p.omega_r - s * p.omega_q * p.chi / p.g) / den


def steady_state_circle(omega_r, omega_q_mag, chi, g, kappa, qubit):
    """Centre and radius of the steady-state locus as the qubit-drive phase
    sweeps a full turn at fixed magnitudes."""
    s = _sign(qubit)
    den = 0.5j * kappa + s * chi
    if den == 0:
        raise ResonanceSingularityError("i kappa/2 +/- chi = 0: no steady state (undamped, non-dispersive)")
    centre = 1j * omega_r / den
    radius = abs(omega_q_mag * chi / g) / abs(den)
    return centre, radius


def initial_separation_rate(p):
    """``|d(alpha_e - alpha_g)/dt|`` at ``t = 0``, i.e. ``2 |Omega_q chi| / g``."""
    return abs(2j * p.chi * p.alpha_vo)


def predicted_chi(g, detuning, anharmonicity):
    """Transmon dispersive shift ``g^2 alpha / [Delta (Delta + alpha)]``.

    Works in any consistent frequency unit (ordinary or angular).
    """
    if detuning == 0 or detuning + anharmonicity == 0:
        raise ZeroDivisionError("predicted_chi: Delta or Delta + alpha is zero")
    return g**2 * anharmonicity / (detuning * (detuning + anharmonicity))


def effective_resonator_drive(omega_r, omega_q, g, resonator_drive_detuning):
    """Resonator drive seen by the displaced amplitude when ``omega_d`` is
    offset from ``omega_r``: ``i Omega_eff = i Omega_r + alpha_vo (omega_r - omega_d)``."""
    alpha_vo = virtual_origin(omega_q, g)
    return complex(omega_r) - 1j * alpha_vo * resonator_drive_detuning


def vacuum_lock_drive(omega_q, chi, g):
    """Resonator drive that keeps ``alpha_g`` at the origin: ``i Omega_r = Omega_q chi / g``."""
    return -1j * complex(omega_q) * chi / g
