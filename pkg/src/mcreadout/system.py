"""Physical parameters and Hamiltonian builders for a driven transmon coupled
to a readout resonator.

All frequencies are angular (rad/s) and every builder returns ``H / hbar`` as a
dense complex matrix on ``transmon (x) resonator``.  Both drive channels share
one carrier frequency ``omega_d``; the complex amplitudes ``omega_q_drive`` and
``omega_r_drive`` carry each channel's phase.

Sign conventions
----------------
``sigma_z = |g><g| - |e><e|`` (ground state is +1).  With this convention the
two-level dispersive Hamiltonian reads
``-chi sigma_z a^dag a + [(i Omega_r - Omega_q chi/g sigma_z) a^dag + h.c.]``
and the resonator rotates at ``-chi`` for ``|g>`` and ``+chi`` for ``|e>``.
"""
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .operators import DimensionError, annihilation, identity, kron, projector

TWO_PI = 2 * math.pi
MAX_HILBERT_DIM = 4096
DISPERSIVE_WARN_RATIO = 0.2

# Sample parameters as ordinary frequencies (Hz) or SI values.
DEVICE = {
    "g_hz": 130e6,
    "omega_r_hz": 6.02e9,
    "omega_q_hz": 7.86e9,
    "anharmonicity_hz": -264e6,
    "kappa_x_hz": 1.5e6,
    "kappa_i_hz": 0.5e6,
    "chi_measured_hz": -1.6e6,
    "josephson_energy_hz": 34e9,
    # two T1 figures are quoted for this device; gamma_1 uses the longer one
    "gamma_1": 1 / 3.5e-6,
    "gamma_2r": 1 / 3.0e-6,
    "t1_short": 3.0e-6,
    "t_eff": 73e-3,
}


class DispersiveValidityWarning(UserWarning):
    """The dispersive expansion parameter exceeds the validity threshold."""


class SingularDetuningError(ZeroDivisionError):
    """A shifted detuning that appears in a denominator vanishes."""


@dataclass(frozen=True)
class SystemParams:
    """Coupled transmon-resonator constants (angular frequencies, rad/s).

    ``omega_d=None`` selects the drive frequency ``omega_r - chi_1/2`` at which
    the ``|g>`` and ``|e>`` resonator rotation rates are ``-chi`` and ``+chi``.
    ``coupling_model="two_level"`` zeroes every coupling above the g-e
    transition (``g_1 = chi_1 = 0``), which reduces the dispersive
    Hamiltonian to the plain Jaynes-Cummings form.
    """

    g: float
    omega_r: float
    omega_q: float
    anharmonicity: float
    kappa_i: float
    kappa_x: float
    omega_d: float | None = None
    gamma_1: float = 0.0
    n_transmon: int = 4
    n_fock: int = 30
    coupling_model: str = "transmon"
    chi_measured: float | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.kappa_i < 0 or self.kappa_x < 0:
            raise ValueError("kappa_i and kappa_x must be non-negative")
        if self.gamma_1 < 0:
            raise ValueError("gamma_1 must be non-negative")
        if self.n_transmon < 2 or self.n_fock < 2:
            raise DimensionError("n_transmon and n_fock must both be >= 2")
        if self.coupling_model not in ("transmon", "two_level"):
            raise ValueError(f"unknown coupling_model {self.coupling_model!r}")

    @property
    def kappa(self):
        return self.kappa_i + self.kappa_x

    @property
    def detuning(self):
        return self.omega_q - self.omega_r

    @property
    def dim(self):
        return self.n_transmon * self.n_fock

    def level_detunings(self, n_levels=None):
        """``Delta_k = k*Delta + k(k-1)/2 * alpha`` (so ``Delta_2 = 2 Delta + alpha``)."""
        n = self.n_transmon if n_levels is None else n_levels
        k = np.arange(n, dtype=float)
        return k * self.detuning + 0.5 * k * (k - 1) * self.anharmonicity

    @property
    def drive_frequency(self):
        if self.omega_d is not None:
            return self.omega_d
        return self.omega_r - default_drive_offset(self)

    @property
    def resonator_drive_detuning(self):
        """``omega_r - omega_d``."""
        return self.omega_r - self.drive_frequency

    def shifted_detunings(self, n_levels=None):
        """``Delta~_k = Delta_k + k (omega_r - omega_d)``."""
        n = self.n_transmon if n_levels is None else n_levels
        k = np.arange(n, dtype=float)
        return self.level_detunings(n) + k * self.resonator_drive_detuning

    def with_(self, **changes):
        return replace(self, **changes)


def device_params(**overrides):
    """SystemParams populated with the sample values of the reference device."""
    t = DEVICE
    base = dict(
        g=TWO_PI * t["g_hz"],
        omega_r=TWO_PI * t["omega_r_hz"],
        omega_q=TWO_PI * t["omega_q_hz"],
        anharmonicity=TWO_PI * t["anharmonicity_hz"],
        kappa_i=TWO_PI * t["kappa_i_hz"],
        kappa_x=TWO_PI * t["kappa_x_hz"],
        chi_measured=TWO_PI * t["chi_measured_hz"],
    )
    base.update(overrides)
    return SystemParams(**base)


def _ladder(params, n_levels):
    g_k = []
    lam = []
    for k in range(n_levels - 1):
        if params.coupling_model == "two_level" and k > 0:
            g_k.append(0.0)
            lam.append(0.0)
        else:
            g_k.append(params.g * math.sqrt(k + 1))
            lam.append(math.sqrt(k + 1))
    return g_k, lam


def coupling_ladder(params):
    """Return ``(g_k, lambda_k)`` for ``k = 0 .. n_transmon-2``.

    Transmon: ``g_k = g sqrt(k+1)`` and ``lambda_k = sqrt(k+1)``.
    """
    return _ladder(params, params.n_transmon)


def default_drive_offset(params):
    """Solve ``omega_r - omega_d = chi_1 / 2`` self-consistently.

    ``chi_1 = g_1^2 / (Delta + alpha + delta)`` itself depends on
    ``delta = omega_r - omega_d``; the physical root of
    ``delta^2 + (Delta + alpha) delta - g_1^2 / 2 = 0`` is returned.
    """
    if params.coupling_model == "two_level":
        return 0.0
    g1_sq = 2 * params.g**2
    b = params.detuning + params.anharmonicity
    disc = math.sqrt(b * b + 2 * g1_sq)
    if b == 0:
        return math.sqrt(g1_sq / 2)
    # numerically stable small root of delta^2 + b delta - g1^2/2 = 0
    return g1_sq / (b + math.copysign(disc, b))


def _check_dim(n_transmon, n_fock):
    if n_transmon * n_fock > MAX_HILBERT_DIM:
        raise DimensionError(
            f"joint dimension {n_transmon}x{n_fock}={n_transmon * n_fock} exceeds {MAX_HILBERT_DIM}"
        )


def build_rotating_hamiltonian(params, omega_q_drive=0j, omega_r_drive=0j):
    """Multilevel Hamiltonian in the frame rotating at ``omega_d`` (RWA).

    ``(omega_r - omega_d) a^dag a + sum_k Delta~_k |k><k|
    + { i Omega_r a^dag + sum_k [g_k a^dag |k><k+1| + Omega_q lambda_k |k+1><k|] + h.c. }``
    """
    n, m = params.n_transmon, params.n_fock
    _check_dim(n, m)
    a_m = annihilation(m)
    a = kron(identity(n), a_m)
    delta = params.resonator_drive_detuning
    dt = params.shifted_detunings()
    g_k, lam = coupling_ladder(params)

    h = delta * (a.conj().T @ a)
    h += kron(np.diag(dt).astype(complex), identity(m))
    off = 1j * omega_r_drive * a.conj().T
    a_dag_m = a_m.conj().T
    for k in range(n - 1):
        off += g_k[k] * kron(projector(n, k, k + 1), a_dag_m)
        off += omega_q_drive * lam[k] * kron(projector(n, k + 1, k), identity(m))
    h += off + off.conj().T
    return h


@dataclass(frozen=True)
class DispersiveConstants:
    chi0: float
    chi1: float
    chi: float
    delta_tilde: tuple
    g0: float
    g1: float
    lambda1: float
    resonator_drive_detuning: float

    @property
    def sector_shifts(self):
        """Photon-number coefficients added to ``omega_r - omega_d`` for g, e, f."""
        return (-self.chi0, self.chi0 - self.chi1, self.chi1)


def dispersive_constants(params):
    """``chi0 = g0^2/Delta~_1``, ``chi1 = g1^2/(Delta~_2 - Delta~_1)`` and
    ``chi = chi0 - chi1/2``."""
    dt = params.shifted_detunings(max(params.n_transmon, 3))
    g_k, lam = _ladder(params, 3)
    if dt[1] == 0:
        raise SingularDetuningError("shifted detuning Delta~_1 is zero; chi0 = g0^2/Delta~_1 diverges")
    d21 = dt[2] - dt[1]
    if d21 == 0 and g_k[1] != 0:
        raise SingularDetuningError("Delta~_2 - Delta~_1 is zero; chi1 = g1^2/(Delta~_2 - Delta~_1) diverges")
    for k, den in enumerate((dt[1] - dt[0], d21)):
        if g_k[k] and abs(g_k[k] / den) > DISPERSIVE_WARN_RATIO:
            warnings.warn(
                f"|g_{k}/(Delta~_{k + 1} - Delta~_{k})| = {abs(g_k[k] / den):.3f} exceeds "
                f"{DISPERSIVE_WARN_RATIO}; second-order dispersive expansion is unreliable",
                DispersiveValidityWarning,
                stacklevel=2,
            )
    chi0 = g_k[0] ** 2 / dt[1]
    chi1 = g_k[1] ** 2 / d21 if g_k[1] else 0.0
    return DispersiveConstants(
        chi0=chi0,
        chi1=chi1,
        chi=chi0 - chi1 / 2,
        delta_tilde=tuple(float(x) for x in dt),
        g0=g_k[0],
        g1=g_k[1],
        lambda1=lam[1],
        resonator_drive_detuning=params.resonator_drive_detuning,
    )


def _resolve_levels(params, levels):
    levels = min(params.n_transmon, 3) if levels is None else levels
    if levels not in (2, 3):
        raise DimensionError(f"dispersive Hamiltonians are defined for 2 or 3 levels, got {levels}")
    return levels


def _dispersive_pieces(c, omega_r_drive, n_levels):
    """Level energies, qubit tilt couplings of the resonator drive, and per-level
    photon coefficients shared by the dispersive and displaced builders."""
    dt = c.delta_tilde
    energies = [0.0, dt[1] + c.chi0, dt[2] + c.chi1][:n_levels]
    shifts = list(c.sector_shifts)[:n_levels]
    # i Omega_r (chi0/g0 |e><g| + chi1/g1 |f><e|); chi_k/g_k = g_k/(Delta~_{k+1}-Delta~_k)
    rd_tilt = [1j * omega_r_drive * c.chi0 / c.g0]
    rd_tilt.append(1j * omega_r_drive * c.g1 / (dt[2] - dt[1]) if c.g1 else 0j)
    return energies, shifts, rd_tilt[: n_levels - 1]


def build_dispersive_hamiltonian(params, omega_q_drive=0j, omega_r_drive=0j, levels=None):
    """Second-order dispersive Hamiltonian on ``{g, e[, f]} (x) Fock``.

    ``levels=2`` restricts the three-level operator to ``{g, e}`` while keeping
    ``chi1`` in the ``|e>`` photon shift, giving rotation rates ``-chi/+chi``
    at the default drive frequency.
    """
    levels = _resolve_levels(params, levels)
    m = params.n_fock
    _check_dim(levels, m)
    c = dispersive_constants(params)
    energies, shifts, rd_tilt = _dispersive_pieces(c, omega_r_drive, levels)
    lam = [1.0, c.lambda1]
    a_m = annihilation(m)
    n_m = a_m.conj().T @ a_m
    ident = identity(m)
    delta = c.resonator_drive_detuning

    h = np.zeros((levels * m, levels * m), dtype=complex)
    off = np.zeros_like(h)
    for k in range(levels):
        p = projector(levels, k)
        h += kron(p, energies[k] * ident + (delta + shifts[k]) * n_m)
        # qubit-drive displacement of the resonator, conditional on level k
        off += kron(p, (omega_q_drive / c.g0) * shifts[k] * a_m.conj().T)
    for k in range(levels - 1):
        up = projector(levels, k + 1, k)
        off += kron(up, (omega_q_drive * lam[k] + rd_tilt[k]) * ident)
    off += 1j * omega_r_drive * kron(identity(levels), a_m.conj().T)
    h += off + off.conj().T
    return h


def build_displaced_hamiltonian(params, omega_q_drive=0j, omega_r_drive=0j, levels=None):
    """Dispersive Hamiltonian in the frame ``b = a - alpha_vo`` with
    ``alpha_vo = -Omega_q / g``.

    Matrix elements refer to ``b``; a state evolved with it must use the
    dissipator ``L[b + alpha_vo]`` because the resonator still decays towards
    ``a = 0``.
    """
    levels = _resolve_levels(params, levels)
    m = params.n_fock
    _check_dim(levels, m)
    c = dispersive_constants(params)
    energies, shifts, rd_tilt = _dispersive_pieces(c, omega_r_drive, levels)
    g_k = [c.g0, c.g1]
    alpha_vo = -omega_q_drive / c.g0
    b = annihilation(m)
    n_b = b.conj().T @ b
    ident = identity(m)
    delta = c.resonator_drive_detuning

    h = np.zeros((levels * m, levels * m), dtype=complex)
    off = np.zeros_like(h)
    for k in range(levels):
        const = energies[k] - shifts[k] * abs(alpha_vo) ** 2
        h += kron(projector(levels, k), const * ident + (delta + shifts[k]) * n_b)
    for k in range(levels - 1):
        off += kron(projector(levels, k + 1, k), (-alpha_vo * g_k[k] + rd_tilt[k]) * ident)
    off += (1j * omega_r_drive + alpha_vo * delta) * kron(identity(levels), b.conj().T)
    h += off + off.conj().T
    return h


def build_lab_hamiltonian(params, omega_q_drive, omega_r_drive, t):
    """Laboratory-frame Hamiltonian at time ``t`` with real drive waveforms
    ``Re(Omega) cos(omega_d t) + Im(Omega) sin(omega_d t)``.

    Only used to check the rotating-frame construction; never integrated.
    """
    n, m = params.n_transmon, params.n_fock
    _check_dim(n, m)
    wd = params.drive_frequency
    a = kron(identity(n), annihilation(m))
    ad = a.conj().T
    omega_k = np.arange(n) * params.omega_r + params.level_detunings()
    g_k, lam = coupling_ladder(params)

    def waveform(z):
        return z.real * math.cos(wd * t) + z.imag * math.sin(wd * t)

    h = params.omega_r * (ad @ a) + kron(np.diag(omega_k).astype(complex), identity(m))
    for k in range(n - 1):
        x_k = kron(projector(n, k, k + 1) + projector(n, k + 1, k), identity(m))
        h += g_k[k] * (ad + a) @ x_k
        h += 2 * waveform(complex(omega_q_drive)) * lam[k] * x_k
    h += 2j * waveform(complex(omega_r_drive)) * (ad - a)
    return h


def to_rotating_frame(h_lab, params, t):
    """``U H U^dag + i dU/dt U^dag`` with
    ``U = exp[i t omega_d (a^dag a + sum_k k |k><k|)]``."""
    n, m = params.n_transmon, params.n_fock
    excitations = (np.arange(n)[:, None] + np.arange(m)[None, :]).ravel().astype(float)
    wd = params.drive_frequency
    phase = np.exp(1j * wd * t * excitations)
    return phase[:, None] * h_lab * phase.conj()[None, :] - wd * np.diag(excitations)


def dispersive_generator(params, levels=None):
    """Anti-Hermitian generator ``S`` of the dispersive transformation
    ``U_2 = exp(S)`` on ``levels (x) Fock``."""
    n = params.n_transmon if levels is None else levels
    m = params.n_fock
    dt = params.shifted_detunings(max(n, 3))
    g_k, _ = _ladder(params, n)
    a_m = annihilation(m)
    s = np.zeros((n * m, n * m), dtype=complex)
    for k in range(n - 1):
        if not g_k[k]:
            continue
        coef = g_k[k] / (dt[k + 1] - dt[k])
        s += coef * (kron(projector(n, k + 1, k), a_m) - kron(projector(n, k, k + 1), a_m.conj().T))
    return s


def dispersive_transform(h, params, levels=None):
    """Apply ``U_2 H U_2^dag`` numerically (exact matrix exponential)."""
    u = expm(dispersive_generator(params, levels))
    return u @ h @ u.conj().T
