"""Readout schemes as pulse schedules, paired g/e runs and separation metrics.

Drive amplitudes in a :class:`ProtocolSpec` are *effective* values: the
resonator amplitude is the one that appears in the closed-form amplitude
equation.  When the drive frequency is offset from the resonator
(``delta = omega_r - omega_d != 0``) the qubit drive also pushes the resonator
with strength ``alpha_vo * delta``; :func:`build_schedule` adds the
compensating physical resonator tone ``i alpha_vo delta`` unless
``compensate_offset`` is off.

Reference amplitudes
--------------------
``Omega_r^0`` gives a steady state of 2.5 photons for ``|g>`` under resonator
driving alone.  ``Omega_q^0`` gives the same 2.5 photons for ``|g>`` under
qubit driving alone.  Decibel offsets are applied to these references.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from . import analytic
from .engine import PulseSchedule, Segment, evolve_many
from .system import dispersive_constants

KINDS = ("conventional", "qubit_only", "multichannel", "vacuum_lock", "unconditional_reset")
REFERENCE_PHOTONS = 2.5
MULTICHANNEL_DB = (-1.0, -2.0)  # (qubit, resonator) offsets from single-channel powers
IMPRECISE_PHASE = 0.1
PROBE_SAMPLE_INTERVAL = 0.5e-9


def db_to_amplitude(db):
    """Amplitude factor for a power change of ``db`` decibels."""
    return 10 ** (db / 20)


@dataclass(frozen=True)
class ResetTail:
    """Reset appended after the readout.

    ``hold=None`` uses the merge time predicted by the closed-form model and
    ``final_displacement=None`` the least-squares displacement that brings the
    merged amplitude back to the origin.
    """

    hold: float | None = None
    final_displacement: complex | None = None
    displacement_duration: float = 4e-9

    def __post_init__(self):
        if self.hold is not None and not self.hold > 0:
            raise ValueError("reset hold must be positive")
        if not self.displacement_duration > 0:
            raise ValueError("displacement_duration must be positive")


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    duration: float
    omega_q_mag: float = 0.0
    omega_r_mag: float = 0.0
    phi_q: float = 0.0
    phi_r: float = 0.0
    reset_tail: ResetTail | None = None
    rise_time: float = 0.0
    compensate_offset: bool = True
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}; expected one of {KINDS}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.omega_q_mag < 0 or self.omega_r_mag < 0:
            raise ValueError("drive magnitudes must be non-negative")
        if self.kind == "conventional" and self.omega_q_mag != 0:
            raise ValueError("conventional readout has no qubit drive (omega_q_mag must be 0)")
        if self.kind == "qubit_only" and self.omega_r_mag != 0:
            raise ValueError("qubit_only readout has no resonator drive (omega_r_mag must be 0)")
        if self.kind == "unconditional_reset" and self.reset_tail is None:
            object.__setattr__(self, "reset_tail", ResetTail())
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def omega_q(self):
        return self.omega_q_mag * complex(math.cos(self.phi_q), math.sin(self.phi_q))

    @property
    def omega_r(self):
        return self.omega_r_mag * complex(math.cos(self.phi_r), math.sin(self.phi_r))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class SeparationDiagnostics:
    times: np.ndarray
    separation: np.ndarray
    initial_rate: float
    max_separation: float
    time_of_max: float
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "initial_rate": self.initial_rate,
            "max_separation": self.max_separation,
            "time_of_max": self.time_of_max,
            "final_separation": float(self.separation[-1]),
        }
        out.update(self.extra)
        return out


def _den_g(constants, kappa):
    return abs(0.5j * kappa + constants.chi)


def reference_drives(params, constants=None):
    """``(Omega_r^0, Omega_q^0)`` giving 2.5 steady-state photons for ``|g>``
    under single-channel resonator or qubit driving."""
    c = constants or dispersive_constants(params)
    if c.chi == 0:
        raise ZeroDivisionError("chi = 0: qubit driving does not displace the resonator")
    den = _den_g(c, params.kappa)
    amp = math.sqrt(REFERENCE_PHOTONS) * den
    return amp, amp * c.g0 / abs(c.chi)


def vacuum_lock_drive(omega_q, constants):
    """Effective resonator drive with ``i Omega_r = Omega_q chi / g``."""
    if constants.g0 == 0 or constants.chi == 0:
        raise ValueError("vacuum lock needs g != 0 and chi != 0")
    return analytic.vacuum_lock_drive(omega_q, constants.chi, constants.g0)


def analytic_params(spec, params, constants=None):
    c = constants or dispersive_constants(params)
    omega_r = spec.omega_r
    if spec.kind == "vacuum_lock":
        omega_r = vacuum_lock_drive(spec.omega_q, c)
    if not spec.compensate_offset:
        omega_r = analytic.effective_resonator_drive(omega_r, spec.omega_q, c.g0, c.resonator_drive_detuning)
    return analytic.AnalyticTrajectoryParams(omega_r, spec.omega_q, c.chi, c.g0, params.kappa)


def _physical_segment(duration, omega_q, omega_r_eff, constants, compensate):
    omega_r = complex(omega_r_eff)
    if compensate and omega_q:
        alpha_vo = analytic.virtual_origin(omega_q, constants.g0)
        omega_r += 1j * alpha_vo * constants.resonator_drive_detuning
    return Segment(duration, complex(omega_q), omega_r)


def half_period(chi):
    """``pi / |chi|``: time for a branch rotating at ``chi`` to turn by pi."""
    if chi == 0:
        raise ZeroDivisionError("chi = 0")
    return math.pi / abs(chi)


def _propagate(p, qubit, alpha0, t):
    """Closed-form amplitude after time ``t`` from ``alpha0``."""
    lam = p.rate(qubit)
    src = p.source(qubit)
    return alpha0 * np.exp(lam * t) + src * t * np.vectorize(analytic._phi1)(lam * np.asarray(t, dtype=complex))


def merge_time(spec, params, constants=None):
    """Hold after which the g and e branches coincide once the virtual origin
    is flipped (closed-form model, first minimum of the separation)."""
    c = constants or dispersive_constants(params)
    p = analytic_params(spec, params, c)
    start = {q: analytic.analytic_trajectory(p, q, spec.duration) for q in "ge"}
    hold_p = analytic.AnalyticTrajectoryParams(0j, -spec.omega_q, c.chi, c.g0, params.kappa)

    def gap(t):
        return abs(_propagate(hold_p, "g", start["g"], t) - _propagate(hold_p, "e", start["e"], t))

    span = 2 * half_period(c.chi)
    grid = np.linspace(0, span, 2001)[1:]
    vals = np.array([gap(t) for t in grid])
    # first local minimum of the separation
    i = next((k for k in range(1, len(vals) - 1) if vals[k] <= vals[k - 1] and vals[k] <= vals[k + 1]), int(np.argmin(vals)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    return float(res.x)


def _rates(constants, kappa):
    return {q: analytic.AnalyticTrajectoryParams(0j, 0j, constants.chi, constants.g0, kappa).rate(q) for q in "ge"}


def optimal_displacement(alpha_g, alpha_e, duration, constants, kappa):
    """Resonator amplitude step (``Omega_r * duration``) minimizing
    ``|alpha_g|^2 + |alpha_e|^2`` after a resonator-only segment."""
    lam = _rates(constants, kappa)
    start = {"g": alpha_g, "e": alpha_e}
    free = {q: start[q] * np.exp(lam[q] * duration) for q in "ge"}
    resp = {q: duration * analytic._phi1(lam[q] * duration) for q in "ge"}
    num = sum(np.conj(resp[q]) * free[q] for q in "ge")
    den = sum(abs(resp[q]) ** 2 for q in "ge")
    omega = -num / den
    return complex(omega * duration)


def build_schedule(spec, constants):
    """Physical pulse schedule for ``spec``.

    Unconditional reset appends a hold with the qubit drive phase shifted by
    pi and no effective resonator drive, then a resonator-only displacement
    of ``final_displacement`` spread over ``displacement_duration``.
    """
    comp = spec.compensate_offset
    omega_r = spec.omega_r
    if spec.kind == "vacuum_lock":
        omega_r = vacuum_lock_drive(spec.omega_q, constants)
    segs = [_physical_segment(spec.duration, spec.omega_q, omega_r, constants, comp)]
    if spec.kind == "unconditional_reset":
        tail = spec.reset_tail
        if tail.hold is None or tail.final_displacement is None:
            raise ValueError("reset tail needs hold and final_displacement; use resolve_reset_tail(spec, params)")
        segs.append(_physical_segment(tail.hold, -spec.omega_q, 0j, constants, comp))
        segs.append(Segment(tail.displacement_duration, 0j, tail.final_displacement / tail.displacement_duration))
    return PulseSchedule(tuple(segs), spec.rise_time)


def resolve_reset_tail(spec, params, constants=None):
    """Fill in missing hold time and displacement from the closed-form model."""
    c = constants or dispersive_constants(params)
    tail = spec.reset_tail
    hold = tail.hold if tail.hold is not None else merge_time(spec, params, c)
    disp = tail.final_displacement
    if disp is None:
        p = analytic_params(spec, params, c)
        hold_p = analytic.AnalyticTrajectoryParams(0j, -spec.omega_q, c.chi, c.g0, params.kappa)
        end = {q: _propagate(hold_p, q, analytic.analytic_trajectory(p, q, spec.duration), hold) for q in "ge"}
        disp = optimal_displacement(end["g"], end["e"], tail.displacement_duration, c, params.kappa)
    return spec.with_(reset_tail=replace(tail, hold=hold, final_displacement=disp))


def separation_diagnostics(traj_g, traj_e):
    if traj_g.times.shape != traj_e.times.shape or not np.allclose(traj_g.times, traj_e.times):
        raise ValueError("trajectories must share the time grid")
    t = traj_g.times
    sep = np.abs(traj_e.alpha - traj_g.alpha)
    rate = float((sep[1] - sep[0]) / (t[1] - t[0])) if len(t) > 1 else 0.0
    k = int(np.argmax(sep))
    return SeparationDiagnostics(t, sep, rate, float(sep[k]), float(t[k]))


def run_protocol(params, spec, dt=None, frame="rotating", **evolve_kwargs):
    """Evolve the ``|g>`` and ``|e>`` preparations as one batch.

    Returns ``(traj_g, traj_e, SeparationDiagnostics)``.
    """
    c = dispersive_constants(params)
    if spec.kind == "unconditional_reset":
        spec = resolve_reset_tail(spec, params, c)
    sched = build_schedule(spec, c)
    traj_g, traj_e = evolve_many(params, sched, ("g", "e"), dt=dt, frame=frame, **evolve_kwargs)
    diag = separation_diagnostics(traj_g, traj_e)
    diag.extra.update(
        protocol=spec.name,
        kind=spec.kind,
        alpha_vo=_complex_pair(analytic.virtual_origin(spec.omega_q, c.g0)) if c.g0 else [0.0, 0.0],
        physical_omega_r=[_complex_pair(s.omega_r) for s in sched.segments],
        physical_omega_q=[_complex_pair(s.omega_q) for s in sched.segments],
    )
    if spec.kind == "unconditional_reset":
        diag.extra.update(hold=spec.reset_tail.hold, final_displacement=_complex_pair(spec.reset_tail.final_displacement))
    return traj_g, traj_e, diag


def _complex_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def reset_residual(params, spec, dt=None, frame="dispersive", sweep=0.1, n_sweep=21, return_details=False, **evolve_kwargs):
    """Largest ``|alpha(t_end)|`` over both preparations after an unconditional reset.

    The hold is swept over ``+/- sweep`` around the closed-form merge time on
    one simulated probe run per preparation; for each candidate the
    least-squares final displacement is computed, and the best pair is
    re-simulated end to end.  An explicitly given hold or displacement is used
    as is.
    """
    if spec.kind != "unconditional_reset":
        raise ValueError("reset_residual needs an unconditional_reset protocol")
    c = dispersive_constants(params)
    tail = spec.reset_tail
    kwargs = dict(dt=dt, frame=frame, **evolve_kwargs)
    if tail.hold is None or tail.final_displacement is None:
        if tail.hold is None:
            holds = merge_time(spec, params, c) * (1 + np.linspace(-sweep, sweep, n_sweep))
        else:
            holds = np.array([tail.hold])
        probe = PulseSchedule(
            (
                _physical_segment(spec.duration, spec.omega_q, spec.omega_r, c, spec.compensate_offset),
                _physical_segment(holds[-1], -spec.omega_q, 0j, c, spec.compensate_offset),
            ),
            spec.rise_time,
        )
        tg, te = evolve_many(params, probe, ("g", "e"), sample_interval=PROBE_SAMPLE_INTERVAL, **kwargs)
        lam = _rates(c, params.kappa)
        tau = tail.displacement_duration
        best = None
        for h in holds:
            at = {q: _interp(tr, spec.duration + h) for q, tr in (("g", tg), ("e", te))}
            disp = tail.final_displacement
            if disp is None:
                disp = optimal_displacement(at["g"], at["e"], tau, c, params.kappa)
            pred = max(abs(at[q] * np.exp(lam[q] * tau) + disp * analytic._phi1(lam[q] * tau)) for q in "ge")
            if best is None or pred < best[0]:
                best = (pred, h, disp)
        spec = spec.with_(reset_tail=replace(tail, hold=float(best[1]), final_displacement=complex(best[2])))
    sched = build_schedule(spec, c)
    tg, te = evolve_many(params, sched, ("g", "e"), **kwargs)
    residual = float(max(abs(tg.alpha[-1]), abs(te.alpha[-1])))
    if return_details:
        return residual, spec, (tg, te)
    return residual


def _interp(traj, t):
    return complex(np.interp(t, traj.times, traj.alpha.real), np.interp(t, traj.times, traj.alpha.imag))


def optimal_resonator_phase(params, omega_q, omega_r_mag, horizon, constants=None, n_grid=360):
    """Phase of the effective resonator drive that maximizes the closed-form
    g/e separation integrated over ``[0, horizon]``.

    The initial separation rate does not depend on the resonator drive, so
    the choice is made on the early growth instead.
    """
    c = constants or dispersive_constants(params)
    t = np.linspace(0, horizon, 101)

    def score(phi):
        p = analytic.AnalyticTrajectoryParams(omega_r_mag * np.exp(1j * phi), omega_q, c.chi, c.g0, params.kappa)
        sep = np.abs(analytic.analytic_trajectory(p, "e", t) - analytic.analytic_trajectory(p, "g", t))
        return trapezoid(sep, t)

    grid = np.linspace(0, 2 * math.pi, n_grid, endpoint=False)
    vals = [score(x) for x in grid]
    k = int(np.argmax(vals))
    step = grid[1] - grid[0]
    res = minimize_scalar(lambda x: -score(x), bounds=(grid[k] - step, grid[k] + step), method="bounded")
    return float(np.angle(np.exp(1j * res.x)))


def preset(name, params, duration=280e-9, constants=None, phase_horizon=None):
    """Named protocol at the reference drive amplitudes.

    Names: ``conventional``, ``qubit_only``, ``multichannel``,
    ``multichannel_imprecise_phase``, ``vacuum_lock`` and
    ``unconditional_reset``.  The qubit drive is real and positive, so the
    virtual origin sits on the negative real axis.
    """
    c = constants or dispersive_constants(params)
    or0, oq0 = reference_drives(params, c)
    if name == "conventional":
        return ProtocolSpec("conventional", duration, omega_r_mag=or0, phi_r=0.0, name=name)
    if name == "qubit_only":
        return ProtocolSpec("qubit_only", duration, omega_q_mag=oq0, name=name)
    if name in ("multichannel", "multichannel_imprecise_phase"):
        oq = oq0 * db_to_amplitude(MULTICHANNEL_DB[0])
        orm = or0 * db_to_amplitude(MULTICHANNEL_DB[1])
        horizon = phase_horizon
        if horizon is None:
            if params.kappa == 0:
                raise ValueError("kappa = 0: pass phase_horizon explicitly")
            horizon = 2 / params.kappa
        phi = optimal_resonator_phase(params, oq, orm, horizon, c)
        if name.endswith("imprecise_phase"):
            phi += IMPRECISE_PHASE
        return ProtocolSpec("multichannel", duration, omega_q_mag=oq, omega_r_mag=orm, phi_r=phi, name=name)
    if name == "vacuum_lock":
        oq = oq0 * db_to_amplitude(MULTICHANNEL_DB[0])
        lock = vacuum_lock_drive(oq, c)
        return ProtocolSpec("vacuum_lock", duration, omega_q_mag=oq, omega_r_mag=abs(lock), phi_r=float(np.angle(lock)), name=name)
    if name == "unconditional_reset":
        return ProtocolSpec("unconditional_reset", duration, omega_q_mag=oq0, name=name)
    raise ValueError(f"unknown preset {name!r}")


PRESETS = ("conventional", "qubit_only", "multichannel", "multichannel_imprecise_phase", "vacuum_lock", "unconditional_reset")
