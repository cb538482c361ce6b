"""Fixed-step Lindblad integration under piecewise-constant drives.

The master equation is

    drho/dt = -i [H, rho] + kappa L[a] rho + gamma_1 L[sigma_-] rho,
    L[c] rho = c rho c^dag - (c^dag c rho + rho c^dag c) / 2,

so the resonator amplitude relaxes at ``kappa/2`` and the photon number at
``kappa``.  Time stepping is classical fourth-order Runge-Kutta on a grid that
contains every segment boundary and every sample time.
"""
import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from scipy.linalg import expm

from .operators import DimensionError, annihilation, basis, coherent, identity, kron, partial_trace_resonator
from .system import (
    build_dispersive_hamiltonian,
    build_displaced_hamiltonian,
    build_rotating_hamiltonian,
    coupling_ladder,
    dispersive_constants,
    dispersive_generator,
)

log = logging.getLogger(__name__)

FRAMES = ("rotating", "dispersive", "displaced")
STEPS_PER_PERIOD = 50
TRACE_ERROR = 1e-4
TRUNCATION_LIMIT = 1e-3
POSITIVITY_LIMIT = -1e-7
SUPEROP_MAX_DIM = 32


class IntegratorInstabilityError(RuntimeError):
    """Trace drifted beyond tolerance; the time step is too large."""


class TimestepTooLargeError(ValueError):
    """Requested time step violates the sampling bound of the Hamiltonian."""


class TruncationWarning(UserWarning):
    """The highest Fock level carries significant population."""


class NotApplicableError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    duration: float
    omega_q: complex = 0j
    omega_r: complex = 0j

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered constant-drive segments.

    With ``rise_time > 0`` each segment starts with a cosine ramp of that
    length from the previous segment's amplitudes (zero before the first).
    """

    segments: tuple
    rise_time: float = 0.0

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        object.__setattr__(self, "segments", segs)
        if self.rise_time < 0:
            raise ValueError("rise_time must be non-negative")
        if self.rise_time > min(s.duration for s in segs) / 2:
            raise ValueError("rise_time exceeds half the shortest segment")

    @classmethod
    def constant(cls, duration, omega_q=0j, omega_r=0j, rise_time=0.0):
        return cls((Segment(duration, omega_q, omega_r),), rise_time)

    @property
    def duration(self):
        return math.fsum(s.duration for s in self.segments)

    @property
    def boundaries(self):
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def segment_index(self, t):
        idx = int(np.searchsorted(self.boundaries, t, side="right")) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def envelope(self, t, index=None):
        """Drive amplitudes ``(Omega_q, Omega_r)`` at time ``t``."""
        i = self.segment_index(t) if index is None else index
        seg = self.segments[i]
        tau = t - self.boundaries[i]
        if self.rise_time > 0 and tau < self.rise_time:
            prev = self.segments[i - 1] if i > 0 else Segment(1.0)
            w = 0.5 * (1 - math.cos(math.pi * max(tau, 0.0) / self.rise_time))
            return (
                prev.omega_q + w * (seg.omega_q - prev.omega_q),
                prev.omega_r + w * (seg.omega_r - prev.omega_r),
            )
        return seg.omega_q, seg.omega_r

    def max_qubit_slew(self):
        """Largest ``|dOmega_q/dt|`` (inf for an instantaneous jump)."""
        best = 0.0
        prev = 0j
        for seg in self.segments:
            jump = abs(seg.omega_q - prev)
            if jump > 0:
                best = max(best, math.inf if self.rise_time == 0 else math.pi * jump / (2 * self.rise_time))
            prev = seg.omega_q
        return best


@dataclass
class Trajectory:
    times: np.ndarray
    alpha: np.ndarray
    populations: np.ndarray  # shape (n_levels, n_times)
    photon_number: np.ndarray
    prep_label: str
    frame: str = "rotating"
    min_eigenvalue: np.ndarray | None = None
    trace_drift: float = 0.0
    warnings: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None

    @property
    def n_levels(self):
        return self.populations.shape[0]

    def to_csv(self, path):
        write_trajectory_csv(path, self)


def write_trajectory_csv(path, traj):
    """Columns ``t_s, re_alpha, im_alpha, n_photon, p0, p1, ...`` at 17
    significant digits."""
    header = ["t_s", "re_alpha", "im_alpha", "n_photon"] + [f"p{k}" for k in range(traj.n_levels)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(traj.times):
            row = [t, traj.alpha[i].real, traj.alpha[i].imag, traj.photon_number[i]]
            row += list(traj.populations[:, i])
            w.writerow([f"{float(x):.17g}" for x in row])


def read_trajectory_csv(path, prep_label="g"):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(
        times=data[:, 0],
        alpha=data[:, 1] + 1j * data[:, 2],
        photon_number=data[:, 3],
        populations=data[:, 4:].T.copy(),
        prep_label=prep_label,
    )


def lindblad_dissipator(c, rho):
    """``L[c] rho = c rho c^dag - (c^dag c rho + rho c^dag c) / 2``."""
    c = np.asarray(c)
    rho = np.asarray(rho)
    if c.shape != rho.shape:
        raise DimensionError(f"operator {c.shape} and state {rho.shape} differ")
    cd = c.conj().T
    cdc = cd @ c
    return c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)


class _LadderJump:
    """Jump operator ``sum_j coef_j |j><j+1| (+ shift * 1)`` acting on one tensor
    factor; ``c rho c^dag`` is applied by slicing instead of matrix products."""

    def __init__(self, rate, axis, coef, shift, dims):
        self.rate = rate
        self.axis = axis  # 0: transmon, 1: resonator
        self.coef = np.asarray(coef, dtype=float)
        self.shift = complex(shift)
        self.dims = dims
        self._w = None

    def matrix(self):
        n, m = self.dims
        size = (n, m)[self.axis]
        lad = np.diag(self.coef, k=1).astype(complex) + self.shift * identity(size)
        return kron(lad, identity(m)) if self.axis == 0 else kron(identity(n), lad)

    def _lower(self, x, ax):
        """Apply the ladder part along axis ``ax`` (negative, of the last four)."""
        out = np.zeros_like(x)
        src = [Ellipsis] + [slice(None)] * 4
        dst = [Ellipsis] + [slice(None)] * 4
        src[ax] = slice(1, None)
        dst[ax] = slice(None, -1)
        shape = [1, 1, 1, 1]
        shape[ax] = -1
        out[tuple(dst)] = self.coef.reshape(shape) * x[tuple(src)]
        return out

    def add_sandwich(self, rho4, out4):
        """``out4 += rate * c rho c^dag`` for ``rho`` shaped ``(..., n, m, n, m)``."""
        row_ax, col_ax = self.axis - 4, self.axis - 2
        if not self.shift:
            if self._w is None:
                r_shape = [1, 1, 1, 1]
                c_shape = [1, 1, 1, 1]
                r_shape[row_ax] = -1
                c_shape[col_ax] = -1
                self._w = self.rate * self.coef.reshape(r_shape) * self.coef.reshape(c_shape)
                lo, hi = [Ellipsis] + [slice(None)] * 4, [Ellipsis] + [slice(None)] * 4
                lo[row_ax] = lo[col_ax] = slice(None, -1)
                hi[row_ax] = hi[col_ax] = slice(1, None)
                self._slices = (tuple(lo), tuple(hi))
            lo, hi = self._slices
            out4[lo] += self._w * rho4[hi]
            return
        out4 += self.rate * self.sandwich(rho4)

    def sandwich(self, rho4):
        """Return ``c rho c^dag`` (without the rate) for ``rho`` shaped ``(..., n, m, n, m)``."""
        left = self._lower(rho4, self.axis - 4) + self.shift * rho4
        return self._lower(left, self.axis - 2) + np.conj(self.shift) * left


class _Model:
    """Hamiltonian factory, jump operators, and observables for one frame."""

    def __init__(self, params, frame, schedule):
        if frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
        self.params = params
        self.frame = frame
        m = params.n_fock
        if frame == "rotating":
            n = params.n_transmon
            builder = build_rotating_hamiltonian
        else:
            n = params.n_transmon
            if n not in (2, 3):
                raise DimensionError(f"{frame} frame supports 2 or 3 transmon levels, got {n}")
            builder = build_dispersive_hamiltonian if frame == "dispersive" else build_displaced_hamiltonian
        self.dims = (n, m)
        self.alpha_vo = 0j
        if frame == "displaced":
            qs = {complex(s.omega_q) for s in schedule.segments}
            if len(qs) != 1:
                raise ValueError("displaced frame needs one constant qubit drive across all segments")
            omega_q = qs.pop()
            if omega_q and schedule.rise_time > 0:
                raise ValueError("displaced frame cannot ramp the qubit drive (the frame would move)")
            self.alpha_vo = -omega_q / dispersive_constants(params).g0
            fixed_q = omega_q
            h0 = builder(params, fixed_q, 0j)
            h1 = builder(params, fixed_q, 1.0)
            hi = builder(params, fixed_q, 1j)
            self._q_op = np.zeros_like(h0)
            self._h0 = h0
        else:
            h0 = builder(params, 0j, 0j)
            q1 = builder(params, 1.0, 0j) - h0
            qi = builder(params, 1j, 0j) - h0
            self._q_op = 0.5 * (q1 - 1j * qi)
            h1 = builder(params, 0j, 1.0)
            hi = builder(params, 0j, 1j)
            self._h0 = h0
        self._r_op = 0.5 * ((h1 - h0) - 1j * (hi - h0))

        jumps = []
        if params.kappa > 0:
            jumps.append(_LadderJump(params.kappa, 1, np.sqrt(np.arange(1, m)), self.alpha_vo, self.dims))
        if params.gamma_1 > 0:
            g_k, lam = coupling_ladder(params.with_(n_transmon=n))
            coef = [1.0] + [lam[k] if lam[k] else 0.0 for k in range(1, n - 1)]
            jumps.append(_LadderJump(params.gamma_1, 0, coef, 0j, self.dims))
        self.jumps = jumps
        self._damping = sum(j.rate * (j.matrix().conj().T @ j.matrix()) for j in jumps) if jumps else 0
        # constant energy offset removed so the spectrum is centred on zero
        ev = np.linalg.eigvalsh(self._h0)
        self.offset = 0.5 * (ev[0] + ev[-1])
        self.spectral_halfwidth = 0.5 * (ev[-1] - ev[0])
        self._ident = identity(n * m)
        self._u = None

        a = kron(identity(n), annihilation(m))
        self.a = a + self.alpha_vo * self._ident
        self.n_op = self.a.conj().T @ self.a

    def hamiltonian(self, omega_q, omega_r):
        h = self._h0 - self.offset * self._ident
        if self.frame != "displaced" and omega_q:
            qq = omega_q * self._q_op
            h = h + qq + qq.conj().T
        if omega_r:
            rr = omega_r * self._r_op
            h = h + rr + rr.conj().T
        return h

    def effective(self, omega_q, omega_r):
        return self.hamiltonian(omega_q, omega_r) - 0.5j * self._damping

    def rhs(self, rho, heff):
        """Master-equation derivative; ``rho`` may carry leading batch axes."""
        x = heff @ rho
        # -i(H rho - rho H^dag) = i(x^dag - x) because rho is Hermitian
        out = x.conj().swapaxes(-1, -2) - x
        out *= 1j
        if self.jumps:
            shape = rho.shape[:-2] + self.dims + self.dims
            out4 = out.reshape(shape)
            r4 = rho.reshape(shape)
            for j in self.jumps:
                j.add_sandwich(r4, out4)
        return out

    def liouvillian(self, heff):
        """Superoperator acting on row-major ``vec(rho)``."""
        d = heff.shape[0]
        ident = np.eye(d)
        sup = -1j * np.kron(heff, ident) + 1j * np.kron(ident, heff.conj())
        for j in self.jumps:
            c = j.matrix()
            sup += j.rate * np.kron(c, c.conj())
        return sup

    def rk4_map(self, heff, h):
        """One classical RK4 step for the autonomous linear equation,
        ``sum_{j<=4} (h L)^j / j!``."""
        hl = h * self.liouvillian(heff)
        out = np.eye(hl.shape[0], dtype=complex)
        term = out
        for j in range(1, 5):
            term = term @ hl / j
            out = out + term
        return out

    def dressed_populations(self, rho, omega_q, omega_r):
        """Transmon populations in the drive-dressed basis.

        In the rotating frame the state is first mapped through the
        dispersive transformation, which removes the photon-induced admixture
        of neighbouring levels.  The remaining qubit-drive dressing is removed
        by projecting the reduced transmon state on the eigenvectors of the
        zero-photon block of the Hamiltonian, each labelled by its largest
        bare component.
        """
        n, m = self.dims
        if self._u is None:
            self._u = expm(dispersive_generator(self.params)) if self.frame == "rotating" else False
        if self._u is not False:
            rho = self._u @ rho @ self._u.conj().T
        red = partial_trace_resonator(rho, n, m)
        idx = np.arange(n) * m
        h_t = self.hamiltonian(omega_q, omega_r)[np.ix_(idx, idx)]
        _, vecs = np.linalg.eigh(h_t)
        labels = np.argmax(np.abs(vecs) ** 2, axis=0)
        if len(set(labels.tolist())) != n:
            raise ValueError("drive-dressed transmon states cannot be labelled uniquely; drive too strong")
        pops = np.einsum("ki,kl,li->i", vecs.conj(), red, vecs).real
        out = np.empty(n)
        out[labels] = pops
        return out

    def initial_state(self, initial_qubit):
        n, m = self.dims
        res = coherent(m, -self.alpha_vo) if self.frame == "displaced" else basis(m, 0)
        res_dm = np.outer(res, res.conj())
        if isinstance(initial_qubit, str):
            if initial_qubit not in ("g", "e"):
                raise ValueError(f"initial_qubit must be 'g', 'e' or a density matrix, got {initial_qubit!r}")
            q = np.zeros((n, n), dtype=complex)
            k = 0 if initial_qubit == "g" else 1
            q[k, k] = 1.0
            return kron(q, res_dm)
        rho = np.asarray(initial_qubit, dtype=complex)
        if rho.shape == (n, n):
            return kron(rho, res_dm)
        if rho.shape == (n * m, n * m):
            return rho.copy()
        raise DimensionError(f"custom initial state has shape {rho.shape}; expected {(n, n)} or {(n * m, n * m)}")


def max_timestep(params, schedule, frame="rotating"):
    """Upper bound ``1 / (50 f_max)`` on the step, with ``f_max`` (Hz) the
    largest eigenfrequency of the centred drive-free Hamiltonian plus the
    largest drive magnitude."""
    model = _Model(params, frame, schedule)
    return _max_dt(model, schedule)


def _max_dt(model, schedule):
    drive = max(abs(s.omega_q) + abs(s.omega_r) for s in schedule.segments)
    f_max = (model.spectral_halfwidth + drive) / (2 * math.pi)
    return 1.0 / (STEPS_PER_PERIOD * f_max)


def _time_grid(schedule, sample_interval, dt):
    """Breakpoints containing segment boundaries, ramp ends and sample times,
    and a mask of the breakpoints that are samples."""
    total = schedule.duration
    n_samples = int(math.floor(total / sample_interval + 1e-9))
    samples = sample_interval * np.arange(n_samples + 1)
    if total - samples[-1] > 1e-9 * sample_interval:
        samples = np.append(samples, total)
    else:
        samples[-1] = total
    edges = schedule.boundaries
    if schedule.rise_time > 0:
        edges = np.concatenate([edges, edges[:-1] + schedule.rise_time])
    marks = np.unique(np.concatenate([samples, edges]))
    # drop near-coincident marks created by floating point
    keep = [marks[0]]
    for x in marks[1:]:
        if x - keep[-1] > 1e-6 * dt:
            keep.append(x)
    keep[-1] = total
    marks = np.array(keep)
    is_sample = np.array([np.min(np.abs(samples - x)) <= 1e-6 * dt for x in marks])
    return marks, is_sample


def evolve(
    params,
    schedule,
    initial_qubit="g",
    dt=None,
    frame="rotating",
    sample_interval=2e-9,
    allow_large_dt=False,
    positivity_check=True,
    method="auto",
    populations="bare",
):
    """Integrate the master equation and sample the resonator and transmon.

    Parameters
    ----------
    params : SystemParams
    schedule : PulseSchedule
    initial_qubit : {'g', 'e'} or ndarray
        Transmon state with the resonator in vacuum, a transmon density
        matrix, or a full joint density matrix.
    dt : float, optional
        Step size in seconds; defaults to the largest allowed step.
    frame : {'rotating', 'dispersive', 'displaced'}
    sample_interval : float
        Spacing of recorded snapshots in seconds.
    allow_large_dt : bool
        Skip the step-size bound check.
    method : {'auto', 'direct', 'superop'}
        ``'superop'`` composes the (linear, constant-drive) RK4 step map as a
        superoperator and applies its matrix power between samples; this is
        the same numerical scheme with far less interpreter overhead for
        small Hilbert spaces.  ``'auto'`` picks it for constant-drive
        schedules with joint dimension <= 32.
    populations : {'bare', 'dressed'}
        Basis for the recorded transmon populations; see
        ``_Model.dressed_populations``.  Dressed populations separate real
        excitation of ``|f>`` from the reversible admixture caused by the
        coupling and the qubit drive.

    Returns
    -------
    Trajectory
        ``alpha`` is always ``<a>`` of the undisplaced resonator operator.
    """
    return _evolve_batch(
        params, schedule, [initial_qubit], dt, frame, sample_interval,
        allow_large_dt, positivity_check, method, populations,
    )[0]


def evolve_many(params, schedule, preparations=("g", "e"), **kwargs):
    """Evolve several initial states through one schedule in a single batch.

    The density matrices are stacked and advanced together, so each RK4 stage
    costs one batched product instead of one per preparation.  Keyword
    arguments are those of :func:`evolve`; results follow ``preparations``.
    """
    opts = dict(dt=None, frame="rotating", sample_interval=2e-9, allow_large_dt=False,
                positivity_check=True, method="auto", populations="bare")
    unknown = set(kwargs) - set(opts)
    if unknown:
        raise TypeError(f"unexpected arguments {sorted(unknown)}")
    opts.update(kwargs)
    return _evolve_batch(params, schedule, list(preparations), **opts)


def _evolve_batch(params, schedule, initials, dt, frame, sample_interval,
                  allow_large_dt, positivity_check, method, populations):
    if populations not in ("bare", "dressed"):
        raise ValueError(f"populations must be 'bare' or 'dressed', got {populations!r}")
    if method not in ("auto", "direct", "superop"):
        raise ValueError(f"unknown method {method!r}")
    model = _Model(params, frame, schedule)
    dt_max = _max_dt(model, schedule)
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-9) and not allow_large_dt:
        raise TimestepTooLargeError(
            f"dt={dt:.3g} s exceeds 1/(50 f_max)={dt_max:.3g} s for the {frame} Hamiltonian"
        )
    labels = [x if isinstance(x, str) else "custom" for x in initials]
    rho = np.stack([model.initial_state(x) for x in initials])
    batch = rho.shape[0]
    n, m = model.dims

    marks, is_sample = _time_grid(schedule, sample_interval, dt)
    slew = schedule.max_qubit_slew()
    adiabatic_ratio = slew / (params.detuning**2 / math.sqrt(2)) if params.detuning else math.inf
    log.info("evolve %s: max |dOmega_q/dt| / (Delta^2/sqrt2) = %.3g", frame, adiabatic_ratio)

    ramped = schedule.rise_time > 0
    seg_heff = {}

    def heff_at(t, seg):
        if seg not in seg_heff:
            s_obj = schedule.segments[seg]
            seg_heff[seg] = model.effective(s_obj.omega_q, s_obj.omega_r)
        if ramped and (t - bnd[seg]) < schedule.rise_time:
            return model.effective(*schedule.envelope(t, seg))
        return seg_heff[seg]

    logs = [dict(alpha=[], pops=[], nums=[], mins=[], warnings=[], flagged=False) for _ in range(batch)]
    times = []

    def record(t):
        tr = np.trace(rho, axis1=-2, axis2=-1).real
        drift = float(np.max(np.abs(tr - 1)))
        if drift > TRACE_ERROR:
            raise IntegratorInstabilityError(
                f"trace drifted by {drift:.3g} at t={t:.4g} s; reduce dt (currently {dt:.3g} s)"
            )
        times.append(t)
        env = schedule.envelope(t) if populations == "dressed" else None
        for b, lg in enumerate(logs):
            r = rho[b]
            diag = np.einsum("kmkm->km", r.reshape(n, m, n, m)).real
            lg["alpha"].append(np.einsum("ij,ji->", model.a, r))
            lg["nums"].append(np.einsum("ij,ji->", model.n_op, r).real)
            lg["pops"].append(model.dressed_populations(r, *env) if env else diag.sum(axis=1))
            top = diag[:, -1].sum()
            if top > TRUNCATION_LIMIT and not lg["flagged"]:
                lg["flagged"] = True
                msg = f"population {top:.3g} in Fock level {m - 1} at t={t:.4g} s; increase n_fock"
                lg["warnings"].append(msg)
                warnings.warn(msg, TruncationWarning, stacklevel=4)
            if positivity_check:
                lg["mins"].append(np.linalg.eigvalsh(r)[0])
        return drift

    use_superop = method == "superop" or (method == "auto" and n * m <= SUPEROP_MAX_DIM)
    step_maps = {}
    bnd = schedule.boundaries

    max_drift = record(0.0)
    for i in range(len(marks) - 1):
        t0, t1 = marks[i], marks[i + 1]
        seg = min(int(np.searchsorted(bnd, 0.5 * (t0 + t1), side="right")) - 1, len(schedule.segments) - 1)
        steps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / steps
        in_ramp = ramped and (t0 - bnd[seg]) < schedule.rise_time * (1 - 1e-9)
        if use_superop and not in_ramp:
            key = (seg, steps, round(h / dt, 9))
            prop = step_maps.get(key)
            if prop is None:
                prop = np.linalg.matrix_power(model.rk4_map(heff_at(t0, seg), h), steps)
                step_maps[key] = prop
            rho = (rho.reshape(batch, -1) @ prop.T).reshape(rho.shape)
            rho = 0.5 * (rho + rho.conj().swapaxes(-1, -2))
        else:
            for s_ in range(steps):
                t = t0 + s_ * h
                hm = heff_at(t + 0.5 * h, seg)
                k1 = model.rhs(rho, heff_at(t, seg))
                k2 = model.rhs(rho + (0.5 * h) * k1, hm)
                k3 = model.rhs(rho + (0.5 * h) * k2, hm)
                k4 = model.rhs(rho + h * k3, heff_at(t + h, seg))
                k1 += k4
                k2 += k3
                k1 += 2 * k2
                rho = rho + (h / 6) * k1
                rho = 0.5 * (rho + rho.conj().swapaxes(-1, -2))
        if is_sample[i + 1]:
            max_drift = max(max_drift, record(t1))

    out = []
    for b, lg in enumerate(logs):
        min_eig = np.array(lg["mins"]) if positivity_check else None
        if min_eig is not None and min_eig.size and min_eig.min() < POSITIVITY_LIMIT:
            lg["warnings"].append(f"density matrix eigenvalue {min_eig.min():.3g} below {POSITIVITY_LIMIT}")
        out.append(Trajectory(
            times=np.array(times),
            alpha=np.array(lg["alpha"]),
            populations=np.array(lg["pops"]).T,
            photon_number=np.array(lg["nums"]),
            prep_label=labels[b],
            frame=frame,
            min_eigenvalue=min_eig,
            trace_drift=max_drift,
            warnings=lg["warnings"],
            metadata={
                "dt": dt,
                "dt_max": dt_max,
                "adiabaticity_ratio": adiabatic_ratio,
                "alpha_vo": model.alpha_vo,
                "dims": model.dims,
                "populations": populations,
            },
            final_state=rho[b].copy(),
        ))
    return out


def leakage(traj):
    """Largest population outside ``{|g>, |e>}`` over the trajectory."""
    if traj.n_levels < 3:
        raise NotApplicableError("leakage needs a trajectory with at least three transmon levels")
    return float(np.max(traj.populations[2:].sum(axis=0)))
