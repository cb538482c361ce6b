"""Single-shot readout statistics from resonator trajectories.

A shot integrates the noisy resonator amplitude with matched weights,

    S = sum_i [w_re(t_i) Re a_i + i w_im(t_i) Im a_i] dt,

over the samples ``t_i`` in ``(0, tau]``, and is assigned to the nearest of
two reference points.  Noise is white and Gaussian per quadrature and sample.
"""
import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import constants as sc
from scipy.optimize import least_squares
from scipy.signal import find_peaks
from scipy.special import erfc

LABELS = ("g", "e")
BATCH_SIZE = 4096


class DegenerateWeightsError(ValueError):
    """The g and e trajectories never separate, so no weights exist."""


class FitError(RuntimeError):
    """A calibration fit did not converge."""


@dataclass(frozen=True)
class WeightFunctions:
    times: np.ndarray
    w_re: np.ndarray
    w_im: np.ndarray
    dt: float
    degenerate: tuple = ()

    @property
    def tau(self):
        return float(self.times[-1]) if len(self.times) else 0.0


@dataclass(frozen=True)
class ShotRecord:
    S: complex
    true_label: str
    assigned_label: str | None = None

    def __post_init__(self):
        if self.true_label not in LABELS or self.assigned_label not in LABELS + (None,):
            raise ValueError("labels must be 'g' or 'e'")


@dataclass
class Shots:
    """Columnar batch of shots; ``true`` holds the intended preparation and
    ``actual`` the state after thermal flips."""

    S: np.ndarray
    true: np.ndarray
    actual: np.ndarray
    assigned: np.ndarray | None = None

    def __len__(self):
        return len(self.S)

    def records(self):
        assigned = self.assigned if self.assigned is not None else [None] * len(self)
        return [ShotRecord(complex(s), str(t), None if a is None else str(a)) for s, t, a in zip(self.S, self.true, assigned)]

    def concat(self, other):
        assigned = None
        if self.assigned is not None and other.assigned is not None:
            assigned = np.concatenate([self.assigned, other.assigned])
        return Shots(
            np.concatenate([self.S, other.S]),
            np.concatenate([self.true, other.true]),
            np.concatenate([self.actual, other.actual]),
            assigned,
        )


@dataclass(frozen=True)
class NoiseModel:
    sigma_quadrature: float
    sample_interval: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_quadrature > 0:
            raise ValueError("sigma_quadrature must be positive")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")

    @classmethod
    def from_noise_factor(cls, factor, kappa_x, sample_interval, seed=0):
        """Per-sample std for which a flat integration over ``1/kappa_x`` has
        variance ``factor / 2`` per quadrature (vacuum noise times ``factor``)."""
        if factor < 1:
            raise ValueError("amplifier noise factor must be >= 1")
        if not kappa_x > 0:
            raise ValueError("kappa_x must be positive")
        return cls(math.sqrt(factor / (2 * kappa_x * sample_interval)), sample_interval, seed)


def _uniform_step(times):
    steps = np.diff(times)
    if len(steps) == 0:
        raise ValueError("need at least two samples")
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-6, atol=0):
        raise ValueError("trajectory samples must be evenly spaced")
    return dt


def _window(traj, tau):
    dt = _uniform_step(traj.times)
    if tau is None:
        tau = traj.times[-1]
    if tau > traj.times[-1] + 1e-6 * dt:
        raise ValueError(f"tau={tau:.4g} s exceeds trajectory duration {traj.times[-1]:.4g} s")
    mask = (traj.times > 0.5 * dt) & (traj.times <= tau + 1e-6 * dt)
    return mask, dt


def matched_weights(traj_g, traj_e, tau=None, rel_tol=1e-9):
    """Weights ``|Re d|`` and ``|Im d|`` of ``d = alpha_e - alpha_g`` on ``(0, tau]``.

    A quadrature whose separation is negligible (below ``rel_tol`` of the
    total) is zeroed and listed in ``degenerate``; if both are, the
    trajectories carry no information and ``DegenerateWeightsError`` is raised.
    """
    if traj_g.times.shape != traj_e.times.shape or not np.allclose(traj_g.times, traj_e.times):
        raise ValueError("trajectories must share the time grid")
    mask, dt = _window(traj_g, tau)
    d = traj_e.alpha[mask] - traj_g.alpha[mask]
    total = np.abs(d.real).sum() + np.abs(d.imag).sum()
    if total == 0 or not np.isfinite(total):
        raise DegenerateWeightsError("g and e trajectories do not separate")
    out = {}
    degenerate = []
    for name, part in (("re", np.abs(d.real)), ("im", np.abs(d.imag))):
        s = part.sum()
        if s <= rel_tol * total:
            degenerate.append(name)
            out[name] = np.zeros_like(part)
        else:
            out[name] = part / (s * dt)
    return WeightFunctions(traj_g.times[mask], out["re"], out["im"], dt, tuple(degenerate))


def flat_weights(traj, tau=None):
    """Uniform weights ``1/tau`` on both quadratures of ``(0, tau]``."""
    mask, dt = _window(traj, tau)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("integration window holds no samples")
    w = np.full(n, 1.0 / (n * dt))
    return WeightFunctions(traj.times[mask], w, w.copy(), dt, ("re", "im"))


def integrate(alpha, weights):
    """Noiseless ``S`` for samples aligned with ``weights.times``."""
    return complex(np.sum(weights.w_re * alpha.real) * weights.dt + 1j * np.sum(weights.w_im * alpha.imag) * weights.dt)


def _batch(args):
    alphas, weights, sigma, n, flip_p, rng = args
    flips = rng.random(n) < flip_p if flip_p > 0 else np.zeros(n, dtype=bool)
    base = np.where(flips, 1, 0)
    clean = alphas[base]  # (n, n_t) complex
    k = clean.shape[1]
    noise_re = rng.standard_normal((n, k))
    noise_im = rng.standard_normal((n, k))
    re = (clean.real + sigma * noise_re) @ weights.w_re * weights.dt
    im = (clean.imag + sigma * noise_im) @ weights.w_im * weights.dt
    return re + 1j * im, flips


def sample_shots(traj, weights, noise, n_shots, thermal_eps=0.0, flip_traj=None, label=None, stream=0, max_workers=1):
    """Draw ``n_shots`` integrated shots for one preparation.

    With ``thermal_eps > 0`` each shot independently starts from the state of
    ``flip_traj`` (the other preparation) with that probability.  Batches of
    ``BATCH_SIZE`` shots use independent generators derived from
    ``(noise.seed, stream)``, so results do not depend on ``max_workers``.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if not 0 <= thermal_eps < 1:
        raise ValueError("thermal_eps must lie in [0, 1)")
    if thermal_eps > 0 and flip_traj is None:
        raise ValueError("thermal flips need the trajectory of the other preparation")
    label = label or traj.prep_label
    if label not in LABELS:
        raise ValueError(f"preparation label must be 'g' or 'e', got {label!r}")
    other = "e" if label == "g" else "g"
    mask = np.isin(np.round(traj.times / weights.dt).astype(np.int64), np.round(weights.times / weights.dt).astype(np.int64))
    if mask.sum() != len(weights.times):
        raise ValueError("trajectory samples do not cover the weight grid")
    a0 = traj.alpha[mask]
    a1 = flip_traj.alpha[mask] if flip_traj is not None else a0
    alphas = np.stack([a0, a1])
    sigma = noise.sigma_quadrature * math.sqrt(noise.sample_interval / weights.dt)

    sizes = [BATCH_SIZE] * (n_shots // BATCH_SIZE)
    if n_shots % BATCH_SIZE:
        sizes.append(n_shots % BATCH_SIZE)
    seeds = np.random.SeedSequence(noise.seed, spawn_key=(int(stream),)).spawn(len(sizes))
    jobs = [(alphas, weights, sigma, n, thermal_eps, np.random.default_rng(s)) for n, s in zip(sizes, seeds)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(_batch, jobs))
    else:
        parts = [_batch(j) for j in jobs]
    S = np.concatenate([p[0] for p in parts])
    flips = np.concatenate([p[1] for p in parts])
    true = np.full(n_shots, label)
    actual = np.where(flips, other, label)
    return Shots(S, true, actual)


def assign(S, ref_g, ref_e):
    """Nearest-reference labels; exact ties go to ``g``."""
    if ref_g == ref_e:
        raise ValueError("reference points coincide")
    S = np.asarray(S)
    dg = np.abs(S - ref_g) ** 2
    de = np.abs(S - ref_e) ** 2
    return np.where(dg <= de, "g", "e")


def assign_shots(shots, ref_g, ref_e):
    shots.assigned = assign(shots.S, ref_g, ref_e)
    return shots


def references(S, labels):
    """Mean shot per intended preparation: ``(ref_g, ref_e)``."""
    S = np.asarray(S)
    labels = np.asarray(labels)
    out = []
    for lab in LABELS:
        sel = S[labels == lab]
        if sel.size == 0:
            raise ValueError(f"no shots labelled {lab!r}")
        out.append(complex(sel.mean()))
    return tuple(out)


def assignment_error(shots):
    """``[p(e|g) + p(g|e)] / 2`` over intended preparations."""
    if shots.assigned is None:
        raise ValueError("shots have not been assigned")
    errs = []
    for lab in LABELS:
        sel = shots.true == lab
        if not sel.any():
            raise ValueError(f"no shots prepared in {lab!r}")
        errs.append(np.mean(shots.assigned[sel] != lab))
    return float(np.mean(errs))


def gaussian_overlap_error(distance, sigma):
    """Misassignment probability ``erfc(d / (2 sqrt2 sigma)) / 2`` for two
    equal Gaussians ``d`` apart with std ``sigma`` along the separation."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 0.5 * erfc(distance / (2 * math.sqrt(2) * sigma))


@dataclass
class ErrorPoint:
    tau: float
    error: float
    p_e_given_g: float
    p_g_given_e: float
    ref_g: complex
    ref_e: complex
    degenerate: tuple = ()


def error_vs_time(traj_g, traj_e, noise, n_shots, taus, thermal_eps=0.0, eps_prep=0.0, max_workers=1):
    """Sampled assignment error for each integration time in ``taus``.

    Weights are rebuilt on ``(0, tau]``; references are the per-preparation
    means of the same shots.  ``eps_prep`` is subtracted as a constant.  If
    the trajectories never separate, flat weights are used and the point is
    marked degenerate in both quadratures.
    """
    out = []
    for i, tau in enumerate(taus):
        try:
            w = matched_weights(traj_g, traj_e, tau)
        except DegenerateWeightsError:
            # no separation to match: flat weights still give the chance-level error
            w = flat_weights(traj_g, tau)
        sg = sample_shots(traj_g, w, noise, n_shots, thermal_eps, traj_e, "g", stream=2 * i, max_workers=max_workers)
        # thermal excitation only affects ground-state preparations
        se = sample_shots(traj_e, w, noise, n_shots, 0.0, None, "e", stream=2 * i + 1, max_workers=max_workers)
        shots = sg.concat(se)
        ref_g, ref_e = references(shots.S, shots.true)
        assign_shots(shots, ref_g, ref_e)
        peg = float(np.mean(shots.assigned[shots.true == "g"] == "e"))
        pge = float(np.mean(shots.assigned[shots.true == "e"] == "g"))
        out.append(ErrorPoint(float(tau), 0.5 * (peg + pge) - eps_prep, peg, pge, ref_g, ref_e, w.degenerate))
    return out


def predicted_error(traj_g, traj_e, noise, tau):
    """Gaussian prediction of the matched-filter error (no thermal flips)."""
    w = matched_weights(traj_g, traj_e, tau)
    mask = np.isin(np.round(traj_g.times / w.dt).astype(np.int64), np.round(w.times / w.dt).astype(np.int64))
    d = integrate(traj_e.alpha[mask], w) - integrate(traj_g.alpha[mask], w)
    sigma = noise.sigma_quadrature * math.sqrt(noise.sample_interval / w.dt)
    var_re = sigma**2 * w.dt**2 * np.sum(w.w_re**2)
    var_im = sigma**2 * w.dt**2 * np.sum(w.w_im**2)
    dist = abs(d)
    if dist == 0:
        return 0.5
    var = (d.real**2 * var_re + d.imag**2 * var_im) / dist**2
    return gaussian_overlap_error(dist, math.sqrt(var))


def project(S, ref_g, ref_e):
    """Coordinate of ``S`` along the line from ``ref_g`` to ``ref_e``."""
    u = (ref_e - ref_g) / abs(ref_e - ref_g)
    return np.real((np.asarray(S) - ref_g) * np.conj(u))


@dataclass
class TwoGaussianFit:
    eps_th: float
    alpha_g: float
    alpha_e: float
    sigma_th: float
    cost: float
    degenerate: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _two_gauss_density(x, eps, mg, me, s):
    norm = 1 / (math.sqrt(2 * math.pi) * s)
    return norm * ((1 - eps) * np.exp(-((x - mg) ** 2) / (2 * s * s)) + eps * np.exp(-((x - me) ** 2) / (2 * s * s)))


def fit_two_gaussian(samples, bins=200, max_nfev=2000):
    """Fit a shared-width two-Gaussian mixture to a 1-D histogram.

    Starting values: the centres of the two highest histogram peaks, the
    width from the inter-quartile range, and the weight from the mass around
    the minor peak.  Returns a :class:`TwoGaussianFit`; ``degenerate`` is set
    when the centres end closer than one width or the minor component is
    essentially empty; either way the mixture is not identifiable.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1000:
        raise ValueError("fit_two_gaussian needs at least 1000 samples")
    q1, q3 = np.percentile(x, [25, 75])
    sigma0 = (q3 - q1) / 1.349
    if not sigma0 > 0:
        sigma0 = np.std(x) or 1.0
    counts, edges = np.histogram(x, bins=bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    width = edges[1] - edges[0]
    density = counts / (x.size * width)
    kernel = np.exp(-0.5 * ((np.arange(-3, 4) * width) / max(sigma0 / 4, width)) ** 2)
    smooth = np.convolve(counts, kernel / kernel.sum(), mode="same")
    peaks, _ = find_peaks(np.concatenate([[0], smooth, [0]]))
    peaks = peaks - 1
    order = peaks[np.argsort(smooth[peaks])[::-1]]
    main = order[0] if len(order) else int(np.argmax(smooth))
    mg0 = centers[main]
    minor = [p for p in order[1:] if abs(centers[p] - mg0) > 2 * sigma0]
    if minor:
        me0 = centers[minor[0]]
        near = np.abs(x - me0) < 1.5 * sigma0
        eps0 = min(max(near.mean() / 0.866, 1e-4), 0.5)
    else:
        skew = np.mean((x - x.mean()) ** 3)
        me0 = mg0 + (4 * sigma0 if skew >= 0 else -4 * sigma0)
        eps0 = 1e-3

    def resid(p):
        return _two_gauss_density(centers, *p) - density

    lo = [0.0, edges[0], edges[0], width / 10]
    hi = [1.0, edges[-1], edges[-1], edges[-1] - edges[0]]
    p0 = np.clip([eps0, mg0, me0, sigma0], lo, hi)
    res = least_squares(resid, p0, bounds=(lo, hi), max_nfev=max_nfev, x_scale=[0.01, sigma0, sigma0, sigma0])
    if not res.success:
        raise FitError(f"two-Gaussian fit did not converge: {res.message}; residual norm {np.linalg.norm(res.fun):.3g}")
    eps, mg, me, s = res.x
    if eps > 0.5:
        # label the dominant component as the ground state
        eps, mg, me = 1 - eps, me, mg
    message = ""
    if abs(me - mg) < s:
        message = "centres closer than one width; mixture weight unidentifiable"
    elif eps * x.size < 10:
        message = "minor component holds fewer than 10 expected samples; its centre is unidentifiable"
    return TwoGaussianFit(float(eps), float(mg), float(me), float(s), float(2 * res.cost), bool(message), message)


def effective_temperature(eps_th, omega_q):
    """``hbar omega_q / [k_B ln(1/eps_th)]`` in kelvin (``omega_q`` in rad/s)."""
    if not 0 < eps_th < 1:
        raise ValueError("eps_th must lie strictly between 0 and 1")
    return sc.hbar * omega_q / (sc.k * math.log(1 / eps_th))


def rb_model(L, A, p, B):
    return A * np.power(p, L) + B


def fit_rb_decay(lengths, survival):
    """Fit ``A p^L + B`` with ``0 < p < 1``; returns ``(A, p, B)``."""
    L = np.asarray(lengths, dtype=float)
    y = np.asarray(survival, dtype=float)
    if len(np.unique(L)) < 4:
        raise ValueError("need at least four distinct sequence lengths")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("survival probabilities must lie in [0, 1]")
    order = np.argsort(L)
    L, y = L[order], y[order]
    B0 = y[-1] - 0.1 * (y[0] - y[-1])
    span = y - B0
    good = span > 0
    if good.sum() >= 2:
        slope, icept = np.polyfit(L[good], np.log(span[good]), 1)
        p0 = float(np.clip(np.exp(slope), 1e-6, 1 - 1e-9))
        A0 = float(np.exp(icept))
    else:
        p0, A0 = 0.99, y[0] - y[-1]
    res = least_squares(
        lambda q: rb_model(L, *q) - y,
        [A0, p0, B0],
        bounds=([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000,
    )
    if not res.success:
        raise FitError(f"RB fit did not converge: {res.message}")
    A, p, B = res.x
    if not 0 < p < 1:
        raise FitError(f"RB decay parameter p={p} outside (0, 1)")
    return float(A), float(p), float(B)


def gate_error(p_ref, p_gate):
    """Interleaved-benchmarking error ``(1 - p_gate/p_ref) / 2``."""
    if p_ref <= 0:
        raise ValueError("p_ref must be positive")
    return (1 - p_gate / p_ref) / 2


def preparation_error(eps_gate, eps_th):
    return eps_gate + eps_th


def write_shots_csv(path, shots):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_S", "im_S", "true_label", "assigned_label"])
        assigned = shots.assigned if shots.assigned is not None else [""] * len(shots)
        for s, t, a in zip(shots.S, shots.true, assigned):
            w.writerow([f"{s.real:.17g}", f"{s.imag:.17g}", t, a])


def read_shots_csv(source):
    """Read shots from a path or an open text stream."""
    S, true, assigned = [], [], []
    fh = source if hasattr(source, "read") else open(source, newline="")
    with fh:
        reader = csv.DictReader(fh)
        missing = {"re_S", "im_S", "true_label"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"shots CSV lacks columns {sorted(missing)}")
        for row in reader:
            S.append(float(row["re_S"]) + 1j * float(row["im_S"]))
            true.append(row["true_label"])
            assigned.append(row.get("assigned_label") or None)
    true = np.array(true)
    has_assigned = all(a is not None for a in assigned)
    return Shots(np.array(S), true, true.copy(), np.array(assigned) if has_assigned else None)


def write_histogram_csv(path, shots, ref_g, ref_e, bins=100):
    x = project(shots.S, ref_g, ref_e)
    edges = np.histogram_bin_edges(x, bins=bins)
    cg, _ = np.histogram(x[shots.true == "g"], bins=edges)
    ce, _ = np.histogram(x[shots.true == "e"], bins=edges)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_center", "count_g", "count_e"])
        for c, a, b in zip(0.5 * (edges[1:] + edges[:-1]), cg, ce):
            w.writerow([f"{c:.17g}", int(a), int(b)])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
