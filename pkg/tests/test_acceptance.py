"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (criterion number, measured
quantity, bound, runtime) that is printed in the pytest terminal summary.
Runtime bounds are part of each criterion.  Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from mcreadout.analytic import (
    AnalyticTrajectoryParams,
    analytic_trajectory,
    initial_separation_rate,
    predicted_chi,
    steady_state,
)
from mcreadout.cli import main as cli_main
from mcreadout.engine import Trajectory, evolve, evolve_many, leakage, max_timestep
from mcreadout.protocols import (
    ProtocolSpec,
    analytic_params,
    build_schedule,
    preset,
    reference_drives,
    reset_residual,
    run_protocol,
)
from mcreadout.singleshot import (
    NoiseModel,
    effective_temperature,
    error_vs_time,
    fit_rb_decay,
    fit_two_gaussian,
    gate_error,
    gaussian_overlap_error,
    predicted_error,
    preparation_error,
    rb_model,
)
from mcreadout.system import DEVICE, TWO_PI, dispersive_constants, device_params

RESULTS = []


def report(number, title, ok, detail, runtime, limit):
    ok = bool(ok) and runtime < limit
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} | {detail} | {runtime:.3g} s (limit {limit:g} s)"
    RESULTS.append(line)
    print(line)
    return ok


def two_level(n_fock):
    return device_params(n_transmon=2, n_fock=n_fock)


def test_c01_dispersive_shift_prediction():
    t0 = time.perf_counter()
    chi = predicted_chi(DEVICE["g_hz"], DEVICE["omega_q_hz"] - DEVICE["omega_r_hz"], DEVICE["anharmonicity_hz"])
    runtime = time.perf_counter() - t0
    ok = abs(chi / 1e6 + 1.5) <= 0.05
    detail = f"predicted chi/2pi = {chi / 1e6:.4f} MHz (target -1.5 +/- 0.05), measured {DEVICE['chi_measured_hz'] / 1e6:.2f} MHz"
    assert report(1, "dispersive-shift prediction", ok, detail, runtime, 1e-3), detail


def test_c02_analytic_numeric_oracle():
    t0 = time.perf_counter()
    p = two_level(15)
    c = dispersive_constants(p)
    # 1.4 steady-state photons; the transient overshoot then stays below 2
    omega_r = math.sqrt(1.4) * abs(0.5j * p.kappa + c.chi)
    spec = ProtocolSpec("conventional", 420e-9, omega_r_mag=omega_r, phi_r=0.3)
    tg, te, _ = run_protocol(p, spec, frame="dispersive")
    ap = analytic_params(spec, p, c)
    worst = max(np.max(np.abs(tr.alpha - analytic_trajectory(ap, q, tr.times))) for q, tr in (("g", tg), ("e", te)))
    n_max = max(np.max(tg.photon_number), np.max(te.photon_number))
    runtime = time.perf_counter() - t0
    detail = f"max |d alpha| = {worst:.2e} (bound 1e-3), max <n> = {n_max:.2f}"
    assert report(2, "analytic-numeric oracle", worst <= 1e-3 and n_max <= 2.0 + 1e-6, detail, runtime, 10), detail


def test_c03_steady_state_convergence():
    t0 = time.perf_counter()
    p = two_level(10)
    c = dispersive_constants(p)
    or0, oq0 = reference_drives(p, c)
    duration = 10 / p.kappa
    fractions = (0.0, 0.1, 0.2)
    worst = 0.0
    for fq in fractions:
        for fr in fractions:
            spec = ProtocolSpec("multichannel", duration, fq * oq0, fr * or0, 0.0, 0.0)
            tg, te, _ = run_protocol(p, spec, frame="dispersive", sample_interval=duration / 4)
            ap = analytic_params(spec, p, c)
            for q, tr in (("g", tg), ("e", te)):
                worst = max(worst, abs(tr.alpha[-1] - steady_state(ap, q)))
    runtime = time.perf_counter() - t0
    detail = f"max |alpha(10/kappa) - alpha_s| = {worst:.2e} over 3x3 grid {fractions} x reference drives (bound 5e-3)"
    assert report(3, "steady-state convergence", worst <= 5e-3, detail, runtime, 120), detail


def test_c04_initial_rate_contrast():
    t0 = time.perf_counter()
    p = two_level(10)
    c = dispersive_constants(p)
    t_probe = 2e-9
    out = {}
    for name in ("qubit_only", "conventional"):
        # a 1 ns adiabatic turn-on; the drive is at full strength by t_probe
        spec = preset(name, p, duration=4e-9).with_(rise_time=1e-9)
        tg, te, diag = run_protocol(p, spec, frame="dispersive", sample_interval=0.125e-9)
        k = int(np.argmin(np.abs(tg.times - t_probe)))
        out[name] = (diag.separation[k], np.gradient(diag.separation, tg.times)[k])
    target = initial_separation_rate(analytic_params(preset("qubit_only", p), p, c))
    rate_q = out["qubit_only"][1]
    rel = abs(rate_q / target - 1)
    ratio = out["conventional"][0] / out["qubit_only"][0]
    runtime = time.perf_counter() - t0
    detail = (
        f"qubit_only rate {rate_q:.4g}/s vs 2|Omega_q chi|/g = {target:.4g}/s (dev {rel:.2%}, bound 5%); "
        f"conventional/qubit_only separation at 2 ns = {ratio:.3f} (bound 0.1)"
    )
    assert report(4, "initial-rate contrast", rel <= 0.05 and ratio < 0.1, detail, runtime, 60), detail


def test_c05_vacuum_lock():
    t0 = time.perf_counter()
    p = two_level(24)
    tg, te, _ = run_protocol(p, preset("vacuum_lock", p, duration=420e-9), frame="dispersive")
    ratio = np.max(np.abs(tg.alpha)) / np.max(np.abs(te.alpha))
    runtime = time.perf_counter() - t0
    detail = f"max|alpha_g| / max|alpha_e| = {ratio:.4f} (bound 0.05), max|alpha_e| = {np.max(np.abs(te.alpha)):.2f}"
    assert report(5, "vacuum lock", ratio <= 0.05, detail, runtime, 30), detail


def test_c06_unconditional_reset():
    t0 = time.perf_counter()
    p = two_level(15)
    residual, tuned, (tg, te) = reset_residual(p, preset("unconditional_reset", p, duration=280e-9), return_details=True)
    peak = max(np.max(np.abs(tg.alpha)), np.max(np.abs(te.alpha)))
    runtime = time.perf_counter() - t0
    detail = f"residual {residual:.4f} (bound 0.1) from peak |alpha| {peak:.2f}, hold {tuned.reset_tail.hold * 1e9:.1f} ns"
    assert report(6, "unconditional reset", residual <= 0.1, detail, runtime, 60), detail


@pytest.mark.slow
def test_c07_error_curve_speedup():
    t0 = time.perf_counter()
    # four transmon levels: a three-level cut misplaces the dressed |e> branch
    p = device_params(n_transmon=4, n_fock=15)
    noise = NoiseModel.from_noise_factor(3.0, p.kappa_x, 2e-9, seed=2024)
    taus = np.linspace(100e-9, 420e-9, 8)
    curves = {}
    for name in ("conventional", "multichannel"):
        spec = preset(name, p, duration=420e-9).with_(rise_time=10e-9)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            tg, te, _ = run_protocol(p, spec, frame="rotating")
        pts = error_vs_time(tg, te, noise, 10_000, taus)
        curves[name] = np.array([pt.error for pt in pts])
        curves[name + "_pred"] = np.array([predicted_error(tg, te, noise, t) for t in taus])
    conv, mc = curves["conventional"], curves["multichannel"]
    mask = taus <= 350e-9 + 1e-15
    ratio = conv[mask] / np.maximum(mc[mask], 1e-300)
    runtime = time.perf_counter() - t0
    detail = (
        "tau(ns) " + " ".join(f"{t * 1e9:.0f}" for t in taus)
        + " | eps_conv " + " ".join(f"{e:.4f}" for e in conv)
        + " | eps_mc " + " ".join(f"{e:.4f}" for e in mc)
        + f" | min ratio (tau<=350 ns) {ratio.min():.2f} (bound > 1.3)"
    )
    assert report(7, "error-curve speedup", np.all(ratio > 1.3), detail, runtime, 300), detail


def test_c08_statistical_oracle():
    t0 = time.perf_counter()
    n_t, dt, d = 51, 2e-9, 1.0
    times = np.arange(n_t) * dt
    ag = np.zeros(n_t, dtype=complex)
    ae = np.full(n_t, d, dtype=complex)
    ae[0] = 0
    pops = np.ones((2, n_t))
    tg = Trajectory(times, ag, pops, np.abs(ag) ** 2, "g")
    te = Trajectory(times, ae, pops, np.abs(ae) ** 2, "e")
    n_shots = 10_000
    lines, ok = [], True
    for k, sigma_s in enumerate((0.15, 0.25, 0.35, 0.5, 0.7)):
        # per-sample std giving std sigma_s of the 50-sample flat average
        noise = NoiseModel(sigma_s * math.sqrt(n_t - 1), dt, seed=100 + k)
        err = error_vs_time(tg, te, noise, n_shots, [times[-1]])[0].error
        p = gaussian_overlap_error(d, sigma_s)
        tol = 3 * math.sqrt(p * (1 - p) / (2 * n_shots))
        ok &= abs(err - p) <= tol
        lines.append(f"sigma {sigma_s}: {err:.4f} vs {p:.4f} +/- {tol:.4f}")
    runtime = time.perf_counter() - t0
    detail = "; ".join(lines)
    assert report(8, "statistical oracle", ok, detail, runtime, 60), detail


def test_c09_calibration_fits():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    n = 500_000
    flips = rng.random(n) < 0.006
    x = np.where(flips, 5.0, 0.0) + rng.normal(size=n)
    fit = fit_two_gaussian(x)
    t_eff = effective_temperature(0.006, TWO_PI * 7.86e9)
    L = np.array([1, 2, 4, 8, 16, 32, 64, 128, 256, 512])
    A, p_rb, B = fit_rb_decay(L, rb_model(L, 0.5, 0.99, 0.5))
    eps_gate = gate_error(0.99, 0.9504)
    eps_prep = preparation_error(eps_gate, 0.006)
    checks = [
        abs(fit.eps_th - 0.006) <= 0.002,
        abs(t_eff - 0.073) <= 0.001,
        max(abs(A - 0.5), abs(p_rb - 0.99), abs(B - 0.5)) <= 1e-3,
        abs(eps_gate - 0.020) < 1e-12,
        abs(eps_prep - 0.026) < 1e-12,
    ]
    runtime = time.perf_counter() - t0
    detail = (
        f"eps_th fit {fit.eps_th:.4f} (0.006 +/- 0.002); T_eff {t_eff * 1e3:.2f} mK (73 +/- 1); "
        f"RB (A, p, B) = ({A:.6f}, {p_rb:.6f}, {B:.6f}); gate error {eps_gate:.2%}; eps_prep {eps_prep:.2%}"
    )
    assert report(9, "calibration fits", all(checks), detail, runtime, 120), detail


@pytest.mark.slow
def test_c10_engine_hygiene():
    t0 = time.perf_counter()
    # fourth-order convergence on a smooth driven problem
    small = device_params(n_transmon=2, n_fock=10)
    sched = build_schedule(preset("multichannel", small, duration=40e-9), dispersive_constants(small))
    dt = max_timestep(small, sched, "dispersive")
    finals = [
        evolve(small, sched, "e", dt=dt / k, frame="dispersive", method="direct", sample_interval=40e-9).final_state
        for k in (1, 2, 4)
    ]
    conv_ratio = np.max(np.abs(finals[0] - finals[1])) / np.max(np.abs(finals[1] - finals[2]))

    # leakage at the multichannel operating point, full transmon model
    p = device_params(n_transmon=4, n_fock=14)
    spec = preset("multichannel", p, duration=200e-9).with_(rise_time=10e-9)
    trajs = evolve_many(p, build_schedule(spec, dispersive_constants(p)), populations="dressed")
    leak = max(leakage(tr) for tr in trajs)
    drift_per_us = max(tr.trace_drift for tr in trajs) / (spec.duration * 1e6)
    herm = max(np.max(np.abs(tr.final_state - tr.final_state.conj().T)) for tr in trajs)
    min_eig = min(tr.min_eigenvalue.min() for tr in trajs)
    truncated = any(tr.warnings for tr in trajs)
    runtime = time.perf_counter() - t0
    ok = drift_per_us <= 1e-6 and herm <= 1e-12 and conv_ratio >= 12 and leak < 0.01 and not truncated
    detail = (
        f"trace drift {drift_per_us:.1e}/us (1e-6); hermiticity {herm:.1e} (1e-12); "
        f"dt-halving ratio {conv_ratio:.2f} (>= 12); leakage {leak:.2e} (< 0.01); min eigenvalue {min_eig:.1e}"
    )
    assert report(10, "engine hygiene", ok, detail, runtime, 120), detail


def test_c11_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "system:\n  n_transmon: 2\n  n_fock: 16\n"
        "protocol:\n  name: multichannel\n  duration_s: 200e-9\n  frame: dispersive\n"
        "noise:\n  thermal_eps: 0.006\n"
        "run:\n  n_shots: 2000\n  tau_grid_s: [100e-9, 200e-9]\n  seed: 11\n"
    )
    dirs = []
    for k in range(2):
        assert cli_main(["shots", "--config", str(cfg), "--out", str(tmp_path / f"run{k}")]) == 0
        dirs.append(Path(json.loads(capsys.readouterr().out)["output_dir"]))
    csvs = sorted(p.name for p in dirs[0].glob("*.csv"))
    same = all((dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in csvs)
    runtime = time.perf_counter() - t0
    detail = f"{len(csvs)} CSV files compared ({', '.join(csvs)}): {'identical' if same else 'DIFFER'}"
    assert report(11, "determinism", same and len(csvs) >= 3, detail, runtime, 60), detail


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
