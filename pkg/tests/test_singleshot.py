import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erfc

from mcreadout.engine import Trajectory
from mcreadout.singleshot import (
    DegenerateWeightsError,
    FitError,
    NoiseModel,
    Shots,
    assign,
    assign_shots,
    assignment_error,
    effective_temperature,
    error_vs_time,
    fit_rb_decay,
    fit_two_gaussian,
    gate_error,
    gaussian_overlap_error,
    integrate,
    matched_weights,
    predicted_error,
    preparation_error,
    rb_model,
    read_shots_csv,
    references,
    sample_shots,
    write_shots_csv,
)

DT = 2e-9


def traj(alpha, label="g", dt=DT):
    alpha = np.asarray(alpha, dtype=complex)
    n = len(alpha)
    return Trajectory(np.arange(n) * dt, alpha, np.ones((2, n)) * 0.5, np.abs(alpha) ** 2, label)


def const_pair(n=51, ag=0j, ae=1 + 1j):
    a = np.full(n, ag, dtype=complex)
    b = np.full(n, ae, dtype=complex)
    a[0] = b[0] = 0
    return traj(a, "g"), traj(b, "e")


def test_constant_separation_gives_uniform_weights():
    tg, te = const_pair()
    w = matched_weights(tg, te)
    tau = tg.times[-1]
    assert np.allclose(w.w_re, 1 / tau) and np.allclose(w.w_im, 1 / tau)
    assert w.degenerate == ()


def test_real_separation_flags_imaginary_channel():
    tg, te = const_pair(ae=2.0 + 0j)
    w = matched_weights(tg, te)
    assert w.degenerate == ("im",)
    assert np.all(w.w_im == 0)


def test_identical_trajectories_are_degenerate():
    tg, _ = const_pair()
    with pytest.raises(DegenerateWeightsError):
        matched_weights(tg, traj(tg.alpha, "e"))


def test_weights_follow_separation():
    t = np.arange(101) * DT
    sep = np.sin(np.pi * t / t[-1]) * (1 + 0.5j)
    w = matched_weights(traj(np.zeros(101)), traj(sep, "e"))
    assert abs(w.times[np.argmax(w.w_re)] - t[50]) <= DT


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False), st.floats(0.1, 10))
def test_weight_normalization_under_rescaling(c, r):
    rng = np.random.default_rng(0)
    a = rng.normal(size=41) + 1j * rng.normal(size=41)
    b = rng.normal(size=41) + 1j * rng.normal(size=41)
    w0 = matched_weights(traj(a), traj(b, "e"))
    wr = matched_weights(traj(r * a), traj(r * b, "e"))
    assert np.allclose(w0.w_re, wr.w_re) and np.allclose(w0.w_im, wr.w_im)
    wc = matched_weights(traj(c * a), traj(c * b, "e"))
    for part in (wc.w_re, wc.w_im):
        if part.any():
            assert np.sum(part) * wc.dt == pytest.approx(1.0)


def test_noise_free_limit():
    tg, te = const_pair()
    w = matched_weights(tg, te)
    noise = NoiseModel(1e-12, DT, seed=1)
    s = sample_shots(te, w, noise, 100)
    assert np.allclose(s.S, integrate(te.alpha[1:], w), atol=1e-9)


def test_variance_oracle():
    n = 40
    tg, te = const_pair(n + 1)
    w = matched_weights(tg, te)
    sigma = 3.0
    s = sample_shots(te, w, NoiseModel(sigma, DT, seed=5), 100_000)
    # weighted sum of i.i.d. Gaussians with uniform weights 1/(n dt)
    expected = sigma**2 * DT**2 * np.sum(w.w_re**2)
    assert expected == pytest.approx(sigma**2 / n)
    assert np.var(s.S.real) == pytest.approx(expected, rel=0.03)
    assert np.var(s.S.imag) == pytest.approx(expected, rel=0.03)


def test_sampling_is_reproducible():
    tg, te = const_pair()
    w = matched_weights(tg, te)
    noise = NoiseModel(2.0, DT, seed=42)
    a = sample_shots(tg, w, noise, 5000, thermal_eps=0.1, flip_traj=te, stream=3)
    b = sample_shots(tg, w, noise, 5000, thermal_eps=0.1, flip_traj=te, stream=3)
    c = sample_shots(tg, w, noise, 5000, thermal_eps=0.1, flip_traj=te, stream=4)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.actual, b.actual)
    assert not np.array_equal(a.S, c.S)
    d = sample_shots(tg, w, noise, 5000, thermal_eps=0.1, flip_traj=te, stream=3, max_workers=3)
    assert np.array_equal(a.S, d.S)


def test_thermal_flips_mix_in_other_branch():
    tg, te = const_pair()
    w = matched_weights(tg, te)
    s = sample_shots(tg, w, NoiseModel(1e-9, DT), 200_000, thermal_eps=0.006, flip_traj=te)
    frac = np.mean(s.actual == "e")
    assert frac == pytest.approx(0.006, abs=3 * math.sqrt(0.006 / 200_000))
    ref_g = s.S.mean()
    ig, ie = integrate(tg.alpha[1:], w), integrate(te.alpha[1:], w)
    assert ref_g == pytest.approx(ig + frac * (ie - ig), abs=1e-9)


def test_assign_rules():
    assert assign([0j], 0j, 1 + 0j)[0] == "g"
    assert assign([0.5 + 3j], 0j, 1 + 0j)[0] == "g"  # on the bisector
    assert assign([0.9 + 0j], 0j, 1 + 0j)[0] == "e"
    with pytest.raises(ValueError):
        assign([0j], 1j, 1j)


@given(
    st.complex_numbers(min_magnitude=0.01, max_magnitude=100, allow_nan=False),
    st.complex_numbers(max_magnitude=100, allow_nan=False),
    st.integers(0, 2**31),
)
def test_assignment_affine_invariance(c, d, seed):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=200) + 1j * rng.normal(size=200)
    rg, re_ = -0.5 + 0.1j, 0.7 - 0.3j
    margin = np.abs(np.abs(S - rg) - np.abs(S - re_))
    S = S[margin > 1e-6]  # keep away from exact ties
    a = assign(S, rg, re_)
    b = assign(c * S + d, c * rg + d, c * re_ + d)
    assert np.array_equal(a, b)


def test_references():
    assert references([1j, 2 + 0j], ["g", "e"]) == (1j, 2 + 0j)
    with pytest.raises(ValueError):
        references([1j], ["g"])


def test_references_converge_with_standard_error():
    rng = np.random.default_rng(9)
    n, sigma = 10_000, 1.0
    errs = [abs(np.mean(1 + sigma * rng.normal(size=n)) - 1) for _ in range(200)]
    assert np.sqrt(np.mean(np.square(errs))) == pytest.approx(sigma / math.sqrt(n), rel=0.15)


def test_overlap_oracle_formula():
    assert gaussian_overlap_error(0.0, 1.0) == 0.5
    assert gaussian_overlap_error(2.0, 0.5) == pytest.approx(0.5 * erfc(2 / (2 * math.sqrt(2) * 0.5)))
    with pytest.raises(ValueError):
        gaussian_overlap_error(1.0, 0.0)


def test_sampled_error_matches_overlap_oracle():
    rng = np.random.default_rng(3)
    d, sigma, n = 2.0, 0.8, 20_000
    S = np.concatenate([sigma * rng.normal(size=n), d + sigma * rng.normal(size=n)]).astype(complex)
    shots = assign_shots(Shots(S, np.repeat(["g", "e"], n), np.repeat(["g", "e"], n)), 0j, d + 0j)
    p = gaussian_overlap_error(d, sigma)
    assert abs(assignment_error(shots) - p) < 3 * math.sqrt(p * (1 - p) / (2 * n))


def test_zero_noise_error_is_half_thermal():
    tg, te = const_pair()
    eps = 0.02
    pts = error_vs_time(tg, te, NoiseModel(1e-9, DT, seed=2), 50_000, [tg.times[-1]], thermal_eps=eps)
    assert pts[0].error == pytest.approx(eps / 2, abs=3 * math.sqrt(eps / 50_000))


def test_identical_trajectories_give_chance_error():
    tg, _ = const_pair()
    pts = error_vs_time(tg, traj(tg.alpha, "e"), NoiseModel(1.0, DT, seed=2), 10_000, [50e-9, 100e-9])
    for pt in pts:
        assert pt.error == pytest.approx(0.5, abs=3 * math.sqrt(0.25 / 20_000))
        assert pt.degenerate == ("re", "im")


def test_error_decreases_with_integration_time():
    tg, te = const_pair(n=201, ae=0.05 + 0.05j)
    noise = NoiseModel.from_noise_factor(3.0, 2 * math.pi * 1.5e6, DT, seed=11)
    taus = [40e-9, 100e-9, 200e-9, 400e-9]
    errs = [pt.error for pt in error_vs_time(tg, te, noise, 10_000, taus)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    pred = [predicted_error(tg, te, noise, t) for t in taus]
    assert all(a > b for a, b in zip(pred, pred[1:]))


def test_eps_prep_is_subtracted():
    tg, te = const_pair()
    noise = NoiseModel(5.0, DT, seed=1)
    a = error_vs_time(tg, te, noise, 2000, [60e-9])[0]
    b = error_vs_time(tg, te, noise, 2000, [60e-9], eps_prep=0.01)[0]
    assert b.error == pytest.approx(a.error - 0.01)


def test_noise_factor_calibration():
    kx = 2 * math.pi * 1.5e6
    noise = NoiseModel.from_noise_factor(3.0, kx, DT)
    n = round(1 / (kx * DT))
    # flat average over ~1/kappa_x: per-quadrature variance F/2 in units of the sample count
    assert noise.sigma_quadrature**2 * DT * kx == pytest.approx(1.5)
    assert n > 0
    with pytest.raises(ValueError):
        NoiseModel.from_noise_factor(0.5, kx, DT)


def _mixture(eps, n, centres=(0.0, 4.0), sigma=1.0, seed=0):
    rng = np.random.default_rng(seed)
    flips = rng.random(n) < eps
    return np.where(flips, centres[1], centres[0]) + sigma * rng.normal(size=n)


def test_fit_single_gaussian():
    fit = fit_two_gaussian(_mixture(0.0, 200_000))
    assert fit.eps_th <= 1e-3


def test_fit_unidentifiable_mixture():
    x = _mixture(0.5, 100_000, centres=(0.0, 0.0))
    try:
        fit = fit_two_gaussian(x)
    except FitError:
        return
    assert fit.degenerate


def test_fit_needs_data():
    with pytest.raises(ValueError):
        fit_two_gaussian(np.zeros(10))


def test_effective_temperature():
    omega_q = 2 * math.pi * 7.86e9
    assert effective_temperature(0.006, omega_q) * 1e3 == pytest.approx(73, abs=1)
    assert effective_temperature(math.exp(-1), omega_q) * 1e3 == pytest.approx(377.2, abs=0.5)
    assert effective_temperature(1e-300, omega_q) < 1e-3
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            effective_temperature(bad, omega_q)


def test_rb_noiseless_recovery():
    L = np.array([1, 5, 10, 20, 50, 100, 200, 400])
    A, p, B = fit_rb_decay(L, rb_model(L, 0.5, 0.99, 0.5))
    assert (A, p, B) == pytest.approx((0.5, 0.99, 0.5), abs=1e-9)
    with pytest.raises(ValueError):
        fit_rb_decay([1, 2, 3], [0.9, 0.8, 0.7])


def test_gate_error_arithmetic():
    assert gate_error(0.99, 0.9504) == pytest.approx(0.02)
    assert preparation_error(0.020, 0.006) == pytest.approx(0.026)


def test_shots_csv_round_trip(tmp_path):
    S = np.array([0.1 + 0.2j, -1.5 + 3e-9j])
    shots = assign_shots(Shots(S, np.array(["g", "e"]), np.array(["g", "e"])), 0j, 1 + 0j)
    path = tmp_path / "shots.csv"
    write_shots_csv(path, shots)
    back = read_shots_csv(path)
    assert np.array_equal(back.S, S)
    assert list(back.assigned) == list(shots.assigned)
    back2 = read_shots_csv(io.StringIO(path.read_text()))
    assert np.array_equal(back2.S, S)
