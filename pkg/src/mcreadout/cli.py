"""Command-line front end.

Each subcommand loads a config, applies ``--protocol/--seed/--override``,
runs one experiment and writes its artifacts plus ``manifest.json`` into a
per-run directory ``<out>/<command>-<hash12>``.  Failures print one JSON
object on stderr and exit with a code from :data:`EXIT_CODES`.
"""
import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    ResonanceSingularityError,
    analytic_trajectory,
    initial_separation_rate,
    predicted_chi,
    steady_state,
    steady_state_circle,
)
from .config import ConfigError, config_hash, dump_config, parse_config, parse_overrides
from .engine import (
    IntegratorInstabilityError,
    NotApplicableError,
    TimestepTooLargeError,
    Trajectory,
    write_trajectory_csv,
)
from .operators import DimensionError
from .protocols import analytic_params, reset_residual, run_protocol, separation_diagnostics
from .singleshot import (
    DegenerateWeightsError,
    FitError,
    assign_shots,
    effective_temperature,
    error_vs_time,
    fit_rb_decay,
    fit_two_gaussian,
    flat_weights,
    gate_error,
    matched_weights,
    preparation_error,
    project,
    read_shots_csv,
    references,
    sample_shots,
    write_histogram_csv,
    write_json,
    write_shots_csv,
)
from .system import SingularDetuningError, TWO_PI, dispersive_constants

log = logging.getLogger("mcreadout")

# checked in order; subclasses must precede their bases
EXIT_CODES = (
    (ConfigError, 2),
    (TimestepTooLargeError, 4),
    (IntegratorInstabilityError, 4),
    (FitError, 5),
    (DegenerateWeightsError, 3),
    (NotApplicableError, 3),
    (SingularDetuningError, 3),
    (ResonanceSingularityError, 3),
    (DimensionError, 3),
    (ValueError, 3),
    (OSError, 6),
)
EXIT_UNEXPECTED = 1


class _Run:
    """Output directory and artifact bookkeeping for one command."""

    def __init__(self, base, name, digest, seed):
        self.dir = Path(base) / f"{name}-{digest[:12]}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.digest = digest
        self.seed = seed
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return self.dir / name

    def finish(self):
        manifest = {
            "config_hash": self.digest,
            "seed": self.seed,
            "artifacts": sorted(self.artifacts),
            "version": __version__,
        }
        write_json(self.dir / "manifest.json", manifest)
        return self.dir


def _load(args):
    overrides = parse_overrides(args.override)
    if args.protocol is not None:
        overrides.append(("protocol.name", args.protocol))
    if args.seed is not None:
        overrides.append(("run.seed", args.seed))
    if args.out is not None:
        overrides.append(("run.output_dir", args.out))
    return parse_config(args.config, overrides)


def _start(cfg, command):
    run = _Run(cfg.run.output_dir, command, config_hash(cfg), cfg.run.seed)
    run.path("config.yaml").write_text(dump_config(cfg))
    return run


def _simulate(cfg):
    params = cfg.params()
    spec = cfg.spec(params)
    return params, spec, run_protocol(
        params, spec, dt=cfg.run.dt_s, frame=cfg.protocol.frame,
        sample_interval=cfg.run.sample_interval_s,
    )


def cmd_simulate(cfg):
    run = _start(cfg, "simulate")
    _, spec, (tg, te, diag) = _simulate(cfg)
    write_trajectory_csv(run.path("trajectory_g.csv"), tg)
    write_trajectory_csv(run.path("trajectory_e.csv"), te)
    write_json(run.path("diagnostics.json"), {
        "protocol": spec.name,
        "frame": cfg.protocol.frame,
        "separation": diag.to_dict(),
        "warnings": {"g": tg.warnings, "e": te.warnings},
        "trace_drift": max(tg.trace_drift, te.trace_drift),
        "dt_s": tg.metadata["dt"],
    })
    return run.finish()


def _analytic_traj(ap, label, times):
    alpha = analytic_trajectory(ap, label, times)
    pops = np.zeros((2, len(times)))
    pops[0 if label == "g" else 1] = 1.0
    return Trajectory(times, alpha, pops, np.abs(alpha) ** 2, label, frame="analytic")


def cmd_analytic(cfg):
    run = _start(cfg, "analytic")
    params = cfg.params()
    c = dispersive_constants(params)
    spec = cfg.spec(params)
    ap = analytic_params(spec, params, c)
    n = int(round(spec.duration / cfg.run.sample_interval_s))
    times = np.linspace(0.0, n * cfg.run.sample_interval_s, n + 1)
    tg, te = _analytic_traj(ap, "g", times), _analytic_traj(ap, "e", times)
    write_trajectory_csv(run.path("analytic_g.csv"), tg)
    write_trajectory_csv(run.path("analytic_e.csv"), te)
    write_json(run.path("analytic.json"), {
        "protocol": spec.name,
        "chi_rad_s": ap.chi,
        "predicted_chi_hz": predicted_chi(params.g, params.detuning, params.anharmonicity) / TWO_PI,
        "measured_chi_hz": params.chi_measured / TWO_PI,
        "alpha_vo": ap.alpha_vo,
        "steady_state": {"g": steady_state(ap, "g"), "e": steady_state(ap, "e")},
        "initial_separation_rate_per_s": initial_separation_rate(ap),
        "separation": separation_diagnostics(tg, te).to_dict(),
    })
    return run.finish()


def cmd_shots(cfg):
    run = _start(cfg, "shots")
    params, _, (tg, te, _) = _simulate(cfg)
    noise = cfg.noise_model(params)
    taus = list(cfg.run.tau_grid_s)
    points = error_vs_time(tg, te, noise, cfg.run.n_shots, taus, cfg.noise.thermal_eps, cfg.noise.eps_prep)
    with open(run.path("error_vs_time.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_s", "error", "p_e_given_g", "p_g_given_e"])
        for p in points:
            w.writerow([f"{x:.17g}" for x in (p.tau, p.error, p.p_e_given_g, p.p_g_given_e)])
    # regenerate the last grid point's shots from the same streams
    last = len(taus) - 1
    try:
        weights = matched_weights(tg, te, taus[last])
    except DegenerateWeightsError:
        weights = flat_weights(tg, taus[last])
    sg = sample_shots(tg, weights, noise, cfg.run.n_shots, cfg.noise.thermal_eps, te, "g", stream=2 * last)
    se = sample_shots(te, weights, noise, cfg.run.n_shots, 0.0, None, "e", stream=2 * last + 1)
    shots = sg.concat(se)
    ref_g, ref_e = points[last].ref_g, points[last].ref_e
    assign_shots(shots, ref_g, ref_e)
    write_shots_csv(run.path("shots.csv"), shots)
    write_histogram_csv(run.path("histogram.csv"), shots, ref_g, ref_e)
    write_json(run.path("shots.json"), {
        "sigma_quadrature": noise.sigma_quadrature,
        "sample_interval_s": noise.sample_interval,
        "n_shots": cfg.run.n_shots,
        "points": [
            {"tau_s": p.tau, "error": p.error, "ref_g": p.ref_g, "ref_e": p.ref_e, "degenerate": list(p.degenerate)}
            for p in points
        ],
    })
    return run.finish()


def cmd_sweep_phase(cfg):
    run = _start(cfg, "sweep-phase")
    params = cfg.params()
    c = dispersive_constants(params)
    spec = cfg.spec(params)
    ap = analytic_params(spec, params, c)
    phis = TWO_PI * np.arange(cfg.run.phase_points) / cfg.run.phase_points
    with open(run.path("steady_state_locus.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_q_rad", "re_alpha_g", "im_alpha_g", "re_alpha_e", "im_alpha_e"])
        for phi in phis:
            swept = analytic_params(spec.with_(phi_q=float(phi)), params, c)
            ag, ae = steady_state(swept, "g"), steady_state(swept, "e")
            w.writerow([f"{x:.17g}" for x in (phi, ag.real, ag.imag, ae.real, ae.imag)])
    circles = {}
    for label in ("g", "e"):
        centre, radius = steady_state_circle(ap.omega_r, abs(ap.omega_q), ap.chi, ap.g, ap.kappa, label)
        circles[label] = {"centre": centre, "radius": radius}
    write_json(run.path("circles.json"), circles)
    return run.finish()


def cmd_reset(cfg):
    run = _start(cfg, "reset")
    params = cfg.params()
    spec = cfg.spec(params)
    if spec.kind != "unconditional_reset":
        raise ValueError(f"reset needs protocol.name = unconditional_reset, got {spec.name!r}")
    residual, tuned, (tg, te) = reset_residual(
        params, spec, dt=cfg.run.dt_s, frame=cfg.protocol.frame, return_details=True,
    )
    write_trajectory_csv(run.path("trajectory_g.csv"), tg)
    write_trajectory_csv(run.path("trajectory_e.csv"), te)
    tail = tuned.reset_tail
    write_json(run.path("reset.json"), {
        "residual": residual,
        "final_alpha": {"g": tg.alpha[-1], "e": te.alpha[-1]},
        "readout_duration_s": tuned.duration,
        "hold_s": tail.hold,
        "displacement": tail.final_displacement,
        "displacement_duration_s": tail.displacement_duration,
        "frame": cfg.protocol.frame,
    })
    return run.finish()


def _read_input(path):
    if path in (None, "-"):
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def cmd_fit(cfg, args):
    text = _read_input(args.input) if args.kind != "gate-error" else ""
    digest = hashlib.sha256((config_hash(cfg) + args.kind + text).encode()).hexdigest()
    run = _Run(cfg.run.output_dir, f"fit-{args.kind}", digest, cfg.run.seed)
    if args.kind == "two-gaussian":
        shots = read_shots_csv(io.StringIO(text))
        labels = set(shots.true.tolist())
        if {"g", "e"} <= labels:
            ref_g, ref_e = references(shots.S, shots.true)
            x = project(shots.S[shots.true == "g"], ref_g, ref_e)
        else:
            # no reference pair: project on the principal axis of the cloud
            pts = np.column_stack([shots.S.real, shots.S.imag])
            pts = pts - pts.mean(axis=0)
            axis = np.linalg.svd(pts, full_matrices=False)[2][0]
            x = pts @ axis
        fit = fit_two_gaussian(x)
        omega_q = cfg.params().omega_q
        result = {**fit.to_dict(), "t_eff_k": effective_temperature(fit.eps_th, omega_q) if fit.eps_th > 0 else 0.0}
    elif args.kind == "rb":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        A, p, B = fit_rb_decay(data[:, 0], data[:, 1])
        result = {"A": A, "p": p, "B": B}
    else:
        if args.p_ref is None or args.p_gate is None:
            raise ValueError("gate-error needs --p-ref and --p-gate")
        eps = gate_error(args.p_ref, args.p_gate)
        result = {"gate_error": eps}
        if args.eps_th is not None:
            result["eps_prep"] = preparation_error(eps, args.eps_th)
    write_json(run.path("fit.json"), result)
    return run.finish()


COMMANDS = {
    "simulate": cmd_simulate,
    "analytic": cmd_analytic,
    "shots": cmd_shots,
    "sweep-phase": cmd_sweep_phase,
    "reset": cmd_reset,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (frequencies in Hz)")
    common.add_argument("--protocol", help="protocol preset, overrides protocol.name")
    common.add_argument("--seed", type=int, help="overrides run.seed")
    common.add_argument("--out", help="base output directory, overrides run.output_dir")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a dotted config key, e.g. run.n_shots=2000 (repeatable)")
    common.add_argument("--log-level", default="WARNING")

    parser = argparse.ArgumentParser(prog="mcreadout", description="Multichannel dispersive readout simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="master-equation trajectories for g and e")
    sub.add_parser("analytic", parents=[common], help="closed-form trajectories and steady states")
    sub.add_parser("shots", parents=[common], help="single-shot error versus integration time")
    sub.add_parser("sweep-phase", parents=[common], help="steady states versus qubit-drive phase")
    sub.add_parser("reset", parents=[common], help="unconditional reset residual")
    fit = sub.add_parser("fit", parents=[common], help="calibration fits")
    fit.add_argument("kind", choices=("two-gaussian", "rb", "gate-error"))
    fit.add_argument("--input", help="CSV file; '-' or omitted reads stdin")
    fit.add_argument("--p-ref", type=float)
    fit.add_argument("--p-gate", type=float)
    fit.add_argument("--eps-th", type=float)
    return parser


def _exit_code(exc):
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_UNEXPECTED


def _clean(obj):
    """Make floats JSON-safe (NaN/inf become strings)."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        out = cmd_fit(cfg, args) if args.command == "fit" else COMMANDS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _exit_code(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if isinstance(exc, ConfigError):
            err.update(field=exc.path, line=_clean(exc.line))
        if code == EXIT_UNEXPECTED:
            log.exception("unexpected failure")
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return code
    print(json.dumps({"output_dir": str(out)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
