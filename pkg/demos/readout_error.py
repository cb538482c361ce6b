"""Single-shot assignment error versus integration time.

Simulates conventional and multichannel readout, draws noisy shots with a
matched filter and prints the error curve for both.  A noise factor of 3
over the quantum limit is assumed.  Pass ``--full`` for the four-level
transmon in the rotating frame (a couple of minutes); the default uses the
two-level dispersive frame (seconds).

    python demos/readout_error.py [--full]
"""
import argparse

import numpy as np

from mcreadout.protocols import preset, run_protocol
from mcreadout.singleshot import NoiseModel, error_vs_time, predicted_error
from mcreadout.system import device_params

ap = argparse.ArgumentParser()
ap.add_argument("--full", action="store_true")
ap.add_argument("--shots", type=int, default=10_000)
args = ap.parse_args()

if args.full:
    params, frame, rise = device_params(n_transmon=4, n_fock=15), "rotating", 10e-9
else:
    params, frame, rise = device_params(n_transmon=2, n_fock=15), "dispersive", 0.0

noise = NoiseModel.from_noise_factor(3.0, params.kappa_x, 2e-9, seed=1)
taus = np.linspace(60e-9, 420e-9, 10)
curves = {}
for name in ("conventional", "multichannel"):
    spec = preset(name, params, duration=420e-9).with_(rise_time=rise)
    tg, te, _ = run_protocol(params, spec, frame=frame)
    pts = error_vs_time(tg, te, noise, args.shots, taus)
    curves[name] = [(pt.error, predicted_error(tg, te, noise, t)) for pt, t in zip(pts, taus)]

print(f"{'tau (ns)':>9} {'conventional':>22} {'multichannel':>22} {'ratio':>7}")
for k, t in enumerate(taus):
    c, m = curves["conventional"][k], curves["multichannel"][k]
    ratio = c[0] / m[0] if m[0] > 0 else float("inf")
    print(f"{t * 1e9:9.0f} {c[0]:9.4f} ({c[1]:.4f} pred) {m[0]:9.4f} ({m[1]:.4f} pred) {ratio:7.2f}")
