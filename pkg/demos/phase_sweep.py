"""Where the steady states land as the qubit-drive phase turns.

At fixed drive magnitudes each branch's steady state traces a circle in the
complex plane.  This compares the closed-form circle against steady states
computed at individual phases, and shows how the separation between the
branches depends on the phase.

    python demos/phase_sweep.py
"""
import numpy as np

from mcreadout.analytic import AnalyticTrajectoryParams, steady_state, steady_state_circle
from mcreadout.protocols import reference_drives
from mcreadout.system import dispersive_constants, device_params

params = device_params()
c = dispersive_constants(params)
omega_r, omega_q = reference_drives(params, c)
omega_q *= 10 ** (-1 / 20)
omega_r *= 10 ** (-2 / 20)

for q in ("g", "e"):
    centre, radius = steady_state_circle(omega_r, omega_q, c.chi, params.g, params.kappa, q)
    print(f"|{q}> circle: centre {centre:.3f}, radius {radius:.3f}")

print(f"\n{'phi_q/pi':>9} {'alpha_g':>18} {'alpha_e':>18} {'|sep|':>7}")
for phi in np.linspace(0, 2 * np.pi, 13)[:-1]:
    ap = AnalyticTrajectoryParams(omega_r, omega_q * np.exp(1j * phi), c.chi, params.g, params.kappa)
    ag, ae = steady_state(ap, "g"), steady_state(ap, "e")
    print(f"{phi / np.pi:9.2f} {ag:18.3f} {ae:18.3f} {abs(ae - ag):7.3f}")
