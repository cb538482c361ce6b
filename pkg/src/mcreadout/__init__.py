"""Master-equation and analytic models of multichannel dispersive readout.

Frequencies inside the library are angular (rad/s); config files use Hz.
Joint operators act on transmon (x) resonator.
"""
__version__ = "0.1.0"
