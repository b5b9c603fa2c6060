"""Exponents of the clamped crack-tip pencil and the Airy mode audit.

Airy functions of the form r^lam f(theta) that vanish with their normal
derivative on both crack faces exist only for isolated lam. This script
lists them on [0.4, 3.6], shows the angular profiles at lam = 3/2, and
prints the audit of the two tabulated Airy modes.

Run with ``python3 demos/exponent_spectrum.py``.
"""

import numpy as np

from crackrate.pencil_spectrum import (audit_published_modes, audit_text, clamped_residual,
                                       eigenfunctions, spectrum_in_interval)

for entry in spectrum_in_interval(0.4, 3.6):
    print(f"lambda = {entry.lam:.12f}   multiplicity {entry.multiplicity}")

# the exponent that governs the Airy function near a tip
theta = np.linspace(-np.pi, np.pi, 7)
for f in eigenfunctions(1.5):
    print("profile at lambda=3/2:", np.round(f(theta), 4),
          f"clamped residual {clamped_residual(f, 'theta-pm-pi'):.1e}")

print()
print(audit_text(audit_published_modes()))
