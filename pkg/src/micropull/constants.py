"""Physical constants shared across the package (SI units)."""

# Permittivity of the air gap between beam and counter-electrode (F/m).
# The gap is air, so vacuum permittivity is used throughout; there is no
# relative-permittivity knob.
VACUUM_PERMITTIVITY = 8.854e-12
