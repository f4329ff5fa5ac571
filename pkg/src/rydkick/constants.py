"""Physical constants (CODATA 2018, SI units)."""

HBAR = 1.054571817e-34  # J s
ELECTRON_MASS = 9.1093837015e-31  # kg
BOHR_RADIUS = 5.29177210903e-11  # m
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg
ELEMENTARY_CHARGE = 1.602176634e-19  # C
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
