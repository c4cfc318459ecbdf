"""Physical constants shared by every module (SI, exact 2019 definitions)."""

SPEED_OF_LIGHT = 299_792_458.0  # m/s
PLANCK = 6.626_070_15e-34  # J s
HBAR = PLANCK / (2.0 * 3.141592653589793)

# Real beat offset of the locked laser pair; the simulation runs at a scaled IF.
LOCK_OFFSET_HZ = 9.0e9
