"""Physical constants (SI)."""

import math

MU_0 = 4.0e-7 * math.pi          # vacuum permeability [T*m/A]
Q_E = 1.602176634e-19            # elementary charge [C]
K_B = 1.380649e-23               # Boltzmann constant [J/K]
HBAR = 1.054571817e-34           # reduced Planck constant [J*s]
MU_B = 9.2740100783e-24          # Bohr magneton [J/T]

# Gyromagnetic ratio chosen so that gamma*mu0 = 2.211e5 m/(A*s), the value
# conventionally used with fields expressed in A/m.
GAMMA_MU0 = 2.211e5              # [m/(A*s)]
GAMMA = GAMMA_MU0 / MU_0         # [1/(s*T)] ~= 1.7595e11
