"""Boundary-integral band structures for hexagonal crystals with six disks per cell."""

from .bands import MaterialParams, asymptotic_bands, dispersion_roots, fit_dirac_cone, local_gap, sample_band_path
from .capacitance import eigen, periodic_capacitance, quasiperiodic_capacitance, structure_report
from .greens import LatticeSumParams, direct_sum_oracle, green, green_laplace, green_laplace_regular, helmholtz_correction
from .lattice import build_inclusions, build_lattice, high_symmetry_points, min_image_distance, sublattice
from .mesh import discretize, indicator, integrate, project_mean_zero

__version__ = "0.1.0"
