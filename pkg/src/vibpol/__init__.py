"""Cavity-coupled molecular vibrations under two-state solvent disorder.

Liouville-space dynamics, time-resolved photoluminescence and rephasing
2D-IR spectra for a handful of molecules, plus large-N dipole sticks.
"""
from .core import (BlockEigensystem, SolventConfig, SystemParams, block_eigensystems, build_block_hamiltonian,
                   diagonalize_block, enumerate_configs, thermal_config_weights)
from .dynamics import (DensityState, evolve, intermolecule_coherence, polariton_populations, prepare_initial,
                       site_populations, spatial_density)
from .liouvillian import (LiouvillianSpectrum, SectorIndexing, assemble_excited_generator,
                          assemble_ground_generator, decompose, esd_green, propagate_excited, solvent_gg)
from .signals import Pulse, SpectrumGrid, dipole_distribution, trps, twodir, twodir_context

__version__ = "0.1.0"
