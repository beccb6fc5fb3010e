"""Simulation and spectral analysis of a piezoelectric beam with magnetic
effect and tip bodies at the free end."""

from .discretization import (Mesh, SemiDiscreteSystem, GeneratorMatrix, assemble, assemble_scalar,
                             boundary_traces, build_mesh, generator, project_initial_data,
                             state_energy)
from .model import (BeamParameters, ContinuousState, EnergyBreakdown, ParameterError,
                    dissipation_rate, effective_stiffness, energy, validate)

__version__ = "0.1.0"

__all__ = [
    "BeamParameters", "ContinuousState", "EnergyBreakdown", "GeneratorMatrix", "Mesh",
    "ParameterError", "SemiDiscreteSystem", "assemble", "assemble_scalar", "boundary_traces",
    "build_mesh", "dissipation_rate", "effective_stiffness", "energy", "generator",
    "project_initial_data", "state_energy", "validate",
]
