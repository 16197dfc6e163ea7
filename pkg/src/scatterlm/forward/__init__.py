"""Forward electromagnetic model: RCWA grating solver, thin-film oracle, Mueller signatures."""

from .film import film_reflection, fresnel
from .mueller import ELEMENT_NAMES, Signature, jones_to_mueller, mueller_from_jones, read_signature, write_signature
from .rcwa import RcwaError, StackArrays, solve_stack
from .simulate import ForwardModel, diffraction_efficiencies, rcwa_reflection, simulate_signature
from .structure import (
    IncidenceConfig,
    Layer,
    Slab,
    StructureError,
    StructureModel,
    load_structure,
    slice_trapezoid,
    wavelength_grid,
)

__all__ = [
    "ELEMENT_NAMES", "ForwardModel", "IncidenceConfig", "Layer", "RcwaError", "Signature", "Slab",
    "StackArrays", "StructureError", "StructureModel", "diffraction_efficiencies", "film_reflection",
    "fresnel", "jones_to_mueller", "load_structure", "mueller_from_jones", "rcwa_reflection",
    "read_signature", "simulate_signature", "slice_trapezoid", "solve_stack", "wavelength_grid",
    "write_signature",
]
