"""Heralded controlled-phase gate simulation for two coupled lossy resonators.

The package models one four-level emitter and a register of three-level
emitters placed in two photonically coupled, strongly damped resonators.  A
weak probe scatters the register into slightly shifted, slightly lossy
no-jump branches; conditioning on the absence of any decay click heralds an
entangling phase gate on the register.

Layers
------
``qspace`` / ``model``   Hilbert-space layout, parameters, H and jump operators.
``lindblad``             Full master-equation propagation and heralding.
``effective``            Complex level shifts and decay rates of the no-jump
                         branches, via matrix inversion or closed forms.
``gates``                Controlled-phase tunings, success/fidelity laws.
``runner``               Batch sweeps, CSV artifacts, engine comparison.
``cli``                  Command-line entry point (``heraldgate ...``).
"""
from .model import SystemParams, params_from_groups, with_probe_rules
from .qspace import HilbertSpace

__all__ = [
    "HilbertSpace",
    "SystemParams",
    "params_from_groups",
    "with_probe_rules",
]

__version__ = "0.1.0"
