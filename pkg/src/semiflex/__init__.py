"""Packing horizontally scalable applications onto identical machines.

Each application has a CPU load that can be split across instances and a
fixed per-instance memory footprint.
"""

from .core import (
    Application,
    Assignment,
    InfeasibleError,
    MachineConfig,
    PackingResult,
    ProblemInstance,
    StructuralError,
    ValidationReport,
    Violation,
    ViolationKind,
    lower_bound_machines,
    machines_used,
    make_instance,
    max_load,
    to_load,
    validate,
)

__version__ = "0.1.0"
