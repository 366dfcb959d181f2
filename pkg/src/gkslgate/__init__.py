"""Two-qubit gate generation for open quantum systems driven by coherent and
incoherent controls, optimized with dual annealing."""
from .annealing import AnnealConfig, TrialResult, dual_anneal
from .dynamics import SystemSpec, build_system, liouvillian_parts, propagate, propagate_batch
from .objective import GateProblem, ScheduleTemplate, bounds, decode, encode, grk_infidelity
from .quantum import Gate, apply_gate, gate_matrix, grk_initial_states, hs_dist_sq
from .schedule import ControlSchedule

__all__ = [
    "AnnealConfig", "ControlSchedule", "Gate", "GateProblem", "ScheduleTemplate",
    "SystemSpec", "TrialResult", "apply_gate", "bounds", "build_system", "decode",
    "dual_anneal", "encode", "gate_matrix", "grk_infidelity", "grk_initial_states",
    "hs_dist_sq", "liouvillian_parts", "propagate", "propagate_batch",
]
__version__ = "0.1.0"
