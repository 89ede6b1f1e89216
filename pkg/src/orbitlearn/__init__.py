"""Dictionary learning with matrix-group invariances.

Learns generator sets whose group orbits sparsely represent data, with
specialized solvers for the identity group, integer / interpolated /
continuous shifts, and the orthogonal group.
"""

__version__ = "0.1.0"

from .coder import CodingResult, LineSearch, SolverConfig, code_sample, denoise, objective
from .groups import GeneratorSet, GroupModel, parse_group
from .kernels import active_backend, use_backend
from .learner import LearnOptions, LearnerState, learn
from .metrics import DistanceReport, dictionary_distance, procrustes_align

__all__ = [
    "CodingResult",
    "DistanceReport",
    "GeneratorSet",
    "GroupModel",
    "LearnOptions",
    "LearnerState",
    "LineSearch",
    "SolverConfig",
    "active_backend",
    "code_sample",
    "denoise",
    "dictionary_distance",
    "learn",
    "objective",
    "parse_group",
    "procrustes_align",
    "use_backend",
    "__version__",
]
