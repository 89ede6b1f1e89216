"""Missing-entry imputation by atomic-norm minimization on observed entries.

The equality-constrained program (minimize the total coding-variable norm
subject to matching observed entries) is solved by quadratic-penalty
continuation: the masked squared loss is weighted up relative to the norm by
geometrically shrinking the penalty parameter, warm-starting across stages.
Observed entries of the final reconstruction are overwritten exactly.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .coder import SolverConfig, code_sample
from .errors import DataError
from .groups import GeneratorSet, GroupModel


@dataclass
class CompletionProblem:
    y_data: np.ndarray
    mask: np.ndarray  # 1 = observed
    group: GroupModel
    gens: GeneratorSet
    solver: SolverConfig
    stages: int = 8
    stage_factor: float = 0.5

    def __post_init__(self):
        self.y_data = np.asarray(self.y_data, dtype=float)
        self.mask = np.asarray(self.mask, dtype=float)
        if self.mask.shape != self.y_data.shape:
            raise DataError("mask length must equal the signal length")
        if not np.any(self.mask):
            raise DataError("completion needs at least one observed entry")
        if self.stages < 1 or not 0 < self.stage_factor < 1:
            raise ValueError("bad continuation schedule")


@dataclass
class CompletionResult:
    y_opt: np.ndarray
    norm_value: float
    violations: list = field(default_factory=list)  # per-stage constraint violation
    codes: list = field(default_factory=list)


def complete(p: CompletionProblem) -> CompletionResult:
    """Reconstruction matching the observed entries, and its total norm.

    Unobserved placeholder values never enter the objective (masked loss).
    """
    g = p.group
    # Placeholders must not leak into the loss: zero them behind the mask.
    y = p.y_data * p.mask
    codes = None
    lam = p.solver.lam
    violations = []
    cfg = replace(p.solver, warm_start=True)
    for _ in range(p.stages):
        cfg = replace(cfg, lam=lam)
        res = code_sample(g, p.gens, y, cfg, init_codes=codes, mask=p.mask)
        codes = res.codes
        violations.append(0.5 * float(np.sum((p.mask * (y - res.fit)) ** 2)))
        lam *= p.stage_factor
    y_opt = res.fit.copy()
    observed = p.mask > 0
    y_opt[observed] = p.y_data[observed]
    norm_value = float(sum(g.atomic_norm(z) for z in codes))
    return CompletionResult(y_opt, norm_value, violations, codes)
