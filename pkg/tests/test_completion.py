import numpy as np
import pytest

from orbitlearn.coder import SolverConfig
from orbitlearn.completion import CompletionProblem, complete
from orbitlearn.errors import DataError
from orbitlearn.groups import GeneratorSet, GroupModel
from orbitlearn.learner import init_generators
from oracles import lp_decoupled_intshift

rng = np.random.default_rng(404)


def make_problem(y, mask, g, gens, **kw):
    solver = kw.pop("solver", SolverConfig(lam=1.0, max_iters=80))
    return CompletionProblem(y_data=y, mask=mask, group=g, gens=gens, solver=solver, **kw)


class TestValidation:
    def test_empty_mask_rejected(self):
        g = GroupModel("intshift", 8)
        gens = init_generators(8, 1, seed=0)
        with pytest.raises(DataError, match="observed"):
            make_problem(np.zeros(8), np.zeros(8), g, gens)

    def test_mask_length_mismatch(self):
        g = GroupModel("intshift", 8)
        gens = init_generators(8, 1, seed=0)
        with pytest.raises(DataError):
            make_problem(np.zeros(8), np.ones(7), g, gens)


class TestComplete:
    def test_fully_observed_orbit_signal(self):
        g = GroupModel("intshift", 10)
        gens = init_generators(10, 1, seed=1)
        y = np.roll(gens.atoms[0], 4)
        res = complete(make_problem(y, np.ones(10), g, gens))
        assert np.max(np.abs(res.y_opt - y)) < 1e-8

    def test_observed_entries_exact(self):
        g = GroupModel("intshift", 12)
        gens = init_generators(12, 2, seed=2)
        y = rng.normal(size=12)
        mask = (rng.uniform(size=12) > 0.4).astype(float)
        mask[0] = 1.0
        res = complete(make_problem(y * mask, mask, g, gens))
        obs = mask > 0
        assert np.array_equal(res.y_opt[obs], (y * mask)[obs])

    def test_half_observed_shifted_atom(self):
        # Identifiability: more than half the entries of a pure shifted
        # generator determine it; checked against the small-d L1 oracle.
        g = GroupModel("intshift", 16)
        gens = init_generators(16, 1, seed=3)
        y = 1.3 * np.roll(gens.atoms[0], 9)
        mask = np.zeros(16)
        mask[:10] = 1.0
        res = complete(
            make_problem(y * mask, mask, g, gens, solver=SolverConfig(lam=1.0, max_iters=150))
        )
        rel = np.sum((res.y_opt - y) ** 2) / np.sum(y**2)
        assert rel <= 0.05
        # the reported norm approaches the norm of the true signal
        lp = lp_decoupled_intshift(gens.atoms, y)
        assert res.norm_value <= lp + 0.05

    def test_violation_monotone_across_stages(self):
        g = GroupModel("intshift", 12)
        gens = init_generators(12, 2, seed=4)
        y = rng.normal(size=12)
        mask = np.ones(12)
        mask[4:8] = 0.0
        res = complete(make_problem(y * mask, mask, g, gens, stages=8))
        v = res.violations
        for a, b in zip(v, v[1:]):
            assert b <= a + 1e-10

    def test_norm_value_consistent(self):
        g = GroupModel("intshift", 12)
        gens = init_generators(12, 2, seed=5)
        y = rng.normal(size=12)
        mask = np.ones(12)
        res = complete(make_problem(y, mask, g, gens))
        assert res.norm_value == pytest.approx(
            sum(g.atomic_norm(z) for z in res.codes), abs=1e-9
        )

    def test_placeholder_values_ignored(self):
        g = GroupModel("intshift", 10)
        gens = init_generators(10, 1, seed=6)
        y = np.roll(gens.atoms[0], 2)
        mask = np.ones(10)
        mask[5:] = 0.0
        corrupted = y.copy()
        corrupted[5:] = 1e9  # must never enter the objective
        res = complete(make_problem(corrupted, mask, g, gens))
        assert np.all(np.isfinite(res.y_opt))
        rel = np.sum((res.y_opt - y) ** 2) / np.sum(y**2)
        assert rel < 0.1
