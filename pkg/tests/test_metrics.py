import numpy as np
import pytest

from orbitlearn.datagen import haar_orthogonal
from orbitlearn.groups import GeneratorSet, GroupModel
from orbitlearn.learner import init_generators
from orbitlearn.metrics import dictionary_distance, procrustes_align

rng = np.random.default_rng(2718)


class TestProcrustes:
    def test_identity_pair(self):
        A = rng.normal(size=(3, 8))
        Q, residual = procrustes_align(A, A)
        assert residual < 1e-10
        assert np.max(np.abs(Q @ A - A)) < 1e-8

    def test_round_trip(self):
        for _ in range(10):
            A2 = rng.normal(size=(3, 8))
            Q0 = haar_orthogonal(rng, 3)
            A1 = Q0 @ A2
            Q, residual = procrustes_align(A1, A2)
            assert residual < 1e-10
            assert np.max(np.abs(Q - Q0)) < 1e-8

    def test_monte_carlo_optimality(self):
        A1 = rng.normal(size=(3, 10))
        A2 = rng.normal(size=(3, 10))
        _, residual = procrustes_align(A1, A2)
        for _ in range(1000):
            Q = haar_orthogonal(rng, 3)
            assert residual <= np.linalg.norm(A1 - Q @ A2) ** 2 + 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            procrustes_align(np.zeros((2, 3)), np.zeros((3, 2)))


class TestDictionaryDistance:
    def test_identical_sets(self):
        for kind, n in [("regular", 8), ("intshift", 8), ("ctsshift", 9)]:
            g = GroupModel(kind, n)
            gens = init_generators(n, 3, seed=1)
            rep = dictionary_distance(g, gens, gens)
            assert rep.mean < 1e-12

    def test_intshift_orbit_invariance(self):
        g = GroupModel("intshift", 10)
        gens = init_generators(10, 3, seed=2)
        shifted = np.stack([-np.roll(a, 4) for a in gens.atoms])
        rep = dictionary_distance(g, gens, GeneratorSet(shifted))
        assert rep.mean < 1e-12
        assert all(m[2] == -1.0 for m in rep.matches)

    def test_orthogonal_rotation_invariance(self):
        g = GroupModel("orthogonal", 3, cols=12)
        gens = init_generators((3, 12), 2, seed=3)
        Q0 = haar_orthogonal(rng, 3)
        rotated = np.stack([Q0 @ a for a in gens.atoms])
        rep = dictionary_distance(g, gens, GeneratorSet(rotated))
        assert rep.mean < 1e-10

    def test_cts_orbit_invariance_with_refinement(self):
        g = GroupModel("ctsshift", 9)
        gens = init_generators(9, 2, seed=4)
        shifted = np.stack([g.group_element(phi) @ a for phi, a in zip((0.177, 0.613), gens.atoms)])
        shifted /= np.linalg.norm(shifted, axis=1, keepdims=True)
        rep = dictionary_distance(g, gens, GeneratorSet(shifted), grid=512)
        assert rep.mean < 1e-6

    def test_cts_matches_dense_scan_oracle(self):
        # Grid-plus-golden-section against an exhaustive million-point scan.
        g = GroupModel("ctsshift", 7)
        for _ in range(50):
            a = rng.normal(size=7)
            a /= np.linalg.norm(a)
            b = rng.normal(size=7)
            b /= np.linalg.norm(b)
            rep = dictionary_distance(
                g, GeneratorSet(a[None]), GeneratorSet(b[None]), grid=64
            )
            atil = np.sqrt(7) * np.fft.fftshift(np.fft.ifft(a))
            btil = np.sqrt(7) * np.fft.fftshift(np.fft.ifft(b))
            c = np.conj(atil) * btil
            freqs = np.arange(-3, 4)
            phis = np.arange(1_000_000) / 1_000_000
            # dense evaluation via the same trig identity, vectorized
            vals = np.abs((np.exp(2j * np.pi * np.outer(phis, freqs)) @ c).real)
            dense_best = 2.0 - 2.0 * vals.max()
            assert rep.per_generator[0] <= dense_best + 1e-8

    def test_interpshift_exact_grid(self):
        g = GroupModel("interpshift", 9, subdivisions=3)
        gens = init_generators(9, 1, seed=5)
        k = 7  # orbit parameter: fractional shift by 7/(9*3)
        G = g.group_element(k)
        moved = (G @ gens.atoms[0])[None, :]
        moved /= np.linalg.norm(moved)
        rep = dictionary_distance(g, gens, GeneratorSet(moved))
        assert rep.mean < 1e-10

    def test_regular_sign_only(self):
        g = GroupModel("regular", 6)
        gens = init_generators(6, 2, seed=6)
        flipped = GeneratorSet(-gens.atoms)
        assert dictionary_distance(g, gens, flipped).mean < 1e-14
        rolled = GeneratorSet(np.stack([np.roll(a, 1) for a in gens.atoms]))
        assert dictionary_distance(g, gens, rolled).mean > 0.01

    def test_asymmetric_sizes(self):
        g = GroupModel("regular", 6)
        ref = init_generators(6, 2, seed=7)
        learned = init_generators(6, 10, seed=8)
        rep = dictionary_distance(g, ref, learned)
        assert rep.per_generator.shape == (2,)

    def test_report_consistency(self):
        g = GroupModel("intshift", 8)
        ref = init_generators(8, 3, seed=9)
        learned = init_generators(8, 3, seed=10)
        rep = dictionary_distance(g, ref, learned)
        assert rep.mean == pytest.approx(float(np.mean(rep.per_generator)))
        assert np.all(rep.per_generator >= 0)
        # matched parameters reproduce the reported distances
        for i, (j, r, sign) in enumerate(rep.matches):
            moved = sign * np.roll(learned.atoms[j], r)
            assert np.sum((ref.atoms[i] - moved) ** 2) == pytest.approx(rep.per_generator[i])
