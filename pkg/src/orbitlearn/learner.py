"""Alternating minimization: code every sample, refresh generators by least
squares (the method-of-optimal-directions analog), then renormalize.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coder import CodingResult, SolverConfig, code_batch, code_sample, make_workspace
from .groups import GeneratorSet, GroupModel

RIDGE = 1e-10


@dataclass
class LearnOptions:
    q: int
    outer_iters: int
    solver: SolverConfig
    seed: int = 0
    truth: GeneratorSet | None = None
    threads: int = 1
    dist_grid: int = 64
    stop_tol: float = 0.0  # optional relative-objective-change stop; 0 disables
    init: GeneratorSet | None = None

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("need at least one generator")
        if self.outer_iters < 0:
            raise ValueError("outer iteration count must be nonnegative")
        if self.threads < 1:
            raise ValueError("thread count must be >= 1")


@dataclass
class LearnerState:
    gens: GeneratorSet
    codes: list
    history: list = field(default_factory=list)
    replaced_atoms: int = 0
    stale_updates: int = 0


def init_generators(shape, q: int, seed: int) -> GeneratorSet:
    """q unit-norm standard-normal draws; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    if isinstance(shape, int):
        atoms = rng.normal(size=(q, shape))
        atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    else:
        d, r = shape
        atoms = rng.normal(size=(q, d, r))
        atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    return GeneratorSet(atoms)


def normalize(atoms, rng=None):
    """Unit-norm atoms (unit columns for matrices); zero atoms are replaced
    by a fresh random unit draw and flagged."""
    atoms = np.array(atoms, dtype=float)
    replaced = []
    norms = np.linalg.norm(atoms, axis=1)
    if atoms.ndim == 2:
        for j, nj in enumerate(norms):
            if nj == 0.0:
                if rng is None:
                    rng = np.random.default_rng(0)
                atoms[j] = rng.normal(size=atoms.shape[1])
                norms[j] = np.linalg.norm(atoms[j])
                replaced.append(j)
        atoms /= norms[:, None]
    else:
        for j in range(atoms.shape[0]):
            for c in range(atoms.shape[2]):
                if norms[j, c] == 0.0:
                    if rng is None:
                        rng = np.random.default_rng(0)
                    atoms[j, :, c] = rng.normal(size=atoms.shape[1])
                    norms[j, c] = np.linalg.norm(atoms[j, :, c])
                    replaced.append(j)
        atoms /= norms[:, None, :]
    return GeneratorSet(atoms), replaced


def _code_spectra(g: GroupModel, codes) -> np.ndarray:
    """Per-generator diagonal of the coding operator in the basis picked by
    _analysis below (standard FFT for regular/intshift, centered otherwise)."""
    n, q = g.n, len(codes)
    W = np.empty((q, n), dtype=complex)
    for j, z in enumerate(codes):
        if g.kind == "regular":
            W[j] = z.c
        elif g.kind == "intshift":
            W[j] = np.fft.fft(z.x)
        elif g.kind == "interpshift":
            W[j] = np.fft.ifftshift(g.interp_spectrum(z.x))
        elif g.kind == "ctsshift":
            W[j] = np.fft.ifftshift(g.cts_spectrum(z))
        else:
            raise ValueError("no diagonal spectrum for this group kind")
    return W


def _analysis(g: GroupModel, Y: np.ndarray) -> np.ndarray:
    if g.kind in ("regular", "intshift"):
        return np.fft.fft(Y, axis=-1)
    return np.fft.ifft(Y, axis=-1)


def _synthesis(g: GroupModel, Atil: np.ndarray) -> np.ndarray:
    if g.kind in ("regular", "intshift"):
        return np.fft.ifft(Atil, axis=-1).real
    return np.fft.fft(Atil, axis=-1).real


def _code_is_zero(g: GroupModel, z) -> bool:
    if g.kind == "regular":
        return z.c == 0.0
    if g.kind in ("intshift", "interpshift"):
        return not np.any(z.x)
    if g.kind == "ctsshift":
        return (
            z.z_plus == 0.0
            and z.z_minus == 0.0
            and not np.any(z.bz_plus)
            and not np.any(z.bz_minus)
        )
    return not np.any(z.Z)


def update_generators(g: GroupModel, codes_list, data, current: GeneratorSet, method: str = "auto"):
    """Joint least-squares refresh of all generators given fixed codes.

    Returns the pre-normalization atoms plus the indices of generators whose
    codes were all zero (left unchanged, since their normal-equation block is
    singular).
    """
    q = current.q
    stale = [
        j for j in range(q) if all(_code_is_zero(g, codes[j]) for codes in codes_list)
    ]
    active = [j for j in range(q) if j not in stale]
    atoms = np.array(current.atoms, dtype=float)
    if not active:
        return atoms, stale

    if method == "auto":
        method = "dense" if g.kind == "orthogonal" else "frequency"

    if g.kind == "regular" and method == "frequency":
        # Constant spectra make the per-frequency systems identical; solve
        # the classical q x q normal equations once instead.
        atoms_new = _update_regular(codes_list, data, active)
    elif method == "frequency":
        atoms_new = _update_frequency(g, codes_list, data, active)
    elif method == "dense":
        atoms_new = _update_dense(g, codes_list, data, active, current)
    else:
        raise ValueError(f"unknown update method {method!r}")
    for idx, j in enumerate(active):
        atoms[j] = atoms_new[idx]
    return atoms, stale


def _update_regular(codes_list, data, active):
    data = np.asarray(data, dtype=float)
    C = np.array([[codes[j].c for j in active] for codes in codes_list])
    G = C.T @ C + RIDGE * np.eye(len(active))
    B = C.T @ data
    return np.linalg.solve(G, B)


def _update_frequency(g: GroupModel, codes_list, data, active):
    data = np.asarray(data, dtype=float)
    n_samples = data.shape[0]
    k = len(active)
    W = np.empty((n_samples, k, g.n), dtype=complex)
    for i, codes in enumerate(codes_list):
        W[i] = _code_spectra(g, [codes[j] for j in active])
    Ytil = _analysis(g, data)
    H = np.einsum("ijf,ikf->fjk", np.conj(W), W)
    b = np.einsum("ijf,if->fj", np.conj(W), Ytil)
    H += RIDGE * np.eye(k)[None, :, :]
    sol = np.linalg.solve(H, b[..., None])[..., 0]  # (n, k)
    return _synthesis(g, sol.T)


def _update_dense(g: GroupModel, codes_list, data, active, current: GeneratorSet):
    d = g.n
    r = g.cols if g.kind == "orthogonal" else 1
    k = len(active)
    G = np.zeros((k * d, k * d))
    B = np.zeros((k * d, r))
    for i, codes in enumerate(codes_list):
        mats = [np.asarray(g.code_to_matrix(codes[j]), dtype=float) for j in active]
        y = np.asarray(data[i], dtype=float).reshape(d, r)
        for a in range(k):
            B[a * d : (a + 1) * d] += mats[a].T @ y
            for bidx in range(k):
                G[a * d : (a + 1) * d, bidx * d : (bidx + 1) * d] += mats[a].T @ mats[bidx]
    G += RIDGE * np.eye(k * d)
    sol = np.linalg.solve(G, B)
    if g.kind == "orthogonal":
        return sol.reshape(k, d, r)
    return sol.reshape(k, d)


def learn(g: GroupModel, data, opts: LearnOptions) -> LearnerState:
    """Alternating minimization over coding variables and generators.

    Each outer iteration codes every sample (warm-started, in parallel when
    opts.threads > 1, reduced in sample order so runs are reproducible),
    solves the joint least-squares generator update, and renormalizes.
    History rows are (iteration, objective, distance-to-truth or None,
    seconds).
    """
    from .metrics import dictionary_distance

    data = np.asarray(data, dtype=float)
    if data.shape[0] < 1:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(opts.seed)
    if opts.init is not None:
        gens = opts.init
    else:
        shape = g.n if g.kind != "orthogonal" else (g.n, g.cols)
        gens = init_generators(shape, opts.q, opts.seed)
    state = LearnerState(gens=gens, codes=[None] * data.shape[0])
    prev_obj = None
    for it in range(1, opts.outer_iters + 1):
        t0 = time.perf_counter()
        ws = make_workspace(g, state.gens)

        warm = [
            c.codes if isinstance(c, CodingResult) else None for c in state.codes
        ]

        def code_one(i):
            return code_sample(
                g, state.gens, data[i], opts.solver, init_codes=warm[i], workspace=ws
            )

        if g.kind == "orthogonal":
            # Matrix samples are coded in one vectorized pass; the result is
            # the same as per-sample calls, in sample order.
            init = warm if all(w is not None for w in warm) else None
            results = code_batch(g, state.gens, data, opts.solver, init_codes_list=init, workspace=ws)
        elif opts.threads > 1:
            with ThreadPoolExecutor(max_workers=opts.threads) as ex:
                results = list(ex.map(code_one, range(data.shape[0])))
        else:
            results = [code_one(i) for i in range(data.shape[0])]
        state.codes = results
        objective = float(sum(r.objective for r in results))

        atoms_pre, stale = update_generators(
            g, [r.codes for r in results], data, state.gens
        )
        state.stale_updates += len(stale)
        state.gens, replaced = normalize(atoms_pre, rng)
        state.replaced_atoms += len(replaced)

        dist = None
        if opts.truth is not None:
            dist = dictionary_distance(g, opts.truth, state.gens, grid=opts.dist_grid).mean
        seconds = time.perf_counter() - t0
        state.history.append((it, objective, dist, seconds))
        if opts.stop_tol > 0 and prev_obj is not None:
            if abs(prev_obj - objective) <= opts.stop_tol * max(1.0, abs(prev_obj)):
                break
        prev_obj = objective
    return state


def _code_scale(g: GroupModel, z) -> float:
    """Magnitude of a coding variable in the norm dual to the group's gauge
    (the threshold scale at which one proximal step zeroes it)."""
    if g.kind == "regular":
        return abs(z.c)
    if g.kind in ("intshift", "interpshift"):
        return float(np.max(np.abs(z.x)))
    if g.kind == "ctsshift":
        return max(abs(z.z_plus), abs(z.z_minus), float(np.max(np.abs(z.bz_plus), initial=0.0)))
    return float(np.linalg.norm(z.Z, ord="nuc"))


def auto_lambda(g: GroupModel, gens: GeneratorSet, data, base: SolverConfig, decades: float = 3.0, points_per_decade: int = 8, subsample: int = 200) -> float:
    """Largest lambda on a log grid for which no generator codes to zero
    across the (sub)dataset; operationalizes the rule of picking the penalty
    as large as the data supports."""
    from dataclasses import replace

    data = np.asarray(data, dtype=float)
    if data.shape[0] > subsample:
        data = data[:subsample]
    ws = make_workspace(g, gens)
    lam_hi = 0.0
    for y in data:
        resid = np.asarray(y, dtype=float)
        for a in gens:
            adj = g.adjoint(resid, a)
            lam_hi = max(lam_hi, _code_scale(g, adj))
    if lam_hi == 0.0:
        return base.lam

    count = int(decades * points_per_decade) + 1
    grid = lam_hi * np.power(10.0, -np.linspace(0.0, decades, count))  # descending

    def alive(lam: float) -> bool:
        cfg = replace(base, lam=float(lam))
        used = [False] * gens.q
        for y in data:
            res = code_sample(g, gens, y, cfg, workspace=ws)
            for j, z in enumerate(res.codes):
                if g.atomic_norm(z) > 0:
                    used[j] = True
            if all(used):
                return True
        return all(used)

    lo, hi = 0, count - 1  # grid[hi] smallest
    if alive(grid[0]):
        return float(grid[0])
    if not alive(grid[-1]):
        return float(grid[-1])
    # binary search for the first alive index (grid is descending in lambda)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if alive(grid[mid]):
            hi = mid
        else:
            lo = mid
    return float(grid[hi])
