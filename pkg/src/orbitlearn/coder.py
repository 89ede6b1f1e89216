"""Per-sample coding step: proximal gradient for the separable-norm groups
and projected gradient with Dykstra projections for continuous shifts.

Both engines use the same backtracking rule: a step is accepted when the
composite objective decreases by at least c/(2*eta) times the squared move,
which keeps the recorded objective non-increasing by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericalError
from .groups import (
    CtsCode,
    GeneratorSet,
    GroupModel,
    OrthCode,
    RegularCode,
    ShiftCode,
    soft_threshold,
)
from .toeplitz import project_psd_toeplitz, toeplitz_from_first_col


@dataclass
class LineSearch:
    eta0: float = 1.0
    beta: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0.0 < self.c < 1.0:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")
        if self.eta0 <= 0:
            raise ValueError("initial step must be positive")


@dataclass
class SolverConfig:
    """Regularization, iteration budgets, and line-search policy.

    The defaults reproduce the reference experimental protocol: five
    proximal/projected gradient iterations per coding call and a single
    Dykstra inner iteration per projection.
    """

    lam: float
    max_iters: int = 5
    line_search: LineSearch = field(default_factory=LineSearch)
    dykstra_inner_iters: int = 1
    dykstra_eps: float = 1e-9
    tol: float = 0.0
    warm_start: bool = True

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.max_iters < 0:
            raise ValueError("iteration budget must be nonnegative")
        if self.dykstra_inner_iters < 1:
            raise ValueError("Dykstra inner budget must be >= 1")


@dataclass
class CodingResult:
    codes: list
    objective: float
    fit: np.ndarray
    converged: bool
    objective_history: np.ndarray


# Rounding guard in the sufficient-decrease test so warm-started fixed points
# accept immediately instead of backtracking through float noise.  Must match
# the constant in the compiled kernels.
ACCEPT_SLACK = 16.0 * np.finfo(float).eps


class Workspace:
    """Per-(group, generators) precomputation shared across samples."""

    def __init__(self, g: GroupModel, gens: GeneratorSet):
        self.g = g
        self.gens = gens
        A = gens.atoms
        self.A = A
        if g.kind == "intshift":
            self.FA = np.fft.rfft(A, axis=1)
        elif g.kind in ("interpshift", "ctsshift"):
            # Centered spectra of the generators, one row per generator.
            specs = np.sqrt(g.n) * np.fft.fftshift(np.fft.ifft(A, axis=1), axes=1)
            self.Atil = specs
            self.Atil_conj = np.conj(specs)
            if g.kind == "interpshift":
                self.freq_index = g._interp_freq_index()

    def code_shape(self):
        g = self.g
        q = self.gens.q
        if g.kind == "regular":
            return (q,)
        if g.kind == "intshift":
            return (q, g.n)
        if g.kind == "interpshift":
            return (q, g.grid_size)
        if g.kind == "orthogonal":
            return (q, g.n, g.n)
        raise ValueError("ctsshift codes are not a flat array")

    # -- batched smooth-part machinery for the separable engine ------------

    def fit(self, Z: np.ndarray) -> np.ndarray:
        g = self.g
        if g.kind == "regular":
            return Z @ self.A
        if g.kind == "intshift":
            return np.fft.irfft((np.fft.rfft(Z, axis=1) * self.FA).sum(axis=0), n=g.n)
        if g.kind == "interpshift":
            S = np.conj(np.fft.fft(Z, axis=1))[:, self.freq_index]
            spec = (S * self.Atil).sum(axis=0)
            return (np.fft.fft(np.fft.ifftshift(spec)) / np.sqrt(g.n)).real
        if g.kind == "orthogonal":
            return np.einsum("jkl,jlr->kr", Z, self.A)
        raise ValueError

    def grad(self, resid) -> np.ndarray:
        """Gradient of the smooth loss, i.e. minus the adjoint of fit."""
        g = self.g
        if g.kind == "regular":
            return -(self.A @ resid)
        if g.kind == "intshift":
            return -np.fft.irfft(np.conj(self.FA) * np.fft.rfft(resid), n=g.n)
        if g.kind == "interpshift":
            rtil = np.sqrt(g.n) * np.fft.fftshift(np.fft.ifft(resid))
            U = self.Atil_conj * rtil
            emb = np.zeros((self.gens.q, g.grid_size), dtype=complex)
            emb[:, self.freq_index] = U
            return -np.fft.fft(emb, axis=1).real
        if g.kind == "orthogonal":
            return -np.einsum("kr,jlr->jkl", resid, self.A)
        raise ValueError

    def prox(self, Z: np.ndarray, tau: float) -> np.ndarray:
        g = self.g
        if g.kind in ("regular", "intshift", "interpshift"):
            return soft_threshold(Z, tau)
        if g.kind == "orthogonal":
            return self.prox_penalty(Z, tau)[0]
        raise ValueError

    def prox_penalty(self, Z: np.ndarray, tau: float):
        """Proximal step plus the penalty value of the result (one pass)."""
        g = self.g
        if g.kind in ("regular", "intshift", "interpshift"):
            Zc = soft_threshold(Z, tau)
            return Zc, float(np.sum(np.abs(Zc)))
        if g.kind == "orthogonal":
            U, s, Vt = np.linalg.svd(Z)
            top = np.maximum(s[:, 0] - tau, 0.0)
            s = np.minimum(s, top[:, None])
            return (U * s[:, None, :]) @ Vt, float(top.sum())
        raise ValueError

    def penalty(self, Z: np.ndarray) -> float:
        g = self.g
        if g.kind in ("regular", "intshift", "interpshift"):
            return float(np.sum(np.abs(Z)))
        if g.kind == "orthogonal":
            return float(np.linalg.svd(Z, compute_uv=False)[:, 0].sum())
        raise ValueError

    def codes_to_array(self, codes) -> np.ndarray:
        g = self.g
        if g.kind == "regular":
            return np.array([z.c for z in codes])
        if g.kind in ("intshift", "interpshift"):
            return np.stack([z.x.copy() for z in codes])
        if g.kind == "orthogonal":
            return np.stack([z.Z.copy() for z in codes])
        raise ValueError

    def array_to_codes(self, Z: np.ndarray) -> list:
        g = self.g
        if g.kind == "regular":
            return [RegularCode(float(c)) for c in Z]
        if g.kind in ("intshift", "interpshift"):
            return [ShiftCode(x.copy()) for x in Z]
        if g.kind == "orthogonal":
            return [OrthCode(Zj.copy()) for Zj in Z]
        raise ValueError


def make_workspace(g: GroupModel, gens: GeneratorSet) -> Workspace:
    return Workspace(g, gens)


def _loss(resid) -> float:
    return 0.5 * float(np.sum(np.asarray(resid) ** 2))


def code_sample(
    g: GroupModel,
    gens: GeneratorSet,
    y,
    cfg: SolverConfig,
    init_codes=None,
    mask=None,
    workspace: Workspace | None = None,
) -> CodingResult:
    """Approximately minimize 0.5||y - sum_j Z_j a_j||^2 + lam sum_j ||Z_j||.

    Runs cfg.max_iters proximal (or projected, for continuous shifts)
    gradient iterations with backtracking.  init_codes warm-starts the
    solve; mask restricts the quadratic loss to the observed entries.
    """
    ws = workspace if workspace is not None else Workspace(g, gens)
    y = np.asarray(y, dtype=float)
    if y.shape != g.sample_shape():
        raise ValueError(f"sample shape {y.shape} does not match group ambient {g.sample_shape()}")
    if mask is not None:
        mask = np.asarray(mask, dtype=float)
        if mask.shape != y.shape:
            raise ValueError("mask shape must match the sample")
    if g.kind == "ctsshift":
        return _code_cts(ws, y, cfg, init_codes, mask)
    return _code_separable(ws, y, cfg, init_codes, mask)


def _code_separable(ws: Workspace, y, cfg: SolverConfig, init_codes, mask) -> CodingResult:
    g, ls = ws.g, cfg.line_search
    if init_codes is not None and cfg.warm_start:
        Z = ws.codes_to_array(init_codes).astype(float)
    else:
        Z = np.zeros(ws.code_shape())

    kernel = kernels.separable_kernel(g.kind, g.n) if cfg.tol == 0 else None
    if kernel is not None:
        history = kernel(
            y, ws.A, Z, cfg.lam, cfg.max_iters, ls.eta0, ls.beta, ls.c, ls.max_backtracks,
            mask if mask is not None else np.array([]),
        )
        if not np.all(np.isfinite(history)):
            raise NumericalError("coding objective became non-finite")
        converged = _converged(history, cfg.tol)
        fit = ws.fit(Z)
        return CodingResult(ws.array_to_codes(Z), float(history[-1]), fit, converged, history)

    def weighted(r):
        return r if mask is None else mask * r

    fit = ws.fit(Z)
    f = _loss(weighted(y - fit))
    F = f + cfg.lam * ws.penalty(Z)
    if not np.isfinite(F):
        raise NumericalError("coding objective became non-finite")
    history = [F]
    for _ in range(cfg.max_iters):
        resid = weighted(y - fit)
        G = ws.grad(resid)
        eta = ls.eta0
        accepted = False
        for _ in range(ls.max_backtracks):
            Zc, pen = ws.prox_penalty(Z - eta * G, eta * cfg.lam)
            fitc = ws.fit(Zc)
            Fc = _loss(weighted(y - fitc)) + cfg.lam * pen
            if not np.isfinite(Fc):
                eta *= ls.beta
                continue
            move = float(np.sum((Zc - Z) ** 2))
            if Fc <= F - 0.5 * ls.c / eta * move + ACCEPT_SLACK * (1.0 + abs(F)):
                Z, fit, F = Zc, fitc, Fc
                accepted = True
                break
            eta *= ls.beta
        history.append(F)
        if not accepted:
            break
        if cfg.tol > 0 and len(history) >= 2:
            prev = history[-2]
            if abs(prev - F) <= cfg.tol * max(1.0, abs(prev)):
                break
    history = np.asarray(history)
    return CodingResult(ws.array_to_codes(Z), float(F), fit, _converged(history, cfg.tol), history)


def _converged(history, tol) -> bool:
    if len(history) < 2:
        return True
    prev, last = history[-2], history[-1]
    return abs(prev - last) <= max(tol, 1e-12) * max(1.0, abs(prev))


def _cts_fit(ws: Workspace, zp, bp, zm, bm):
    g = ws.g
    W = _batch_centered(zp, bp) - _batch_centered(zm, bm)
    spec = (W * ws.Atil).sum(axis=0)
    fit = (np.fft.fft(np.fft.ifftshift(spec)) / np.sqrt(g.n)).real
    return fit


def _batch_centered(z, bz):
    # Rows: conj-reversed tail, center value, tail.
    return np.concatenate([np.conj(bz[:, ::-1]), z[:, None].astype(complex), bz], axis=1)


def _code_cts(ws: Workspace, y, cfg: SolverConfig, init_codes, mask) -> CodingResult:
    g, ls = ws.g, cfg.line_search
    q, d = ws.gens.q, g.d_half
    if init_codes is not None and cfg.warm_start:
        zp = np.array([c.z_plus for c in init_codes], dtype=float)
        zm = np.array([c.z_minus for c in init_codes], dtype=float)
        bp = np.stack([c.bz_plus.astype(complex) for c in init_codes])
        bm = np.stack([c.bz_minus.astype(complex) for c in init_codes])
    else:
        zp = np.zeros(q)
        zm = np.zeros(q)
        bp = np.zeros((q, d), dtype=complex)
        bm = np.zeros((q, d), dtype=complex)

    def weighted(r):
        return r if mask is None else mask * r

    def penalty(zp_, zm_):
        return float(np.sum(zp_) + np.sum(zm_))

    def project(zp_, bp_, zm_, bm_):
        out = []
        for z_, b_ in ((zp_, bp_), (zm_, bm_)):
            zn = np.empty_like(z_)
            bn = np.empty_like(b_)
            for j in range(q):
                T = toeplitz_from_first_col(np.concatenate([[z_[j]], b_[j]]))
                res = project_psd_toeplitz(T, max_iters=cfg.dykstra_inner_iters, eps=cfg.dykstra_eps)
                zn[j] = res.matrix[0, 0].real
                bn[j] = res.matrix[1:, 0]
            out.append((zn, bn))
        return out[0][0], out[0][1], out[1][0], out[1][1]

    fit = _cts_fit(ws, zp, bp, zm, bm)
    F = _loss(weighted(y - fit)) + cfg.lam * penalty(zp, zm)
    if not np.isfinite(F):
        raise NumericalError("coding objective became non-finite")
    history = [F]
    for _ in range(cfg.max_iters):
        resid = weighted(y - fit)
        rtil = np.sqrt(g.n) * np.fft.fftshift(np.fft.ifft(resid))
        U = ws.Atil_conj * rtil
        u0 = U[:, d].real
        tail = 2.0 * U[:, d + 1 :]
        gzp = -u0 + cfg.lam
        gzm = u0 + cfg.lam
        gbp = -tail
        gbm = tail
        eta = ls.eta0
        accepted = False
        for _ in range(ls.max_backtracks):
            cand = project(zp - eta * gzp, bp - eta * gbp, zm - eta * gzm, bm - eta * gbm)
            fitc = _cts_fit(ws, *cand)
            Fc = _loss(weighted(y - fitc)) + cfg.lam * penalty(cand[0], cand[2])
            if np.isfinite(Fc):
                move = (
                    float(np.sum((cand[0] - zp) ** 2) + np.sum((cand[2] - zm) ** 2))
                    + float(np.sum(np.abs(cand[1] - bp) ** 2) + np.sum(np.abs(cand[3] - bm) ** 2))
                )
                if Fc <= F - 0.5 * ls.c / eta * move + ACCEPT_SLACK * (1.0 + abs(F)):
                    zp, bp, zm, bm = cand
                    fit, F = fitc, Fc
                    accepted = True
                    break
            eta *= ls.beta
        history.append(F)
        if not accepted:
            break
        if cfg.tol > 0 and len(history) >= 2:
            prev = history[-2]
            if abs(prev - F) <= cfg.tol * max(1.0, abs(prev)):
                break
    history = np.asarray(history)
    codes = [CtsCode(float(zp[j]), bp[j].copy(), float(zm[j]), bm[j].copy()) for j in range(q)]
    return CodingResult(codes, float(F), fit, _converged(history, cfg.tol), history)


def code_batch(
    g: GroupModel,
    gens: GeneratorSet,
    Y,
    cfg: SolverConfig,
    init_codes_list=None,
    workspace: Workspace | None = None,
) -> list:
    """Vectorized coding of a whole dataset at once (orthogonal group).

    Semantically equivalent to per-sample code_sample calls, each sample
    running its own backtracking line search; results come back in sample
    order, so the outcome does not depend on any worker configuration.
    """
    if g.kind != "orthogonal":
        raise ValueError("batched coding is implemented for the orthogonal group")
    ws = workspace if workspace is not None else Workspace(g, gens)
    ls = cfg.line_search
    Y = np.asarray(Y, dtype=float)
    N, q, d = Y.shape[0], ws.gens.q, g.n
    A = ws.A

    if init_codes_list is not None and cfg.warm_start:
        Z = np.stack([ws.codes_to_array(codes) for codes in init_codes_list]).astype(float)
    else:
        Z = np.zeros((N, q, d, d))

    def fit_all(Zv):
        return np.einsum("njkl,jlr->nkr", Zv, A)

    def loss_all(F_):
        return 0.5 * np.sum((Y - F_) ** 2, axis=(1, 2))

    def prox_pen(Zv, tau):
        U, s, Vt = np.linalg.svd(Zv)
        top = np.maximum(s[..., 0] - tau[:, None], 0.0)
        s = np.minimum(s, top[..., None])
        return (U * s[..., None, :]) @ Vt, top.sum(axis=1)

    fit = fit_all(Z)
    pen = np.linalg.svd(Z, compute_uv=False)[..., 0].sum(axis=1)
    F = loss_all(fit) + cfg.lam * pen
    if not np.all(np.isfinite(F)):
        raise NumericalError("coding objective became non-finite")
    history = np.empty((N, cfg.max_iters + 1))
    history[:, 0] = F
    lengths = np.ones(N, dtype=int)
    alive = np.ones(N, dtype=bool)

    for it in range(cfg.max_iters):
        if not np.any(alive):
            break
        idx_alive = np.flatnonzero(alive)
        resid = Y[idx_alive] - fit[idx_alive]
        G = -np.einsum("nkr,jlr->njkl", resid, A)
        eta = np.full(idx_alive.size, ls.eta0)
        searching = np.ones(idx_alive.size, dtype=bool)
        accepted = np.zeros(idx_alive.size, dtype=bool)
        for _ in range(ls.max_backtracks):
            sub = np.flatnonzero(searching)
            if sub.size == 0:
                break
            rows = idx_alive[sub]
            Zc, penc = prox_pen(Z[rows] - eta[sub, None, None, None] * G[sub], eta[sub] * cfg.lam)
            fitc = fit_all(Zc)
            Fc = 0.5 * np.sum((Y[rows] - fitc) ** 2, axis=(1, 2)) + cfg.lam * penc
            move = np.sum((Zc - Z[rows]) ** 2, axis=(1, 2, 3))
            ok = np.isfinite(Fc) & (
                Fc <= F[rows] - 0.5 * ls.c / eta[sub] * move + ACCEPT_SLACK * (1.0 + np.abs(F[rows]))
            )
            good = rows[ok]
            if good.size:
                Z[good] = Zc[ok]
                fit[good] = fitc[ok]
                F[good] = Fc[ok]
                accepted[sub[ok]] = True
                searching[sub[ok]] = False
            eta[sub[~ok]] *= ls.beta
        history[idx_alive, it + 1] = F[idx_alive]
        lengths[idx_alive] += 1
        new_alive = alive.copy()
        new_alive[idx_alive[~accepted]] = False
        if cfg.tol > 0:
            prev = history[idx_alive, it]
            cur = history[idx_alive, it + 1]
            settled = np.abs(prev - cur) <= cfg.tol * np.maximum(1.0, np.abs(prev))
            new_alive[idx_alive[settled]] = False
        alive = new_alive

    out = []
    for i in range(N):
        h = history[i, : lengths[i]].copy()
        out.append(
            CodingResult(ws.array_to_codes(Z[i]), float(F[i]), fit[i].copy(), _converged(h, cfg.tol), h)
        )
    return out


def objective(g: GroupModel, gens: GeneratorSet, y, codes, lam: float, mask=None) -> float:
    """Exact sample objective 0.5||y - sum_j Z_j a_j||^2 + lam sum_j ||Z_j||."""
    y = np.asarray(y, dtype=float)
    fit = reconstruct(g, gens, codes)
    resid = y - fit
    if mask is not None:
        resid = np.asarray(mask, dtype=float) * resid
    return _loss(resid) + lam * sum(g.atomic_norm(z) for z in codes)


def reconstruct(g: GroupModel, gens: GeneratorSet, codes) -> np.ndarray:
    """The fit sum_j apply(Z_j, a_j)."""
    out = np.zeros(g.sample_shape())
    for z, a in zip(codes, gens):
        out = out + g.apply(z, a)
    return out


def denoise(g: GroupModel, gens: GeneratorSet, y, cfg: SolverConfig) -> np.ndarray:
    """Atomic-norm denoising: the reconstruction of the coding solution."""
    return code_sample(g, gens, y, cfg).fit
