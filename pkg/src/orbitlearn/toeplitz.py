"""Projections for the continuous-shift certificates.

PSD cone projection, Hermitian-Toeplitz subspace projection, the
Boyle-Dykstra alternating scheme for their intersection, and extraction of
the Vandermonde decomposition of a PSD Toeplitz matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .numerics import PSD_FEAS_TOL, as_hermitian, hermitian_eig

DEFAULT_DYKSTRA_EPS = 1e-9
DEFAULT_DYKSTRA_MAX_ITERS = 500


def toeplitz_from_first_col(col) -> np.ndarray:
    """Hermitian Toeplitz matrix with the given first column."""
    col = np.asarray(col, dtype=complex)
    return scipy.linalg.toeplitz(col, np.conj(col))


def project_psd(X, tol: float = 1e-10) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues."""
    evals, evecs = hermitian_eig(X, tol=tol)
    clamped = np.maximum(evals, 0.0)
    out = (evecs * clamped) @ evecs.conj().T
    return (out + out.conj().T) / 2.0


_BAND_CACHE: dict = {}


def _band_maps(m: int):
    """Cached (flat offset labels, per-offset counts, offset-index matrix)."""
    maps = _BAND_CACHE.get(m)
    if maps is None:
        rows, cols = np.indices((m, m))
        offsets = (cols - rows).ravel() + m - 1
        counts = np.bincount(offsets, minlength=2 * m - 1)
        index = (cols - rows) + m - 1
        maps = (offsets, counts, index)
        _BAND_CACHE[m] = maps
    return maps


def _toeplitz_average(H: np.ndarray) -> np.ndarray:
    """Band-mean matrix of an (already Hermitian) H: the nearest Toeplitz."""
    m = H.shape[0]
    offsets, counts, index = _band_maps(m)
    flat = H.ravel()
    means = (
        np.bincount(offsets, weights=flat.real, minlength=2 * m - 1)
        + 1j * np.bincount(offsets, weights=flat.imag, minlength=2 * m - 1)
    ) / counts
    return means[index]


def project_toeplitz(X) -> np.ndarray:
    """Orthogonal projection onto the Hermitian Toeplitz subspace.

    Averages each diagonal band across both triangles (the superdiagonal
    entries together with the conjugated subdiagonal entries), which is the
    Frobenius-nearest Hermitian Toeplitz matrix.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    return _toeplitz_average((X + X.conj().T) / 2.0)


@dataclass
class DykstraState:
    """Iterates and correction terms of the alternating projection scheme."""

    X: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    iteration: int = 0


@dataclass
class ProjectionResult:
    matrix: np.ndarray
    converged: bool
    iterations: int


def project_psd_toeplitz(
    X,
    max_iters: int = DEFAULT_DYKSTRA_MAX_ITERS,
    eps: float = DEFAULT_DYKSTRA_EPS,
) -> ProjectionResult:
    """Boyle-Dykstra projection onto the PSD Hermitian Toeplitz cone.

    Alternates the PSD projection (with correction P) and the Toeplitz
    projection (with correction Q) until successive Toeplitz outputs differ
    by at most eps in Frobenius norm, or the iteration budget runs out.
    Non-convergence is reported through the flag, not an error.
    """
    X = as_hermitian(X, tol=1e-10)
    m = X.shape[0]
    state = DykstraState(
        X=X,
        Y=np.zeros((m, m), dtype=complex),
        P=np.zeros((m, m), dtype=complex),
        Q=np.zeros((m, m), dtype=complex),
    )
    prev = None
    converged = False
    for it in range(1, max_iters + 1):
        # PSD step; operands stay Hermitian by construction, so skip the
        # validation that the public projections perform.
        XP = state.X + state.P
        XP = (XP + XP.conj().T) / 2.0
        evals, evecs = np.linalg.eigh(XP)
        state.Y = (evecs * np.maximum(evals, 0.0)) @ evecs.conj().T
        state.Y = (state.Y + state.Y.conj().T) / 2.0
        state.P = XP - state.Y
        YQ = state.Y + state.Q
        new_X = _toeplitz_average((YQ + YQ.conj().T) / 2.0)
        state.Q = YQ - new_X
        state.X = new_X
        state.iteration = it
        if prev is not None and np.linalg.norm(state.X - prev) <= eps:
            converged = True
            break
        prev = state.X
    return ProjectionResult(state.X, converged, state.iteration)


def psd_toeplitz_feasibility(X) -> tuple[float, float]:
    """(most negative eigenvalue, max deviation from constant diagonals)."""
    X = np.asarray(X, dtype=complex)
    evals = np.linalg.eigvalsh((X + X.conj().T) / 2.0)
    min_eig = float(evals.min())
    m = X.shape[0]
    band_dev = 0.0
    for k in range(m):
        diag = np.diagonal(X, offset=k)
        band_dev = max(band_dev, float(np.max(np.abs(diag - diag.mean()))) if diag.size else 0.0)
        lower = np.diagonal(X, offset=-k)
        ref = np.conj(np.mean(np.diagonal(X, offset=k)))
        band_dev = max(band_dev, float(np.max(np.abs(lower - ref))))
    return min_eig, band_dev


@dataclass
class VandermondeFactors:
    """Phases theta_k in [0, 2pi) and positive weights of X = V D V^H."""

    thetas: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return self.thetas.size

    def vandermonde(self, m: int) -> np.ndarray:
        return np.exp(1j * np.outer(np.arange(m), self.thetas))

    def reconstruct(self, m: int) -> np.ndarray:
        V = self.vandermonde(m)
        return (V * self.weights) @ V.conj().T


def _nonneg_weights(X: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Least-squares nonnegative weights for sum_k w_k v(theta_k) v(theta_k)^H."""
    m = X.shape[0]
    V = np.exp(1j * np.outer(np.arange(m), thetas))
    cols = np.einsum("ik,jk->kij", V, np.conj(V)).reshape(thetas.size, -1).T
    A = np.vstack([cols.real, cols.imag])
    b = np.concatenate([X.real.ravel(), X.imag.ravel()])
    w, _ = scipy.optimize.nnls(A, b)
    return w


def _prony_thetas(kernel_vec: np.ndarray) -> np.ndarray:
    """Roots of the annihilating polynomial of a kernel vector, as phases.

    The polynomial sum_t u_t mu^t vanishes at mu = exp(-i theta) for every
    node theta; extraneous roots away from the unit circle are discarded and
    later pruned by their fitted weights.
    """
    coeffs = kernel_vec[::-1]
    if np.max(np.abs(coeffs)) == 0:
        return np.array([])
    roots = np.roots(coeffs)
    if roots.size == 0:
        return np.array([])
    keep = np.abs(np.abs(roots) - 1.0) < 0.2
    roots = roots[keep]
    return np.mod(-np.angle(roots), 2 * np.pi)


def _esprit_thetas(evecs: np.ndarray, rank: int) -> np.ndarray:
    """Shift-invariance estimate of the nodes from the signal subspace."""
    Us = evecs[:, :rank]
    psi, *_ = np.linalg.lstsq(Us[:-1, :], Us[1:, :], rcond=None)
    lam = np.linalg.eigvals(psi)
    return np.mod(np.angle(lam), 2 * np.pi)


def vandermonde_decompose(X, rank_tol: float | None = None) -> VandermondeFactors:
    """Phases and positive weights with X = V D V^H for PSD Toeplitz X.

    Primary extraction is Prony-style root finding on a kernel vector of the
    matrix; an eigenvalue-based (shift-invariance) estimate is the fallback.
    Full-rank inputs are deflated once by removing the largest mass at
    theta = 0 admitted by the matrix, which drops the rank by one.
    """
    X = as_hermitian(X, tol=1e-8)
    m = X.shape[0]
    evals, evecs = hermitian_eig(X, tol=1e-8)
    if evals[-1] < -PSD_FEAS_TOL * max(1.0, evals[0]):
        raise ValueError(f"matrix is not PSD within tolerance: min eigenvalue {evals[-1]:.3e}")
    _, band_dev = psd_toeplitz_feasibility(X)
    if band_dev > 1e-8 * max(1.0, float(np.max(np.abs(X)))):
        raise ValueError(f"matrix is not Toeplitz within tolerance: band deviation {band_dev:.3e}")
    top = max(evals[0], 0.0)
    if rank_tol is None:
        rank_tol = 1e-7 * max(top, 1.0)
    rank = int(np.sum(evals > rank_tol))
    if rank == 0:
        return VandermondeFactors(np.array([]), np.array([]))

    extra = []
    if rank == m:
        # Deflate: the largest t with X - t v(0) v(0)^H still PSD is
        # 1 / (v(0)^H X^{-1} v(0)); the remainder is PSD Toeplitz of rank m-1.
        v0 = np.ones(m, dtype=complex)
        t0 = float(1.0 / np.real(v0 @ np.linalg.solve(X, v0)))
        extra.append((0.0, t0))
        X = X - t0 * np.outer(v0, v0)
        X = project_toeplitz(X)
        evals, evecs = hermitian_eig(X, tol=1e-6)
        rank = m - 1

    kernel_vec = evecs[:, -1]
    thetas = _prony_thetas(kernel_vec)
    weights = _nonneg_weights(X, thetas) if thetas.size else np.array([])
    if thetas.size:
        keep = weights > max(rank_tol, 1e-12)
        thetas, weights = thetas[keep], weights[keep]
    recon = VandermondeFactors(thetas, weights).reconstruct(m)
    scale = max(float(np.linalg.norm(X)), 1e-30)
    if thetas.size == 0 or np.linalg.norm(X - recon) > 1e-8 * scale:
        thetas = _esprit_thetas(evecs, rank)
        weights = _nonneg_weights(X, thetas)
        keep = weights > max(rank_tol, 1e-12)
        thetas, weights = thetas[keep], weights[keep]

    if extra:
        thetas = np.concatenate([thetas, [phi for phi, _ in extra]])
        weights = np.concatenate([weights, [w for _, w in extra]])
    order = np.argsort(thetas)
    return VandermondeFactors(thetas[order], weights[order])
