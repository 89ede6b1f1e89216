"""Shared numerical primitives: centered DFT basis, circular convolution, factorizations.

All operations are pure functions on immutable inputs. Tolerances used both
here and in the test suite are centralized as module constants.
"""

import numpy as np

# Hermitian residual allowed when symmetrizing at construction.
SYMMETRIZE_TOL = 1e-12
# Unitary transforms must round-trip to this accuracy.
ROUNDTRIP_TOL = 1e-10
# Relative reconstruction residual for eigen/SVD factorizations.
FACTORIZATION_TOL = 1e-9
# Conjugate-symmetry precondition on spectra of real signals.
CONJ_SYM_TOL = 1e-8
# Feasibility slack for PSD cones throughout the projection machinery.
PSD_FEAS_TOL = 1e-8


def as_real_signal(x):
    """Validate and return a finite 1-D float array of length >= 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"expected a 1-D signal of length >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite entries")
    return x


class FourierBasis:
    """Centered unitary DFT on R^n for odd n = 2d+1.

    Rows are indexed by frequencies -d..d, columns by time 0..n-1, with
    entries omega^(f*t) / sqrt(n) for omega = exp(2i*pi/n). The image of the
    real vectors is the conjugate-symmetric subspace, i.e. spectra with
    coefficient at -f equal to the conjugate of the one at +f.
    """

    def __init__(self, n: int):
        n = int(n)
        if n < 1 or n % 2 == 0:
            raise ValueError(
                f"centered Fourier basis requires an odd signal length, got {n}"
            )
        self.n = n
        self.d_half = (n - 1) // 2
        self.omega = np.exp(2j * np.pi / n)
        # Frequencies in centered order -d..d.
        self.freqs = np.arange(-self.d_half, self.d_half + 1)

    def matrix(self) -> np.ndarray:
        """Dense basis matrix; used by test oracles, not the fast paths."""
        t = np.arange(self.n)
        return np.exp(2j * np.pi * np.outer(self.freqs, t) / self.n) / np.sqrt(self.n)

    def atom(self, phi: float) -> np.ndarray:
        """Unit-modulus phase ramp exp(2i*pi*f*phi), f = -d..d.

        phi is the shift as a fraction of the full period; an integer shift
        by r samples corresponds to phi = r/n.
        """
        return np.exp(2j * np.pi * self.freqs * phi)

    def half_atom(self, phi: float) -> np.ndarray:
        """Nonnegative-frequency ramp exp(2i*pi*k*phi), k = 0..d."""
        return np.exp(2j * np.pi * np.arange(self.d_half + 1) * phi)


def dft_forward(x, basis: FourierBasis) -> np.ndarray:
    """Centered spectrum F x of a real signal, ordered by frequency -d..d."""
    x = as_real_signal(x)
    if x.size != basis.n:
        raise ValueError(f"signal length {x.size} does not match basis length {basis.n}")
    # (F x)_f = sum_t x_t omega^(f t) / sqrt(n) = sqrt(n) * ifft(x) reordered.
    return np.sqrt(basis.n) * np.fft.fftshift(np.fft.ifft(x))


def conj_symmetry_residual(f) -> float:
    """Max deviation of a centered spectrum from conjugate symmetry."""
    f = np.asarray(f, dtype=complex)
    return float(np.max(np.abs(f - np.conj(f[::-1]))))


def dft_inverse(f, basis: FourierBasis, tol: float = CONJ_SYM_TOL) -> np.ndarray:
    """Real signal with centered spectrum f; rejects non-symmetric spectra."""
    f = np.asarray(f, dtype=complex)
    if f.ndim != 1 or f.size != basis.n:
        raise ValueError(f"spectrum length {f.size} does not match basis length {basis.n}")
    residual = conj_symmetry_residual(f)
    if residual > tol:
        raise ValueError(
            f"spectrum is not conjugate-symmetric: residual {residual:.3e} > {tol:.0e}"
        )
    x = np.fft.fft(np.fft.ifftshift(f)) / np.sqrt(basis.n)
    return x.real


def circular_convolve(a, x) -> np.ndarray:
    """Cyclic convolution (a * x)_i = sum_k a_k x_{i-k}, via the FFT."""
    a = as_real_signal(a)
    x = as_real_signal(x)
    if a.size != x.size:
        raise ValueError(f"length mismatch: {a.size} vs {x.size}")
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(x), n=a.size)


def circular_correlate(a, w) -> np.ndarray:
    """Cyclic cross-correlation, the adjoint of x -> circular_convolve(a, x)."""
    a = as_real_signal(a)
    w = as_real_signal(w)
    if a.size != w.size:
        raise ValueError(f"length mismatch: {a.size} vs {w.size}")
    return np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(w), n=a.size)


def as_hermitian(X, tol: float = SYMMETRIZE_TOL) -> np.ndarray:
    """Symmetrize X to (X + X^H)/2; rejects matrices beyond the tolerance."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite entries")
    residual = np.max(np.abs(X - X.conj().T))
    scale = max(1.0, float(np.max(np.abs(X))))
    if residual > tol * scale:
        raise ValueError(
            f"matrix is not Hermitian: residual {residual:.3e} exceeds {tol:.0e} * scale"
        )
    return (X + X.conj().T) / 2.0


def hermitian_eig(X, tol: float = SYMMETRIZE_TOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    X = as_hermitian(X, tol=tol)
    evals, evecs = np.linalg.eigh(X)
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order]


def svd(X):
    """Reduced SVD with singular values in descending order."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite entries")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return U, s, Vt
