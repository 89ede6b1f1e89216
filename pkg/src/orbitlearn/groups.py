"""Invariance groups, their compact coding variables, and the per-group calculus.

Each group kind stores a coding variable in the minimal parameterization of
the span of its convex hull (a scalar, a first circulant column, a pair of
Hermitian-Toeplitz first columns, or a dense square matrix) instead of a full
d x d matrix.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .numerics import (
    FourierBasis,
    as_real_signal,
    circular_convolve,
    circular_correlate,
    dft_forward,
    dft_inverse,
    svd,
)

KINDS = ("regular", "intshift", "interpshift", "ctsshift", "orthogonal")

UNIT_NORM_TOL = 1e-10


@dataclass
class RegularCode:
    c: float


@dataclass
class ShiftCode:
    """First column of a circulant; for interpolated shifts, the length-n*K
    coefficient vector over the fractional-shift grid."""

    x: np.ndarray


@dataclass
class CtsCode:
    """First columns (z, bz) of the two implied (d+1)x(d+1) Hermitian
    Toeplitz certificate matrices (positive and negative parts)."""

    z_plus: float
    bz_plus: np.ndarray
    z_minus: float
    bz_minus: np.ndarray


@dataclass
class OrthCode:
    Z: np.ndarray


@dataclass
class GeneratorSet:
    """q generators, stacked as (q, n) vectors or (q, d, r) matrices.

    Vector atoms are unit Euclidean norm; matrix atoms have unit-norm columns
    (the convention the synchronization experiments require).
    """

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim not in (2, 3) or atoms.shape[0] < 1:
            raise ValueError(f"expected (q, n) or (q, d, r) atoms, got shape {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms contain non-finite entries")
        if atoms.ndim == 2:
            norms = np.linalg.norm(atoms, axis=1)
        else:
            norms = np.linalg.norm(atoms, axis=1).ravel()
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("atoms must be unit norm (unit columns for matrix atoms)")
        self.atoms = atoms

    @property
    def q(self) -> int:
        return self.atoms.shape[0]

    def __len__(self):
        return self.atoms.shape[0]

    def __iter__(self):
        return iter(self.atoms)


def normalize_atoms(atoms: np.ndarray) -> np.ndarray:
    """Scale vector atoms to unit norm, matrix atoms to unit-norm columns."""
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 2:
        return atoms / np.linalg.norm(atoms, axis=1, keepdims=True)
    return atoms / np.linalg.norm(atoms, axis=1, keepdims=True)


@dataclass
class GroupModel:
    """Tagged description of the invariance group acting on the data.

    kind: one of 'regular' | 'intshift' | 'interpshift' | 'ctsshift' |
    'orthogonal'.  n is the signal length (rows d for 'orthogonal', whose
    samples are d x r matrices with r = cols).  subdivisions is the K of the
    interpolated-shift grid; interpshift with K = 1 behaves identically to
    intshift.  Immutable after construction.
    """

    kind: str
    n: int
    cols: int = 0
    subdivisions: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ValueError("ambient dimension must be >= 1")
        if self.kind in ("ctsshift", "interpshift") and self.n % 2 == 0:
            raise ValueError(
                f"{self.kind} requires an odd ambient length (trigonometric "
                f"interpolation is defined for 2d+1), got {self.n}"
            )
        if self.kind == "interpshift" and self.subdivisions < 1:
            raise ValueError("interpshift subdivisions K must be >= 1")
        if self.kind == "orthogonal" and self.cols < 1:
            raise ValueError("orthogonal group needs the data column count (d x r samples)")

    # -- structural helpers -------------------------------------------------

    @cached_property
    def basis(self) -> FourierBasis:
        if self.n % 2 == 0:
            raise ValueError("centered Fourier basis undefined for even lengths")
        return FourierBasis(self.n)

    @property
    def d_half(self) -> int:
        return (self.n - 1) // 2

    @property
    def grid_size(self) -> int:
        """Number of fractional-shift grid points (interpshift only)."""
        return self.n * self.subdivisions

    def sample_shape(self):
        if self.kind == "orthogonal":
            return (self.n, self.cols)
        return (self.n,)

    def zero_code(self):
        if self.kind == "regular":
            return RegularCode(0.0)
        if self.kind == "intshift":
            return ShiftCode(np.zeros(self.n))
        if self.kind == "interpshift":
            return ShiftCode(np.zeros(self.grid_size))
        if self.kind == "ctsshift":
            d = self.d_half
            return CtsCode(0.0, np.zeros(d, dtype=complex), 0.0, np.zeros(d, dtype=complex))
        return OrthCode(np.zeros((self.n, self.n)))

    def _check_code(self, z):
        expected = {
            "regular": RegularCode,
            "intshift": ShiftCode,
            "interpshift": ShiftCode,
            "ctsshift": CtsCode,
            "orthogonal": OrthCode,
        }[self.kind]
        if not isinstance(z, expected):
            raise TypeError(f"{self.kind} group expects {expected.__name__}, got {type(z).__name__}")
        if isinstance(z, ShiftCode):
            want = self.n if self.kind == "intshift" else self.grid_size
            if z.x.shape != (want,):
                raise ValueError(f"shift code length {z.x.shape} does not match {want}")
        if isinstance(z, CtsCode) and z.bz_plus.shape != (self.d_half,):
            raise ValueError("ctsshift code tail length must be d")
        if isinstance(z, OrthCode) and z.Z.shape != (self.n, self.n):
            raise ValueError(f"orthogonal code must be {self.n}x{self.n}")

    # -- spectra ------------------------------------------------------------

    def _interp_freq_index(self):
        # Embedding of centered frequencies -d..d into 0..nK-1 (mod nK).
        return np.mod(self.basis.freqs, self.grid_size)

    def interp_spectrum(self, x: np.ndarray) -> np.ndarray:
        """Centered diagonal sum_k x_k l(k/(nK)) of an interpolated-shift code."""
        return np.conj(np.fft.fft(x))[self._interp_freq_index()]

    def cts_spectrum(self, z: CtsCode) -> np.ndarray:
        """Centered conjugate-symmetric diagonal assembled from the certificate."""
        return _assemble_centered(z.z_plus, z.bz_plus) - _assemble_centered(z.z_minus, z.bz_minus)

    # -- the five spec operations -------------------------------------------

    def atomic_norm(self, z) -> float:
        """Gauge of the coding variable with respect to conv of the group.

        For ctsshift this is the stored certificate value z_+ + z_-, an upper
        bound on the true gauge that is tight at solver fixed points.
        """
        self._check_code(z)
        if self.kind == "regular":
            return abs(z.c)
        if self.kind in ("intshift", "interpshift"):
            return float(np.sum(np.abs(z.x)))
        if self.kind == "ctsshift":
            return float(z.z_plus + z.z_minus)
        return float(np.linalg.norm(z.Z, ord=2))

    def apply(self, z, atom) -> np.ndarray:
        """The product Z a of the coding variable with a generator."""
        self._check_code(z)
        if self.kind == "regular":
            return z.c * np.asarray(atom, dtype=float)
        if self.kind == "intshift":
            return circular_convolve(atom, z.x)
        if self.kind == "interpshift":
            spec = self.interp_spectrum(z.x) * dft_forward(atom, self.basis)
            return _centered_inverse(spec, self.n)
        if self.kind == "ctsshift":
            spec = self.cts_spectrum(z) * dft_forward(atom, self.basis)
            return _centered_inverse(spec, self.n)
        return z.Z @ np.asarray(atom, dtype=float)

    def apply_adjoint(self, residual, atom):
        """Gradient of 0.5 * ||residual - apply(z, a)||^2 at z = 0.

        This is the negative adjoint of the linear map z -> apply(z, a).
        """
        adj = self.adjoint(residual, atom)
        return _scale_code(adj, -1.0)

    def adjoint(self, w, atom):
        """Adjoint of z -> apply(z, a) under the coding-variable inner product."""
        if self.kind == "regular":
            return RegularCode(float(np.dot(atom, w)))
        if self.kind == "intshift":
            return ShiftCode(circular_correlate(atom, w))
        if self.kind == "interpshift":
            u = np.conj(dft_forward(atom, self.basis)) * dft_forward(w, self.basis)
            emb = np.zeros(self.grid_size, dtype=complex)
            emb[self._interp_freq_index()] = u
            return ShiftCode(np.fft.fft(emb).real)
        if self.kind == "ctsshift":
            u = np.conj(dft_forward(atom, self.basis)) * dft_forward(w, self.basis)
            d = self.d_half
            u0 = float(u[d].real)
            tail = 2.0 * u[d + 1 :]
            return CtsCode(u0, tail, -u0, -tail.copy())
        w = np.asarray(w, dtype=float)
        return OrthCode(w @ np.asarray(atom, dtype=float).T)

    def code_dot(self, za, zb) -> float:
        """Inner product on coding variables matching `adjoint` above."""
        self._check_code(za)
        self._check_code(zb)
        if self.kind == "regular":
            return za.c * zb.c
        if self.kind in ("intshift", "interpshift"):
            return float(np.dot(za.x, zb.x))
        if self.kind == "ctsshift":
            return float(
                za.z_plus * zb.z_plus
                + np.real(np.vdot(za.bz_plus, zb.bz_plus))
                + za.z_minus * zb.z_minus
                + np.real(np.vdot(za.bz_minus, zb.bz_minus))
            )
        return float(np.sum(za.Z * zb.Z))

    def prox(self, z, tau: float):
        """Proximal map of tau * atomic_norm for the separable-norm kinds."""
        if self.kind == "ctsshift":
            raise ValueError("ctsshift uses projection, not a proximal map")
        self._check_code(z)
        if tau < 0:
            raise ValueError("prox step must be nonnegative")
        if self.kind == "regular":
            return RegularCode(float(soft_threshold(np.asarray(z.c), tau)))
        if self.kind in ("intshift", "interpshift"):
            return ShiftCode(soft_threshold(z.x, tau))
        return OrthCode(spectral_prox(z.Z, tau))

    def group_element(self, param) -> np.ndarray:
        """Dense matrix realization of a single group element."""
        if self.kind == "regular":
            if param not in (1, -1, 1.0, -1.0):
                raise ValueError("regular group parameter must be +1 or -1")
            return float(param) * np.eye(self.n)
        if self.kind == "intshift":
            r = int(param)
            if r != param or not 0 <= r < self.n:
                raise ValueError(f"integer shift must lie in [0, {self.n}), got {param}")
            return np.roll(np.eye(self.n), r, axis=0)
        if self.kind == "interpshift":
            k = int(param)
            if k != param or not 0 <= k < self.grid_size:
                raise ValueError(f"grid index must lie in [0, {self.grid_size}), got {param}")
            return self._phase_element(k / self.grid_size)
        if self.kind == "ctsshift":
            phi = float(param)
            if not 0.0 <= phi < 1.0:
                raise ValueError(f"continuous shift must lie in [0, 1), got {param}")
            return self._phase_element(phi)
        Q = np.asarray(param, dtype=float)
        if Q.shape != (self.n, self.n) or np.max(np.abs(Q.T @ Q - np.eye(self.n))) > 1e-9:
            raise ValueError("orthogonal group parameter must be an orthogonal matrix")
        return Q

    def _phase_element(self, phi: float) -> np.ndarray:
        F = self.basis.matrix()
        G = F.conj().T @ (self.basis.atom(phi)[:, None] * F)
        residue = float(np.max(np.abs(G.imag)))
        if residue > 1e-9:
            raise ValueError(f"group element has imaginary residue {residue:.3e}")
        return G.real

    def element_code(self, param, sign: float = 1.0):
        """Coding variable that represents exactly sign * group_element(param)."""
        if self.kind == "regular":
            return RegularCode(float(param) * sign)
        if self.kind == "intshift":
            x = np.zeros(self.n)
            x[int(param)] = sign
            return ShiftCode(x)
        if self.kind == "interpshift":
            x = np.zeros(self.grid_size)
            x[int(param)] = sign
            return ShiftCode(x)
        if self.kind == "ctsshift":
            tail = self.basis.half_atom(float(param))[1:]
            d = self.d_half
            if sign >= 0:
                return CtsCode(sign, sign * tail, 0.0, np.zeros(d, dtype=complex))
            return CtsCode(0.0, np.zeros(d, dtype=complex), -sign, -sign * tail)
        return OrthCode(sign * np.asarray(param, dtype=float))

    def code_to_matrix(self, z) -> np.ndarray:
        """Dense d x d realization of the coding variable (oracle path)."""
        self._check_code(z)
        if self.kind == "regular":
            return z.c * np.eye(self.n)
        if self.kind == "intshift":
            return scipy.linalg.circulant(z.x)
        if self.kind == "interpshift":
            F = self.basis.matrix()
            return (F.conj().T @ (self.interp_spectrum(z.x)[:, None] * F)).real
        if self.kind == "ctsshift":
            F = self.basis.matrix()
            return (F.conj().T @ (self.cts_spectrum(z)[:, None] * F)).real
        return z.Z.copy()


def _assemble_centered(z: float, bz: np.ndarray) -> np.ndarray:
    """Centered conjugate-symmetric spectrum (conj(bz) reversed, z, bz)."""
    return np.concatenate([np.conj(bz[::-1]), [complex(z)], bz])


def _centered_inverse(spec: np.ndarray, n: int) -> np.ndarray:
    """F^H spec without the conjugate-symmetry validation of dft_inverse."""
    return (np.fft.fft(np.fft.ifftshift(spec)) / np.sqrt(n)).real


def _scale_code(z, alpha: float):
    if isinstance(z, RegularCode):
        return RegularCode(alpha * z.c)
    if isinstance(z, ShiftCode):
        return ShiftCode(alpha * z.x)
    if isinstance(z, CtsCode):
        return CtsCode(alpha * z.z_plus, alpha * z.bz_plus, alpha * z.z_minus, alpha * z.bz_minus)
    return OrthCode(alpha * z.Z)


def soft_threshold(x, tau: float):
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def spectral_prox(Z: np.ndarray, tau: float) -> np.ndarray:
    """Two-step singular value update: shrink the top value by tau, then clamp
    every other value down to the shrunk top value."""
    U, s, Vt = svd(Z)
    if s.size == 0:
        return Z.copy()
    top = max(0.0, s[0] - tau)
    s = np.minimum(s, top)
    return (U * s) @ Vt


def parse_group(text: str, n: int | None = None) -> GroupModel:
    """Build a GroupModel from the CLI grammar.

    Grammar: ``regular | intshift | interpshift:K | ctsshift | orth:DxR``.
    For all but ``orth`` the ambient length n must be supplied (it comes from
    the data file).
    """
    text = text.strip().lower()
    if text.startswith("orth"):
        try:
            _, dims = text.split(":")
            d, r = dims.split("x")
            return GroupModel("orthogonal", int(d), cols=int(r))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad orthogonal group spec {text!r}; expected orth:DxR") from exc
    if n is None:
        raise ValueError("ambient length required for vector groups")
    if text == "regular":
        return GroupModel("regular", n)
    if text == "intshift":
        return GroupModel("intshift", n)
    if text == "ctsshift":
        return GroupModel("ctsshift", n)
    if text.startswith("interpshift"):
        k = 1
        if ":" in text:
            _, ks = text.split(":", 1)
            k = int(ks)
        return GroupModel("interpshift", n, subdivisions=k)
    raise ValueError(f"unknown group {text!r}")
