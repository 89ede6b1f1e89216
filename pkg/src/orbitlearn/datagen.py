"""Synthetic data models, time-series segmentation, and dataset file I/O.

CSV layout: one sample per row, plain decimals at 17 significant digits so
files round-trip bit-exactly.  Matrix datasets (orthogonal group) are stored
row-major flattened with a JSON sidecar carrying {d, r, n}.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .groups import GeneratorSet

CSV_FMT = "%.17g"


@dataclass
class SyntheticShiftModel:
    d: int
    q: int
    s: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.s < 1 or self.q < 1 or self.n < 1 or self.d < 1:
            raise ValueError("shift model parameters must be positive")


@dataclass
class SyntheticSyncModel:
    d: int
    r: int
    n: int
    sigma: float
    mode: str = "single"  # 'single' or 'mixture'
    q: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("single", "mixture"):
            raise ValueError("mode must be 'single' or 'mixture'")
        if self.mode == "single":
            self.q = 1
        if self.sigma < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class SegmentationConfig:
    window: int
    stride: int = 1
    zero_mean: bool = True
    unit_norm: bool = True
    peak_window: tuple | None = None  # keep windows whose argmax is in [lo, hi)

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")


def gen_shift_dataset(model: SyntheticShiftModel):
    """Samples that are s-term signed combinations of integer shifts of q
    random unit-norm generators; returns (data, truth generators)."""
    rng = np.random.default_rng(model.seed)
    atoms = rng.normal(size=(model.q, model.d))
    atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    data = np.zeros((model.n, model.d))
    for i in range(model.n):
        gens_idx = rng.integers(0, model.q, size=model.s)
        shifts = rng.integers(0, model.d, size=model.s)
        coeffs = rng.normal(size=model.s)
        for j, r, c in zip(gens_idx, shifts, coeffs):
            data[i] += c * np.roll(atoms[j], r)
    return data, GeneratorSet(atoms)


def haar_orthogonal(rng, d: int) -> np.ndarray:
    """Uniform draw from O(d): QR of a normal matrix with sign-fixed R."""
    A = rng.normal(size=(d, d))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def gen_sync_dataset(model: SyntheticSyncModel):
    """Orthogonally rotated copies of unit-column generator matrices plus
    Gaussian noise; returns (data, truth, latents)."""
    rng = np.random.default_rng(model.seed)
    atoms = rng.normal(size=(model.q, model.d, model.r))
    atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    data = np.empty((model.n, model.d, model.r))
    gs = np.empty((model.n, model.q, model.d, model.d))
    cs = np.ones((model.n, model.q))
    for i in range(model.n):
        clean = np.zeros((model.d, model.r))
        for j in range(model.q):
            gs[i, j] = haar_orthogonal(rng, model.d)
            if model.mode == "mixture":
                cs[i, j] = rng.normal()
            clean += cs[i, j] * gs[i, j] @ atoms[j]
        noise = model.sigma * rng.normal(size=(model.d, model.r))
        data[i] = clean + noise
    return data, GeneratorSet(atoms), {"G": gs, "c": cs}


def segment_series(series, cfg: SegmentationConfig) -> np.ndarray:
    """Sliding windows with optional zero-mean / unit-norm preprocessing.

    All-zero windows (after preprocessing) are dropped with a warning; the
    peak filter keeps only windows whose argmax falls in the given range.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise DataError("expected a 1-D series")
    if series.size < cfg.window:
        raise DataError(
            f"series of length {series.size} is shorter than the window {cfg.window}"
        )
    starts = range(0, series.size - cfg.window + 1, cfg.stride)
    rows = []
    dropped = 0
    for s in starts:
        w = series[s : s + cfg.window].copy()
        if cfg.zero_mean:
            w -= w.mean()
        norm = np.linalg.norm(w)
        if norm == 0.0:
            dropped += 1
            continue
        if cfg.unit_norm:
            w /= norm
        if cfg.peak_window is not None:
            lo, hi = cfg.peak_window
            if not lo <= int(np.argmax(w)) < hi:
                continue
        rows.append(w)
    if dropped:
        warnings.warn(f"dropped {dropped} all-zero windows", stacklevel=2)
    if not rows:
        return np.empty((0, cfg.window))
    return np.stack(rows)


def synth_ecg_like(n_samples: int, seed: int = 0, sample_hz: float = 360.0, beat_hz: float = 1.25):
    """Quasi-periodic spike train standing in for a real ECG recording.

    A sharp biphasic (Gaussian-derivative) pulse at jittered beat intervals,
    over slow baseline wander and a little white noise.  Deterministic given
    the seed.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples)
    period = sample_hz / beat_hz

    signal = np.zeros(n_samples)
    width = max(2.0, 0.012 * sample_hz)  # ~12 ms spike half-width
    pos = period * rng.uniform(0.2, 0.8)
    beats = 0
    while pos < n_samples:
        center = pos
        lo = max(0, int(center - 6 * width))
        hi = min(n_samples, int(center + 6 * width) + 1)
        tt = (t[lo:hi] - center) / width
        amp = 1.0 + 0.08 * rng.normal()
        signal[lo:hi] += -amp * tt * np.exp(-0.5 * tt * tt) * np.e**0.5
        beats += 1
        pos += period * (1.0 + 0.04 * rng.normal())

    # Baseline wander: two slow incommensurate sinusoids, small amplitude.
    wander = 0.05 * np.sin(2 * np.pi * 0.33 * t / sample_hz + rng.uniform(0, 2 * np.pi))
    wander += 0.03 * np.sin(2 * np.pi * 0.011 * t / sample_hz + rng.uniform(0, 2 * np.pi))
    noise = 0.01 * rng.normal(size=n_samples)
    return signal + wander + noise


# -- file formats -----------------------------------------------------------


def save_data_csv(path, data):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    np.savetxt(path, data, fmt=CSV_FMT, delimiter=",")


def load_data_csv(path) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"failed to read {path}: {exc}") from exc
    return data


def load_series_csv(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",").ravel()
    except (OSError, ValueError) as exc:
        raise DataError(f"failed to read {path}: {exc}") from exc


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def save_matrix_dataset(path, data):
    """(n, d, r) stack as a flattened CSV plus a JSON shape sidecar."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 3:
        raise ValueError("matrix dataset must be a (n, d, r) stack")
    n, d, r = data.shape
    save_data_csv(path, data.reshape(n, d * r))
    sidecar_path(path).write_text(json.dumps({"d": d, "r": r, "n": n}))


def load_matrix_dataset(path) -> np.ndarray:
    meta_file = sidecar_path(path)
    if not meta_file.exists():
        raise DataError(f"missing shape sidecar {meta_file}")
    meta = json.loads(meta_file.read_text())
    flat = load_data_csv(path)
    try:
        return flat.reshape(meta["n"], meta["d"], meta["r"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"sidecar {meta_file} does not match {path}: {exc}") from exc


def maybe_load_dataset(path):
    """Matrix dataset when a sidecar is present, else plain sample rows."""
    if sidecar_path(path).exists():
        return load_matrix_dataset(path)
    return load_data_csv(path)


def save_generators_csv(path, gens: GeneratorSet):
    atoms = gens.atoms
    if atoms.ndim == 3:
        q, d, r = atoms.shape
        save_data_csv(path, atoms.reshape(q, d * r))
        sidecar_path(path).write_text(json.dumps({"d": d, "r": r, "n": q}))
    else:
        save_data_csv(path, atoms)


def load_generators_csv(path) -> GeneratorSet:
    meta_file = sidecar_path(path)
    if meta_file.exists():
        meta = json.loads(meta_file.read_text())
        flat = load_data_csv(path)
        return GeneratorSet(flat.reshape(meta["n"], meta["d"], meta["r"]))
    return GeneratorSet(load_data_csv(path))


def save_mask_csv(path, mask):
    np.savetxt(path, np.atleast_2d(np.asarray(mask, dtype=int)), fmt="%d", delimiter=",")


def load_mask_csv(path) -> np.ndarray:
    mask = load_data_csv(path)
    if not np.all((mask == 0) | (mask == 1)):
        raise DataError(f"mask {path} must contain only 0/1 entries")
    return mask
