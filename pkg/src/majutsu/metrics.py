"""Distribution-level image-set metrics over precomputed feature files.

FID, unbiased KID, and IS operate on plain feature matrices, so they are
embedding-network agnostic. Feature sets ship in the MCFV1 binary format
(magic MCFV, version 1, u32 n, u32 d little-endian, float32 row-major) with
CSV accepted as a fallback.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotADistribution, TooFewSamples

MCFV_MAGIC = b"MCFV"
MCFV_VERSION = 1


@dataclass(frozen=True)
class FeatureSet:
    rows: np.ndarray  # (n, d) float64
    source: str = ""

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        if rows.ndim != 2:
            raise ValueError("feature rows must be a 2D matrix")
        if not np.isfinite(rows).all():
            raise ValueError("feature rows must be finite")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def save_features(features: FeatureSet) -> bytes:
    head = MCFV_MAGIC + bytes([MCFV_VERSION]) + struct.pack("<II", features.n, features.d)
    return head + features.rows.astype("<f4").tobytes()


def load_features(data: bytes, source: str = "") -> FeatureSet:
    """Parse MCFV1 bytes; anything without the magic parses as CSV."""
    if data[:4] == MCFV_MAGIC:
        if len(data) < 13:
            raise ValueError("truncated MCFV file")
        version = data[4]
        if version != MCFV_VERSION:
            raise ValueError(f"unsupported MCFV version {version}")
        n, d = struct.unpack_from("<II", data, 5)
        expected = 13 + 4 * n * d
        if len(data) != expected:
            raise ValueError(f"MCFV payload length {len(data)} != expected {expected}")
        rows = np.frombuffer(data, dtype="<f4", count=n * d, offset=13).reshape(n, d)
        return FeatureSet(rows=rows.astype(np.float64), source=source)
    text = data.decode("utf-8")
    rows = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    return FeatureSet(rows=rows, source=source)


def _check_pair(a: FeatureSet, b: FeatureSet):
    if a.d != b.d:
        raise DimensionMismatch(f"feature dims differ: {a.d} vs {b.d}")
    if a.n < 2 or b.n < 2:
        raise TooFewSamples("need at least 2 samples per set")


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped to 0."""
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def compute_fid(a: FeatureSet, b: FeatureSet) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), covariances with
    1/(n-1); the cross term uses the symmetric form
    (S_a^(1/2) S_b S_a^(1/2))^(1/2) via eigendecomposition.
    """
    _check_pair(a, b)
    mu_a = a.rows.mean(axis=0)
    mu_b = b.rows.mean(axis=0)
    cov_a = np.cov(a.rows, rowvar=False, ddof=1).reshape(a.d, a.d)
    cov_b = np.cov(b.rows, rowvar=False, ddof=1).reshape(b.d, b.d)
    root_a = _psd_sqrt(cov_a)
    inner = root_a @ cov_b @ root_a
    inner_vals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    trace_sqrt = float(np.sqrt(inner_vals).sum())
    diff = mu_a - mu_b
    fid = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt)
    return max(fid, 0.0)


def polynomial_kernel(x: np.ndarray, y: np.ndarray, d: int) -> np.ndarray:
    """KID kernel k(x, y) = (x.y / d + 1)^3 evaluated pairwise."""
    return (np.atleast_2d(x) @ np.atleast_2d(y).T / d + 1.0) ** 3


def compute_kid(a: FeatureSet, b: FeatureSet) -> float:
    """Unbiased MMD^2 estimate with the cubic polynomial kernel."""
    _check_pair(a, b)
    m, n, d = a.n, b.n, a.d
    kxx = polynomial_kernel(a.rows, a.rows, d)
    kyy = polynomial_kernel(b.rows, b.rows, d)
    kxy = polynomial_kernel(a.rows, b.rows, d)
    sum_xx = kxx.sum() - np.trace(kxx)
    sum_yy = kyy.sum() - np.trace(kyy)
    return float(
        sum_xx / (m * (m - 1)) + sum_yy / (n * (n - 1)) - 2.0 * kxy.mean()
    )


def compute_is(probs: np.ndarray) -> float:
    """Inception-style score: exp(mean KL(p(y|x) || marginal))."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError("probs must be an n x C matrix")
    for i, row in enumerate(p):
        if (row < -1e-12).any() or abs(row.sum() - 1.0) > 1e-6:
            raise NotADistribution(i)
    marginal = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, p / marginal, 1.0)
        kl = np.where(p > 0, p * np.log(ratio), 0.0).sum(axis=1)
    return float(np.exp(kl.mean()))
