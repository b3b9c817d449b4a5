"""Compressed multiclass linear classification.

A trained k-class linear model is compressed by replacing each weight
vector with a binary code; prediction becomes an argmin of Hamming
distances between the embedded feature vector and the per-class codes.
In adaptive mode every class keeps its own row locations, so a feature
vector is projected once over the pool and subsampled k times.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import projgen
from .bitcode import PackedCode, from_signs, storage_bits
from .embedder import (
    AdaptiveEmbedder,
    UniversalParams,
    top_magnitude_locations,
    universal_params,
)
from .errors import DegenerateInputError, DomainError, FormatError, ShapeError
from .projgen import ProjectionSpec

_FEATURE_MAGIC = b"AEF1"
_MODEL_MAGIC = b"AEW1"

MODES = ("adaptive", "sign_rp", "universal")

# Auxiliary stream tags for the synthetic task generator.
_TAG_WEIGHTS = 4
_TAG_LABELS = 5
_TAG_NOISE = 6


@dataclass(frozen=True)
class LinearModel:
    """k weight vectors of dimension n, stored row-major as float32."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float32)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ShapeError(f"weights must be a (k, n) matrix, got {w.shape}")
        if not np.isfinite(w).all():
            raise DomainError("weights must be finite")
        if (~np.any(w, axis=1)).any():
            raise DegenerateInputError("zero weight vector")
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class FeatureSet:
    """N labeled feature vectors; labels are class indices below k."""

    features: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        x = np.ascontiguousarray(self.features, dtype=np.float32)
        y = np.ascontiguousarray(self.labels, dtype=np.uint32)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ShapeError(f"features must be a (N, n) matrix, got {x.shape}")
        if y.shape != (x.shape[0],):
            raise ShapeError("labels must have one entry per feature vector")
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if y.size and int(y.max()) >= self.k:
            raise DomainError(f"label {int(y.max())} out of range for k={self.k}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class CompressedModel:
    """Binary-code form of a linear model.

    Adaptive mode keeps one embedder per class; the baseline modes share the
    projection rows and keep one code per class.
    """

    mode: str
    m: int
    spec: ProjectionSpec
    embedders: tuple[AdaptiveEmbedder, ...] | None = None
    codes: tuple[PackedCode, ...] | None = None
    params: UniversalParams | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "adaptive":
            if not self.embedders:
                raise ShapeError("adaptive mode needs per-class embedders")
            if any(e.m != self.m for e in self.embedders):
                raise ShapeError("inconsistent code length across classes")
        else:
            if not self.codes:
                raise ShapeError("baseline modes need per-class codes")
            if any(c.m != self.m for c in self.codes):
                raise ShapeError("inconsistent code length across classes")
            if self.mode == "universal" and self.params is None:
                raise ShapeError("universal mode needs quantizer parameters")

    @property
    def k(self) -> int:
        return len(self.embedders or self.codes)


# -- file formats --------------------------------------------------------------


def save_features(fs: FeatureSet) -> bytes:
    head = _FEATURE_MAGIC + struct.pack("<III", fs.count, fs.n, fs.k)
    return head + fs.features.astype("<f4").tobytes() + fs.labels.astype("<u4").tobytes()


def load_features(data: bytes) -> FeatureSet:
    if data[:4] != _FEATURE_MAGIC:
        raise FormatError(f"bad feature-file magic {data[:4]!r}", offset=0)
    if len(data) < 16:
        raise FormatError("truncated feature header", offset=len(data))
    count, n, k = struct.unpack_from("<III", data, 4)
    if count == 0:
        raise FormatError("feature file declares zero vectors", offset=4)
    if n == 0:
        raise FormatError("feature file declares zero dimension", offset=8)
    if k == 0:
        raise FormatError("feature file declares zero classes", offset=12)
    feat_end = 16 + 4 * count * n
    label_end = feat_end + 4 * count
    if len(data) != label_end:
        raise FormatError(
            f"expected {label_end} bytes, got {len(data)}",
            offset=min(len(data), label_end),
        )
    features = np.frombuffer(data, dtype="<f4", count=count * n, offset=16)
    labels = np.frombuffer(data, dtype="<u4", count=count, offset=feat_end)
    bad = np.nonzero(labels >= k)[0]
    if bad.size:
        raise FormatError(
            f"label {int(labels[bad[0]])} out of range for k={k}",
            offset=feat_end + 4 * int(bad[0]),
        )
    return FeatureSet(features.reshape(count, n), labels, k)


def save_model(model: LinearModel) -> bytes:
    head = _MODEL_MAGIC + struct.pack("<II", model.k, model.n)
    return head + model.weights.astype("<f4").tobytes()


def load_model(data: bytes) -> LinearModel:
    if data[:4] != _MODEL_MAGIC:
        raise FormatError(f"bad model-file magic {data[:4]!r}", offset=0)
    if len(data) < 12:
        raise FormatError("truncated model header", offset=len(data))
    k, n = struct.unpack_from("<II", data, 4)
    if k == 0 or n == 0:
        raise FormatError("model file declares an empty weight matrix", offset=4)
    end = 12 + 4 * k * n
    if len(data) != end:
        raise FormatError(
            f"expected {end} bytes, got {len(data)}", offset=min(len(data), end)
        )
    weights = np.frombuffer(data, dtype="<f4", count=k * n, offset=12)
    return LinearModel(weights.reshape(k, n))


# -- classification -------------------------------------------------------------


def classify_uncompressed(model: LinearModel, x: np.ndarray) -> int:
    """argmax_i <w_i, x>; ties go to the smallest class index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ShapeError(f"feature must have shape ({model.n},), got {x.shape}")
    return int(np.argmax(model.weights.astype(np.float64) @ x))


def compress_model(
    model: LinearModel,
    mode: str,
    m: int,
    spec: ProjectionSpec,
    delta: float | None = None,
) -> CompressedModel:
    if spec.n != model.n:
        raise ShapeError(
            f"projection spec dimension {spec.n} does not match model {model.n}"
        )
    if not 1 <= m <= spec.m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}")
    weights = model.weights.astype(np.float64)
    if mode == "adaptive":
        from .embedder import build_adaptive_batch

        embedders = tuple(build_adaptive_batch(spec, weights.T, m))
        return CompressedModel(mode, m, spec, embedders=embedders)
    rows = np.arange(m)
    proj = projgen.project_block(spec, weights.T, rows)
    if mode == "sign_rp":
        codes = tuple(from_signs(proj[:, i]) for i in range(model.k))
        return CompressedModel(mode, m, spec, codes=codes)
    if mode == "universal":
        if delta is None:
            raise DomainError("universal mode needs a quantization step delta")
        params = universal_params(spec, m, delta)
        bits = np.floor((proj + params.dither[:, None]) / params.delta) % 2
        codes = tuple(PackedCode.from_bits(bits[:, i]) for i in range(model.k))
        return CompressedModel(mode, m, spec, codes=codes, params=params)
    raise DomainError(f"mode must be one of {MODES}, got {mode!r}")


def _feature_bit_matrix(cm: CompressedModel, features: np.ndarray) -> np.ndarray:
    """Per-mode embedding bits for a block of features (columns)."""
    if cm.mode == "adaptive":
        proj = projgen.project_block(cm.spec, features, projgen.all_rows(cm.spec))
        return proj > 0.0
    rows = np.arange(cm.m)
    proj = projgen.project_block(cm.spec, features, rows)
    if cm.mode == "sign_rp":
        return proj > 0.0
    return (np.floor((proj + cm.params.dither[:, None]) / cm.params.delta) % 2).astype(
        bool
    )


def _compressed_distances(cm: CompressedModel, features: np.ndarray) -> np.ndarray:
    """(k, K) normalized Hamming distances for K feature columns."""
    bits = _feature_bit_matrix(cm, features)
    dists = np.empty((cm.k, bits.shape[1]))
    if cm.mode == "adaptive":
        for i, e in enumerate(cm.embedders):
            dists[i] = (bits[e.locations] != e.ref_code.to_bits()[:, None]).mean(axis=0)
    else:
        for i, code in enumerate(cm.codes):
            dists[i] = (bits != code.to_bits()[:, None]).mean(axis=0)
    return dists


def classify_compressed(cm: CompressedModel, x: np.ndarray) -> int:
    """argmin_i d_H(class code i, embedded x); ties to the smallest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cm.spec.n,):
        raise ShapeError(f"feature must have shape ({cm.spec.n},), got {x.shape}")
    return int(np.argmin(_compressed_distances(cm, x[:, None])[:, 0]))


def evaluate(model_or_cm, fs: FeatureSet) -> float:
    """Fraction of feature vectors classified into their true class."""
    features = fs.features.astype(np.float64).T
    if isinstance(model_or_cm, LinearModel):
        if model_or_cm.n != fs.n:
            raise ShapeError("model and feature dimensions differ")
        scores = model_or_cm.weights.astype(np.float64) @ features
        predicted = np.argmax(scores, axis=0)
    elif isinstance(model_or_cm, CompressedModel):
        if model_or_cm.spec.n != fs.n:
            raise ShapeError("compressed model and feature dimensions differ")
        predicted = np.argmin(_compressed_distances(model_or_cm, features), axis=0)
    else:
        raise TypeError(f"cannot evaluate {type(model_or_cm).__name__}")
    return float((predicted == fs.labels.astype(np.int64)).mean())


# -- synthetic task --------------------------------------------------------------


def generate_synthetic_task(
    k: int, n: int, count: int, margin: float = 2.0, seed: int = 0
) -> tuple[LinearModel, FeatureSet]:
    """Separable task: unit prototype weights, features at margin * prototype
    plus isotropic noise of unit expected norm.  Large margins make the
    uncompressed classifier nearly perfect; margin 0 gives chance level."""
    if k < 2:
        raise DomainError(f"need k >= 2 classes, got {k}")
    if margin < 0:
        raise DomainError(f"margin must be >= 0, got {margin}")
    weights = np.empty((k, n))
    for i in range(k):
        w = projgen.aux_stream(seed, _TAG_WEIGHTS, i).standard_normal(n)
        weights[i] = w / np.linalg.norm(w)
    labels = projgen.aux_stream(seed, _TAG_LABELS).integers(0, k, size=count)
    noise = projgen.aux_stream(seed, _TAG_NOISE).standard_normal((count, n))
    features = margin * weights[labels] + noise / math.sqrt(n)
    return (
        LinearModel(weights.astype(np.float32)),
        FeatureSet(features.astype(np.float32), labels.astype(np.uint32), k),
    )


# -- shared-projection benchmark ---------------------------------------------------


def eq_storage_code_length(m: int, m_pool: int) -> int:
    return math.ceil(storage_bits(m, m_pool))


def run_compression_benchmark(
    k: int,
    n: int,
    count: int,
    m_values,
    seed: int = 0,
    margin: float = 2.0,
    m_pool: int | None = None,
    delta: float = 2.0,
) -> dict:
    """Accuracies of every method at every m, sharing one projection pass.

    Returns {"uncompressed": acc, "per_m": {m: {method: acc}},
    "storage": {m: {method: bits}}}.  Methods: adaptive,
    sign_rp_eq_complexity, sign_rp_eq_storage, universal_eq_complexity,
    universal_eq_storage.  The storage-matched baselines may need more rows
    than the adaptive pool; rows are drawn from the same keyed streams
    either way.
    """
    m_pool = n if m_pool is None else m_pool
    m_values = sorted(set(int(m) for m in m_values))
    if not all(1 <= m <= m_pool for m in m_values):
        raise DomainError("every m must satisfy 1 <= m <= m_pool")
    model, fs = generate_synthetic_task(k, n, count, margin=margin, seed=seed)
    storage_lengths = {m: eq_storage_code_length(m, m_pool) for m in m_values}
    rows_needed = max(m_pool, max(storage_lengths.values()))
    spec_ext = ProjectionSpec(seed, n, rows_needed)

    weights = model.weights.astype(np.float64)
    columns = np.concatenate([weights.T, fs.features.astype(np.float64).T], axis=1)
    y_all = projgen.project_block(spec_ext, columns, np.arange(rows_needed))
    y_w, y_x = y_all[:, :k], y_all[:, k:]
    labels = fs.labels.astype(np.int64)

    dither = universal_params(spec_ext, rows_needed, delta).dither

    def sign_acc(m_code: int) -> float:
        dists = np.empty((k, count))
        xb = y_x[:m_code] > 0.0
        for i in range(k):
            dists[i] = (xb != (y_w[:m_code, i] > 0.0)[:, None]).mean(axis=0)
        return float((np.argmin(dists, axis=0) == labels).mean())

    def universal_acc(m_code: int) -> float:
        d = dither[:m_code, None]
        xb = np.floor((y_x[:m_code] + d) / delta) % 2
        wb = np.floor((y_w[:m_code] + d) / delta) % 2
        dists = np.empty((k, count))
        for i in range(k):
            dists[i] = (xb != wb[:, i : i + 1]).mean(axis=0)
        return float((np.argmin(dists, axis=0) == labels).mean())

    uncompressed = evaluate(model, fs)
    per_m: dict[int, dict[str, float]] = {}
    storage: dict[int, dict[str, float]] = {}
    for m in m_values:
        locs = [top_magnitude_locations(y_w[:m_pool, i], m) for i in range(k)]
        dists = np.empty((k, count))
        for i in range(k):
            wb = (y_w[locs[i], i] > 0.0)[:, None]
            dists[i] = ((y_x[locs[i]] > 0.0) != wb).mean(axis=0)
        adaptive = float((np.argmin(dists, axis=0) == labels).mean())
        m_store = storage_lengths[m]
        per_m[m] = {
            "adaptive": adaptive,
            "sign_rp_eq_complexity": sign_acc(m),
            "sign_rp_eq_storage": sign_acc(m_store),
            "universal_eq_complexity": universal_acc(m),
            "universal_eq_storage": universal_acc(m_store),
        }
        storage[m] = {
            "adaptive": storage_bits(m, m_pool),
            "sign_rp_eq_complexity": float(m),
            "sign_rp_eq_storage": float(m_store),
            "universal_eq_complexity": float(m),
            "universal_eq_storage": float(m_store),
        }
    return {"uncompressed": uncompressed, "per_m": per_m, "storage": storage}
