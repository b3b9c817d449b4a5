"""Low-contrast nearest-neighbor benchmark.

Synthetic setup: a Gaussian query, true neighbors weakly correlated with it
(expected correlation rho_true), and independent Gaussian disturbers.  Each
method compresses the database, a threshold sweep on normalized Hamming
distance produces a ROC, and methods are compared by AUC at matched storage
or matched code length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import projgen
from .bitcode import storage_bits
from .embedder import build_adaptive, build_adaptive_batch, universal_params
from .errors import DomainError
from .projgen import ProjectionSpec

METHODS = (
    "adaptive",
    "sign_rp_eq_storage",
    "sign_rp_eq_complexity",
    "universal",
    "uncompressed",
)

# Auxiliary stream tags for dataset generation (kept disjoint from row keys).
_TAG_QUERY = 1
_TAG_TRUE = 2
_TAG_FALSE = 3


@dataclass(frozen=True)
class AnnConfig:
    """Benchmark configuration; defaults are the desk-scale setup."""

    n: int = 2048
    m_pool: int = 2048
    m: int = 256
    rho_true: float = 0.07
    n_true: int = 100
    n_false: int = 1000
    delta_universal: float = 2.0
    seed: int = 0
    sigma: float = 1.0
    n_thresholds: int = 201

    def __post_init__(self):
        if not 0.0 < self.rho_true < 1.0:
            raise DomainError(f"rho_true must be in (0, 1), got {self.rho_true}")
        if self.n_true < 1 or self.n_false < 1:
            raise DomainError("need at least one true and one false entry")
        if not 1 <= self.m <= self.m_pool:
            raise DomainError(f"need 1 <= m <= m_pool, got m={self.m}")
        if self.n_thresholds < 2:
            raise DomainError("need at least 2 thresholds")

    def thresholds(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_thresholds)

    def projection_spec(self) -> ProjectionSpec:
        return ProjectionSpec(self.seed, self.n, self.m_pool, self.sigma)


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    p_detect: float
    p_false_alarm: float


def generate_dataset(cfg: AnnConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(query, database, labels): query is N(0, I_n), true neighbors are
    rho * query + sqrt(1 - rho^2) * fresh noise, disturbers are independent
    N(0, I_n).  Database rows are true entries first; labels mark them.

    Every vector comes from its own (seed, entry) stream, so the dataset is
    reproducible entry by entry regardless of generation order.
    """
    query = projgen.aux_stream(cfg.seed, _TAG_QUERY).standard_normal(cfg.n)
    rho = cfg.rho_true
    database = np.empty((cfg.n_true + cfg.n_false, cfg.n))
    for j in range(cfg.n_true):
        g = projgen.aux_stream(cfg.seed, _TAG_TRUE, j).standard_normal(cfg.n)
        database[j] = rho * query + math.sqrt(1.0 - rho * rho) * g
    for j in range(cfg.n_false):
        database[cfg.n_true + j] = projgen.aux_stream(
            cfg.seed, _TAG_FALSE, j
        ).standard_normal(cfg.n)
    labels = np.zeros(len(database), dtype=bool)
    labels[: cfg.n_true] = True
    return query, database, labels


def contrast(query: np.ndarray, database: np.ndarray, labels: np.ndarray) -> float:
    """Ratio of the closest false neighbor's distance to the farthest true
    neighbor's distance, on l2-normalized signals.  Values near 1 mean a
    hard, low-contrast search problem."""
    labels = np.asarray(labels, dtype=bool)
    if not labels.any() or labels.all():
        raise DomainError("contrast needs at least one true and one false entry")
    qn = query / np.linalg.norm(query)
    dbn = database / np.linalg.norm(database, axis=1, keepdims=True)
    dists = np.linalg.norm(dbn - qn, axis=1)
    return float(dists[~labels].min() / dists[labels].max())


def eq_storage_code_length(m: int, m_pool: int) -> int:
    """Code length of the equal-storage baseline: ceil of the adaptive
    method's total bits (code + location overhead)."""
    return math.ceil(storage_bits(m, m_pool))


def method_storage_bits(cfg: AnnConfig, method: str) -> float:
    """Per-entry storage in bits charged to each method."""
    if method == "adaptive":
        return storage_bits(cfg.m, cfg.m_pool)
    if method == "sign_rp_eq_storage":
        return float(eq_storage_code_length(cfg.m, cfg.m_pool))
    if method in ("sign_rp_eq_complexity", "universal"):
        return float(cfg.m)
    if method == "uncompressed":
        return 64.0 * cfg.n
    raise DomainError(f"unknown method {method!r}")


def _database_distances(cfg: AnnConfig, method: str, reference: str):
    """Normalized Hamming distance (or scaled correlation distance for the
    uncompressed reference) from the query to every database entry."""
    query, database, labels = generate_dataset(cfg)
    spec = cfg.projection_spec()

    if method == "uncompressed":
        qn = query / np.linalg.norm(query)
        dbn = database / np.linalg.norm(database, axis=1, keepdims=True)
        return (1.0 - dbn @ qn) / 2.0, labels

    if method == "adaptive":
        if reference == "entry":
            embedders = build_adaptive_batch(spec, database.T, cfg.m)
            y_query = projgen.project(spec, query, projgen.all_rows(spec))
            qbits_all = y_query > 0.0
            dists = np.empty(len(database))
            for j, e in enumerate(embedders):
                mismatches = qbits_all[e.locations] != e.ref_code.to_bits()
                dists[j] = mismatches.mean()
            return dists, labels
        if reference == "query":
            e = build_adaptive(spec, query, cfg.m)
            proj = projgen.project_block(spec, database.T, e.locations)
            bits = proj > 0.0
            ref_bits = e.ref_code.to_bits()[:, None]
            return (bits != ref_bits).mean(axis=0), labels
        raise DomainError(f"reference must be 'entry' or 'query', got {reference!r}")

    if method in ("sign_rp_eq_storage", "sign_rp_eq_complexity"):
        m_code = (
            eq_storage_code_length(cfg.m, cfg.m_pool)
            if method == "sign_rp_eq_storage"
            else cfg.m
        )
        # The storage-matched code can be longer than the pool; the baseline
        # is non-adaptive, so its pool simply is its code length.
        if m_code > spec.m_pool:
            spec = replace(spec, m_pool=m_code)
        rows = np.arange(m_code)
        proj = projgen.project_block(spec, database.T, rows)
        qproj = projgen.project(spec, query, rows)
        return ((proj > 0.0) != (qproj > 0.0)[:, None]).mean(axis=0), labels

    if method == "universal":
        params = universal_params(spec, cfg.m, cfg.delta_universal)
        rows = np.arange(cfg.m)
        proj = projgen.project_block(spec, database.T, rows)
        qproj = projgen.project(spec, query, rows)
        dith = params.dither[:, None]
        bits = np.floor((proj + dith) / params.delta) % 2
        qbits = np.floor((qproj + params.dither) / params.delta) % 2
        return (bits != qbits[:, None]).mean(axis=0), labels

    raise DomainError(f"unknown method {method!r}")


def run_roc(cfg: AnnConfig, method: str, reference: str = "entry") -> list[RocPoint]:
    """Threshold-sweep ROC for one method; rates use distance <= threshold."""
    dists, labels = _database_distances(cfg, method, reference)
    points = []
    for t in cfg.thresholds():
        points.append(
            RocPoint(
                threshold=float(t),
                p_detect=float((dists[labels] <= t).mean()),
                p_false_alarm=float((dists[~labels] <= t).mean()),
            )
        )
    return points


def auc(points: list[RocPoint]) -> float:
    """Trapezoidal area under the ROC over false-alarm rate in [0, 1]."""
    if len(points) < 2:
        raise DomainError("AUC needs at least 2 ROC points")
    pairs = sorted((p.p_false_alarm, p.p_detect) for p in points)
    fa = np.array([0.0] + [p[0] for p in pairs] + [1.0])
    pd = np.array([0.0] + [p[1] for p in pairs] + [1.0])
    return float(np.trapezoid(pd, fa))
