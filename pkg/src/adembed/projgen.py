"""Deterministic Gaussian random projections with per-row random access.

Row ``i`` of the projection matrix is regenerated on demand from a Philox
counter-based stream keyed on ``(master_seed, i)``.  Nothing of size
m_pool x n is ever materialized: any subset of rows can be produced in any
order, on any thread, with bit-identical values.

Gaussian variates are produced by inverse-CDF transform of strictly
interior 53-bit uniforms (``u = ((bits >> 11) + 0.5) * 2**-53``), so the
mapping from raw Philox output to row values is frozen and independent of
numpy's default normal sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, ShapeError

_U64 = np.uint64
_INV_2_53 = 2.0 ** -53

# Layout of the second Philox key word.  Row streams use the row index
# directly and row indices are capped at 2**32, so auxiliary streams
# (benchmark data, dither) can never collide with them.
AUX_KEY_BASE = 1 << 32
DITHER_KEY = (1 << 64) - 1

DEFAULT_ROW_CHUNK = 512


def stream(master_seed: int, key: int) -> np.random.Generator:
    """Independent generator for (master_seed, key); same pair, same stream."""
    k = np.array([master_seed, key], dtype=_U64)
    return np.random.Generator(np.random.Philox(key=k))


def aux_stream(master_seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Generator for non-row randomness. tag >= 1 keeps it clear of row keys."""
    if tag < 1:
        raise DomainError("aux stream tag must be >= 1")
    if not 0 <= index < AUX_KEY_BASE:
        raise DomainError("aux stream index must fit in 32 bits")
    return stream(master_seed, tag * AUX_KEY_BASE + index)


def _standard_gaussians(gen: np.random.Generator, count: int) -> np.ndarray:
    bits = gen.integers(0, 1 << 64, size=count, dtype=_U64)
    u = ((bits >> _U64(11)).astype(np.float64) + 0.5) * _INV_2_53
    return ndtri(u)


@dataclass(frozen=True)
class ProjectionSpec:
    """Seeded pool of m_pool i.i.d. N(0, sigma^2) projection rows of dimension n."""

    master_seed: int
    n: int
    m_pool: int
    sigma: float = 1.0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.m_pool <= AUX_KEY_BASE:
            raise DomainError(f"m_pool must be in [1, 2**32], got {self.m_pool}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def gaussian_row(spec: ProjectionSpec, row_index: int) -> np.ndarray:
    """Row ``row_index`` of the projection matrix, as float64 of length n."""
    if not 0 <= row_index < spec.m_pool:
        raise IndexError(
            f"row index {row_index} out of range for pool of {spec.m_pool}"
        )
    gen = stream(spec.master_seed, int(row_index))
    return spec.sigma * _standard_gaussians(gen, spec.n)


def gaussian_rows(spec: ProjectionSpec, rows: np.ndarray) -> np.ndarray:
    """Stack of the requested rows, shape (len(rows), n)."""
    rows = _check_rows(spec, rows)
    out = np.empty((rows.size, spec.n))
    for j, i in enumerate(rows):
        gen = stream(spec.master_seed, int(i))
        out[j] = _standard_gaussians(gen, spec.n)
    out *= spec.sigma
    return out


def project(spec: ProjectionSpec, signal: np.ndarray, rows) -> np.ndarray:
    """Inner products of ``signal`` with the requested rows.

    Output j equals <row rows[j], signal>.  Single-signal wrapper around
    :func:`project_block`, so batch and scalar paths are bit-identical.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (spec.n,):
        raise ShapeError(f"signal must have shape ({spec.n},), got {signal.shape}")
    return project_block(spec, signal[:, None], rows)[:, 0]


def project_block(
    spec: ProjectionSpec,
    signals: np.ndarray,
    rows,
    chunk: int = DEFAULT_ROW_CHUNK,
) -> np.ndarray:
    """Project a block of K signals (columns of an n x K matrix) onto rows.

    Rows are generated in chunks of ``chunk`` and discarded, keeping memory
    at O(chunk * n + len(rows) * K).
    """
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[0] != spec.n:
        raise ShapeError(
            f"signals must have shape ({spec.n}, K), got {signals.shape}"
        )
    rows = _check_rows(spec, rows)
    out = np.empty((rows.size, signals.shape[1]))
    for start in range(0, rows.size, chunk):
        sel = rows[start : start + chunk]
        out[start : start + sel.size] = gaussian_rows(spec, sel) @ signals
    return out


def all_rows(spec: ProjectionSpec) -> np.ndarray:
    return np.arange(spec.m_pool, dtype=np.int64)


def _check_rows(spec: ProjectionSpec, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1:
        raise ShapeError("rows must be a 1-d sequence of indices")
    if rows.size and (rows.min() < 0 or rows.max() >= spec.m_pool):
        bad = rows[(rows < 0) | (rows >= spec.m_pool)][0]
        raise IndexError(f"row index {bad} out of range for pool of {spec.m_pool}")
    return rows
