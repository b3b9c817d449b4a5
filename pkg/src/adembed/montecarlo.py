"""Signal-space Monte Carlo estimators for the embedding's distance behavior.

These draw real vectors with exact prescribed geometry, push them through
the projection and quantization pipeline, and average observed Hamming
distances.  They are the empirical counterparts to the closed forms in
:mod:`adembed.analysis` and deliberately share no code with them.
"""

from __future__ import annotations

import math

import numpy as np

from . import projgen
from .embedder import AdaptiveEmbedder
from .errors import DomainError
from .projgen import ProjectionSpec

_CHUNK = 2500


def unit_vector(n: int, gen: np.random.Generator) -> np.ndarray:
    v = gen.standard_normal(n)
    return v / np.linalg.norm(v)


def _unit_complement(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Columns of g projected off u and normalized (u must be unit norm)."""
    r = g - u[:, None] * (u @ g)
    return r / np.linalg.norm(r, axis=0, keepdims=True)


def correlated_unit_signals(
    u: np.ndarray, rho: float, trials: int, gen: np.random.Generator
) -> np.ndarray:
    """Unit-norm test signals with exact inner product rho to unit-norm u."""
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho must be in [-1, 1], got {rho}")
    r = _unit_complement(u, gen.standard_normal((u.size, trials)))
    return rho * u[:, None] + math.sqrt(1.0 - rho * rho) * r


def triple_signals(
    u: np.ndarray,
    dot_uv: float,
    dot_uw: float,
    dot_vw: float,
    trials: int,
    gen: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm pairs (v, w) with exact Gram against unit-norm u.

    Coordinates come from the Cholesky factorization of the 3 x 3 Gram
    matrix in the frame (u, r1, r2) with r1, r2 random orthonormal
    directions orthogonal to u, fresh per trial.
    """
    b = 1.0 - dot_uv * dot_uv
    if b <= 0:
        raise DomainError("test signal collinear with the reference")
    b = math.sqrt(b)
    d = (dot_vw - dot_uv * dot_uw) / b
    e2 = 1.0 - dot_uw * dot_uw - d * d
    if e2 < -1e-12:
        raise DomainError("inner products do not form a PSD Gram matrix")
    e = math.sqrt(max(0.0, e2))
    r1 = _unit_complement(u, gen.standard_normal((u.size, trials)))
    g2 = gen.standard_normal((u.size, trials))
    g2 = g2 - u[:, None] * (u @ g2)
    g2 = g2 - r1 * np.sum(r1 * g2, axis=0)
    r2 = g2 / np.linalg.norm(g2, axis=0, keepdims=True)
    v = dot_uv * u[:, None] + b * r1
    w = dot_uw * u[:, None] + d * r1 + e * r2
    return v, w


def empirical_adaptive_dh(
    e: AdaptiveEmbedder,
    u: np.ndarray,
    rho: float,
    trials: int,
    gen: np.random.Generator,
) -> float:
    """Mean normalized Hamming distance between e's reference code and codes
    of fresh unit test signals at inner product rho with unit reference u."""
    ref_bits = e.ref_code.to_bits()[:, None]
    total = 0.0
    for size in _chunks(trials):
        v = correlated_unit_signals(u, rho, size, gen)
        proj = projgen.project_block(e.spec, v, e.locations)
        total += float(((proj > 0.0) != ref_bits).mean(axis=0).sum())
    return total / trials


def empirical_sign_rp_dh(
    spec: ProjectionSpec,
    m: int,
    u: np.ndarray,
    rho: float,
    trials: int,
    gen: np.random.Generator,
) -> float:
    """Same estimate for the non-adaptive baseline over the first m rows."""
    rows = np.arange(m)
    u_bits = (projgen.project(spec, u, rows) > 0.0)[:, None]
    total = 0.0
    for size in _chunks(trials):
        v = correlated_unit_signals(u, rho, size, gen)
        proj = projgen.project_block(spec, v, rows)
        total += float(((proj > 0.0) != u_bits).mean(axis=0).sum())
    return total / trials


def empirical_three_party_dh(
    e: AdaptiveEmbedder,
    u: np.ndarray,
    dot_uv: float,
    dot_uw: float,
    dot_vw: float,
    trials: int,
    gen: np.random.Generator,
) -> float:
    """Mean normalized Hamming distance between the codes of fresh test pairs
    (v, w) embedded at e's locations."""
    total = 0.0
    for size in _chunks(trials):
        v, w = triple_signals(u, dot_uv, dot_uw, dot_vw, size, gen)
        proj = projgen.project_block(
            e.spec, np.concatenate([v, w], axis=1), e.locations
        )
        zv = proj[:, :size] > 0.0
        zw = proj[:, size:] > 0.0
        total += float((zv != zw).mean(axis=0).sum())
    return total / trials


def _chunks(trials: int):
    full, rem = divmod(trials, _CHUNK)
    return [_CHUNK] * full + ([rem] if rem else [])
