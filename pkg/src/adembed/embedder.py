"""Reference-adaptive binary embedding and the two non-adaptive baselines.

An adaptive embedder is built from one reference signal: its projections
are computed over the whole pool, the m rows where the reference has the
largest magnitudes are kept as side information, and every signal is
afterwards sign-quantized at exactly those rows.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from . import projgen
from .bitcode import PackedCode, from_signs
from .errors import DegenerateInputError, DomainError, FormatError, ShapeError
from .projgen import ProjectionSpec

_MAGIC = b"AEMB"
_VERSION = 1


@dataclass(frozen=True)
class UniversalParams:
    """Dithered periodic quantizer parameters: step delta, dither in [0, delta)."""

    delta: float
    dither: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        d = np.asarray(self.dither, dtype=np.float64)
        if d.ndim != 1:
            raise ShapeError("dither must be a 1-d vector")
        if d.size and (d.min() < 0 or d.max() >= self.delta):
            raise DomainError("dither values must lie in [0, delta)")
        object.__setattr__(self, "dither", d)


def universal_params(spec: ProjectionSpec, m: int, delta: float) -> UniversalParams:
    """i.i.d. uniform [0, delta) dither for m rows, derived from the master seed."""
    if not 1 <= m <= spec.m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}")
    gen = projgen.stream(spec.master_seed, projgen.DITHER_KEY)
    return UniversalParams(delta, gen.random(m) * delta)


@dataclass(frozen=True)
class AdaptiveEmbedder:
    """Side information of an adaptive embedding.

    locations: the m retained row indices, strictly increasing.
    ref_projections: the reference's projection values at those rows.
    ref_code: sign code of ref_projections; bit j belongs to locations[j].
    """

    spec: ProjectionSpec
    m: int
    locations: np.ndarray
    ref_projections: np.ndarray
    ref_code: PackedCode = field(repr=False)

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=np.int64)
        refs = np.asarray(self.ref_projections, dtype=np.float64)
        if not 1 <= self.m <= self.spec.m_pool:
            raise DomainError(f"need 1 <= m <= m_pool, got m={self.m}")
        if locs.shape != (self.m,) or refs.shape != (self.m,):
            raise ShapeError("locations and ref_projections must have length m")
        if locs.size > 1 and not np.all(np.diff(locs) > 0):
            raise DomainError("locations must be strictly increasing")
        if locs[0] < 0 or locs[-1] >= self.spec.m_pool:
            raise DomainError("locations out of pool range")
        if self.ref_code != from_signs(refs):
            raise DomainError("ref_code does not match the signs of ref_projections")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "ref_projections", refs)


def top_magnitude_locations(y: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m largest |y| values, sorted ascending.

    Magnitude ties are broken toward the smaller index (stable sort on the
    negated magnitudes).
    """
    y = np.asarray(y, dtype=np.float64)
    if not 1 <= m <= y.size:
        raise DomainError(f"need 1 <= m <= {y.size}, got m={m}")
    order = np.argsort(-np.abs(y), kind="stable")
    return np.sort(order[:m])


def build_adaptive(spec: ProjectionSpec, u: np.ndarray, m: int) -> AdaptiveEmbedder:
    """Embedder adapted to reference u: keep the m top-magnitude projections."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.n,):
        raise ShapeError(f"reference must have shape ({spec.n},), got {u.shape}")
    return _build_from_columns(spec, u[:, None], m)[0]


def build_adaptive_batch(
    spec: ProjectionSpec, signals: np.ndarray, m: int
) -> list[AdaptiveEmbedder]:
    """One embedder per column of an n x K reference matrix, sharing a single
    streaming pass over the projection pool."""
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[0] != spec.n:
        raise ShapeError(
            f"signals must have shape ({spec.n}, K), got {signals.shape}"
        )
    return _build_from_columns(spec, signals, m)


def _build_from_columns(spec, signals, m) -> list[AdaptiveEmbedder]:
    if not 1 <= m <= spec.m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}")
    zero = ~np.any(signals, axis=0)
    if zero.any():
        raise DegenerateInputError(
            "zero reference signal: all projections vanish, selection undefined"
        )
    y_all = projgen.project_block(spec, signals, projgen.all_rows(spec))
    out = []
    for col in range(signals.shape[1]):
        y = y_all[:, col]
        locs = top_magnitude_locations(y, m)
        refs = y[locs]
        out.append(AdaptiveEmbedder(spec, m, locs, refs, from_signs(refs)))
    return out


def embed(e: AdaptiveEmbedder, v: np.ndarray) -> PackedCode:
    """Sign code of v at the embedder's stored locations."""
    return from_signs(projgen.project(e.spec, v, e.locations))


def sign_rp_embed(spec: ProjectionSpec, m: int, v: np.ndarray) -> PackedCode:
    """Non-adaptive baseline: signs of the first m projection rows."""
    if not 1 <= m <= spec.m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}")
    return from_signs(projgen.project(spec, v, np.arange(m)))


def universal_bits(projections: np.ndarray, params: UniversalParams) -> np.ndarray:
    """Dithered floor-mod-2 quantizer: bit j = floor((p_j + dither_j)/delta) mod 2."""
    p = np.asarray(projections, dtype=np.float64)
    if p.shape != params.dither.shape:
        raise ShapeError(
            f"projections shape {p.shape} does not match dither {params.dither.shape}"
        )
    return (np.floor((p + params.dither) / params.delta) % 2).astype(bool)


def universal_embed(
    spec: ProjectionSpec, m: int, params: UniversalParams, v: np.ndarray
) -> PackedCode:
    """Universal embedding baseline over the first m rows."""
    if not 1 <= m <= spec.m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}")
    if params.dither.size != m:
        raise ShapeError(f"dither has {params.dither.size} entries, expected {m}")
    proj = projgen.project(spec, v, np.arange(m))
    return PackedCode.from_bits(universal_bits(proj, params))


# -- serialization -----------------------------------------------------------
#
# Layout (little-endian throughout):
#   magic "AEMB", u8 version,
#   u32 n, u32 m_pool, u32 m, f64 sigma, u64 master_seed,
#   locations as LEB128 varints (first value, then strictly positive gaps),
#   m x f64 ref_projections,
#   ref_code in PackedCode wire format (u32 length + words).


def dump_embedder(e: AdaptiveEmbedder) -> bytes:
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<B", _VERSION))
    buf.write(
        struct.pack(
            "<IIIdQ", e.spec.n, e.spec.m_pool, e.m, e.spec.sigma, e.spec.master_seed
        )
    )
    prev = -1
    for loc in e.locations:
        _write_varint(buf, int(loc) - prev - 1 if prev >= 0 else int(loc))
        prev = int(loc)
    buf.write(e.ref_projections.astype("<f8").tobytes())
    buf.write(e.ref_code.to_bytes())
    return buf.getvalue()


def load_embedder(data: bytes) -> AdaptiveEmbedder:
    if data[:4] != _MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}", offset=0)
    if data[4:5] != bytes([_VERSION]):
        raise FormatError("unsupported version", offset=4)
    try:
        n, m_pool, m, sigma, seed = struct.unpack_from("<IIIdQ", data, 5)
    except struct.error:
        raise FormatError("truncated header", offset=len(data)) from None
    pos = 5 + struct.calcsize("<IIIdQ")
    locs = np.empty(m, dtype=np.int64)
    prev = -1
    for j in range(m):
        gap, pos = _read_varint(data, pos)
        prev = prev + 1 + gap if j else gap
        locs[j] = prev
    end = pos + 8 * m
    if len(data) < end:
        raise FormatError("truncated projection values", offset=len(data))
    refs = np.frombuffer(data, dtype="<f8", count=m, offset=pos).astype(np.float64)
    code = PackedCode.from_bytes(data[end:])
    spec = ProjectionSpec(master_seed=seed, n=n, m_pool=m_pool, sigma=sigma)
    return AdaptiveEmbedder(spec, m, locs, refs, code)


def _write_varint(buf, value: int):
    while True:
        byte = value & 0x7F
        value >>= 7
        buf.write(bytes([byte | (0x80 if value else 0)]))
        if not value:
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise FormatError("truncated varint", offset=pos)
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
