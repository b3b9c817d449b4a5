"""Closed-form predictors of Hamming-distance behavior in the adaptive embedding.

Three families of results are implemented:

* the exact expected normalized Hamming distance between a reference's code
  and a test signal's code, conditioned on the observed reference
  projections, plus a two-sided Chernoff concentration bound on the
  Poisson-binomial bit-mismatch count;
* an a-priori upper bound on that expectation built from the expected value
  of a Gaussian order statistic (Blom-style plotting-position
  approximation);
* the expected distance between two arbitrary test signals embedded at a
  third signal's locations, which requires a bivariate normal CDF.

Supporting primitives (Poisson-binomial PMF, order-statistic expectations,
the bivariate normal CDF) are exposed directly since they are useful on
their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp_special

from .embedder import AdaptiveEmbedder
from .errors import DomainError

_TWO_PI = 2.0 * math.pi
_SQRT2 = math.sqrt(2.0)

# Largest relative deviation eps accepted by the Chernoff bound.
CHERNOFF_EPS_MAX = 2.0 * math.e - 1.0

# Indirection so tests can inject a corrupted erf and watch verification fail.
_erf = sp_special.erf
_phid = sp_special.ndtr


# -- geometry ----------------------------------------------------------------


@dataclass(frozen=True)
class SignalPairGeometry:
    """Norms and inner product of a (reference, test) pair."""

    norm_u: float
    norm_v: float
    dot_uv: float

    def __post_init__(self):
        _check_norms(self.norm_u, self.norm_v)
        _check_cauchy_schwarz(self.dot_uv, self.norm_u * self.norm_v)

    @classmethod
    def from_vectors(cls, u, v) -> "SignalPairGeometry":
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return cls(
            float(np.linalg.norm(u)), float(np.linalg.norm(v)), float(u @ v)
        )

    def cosine(self) -> float:
        return min(1.0, max(-1.0, self.dot_uv / (self.norm_u * self.norm_v)))


@dataclass(frozen=True)
class SignalTripleGeometry:
    """Norms and pairwise inner products of (reference u, tests v and w)."""

    norm_u: float
    norm_v: float
    norm_w: float
    dot_uv: float
    dot_uw: float
    dot_vw: float

    def __post_init__(self):
        _check_norms(self.norm_u, self.norm_v, self.norm_w)
        gram = self.gram()
        min_eig = float(np.linalg.eigvalsh(gram).min())
        if min_eig < -1e-9 * max(1.0, float(np.trace(gram))):
            raise DomainError(f"Gram matrix is not PSD (min eigenvalue {min_eig})")

    @classmethod
    def from_vectors(cls, u, v, w) -> "SignalTripleGeometry":
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        return cls(
            float(np.linalg.norm(u)),
            float(np.linalg.norm(v)),
            float(np.linalg.norm(w)),
            float(u @ v),
            float(u @ w),
            float(v @ w),
        )

    def gram(self) -> np.ndarray:
        return np.array(
            [
                [self.norm_u**2, self.dot_uv, self.dot_uw],
                [self.dot_uv, self.norm_v**2, self.dot_vw],
                [self.dot_uw, self.dot_vw, self.norm_w**2],
            ]
        )

    def pair_uv(self) -> SignalPairGeometry:
        return SignalPairGeometry(self.norm_u, self.norm_v, self.dot_uv)


@dataclass(frozen=True)
class PredictionPoint:
    """One point of a predicted distance curve.

    abscissa is the inner product between the original signals,
    expected_dh the predicted normalized Hamming distance, and
    chernoff_eps_bound an optional (eps, tail probability) pair.
    """

    abscissa: float
    expected_dh: float
    chernoff_eps_bound: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.expected_dh <= 1.0:
            raise DomainError(
                f"expected_dh must be in [0, 1], got {self.expected_dh}"
            )


def _check_norms(*norms):
    for nm in norms:
        if not nm > 0:
            raise DomainError(f"signal norms must be positive, got {nm}")


def _check_cauchy_schwarz(dot, bound):
    if abs(dot) > bound * (1.0 + 1e-12):
        raise DomainError(
            f"|inner product| {abs(dot)} exceeds product of norms {bound}"
        )


# -- pairwise expected distance (reference vs test) --------------------------


def mismatch_probs_given_taus(taus, geom: SignalPairGeometry, sigma: float):
    """Vectorized bit-mismatch probability for observed reference projections.

    For an observed reference projection tau at a retained row, the test
    signal's projection there is conditionally Gaussian and the chance that
    its sign quantization disagrees with the reference bit is

        1/2 + 1/2 erf( -|tau| uv / (sqrt(2) sigma |u| sqrt(|u|^2|v|^2 - uv^2)) ).

    The magnitude |tau| makes the formula valid for either sign of the
    observed projection (the mismatch event is symmetric under joint
    negation).
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    taus = np.asarray(taus, dtype=np.float64)
    nunv = geom.norm_u * geom.norm_v
    disc = nunv * nunv - geom.dot_uv * geom.dot_uv
    if disc <= nunv * nunv * 1e-14:
        # Collinear signals: bits agree (or all flip) deterministically.
        return np.full(taus.shape, 0.0 if geom.dot_uv > 0 else 1.0)
    arg = -np.abs(taus) * geom.dot_uv / (_SQRT2 * sigma * geom.norm_u * np.sqrt(disc))
    return 0.5 + 0.5 * _erf(arg)


def mismatch_prob_given_tau(
    tau: float, geom: SignalPairGeometry, sigma: float
) -> float:
    """Scalar form of :func:`mismatch_probs_given_taus`."""
    return float(mismatch_probs_given_taus(np.array([tau]), geom, sigma)[0])


def expected_dh_adaptive(e: AdaptiveEmbedder, geom: SignalPairGeometry) -> float:
    """Expected normalized Hamming distance between e's reference code and the
    code of a test signal with the given geometry, conditioned on the
    reference projections stored in e."""
    probs = mismatch_probs_given_taus(e.ref_projections, geom, e.spec.sigma)
    return float(probs.mean())


def sign_rp_expected_dh(geom: SignalPairGeometry) -> float:
    """Non-adaptive sign-random-projection law: theta / pi."""
    return math.acos(geom.cosine()) / math.pi


def chernoff_tail(mu: float, eps: float, m: int) -> float:
    """Two-sided Chernoff bound on P(|d_H - mu| > eps * mu).

    The exponent uses the unnormalized mean M = m * mu of the underlying
    Poisson-binomial bit-mismatch count; the bound with the normalized mean
    would be vacuous at every code length.
    """
    if not 0.0 < eps <= CHERNOFF_EPS_MAX:
        raise DomainError(f"need 0 < eps <= 2e-1 ~= {CHERNOFF_EPS_MAX:.4f}, got {eps}")
    if not 0.0 < mu <= 1.0:
        raise DomainError(f"need 0 < mu <= 1, got {mu}")
    if m < 1:
        raise DomainError(f"need m >= 1, got {m}")
    big_m = m * mu
    return math.exp(-big_m * eps * eps / 2) + math.exp(-big_m * eps * eps / 4)


def poisson_binomial_pmf(probs) -> np.ndarray:
    """Exact PMF of a sum of independent Bernoulli(p_i) bits, length m + 1.

    Dynamic-programming convolution in float64; the result sums to 1 within
    1e-12 for m up to several thousand.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise DomainError("probs must be a non-empty 1-d vector")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise DomainError("probabilities must lie in [0, 1]")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for j, p in enumerate(probs):
        pmf[1 : j + 2] = pmf[1 : j + 2] * (1.0 - p) + pmf[: j + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


# -- order statistics and the a-priori bound ---------------------------------


def order_stat_expectation(k: int, n_sample: int, std: float) -> float:
    """Approximate E of the k-th order statistic of n_sample i.i.d. N(0, std^2).

    Plotting-position form F^-1((k - alpha) / (n_sample - 2 alpha + 1)) with
    alpha = 0.375.  Accurate to a few thousandths of std in large samples;
    worst near tiny n_sample (for n_sample = 2 the error is about 0.025 std).
    """
    if not 1 <= k <= n_sample:
        raise DomainError(f"need 1 <= k <= n_sample, got k={k}, n_sample={n_sample}")
    if not std > 0:
        raise DomainError(f"std must be positive, got {std}")
    alpha = 0.375
    return std * float(sp_special.ndtri((k - alpha) / (n_sample - 2 * alpha + 1)))


def expected_dh_upper_bound(
    m: int, m_pool: int, geom: SignalPairGeometry, sigma: float
) -> float:
    """Reference-free upper bound on the adaptive expected distance.

    Every retained projection magnitude is at least the (m_pool - m + 1)-th
    order statistic of the pool magnitudes, so the largest per-bit mismatch
    probability is the one at that threshold; Jensen's inequality moves the
    expectation inside, leaving the mismatch probability evaluated at an
    expected order statistic of the projection distribution.  Valid for
    non-negatively correlated pairs.
    """
    if not 1 <= m <= m_pool:
        raise DomainError(f"need 1 <= m <= m_pool, got m={m}, m_pool={m_pool}")
    if geom.dot_uv < 0:
        raise DomainError("upper bound requires a non-negative inner product")
    tau = order_stat_expectation(
        2 * (m_pool - m + 1), 2 * m_pool, sigma * geom.norm_u
    )
    return mismatch_prob_given_tau(tau, geom, sigma)


# -- bivariate normal CDF -----------------------------------------------------

_GL6_X = np.array([0.9324695142031521, 0.6612093864662645, 0.2386191860831969])
_GL6_W = np.array([0.1713244923791704, 0.3607615730481386, 0.4679139345726910])
_GL12_X = np.array(
    [
        0.9815606342467192, 0.9041172563704749, 0.7699026741943047,
        0.5873179542866175, 0.3678314989981802, 0.1252334085114689,
    ]
)
_GL12_W = np.array(
    [
        0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
        0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
    ]
)
_GL20_X = np.array(
    [
        0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
        0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
        0.5108670019508271, 0.3737060887154195, 0.2277858511416451,
        0.0765265211334973,
    ]
)
_GL20_W = np.array(
    [
        0.0176140071391521, 0.0406014298003869, 0.0626720483341091,
        0.0832767415767048, 0.1019301198172404, 0.1181945319615184,
        0.1316886384491766, 0.1420961093183820, 0.1491729864726037,
        0.1527533871307258,
    ]
)


def _gl_nodes(abs_r: float) -> tuple[np.ndarray, np.ndarray]:
    if abs_r < 0.3:
        x, w = _GL6_X, _GL6_W
    elif abs_r < 0.75:
        x, w = _GL12_X, _GL12_W
    else:
        x, w = _GL20_X, _GL20_W
    return np.concatenate([1.0 - x, 1.0 + x]), np.concatenate([w, w])


def _exp_gated(arg, gate):
    return np.exp(np.where(gate, arg, -np.inf))


def _bvnu(dh, dk, r: float):
    """P(X > dh, Y > dk) for a standard bivariate normal with correlation r.

    Vectorized port of Genz's rewrite of the Drezner-Wesolowsky single
    integral: fixed-order Gauss-Legendre in the asin-transformed variable
    for |r| < 0.925, and the complementary expansion integral above that.
    Absolute error is far below 1e-7 for |r| <= 1 - 1e-13.
    """
    dh = np.asarray(dh, dtype=np.float64)
    dk = np.asarray(dk, dtype=np.float64)
    if r == 0.0:
        return _phid(-dh) * _phid(-dk)
    nodes, weights = _gl_nodes(abs(r))
    h = dh
    k = dk
    hk = h * k
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        sn = np.sin(asr * nodes / 2.0)
        e = np.exp(
            (np.multiply.outer(hk, sn) - hs[..., None]) / (1.0 - sn * sn)
        )
        bvn = e @ weights
        return np.clip(bvn * asr / (2.0 * _TWO_PI) + _phid(-h) * _phid(-k), 0.0, 1.0)
    if r < 0.0:
        k = -k
        hk = -hk
    as_ = (1.0 - r) * (1.0 + r)
    a = math.sqrt(as_)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr0 = -(bs / as_ + hk) / 2.0
    bvn = a * _exp_gated(asr0, asr0 > -100.0) * (
        1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
    )
    b = np.sqrt(bs)
    bvn = bvn - _exp_gated(-hk / 2.0, -hk < 100.0) * math.sqrt(_TWO_PI) * _phid(
        -b / a
    ) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
    ah = a / 2.0
    for xi, wi in zip(nodes, weights):
        xs = (ah * xi) ** 2
        rs = math.sqrt(1.0 - xs)
        asr1 = -(bs / xs + hk) / 2.0
        gate = asr1 > -100.0
        sp1 = 1.0 + c * xs * (1.0 + d * xs)
        ep_arg = -hk * (1.0 - rs) / (2.0 * (1.0 + rs))
        bvn = bvn + ah * wi * (
            _exp_gated(asr1 + ep_arg, gate) / rs - _exp_gated(asr1, gate) * sp1
        )
    bvn = -bvn / _TWO_PI
    if r > 0.0:
        bvn = bvn + _phid(-np.maximum(h, k))
    else:
        bvn = -bvn + np.where(
            k > h,
            np.where(k < 0.0, _phid(k) - _phid(h), _phid(-h) - _phid(-k)),
            0.0,
        )
    return np.clip(bvn, 0.0, 1.0)


def _bvn_cdf_many(x, y, rho: float):
    """P(X <= x, Y <= y) for finite array arguments and |rho| < 1."""
    return _bvnu(-np.asarray(x, dtype=np.float64), -np.asarray(y, dtype=np.float64), rho)


def bivariate_normal_cdf(x: float, y: float, rho: float) -> float:
    """P(X <= x, Y <= y) for a standard bivariate normal with correlation rho.

    Infinite arguments are allowed; absolute error is below 1e-7 everywhere.
    """
    if math.isnan(x) or math.isnan(y) or math.isnan(rho):
        raise DomainError("nan argument to bivariate_normal_cdf")
    if abs(rho) > 1.0:
        raise DomainError(f"|rho| must be <= 1, got {rho}")
    if x == -math.inf or y == -math.inf:
        return 0.0
    if x == math.inf and y == math.inf:
        return 1.0
    if x == math.inf:
        return float(_phid(y))
    if y == math.inf:
        return float(_phid(x))
    if rho >= 1.0 - 1e-13:
        return float(_phid(min(x, y)))
    if rho <= -1.0 + 1e-13:
        return max(0.0, float(_phid(x)) + float(_phid(y)) - 1.0)
    return float(_bvnu(np.array(-x), np.array(-y), rho))


# -- three-signal expected distance -------------------------------------------


def three_party_mismatch_probs(taus, geom3: SignalTripleGeometry, sigma: float):
    """Vectorized P(sign bits of two test signals disagree at a retained row).

    Conditioned on the reference projection value tau at that row, the two
    test projections are jointly Gaussian; the disagreement probability is
    P(z <= 0) + P(a <= 0) - 2 P(z <= 0, a <= 0).  Rows where a test signal
    is collinear with the reference have a deterministic test projection and
    fall back to the matching one-dimensional rule.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    taus = np.asarray(taus, dtype=np.float64)
    nu2 = geom3.norm_u**2
    mu1 = taus * geom3.dot_uv / nu2
    mu2 = taus * geom3.dot_uw / nu2
    var1 = sigma * sigma * (geom3.norm_v**2 - geom3.dot_uv**2 / nu2)
    var2 = sigma * sigma * (geom3.norm_w**2 - geom3.dot_uw**2 / nu2)
    cov = sigma * sigma * (geom3.dot_vw - geom3.dot_uv * geom3.dot_uw / nu2)
    tol1 = 1e-14 * sigma * sigma * geom3.norm_v**2
    tol2 = 1e-14 * sigma * sigma * geom3.norm_w**2
    deg1 = var1 <= tol1
    deg2 = var2 <= tol2
    if deg1 and deg2:
        # Both test projections are deterministic multiples of tau.
        return (np.asarray(mu1 > 0) != np.asarray(mu2 > 0)).astype(np.float64)
    if deg1 or deg2:
        mu_det, mu_rand, var_rand = (
            (mu1, mu2, var2) if deg1 else (mu2, mu1, var1)
        )
        p_rand_nonpos = _phid(-mu_rand / math.sqrt(var_rand))
        return np.where(mu_det > 0, p_rand_nonpos, 1.0 - p_rand_nonpos)
    s1 = math.sqrt(var1)
    s2 = math.sqrt(var2)
    rho = min(1.0, max(-1.0, cov / (s1 * s2)))
    x1 = -mu1 / s1
    x2 = -mu2 / s2
    if rho >= 1.0 - 1e-13:
        joint = _phid(np.minimum(x1, x2))
    elif rho <= -1.0 + 1e-13:
        joint = np.maximum(0.0, _phid(x1) + _phid(x2) - 1.0)
    else:
        joint = _bvn_cdf_many(x1, x2, rho)
    return np.clip(_phid(x1) + _phid(x2) - 2.0 * joint, 0.0, 1.0)


def mismatch_prob_three_party(
    tau: float, geom3: SignalTripleGeometry, sigma: float
) -> float:
    """Scalar form of :func:`three_party_mismatch_probs`."""
    return float(three_party_mismatch_probs(np.array([tau]), geom3, sigma)[0])


def expected_dh_three_party(
    e: AdaptiveEmbedder, geom3: SignalTripleGeometry
) -> float:
    """Expected normalized Hamming distance between the codes of two test
    signals, both embedded at e's locations."""
    probs = three_party_mismatch_probs(e.ref_projections, geom3, e.spec.sigma)
    return float(probs.mean())
