"""Self-verification suite: every library invariant as a named runnable check.

Each check returns a :class:`PropertyResult` with the measured deviation and
its tolerance; the CLI prints one line per check and fails the process if
any check fails.  Seeds are fixed so a fresh checkout is deterministic.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

from . import analysis, bench_ann, bench_classifier, bitcode, embedder, montecarlo, projgen
from .analysis import SignalPairGeometry
from .bench_ann import AnnConfig
from .projgen import ProjectionSpec

_REGISTRY: list[tuple[str, object]] = []


@dataclass
class PropertyResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" {self.detail}" if self.detail else ""
        return (
            f"{status} {self.name}: measured={self.measured:.6g} "
            f"tolerated={self.tolerance:.6g}{extra}"
        )


def _check(name):
    def wrap(fn):
        _REGISTRY.append((name, fn))
        return fn

    return wrap


def registered_names() -> list[str]:
    return [name for name, _ in _REGISTRY]


def run_all(names=None) -> list[PropertyResult]:
    results = []
    for name, fn in _REGISTRY:
        if names is not None and name not in names:
            continue
        results.append(fn())
    return results


def _result(name, measured, tolerance, detail="") -> PropertyResult:
    return PropertyResult(name, measured <= tolerance, measured, tolerance, detail)


# -- projection generator ------------------------------------------------------


@_check("projgen/row-determinism")
def _row_determinism():
    spec = ProjectionSpec(11, 4096, 64)
    worst = 0.0
    for i in (0, 7, 63):
        a = projgen.gaussian_row(spec, i)
        b = projgen.gaussian_row(spec, i)
        worst = max(worst, float(np.abs(a - b).max()))
    gen = projgen.aux_stream(101, 9)
    u = gen.standard_normal(spec.n)
    full = projgen.project(spec, u, projgen.all_rows(spec))
    for i in (0, 31, 63):
        single = projgen.project(spec, u, [i])[0]
        worst = max(worst, abs(single - full[i]))
    return _result("projgen/row-determinism", worst, 0.0)


@_check("projgen/scale-equivariance")
def _scale_equivariance():
    spec = ProjectionSpec(12, 2048, 128)
    gen = projgen.aux_stream(102, 9)
    u = gen.standard_normal(spec.n)
    rows = projgen.all_rows(spec)
    base = projgen.project(spec, u, rows)
    worst = 0.0
    for alpha in (-3.25, 0.5, 1e6):
        scaled = projgen.project(spec, alpha * u, rows)
        worst = max(
            worst, float(np.max(np.abs(scaled - alpha * base) / np.abs(alpha * base)))
        )
    return _result("projgen/scale-equivariance", worst, 1e-12)


@_check("projgen/gaussianity-ks")
def _gaussianity_ks():
    spec = ProjectionSpec(13, 8, 100_000)
    gen = projgen.aux_stream(103, 9)
    u = montecarlo.unit_vector(spec.n, gen)
    y = projgen.project(spec, u, projgen.all_rows(spec))
    pvalue = float(sp_stats.kstest(y / spec.sigma, "norm").pvalue)
    # Pass when the p-value is not below the significance level.
    return _result("projgen/gaussianity-ks", 1e-3 - pvalue, 0.0, f"p={pvalue:.4f}")


# -- packed codes ----------------------------------------------------------------


@_check("bitcode/hamming-metric")
def _hamming_metric():
    rng = random.Random(104)
    violations = 0
    for _ in range(300):
        m = rng.randint(1, 257)
        a, b, c = (
            bitcode.PackedCode.from_bits([rng.random() < 0.5 for _ in range(m)])
            for _ in range(3)
        )
        dab, dba = bitcode.hamming(a, b)[0], bitcode.hamming(b, a)[0]
        dac, dbc = bitcode.hamming(a, c)[0], bitcode.hamming(b, c)[0]
        violations += dab != dba
        violations += bitcode.hamming(a, a)[0] != 0
        violations += (dab == 0) != (a == b)
        violations += dac > dab + dbc
    return _result("bitcode/hamming-metric", violations, 0.0)


@_check("bitcode/popcount-oracle")
def _popcount_oracle():
    rng = random.Random(105)
    mismatches = 0
    for trial in range(1000):
        m = 1 + trial % 257
        xa = [rng.random() < 0.5 for _ in range(m)]
        xb = [rng.random() < 0.5 for _ in range(m)]
        raw, norm = bitcode.hamming(
            bitcode.PackedCode.from_bits(xa), bitcode.PackedCode.from_bits(xb)
        )
        loop = sum(p != q for p, q in zip(xa, xb))
        mismatches += raw != loop or norm != loop / m
    return _result("bitcode/popcount-oracle", mismatches, 0.0)


@_check("bitcode/storage-bound")
def _storage_bound():
    violations = 0
    for m_pool in (1, 2, 7, 64, 300):
        for m in range(m_pool + 1):
            extra = bitcode.storage_bits(m, m_pool) - m
            if extra < -1e-9:
                violations += 1
            boundary = m in (0, m_pool)
            if boundary != (extra < 1e-9):
                violations += 1
    return _result("bitcode/storage-bound", violations, 0.0)


# -- embeddings -------------------------------------------------------------------


@_check("embedder/scale-invariance")
def _embed_scale_invariance():
    spec = ProjectionSpec(14, 512, 600)
    gen = projgen.aux_stream(106, 9)
    u = montecarlo.unit_vector(spec.n, gen)
    v = montecarlo.unit_vector(spec.n, gen)
    e = embedder.build_adaptive(spec, u, 80)
    bad = 0
    for alpha in (0.25, 7.5, 1e5):
        bad += embedder.embed(e, alpha * v) != embedder.embed(e, v)
        bad += embedder.sign_rp_embed(spec, 80, alpha * v) != embedder.sign_rp_embed(
            spec, 80, v
        )
    return _result("embedder/scale-invariance", bad, 0.0)


@_check("embedder/self-distance")
def _self_distance():
    worst = 0
    for seed, m in ((15, 1), (16, 64), (17, 333)):
        spec = ProjectionSpec(seed, 384, 400)
        u = projgen.aux_stream(seed, 9).standard_normal(spec.n)
        e = embedder.build_adaptive(spec, u, m)
        worst = max(worst, bitcode.hamming(embedder.embed(e, u), e.ref_code)[0])
    return _result("embedder/self-distance", worst, 0.0)


@_check("embedder/empirical-dominance")
def _empirical_dominance():
    rho, m, m_pool, n = 0.3, 800, 5000, 256
    adaptives, baselines = [], []
    for trial in range(50):
        spec = ProjectionSpec(3000 + trial, n, m_pool)
        gen = projgen.aux_stream(107, 9, trial)
        u = montecarlo.unit_vector(n, gen)
        e = embedder.build_adaptive(spec, u, m)
        adaptives.append(montecarlo.empirical_adaptive_dh(e, u, rho, 1, gen))
        baselines.append(montecarlo.empirical_sign_rp_dh(spec, m, u, rho, 1, gen))
    gap = float(np.mean(adaptives) - np.mean(baselines))
    return _result("embedder/empirical-dominance", gap, 0.0, "mean adaptive - mean sign-RP")


# -- analysis ----------------------------------------------------------------------


def _reference_embedder(seed=18, n=512, m=800, m_pool=5000):
    spec = ProjectionSpec(seed, n, m_pool)
    u = montecarlo.unit_vector(n, projgen.aux_stream(seed, 9))
    return embedder.build_adaptive(spec, u, m), u


@_check("analysis/thm1-agreement")
def _thm1_agreement():
    e, u = _reference_embedder()
    rho = 0.3
    analytic = analysis.expected_dh_adaptive(e, SignalPairGeometry(1.0, 1.0, rho))
    empirical = montecarlo.empirical_adaptive_dh(
        e, u, rho, 500, projgen.aux_stream(108, 9)
    )
    return _result("analysis/thm1-agreement", abs(analytic - empirical), 0.01)


@_check("analysis/dominance-analytic")
def _dominance_analytic():
    worst = -math.inf
    for trial in range(20):
        spec = ProjectionSpec(3100 + trial, 128, 5000)
        u = montecarlo.unit_vector(128, projgen.aux_stream(109, 9, trial))
        e = embedder.build_adaptive(spec, u, 800)
        for rho in np.linspace(0.05, 0.95, 10):
            geom = SignalPairGeometry(1.0, 1.0, float(rho))
            gap = analysis.expected_dh_adaptive(e, geom) - analysis.sign_rp_expected_dh(
                geom
            )
            worst = max(worst, gap)
    return _result("analysis/dominance-analytic", worst, -1e-12, "max adaptive - theta/pi")


@_check("analysis/limit-recovery")
def _limit_recovery():
    rho = 0.3
    geom = SignalPairGeometry(1.0, 1.0, rho)
    vals = []
    for trial in range(200):
        spec = ProjectionSpec(3200 + trial, 128, 2000)
        u = montecarlo.unit_vector(128, projgen.aux_stream(110, 9, trial))
        e = embedder.build_adaptive(spec, u, 2000)
        vals.append(analysis.expected_dh_adaptive(e, geom))
    gap = abs(float(np.mean(vals)) - analysis.sign_rp_expected_dh(geom))
    return _result("analysis/limit-recovery", gap, 0.01)


@_check("analysis/pool-monotonicity")
def _pool_monotonicity():
    rho, m = 0.3, 400
    geom = SignalPairGeometry(1.0, 1.0, rho)
    means = []
    for m_pool in (800, 1600, 3200):
        vals = []
        for trial in range(20):
            spec = ProjectionSpec(3300 + trial, 128, m_pool)
            u = montecarlo.unit_vector(128, projgen.aux_stream(111, 9, trial))
            e = embedder.build_adaptive(spec, u, m)
            vals.append(analysis.expected_dh_adaptive(e, geom))
        means.append(float(np.mean(vals)))
    worst = max(means[i + 1] - means[i] for i in range(len(means) - 1))
    return _result("analysis/pool-monotonicity", worst, 2e-3, f"means={np.round(means, 4)}")


@_check("analysis/thm2-bound")
def _thm2_bound():
    e, _ = _reference_embedder()
    worst = -math.inf
    for rho in np.linspace(0.0, 0.9, 10):
        geom = SignalPairGeometry(1.0, 1.0, float(rho))
        worst = max(
            worst,
            analysis.expected_dh_adaptive(e, geom)
            - analysis.expected_dh_upper_bound(e.m, e.spec.m_pool, geom, e.spec.sigma),
        )
    return _result("analysis/thm2-bound", worst, 0.01, "max adaptive - bound")


@_check("analysis/orderstat-half-full")
def _orderstat_half_full():
    # Top order statistic: E[max |N| of M] vs E[max N of 2M], common numbers.
    m_pool, reps = 2000, 4000
    gen = projgen.aux_stream(112, 9)
    diffs = np.empty(reps)
    for i in range(reps):
        first = gen.standard_normal(m_pool)
        second = gen.standard_normal(m_pool)
        diffs[i] = np.abs(first).max() - max(first.max(), second.max())
    return _result("analysis/orderstat-half-full", abs(float(diffs.mean())), 0.01)


@_check("analysis/bvn-arcsin")
def _bvn_arcsin():
    worst = 0.0
    for rho in np.linspace(-0.99, 0.99, 199):
        closed = 0.25 + math.asin(rho) / (2.0 * math.pi)
        worst = max(worst, abs(analysis.bivariate_normal_cdf(0, 0, float(rho)) - closed))
    return _result("analysis/bvn-arcsin", worst, 1e-7)


@_check("analysis/pmf-mean")
def _pmf_mean():
    gen = projgen.aux_stream(113, 9)
    worst = 0.0
    for m in (1, 13, 257, 1000):
        probs = gen.random(m)
        pmf = analysis.poisson_binomial_pmf(probs)
        mean = float(np.arange(m + 1) @ pmf)
        worst = max(worst, abs(mean - float(probs.sum())))
    return _result("analysis/pmf-mean", worst, 1e-12)


@_check("analysis/chernoff-tail")
def _chernoff_tail_check():
    e, _ = _reference_embedder()
    probs = analysis.mismatch_probs_given_taus(
        e.ref_projections, SignalPairGeometry(1.0, 1.0, 0.3), e.spec.sigma
    )
    mu = float(probs.mean())
    gen = projgen.aux_stream(114, 9)
    draws = (gen.random((100_000, probs.size)) < probs).mean(axis=1)
    worst = -math.inf
    for eps in (0.2, 0.5, 1.0):
        freq = float((np.abs(draws - mu) > eps * mu).mean())
        worst = max(worst, freq - analysis.chernoff_tail(mu, eps, probs.size))
    return _result("analysis/chernoff-tail", worst, 0.0, "max freq - bound")


# -- benchmarks ---------------------------------------------------------------------


@_check("ann/roc-shape")
def _roc_shape():
    cfg = AnnConfig(
        n=256, m_pool=256, m=64, n_true=20, n_false=200, seed=5, n_thresholds=101
    )
    violations = 0
    for method in ("adaptive", "sign_rp_eq_complexity", "universal"):
        points = bench_ann.run_roc(cfg, method)
        again = bench_ann.run_roc(cfg, method)
        violations += points != again
        det = [p.p_detect for p in points]
        fa = [p.p_false_alarm for p in points]
        violations += any(b < a for a, b in zip(det, det[1:]))
        violations += any(b < a for a, b in zip(fa, fa[1:]))
        violations += points[-1].p_detect != 1.0 or points[-1].p_false_alarm != 1.0
    return _result("ann/roc-shape", violations, 0.0)


@_check("ann/auc-ordering")
def _ann_ordering():
    aucs = {m: [] for m in bench_ann.METHODS}
    for seed in (0, 1):
        cfg = AnnConfig(n=1024, m_pool=1024, m=128, seed=seed)
        for method in bench_ann.METHODS:
            aucs[method].append(bench_ann.auc(bench_ann.run_roc(cfg, method)))
    mean = {k: float(np.mean(v)) for k, v in aucs.items()}
    ok = (
        mean["uncompressed"]
        >= max(v for k, v in mean.items() if k != "uncompressed") - 1e-12
        and mean["sign_rp_eq_storage"] > mean["sign_rp_eq_complexity"]
        and mean["adaptive"] > mean["universal"]
    )
    margin = mean["adaptive"] - mean["sign_rp_eq_complexity"]
    detail = " ".join(f"{k}={v:.3f}" for k, v in mean.items())
    return PropertyResult(
        "ann/auc-ordering", ok and margin >= 0.02, 0.02 - margin, 0.0, detail
    )


@_check("classifier/orderings")
def _classifier_orderings():
    gaps = []
    for seed in (0, 1):
        res = bench_classifier.run_compression_benchmark(
            k=10, n=512, count=2000, m_values=(16, 64), seed=seed
        )
        for m, accs in res["per_m"].items():
            gaps.append(accs["adaptive"] - accs["sign_rp_eq_complexity"])
    model, _ = bench_classifier.generate_synthetic_task(6, 256, 10, seed=2)
    cm = bench_classifier.compress_model(
        model, "adaptive", 32, ProjectionSpec(2, 256, 256)
    )
    self_consistent = all(
        bench_classifier.classify_compressed(cm, model.weights[j].astype(np.float64))
        == j
        for j in range(model.k)
    )
    worst = -min(gaps)
    return PropertyResult(
        "classifier/orderings",
        self_consistent and worst <= 0.0,
        worst,
        0.0,
        "max sign-RP advantage over adaptive",
    )
