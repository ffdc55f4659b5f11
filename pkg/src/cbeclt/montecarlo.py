"""Replica experiments, normality diagnostics and trace-moment tables.

Replica r draws from its own stream, seeded by
``SeedSequence(master_seed, spawn_key=(r,))``.  The 64-bit integer derived from
that sequence is recorded per replica and fully determines the replica, so
results do not depend on how replicas are scheduled across threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import __version__
from . import stats as st
from . import testfn as tf
from . import theory
from .config import ExperimentConfig
from .ensemble import sample
from .errors import CBEError, ParameterOutOfRange
from .oracle import quadrature_oracle  # noqa: F401  (re-exported)

KS_ALPHA_COEF = 1.63
AUDIT_RTOL = 1e-8
# spawn keys at or above this offset feed auxiliary draws (limit-law samples)
AUX_KEY = 1 << 62


def replica_seed(master: int, r: int) -> int:
    words = np.random.SeedSequence(master, spawn_key=(r,)).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def replica_rng(master: int, r: int) -> np.random.Generator:
    return np.random.default_rng(replica_seed(master, r))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    samples: np.ndarray
    mean: float
    variance: float
    normalized: np.ndarray
    scale: float
    theory: dict
    diagnostics: dict
    assertions: dict
    runtime: dict
    seeds: list
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a["pass"] for a in self.assertions.values())

    def to_json(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.to_json(),
            "config_hash": self.config.config_hash(),
            "pass": self.passed,
            "summary": {"mean": self.mean, "variance": self.variance,
                        "normalized_variance": self.variance / self.scale ** 2,
                        "normalization": self.scale, "replicas": int(self.samples.size)},
            "theory": self.theory,
            "diagnostics": self.diagnostics,
            "assertions": self.assertions,
            "runtime": self.runtime,
            "seeds": [str(s) for s in self.seeds],
            "samples": [float(x) for x in self.samples],
            "extra": {k: v for k, v in self.extra.items() if not isinstance(v, np.ndarray)},
        }


# ---------------------------------------------------------------------------
# diagnostics


def ks_normal(samples, sd: float) -> tuple[float, float]:
    """One-sample KS statistic against Normal(0, sd^2) and the alpha = 0.01 threshold."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ParameterOutOfRange("ks_normal needs at least 100 samples")
    if not sd > 0:
        raise ParameterOutOfRange("sd must be positive")
    stat = sps.kstest(x, "norm", args=(0.0, sd)).statistic
    return float(stat), KS_ALPHA_COEF / math.sqrt(x.size)


def wasserstein1_empirical(samples_a, samples_b_or_cdf) -> float:
    """W1 between an empirical sample and another sample or a CDF callable."""
    a = np.sort(np.asarray(samples_a, dtype=float))
    if a.size < 2:
        raise ParameterOutOfRange("W1 needs at least 2 samples")
    if not callable(samples_b_or_cdf):
        b = np.sort(np.asarray(samples_b_or_cdf, dtype=float))
        if b.size < 2:
            raise ParameterOutOfRange("W1 needs at least 2 samples")
        if a.size == b.size:
            return float(np.mean(np.abs(a - b)))
        return float(sps.wasserstein_distance(a, b))
    F = samples_b_or_cdf
    span = max(a[-1] - a[0], 1.0)
    lo, hi = a[0] - span, a[-1] + span
    while F(lo) > 1e-13:
        lo -= span
    while 1.0 - F(hi) > 1e-13:
        hi += span
    # every sample point is a grid node, with extra nodes between them
    fine = np.linspace(lo, hi, 200_001)
    x = np.union1d(a, fine)
    mid = 0.5 * (x[1:] + x[:-1])
    Fe = np.searchsorted(a, mid, side="right") / a.size
    g = np.abs(Fe - F(mid))
    return float(np.sum(g * np.diff(x)))


def _moments(x):
    # shape is undefined when the samples are constant up to rounding
    spread = float(np.std(x))
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        return None, None
    return float(sps.skew(x)), float(sps.kurtosis(x))


# ---------------------------------------------------------------------------
# replica engine


def _run_replicas(cfg: ExperimentConfig, work, threads: int, width: int):
    M = cfg.replicas
    out = np.empty((M, width))
    audits: dict[int, float] = {}

    def chunk(lo, hi):
        for r in range(lo, hi):
            out[r], err = work(r)
            if err is not None:
                audits[r] = err

    threads = max(1, int(threads))
    if threads == 1:
        chunk(0, M)
    else:
        step = max(1, math.ceil(M / (4 * threads)))
        with ThreadPoolExecutor(threads) as pool:
            futs = [pool.submit(chunk, lo, min(M, lo + step)) for lo in range(0, M, step)]
            for fu in futs:
                fu.result()
    return out, dict(sorted(audits.items()))


def _audit_every(cfg):
    if cfg.audit_fraction <= 0:
        return 0
    return max(1, int(round(1.0 / cfg.audit_fraction)))


def _rel(a, b):
    return abs(a - b) / (1.0 + abs(b))


def _pair_work(cfg: ExperimentConfig):
    f, L, n = cfg.test_function, cfg.L, cfg.n
    kind = cfg.ensembles[0]
    cut = tf.fourier_cutoff(f, L, n)
    d = cfg.d
    track_tail = cfg.statistic == "pair" and not f.circle_native
    top = max(cut, d, tf.fourier_cutoff(f, L, n, st.TAIL_STAT_TOL) if track_tail else 0, 1)
    every = _audit_every(cfg)

    def work(r):
        rng = replica_rng(cfg.seed, r)
        conf = sample(kind, n, rng, cfg.tol)
        tv = st.traces(conf, top)
        s = st.pair_statistic_fourier(tv, f, L, cut)
        row = (s, st.truncated_statistic(tv, f, L, d) if track_tail else np.nan,
               st.tail_statistic(tv, f, L, d) if track_tail else np.nan)
        err = None
        if every and r % every == 0:
            err = _rel(s, st.pair_statistic_direct(conf, f, L))
        return row, err

    return work, 3


def _bipartite_work(cfg: ExperimentConfig):
    f, L, n = cfg.test_function, cfg.L, cfg.n
    ka, kb = cfg.ensembles
    cut = max(tf.fourier_cutoff(f, L, n), 1)
    every = _audit_every(cfg)

    def work(r):
        rng = replica_rng(cfg.seed, r)
        a = sample(ka, n, rng, cfg.tol)
        b = sample(kb, n, rng, cfg.tol)
        s = st.bipartite_fourier(st.traces(a, cut), st.traces(b, cut), f, L, cut)
        err = None
        if every and r % every == 0:
            err = _rel(s, st.bipartite_direct(a, b, f, L))
        return (s,), err

    return work, 1


def _surrogate_work(cfg: ExperimentConfig):
    f, L, d = cfg.test_function, cfg.L, cfg.d
    beta = cfg.ensembles[0].beta or cfg.beta

    def work(r):
        return (st.gaussian_surrogate(f, L, beta, d, replica_rng(cfg.seed, r)),), None

    return work, 1


def _scale(cfg):
    if cfg.regime == "meso":
        return math.sqrt(cfg.L)
    if cfg.regime == "local":
        return math.sqrt(cfg.n)
    return 1.0


def _global_coeffs(cfg):
    f, n = cfg.test_function, cfg.n
    cut = tf.fourier_cutoff(f, 1.0, n)
    return np.asarray(tf.circle_coefficient(f, 1.0, np.arange(1, cut + 1)), dtype=float)


def _theory_block(cfg: ExperimentConfig, bipartite: bool) -> dict:
    f, beta = cfg.test_function, cfg.beta
    out: dict = {"regime": cfg.regime}
    if cfg.regime == "global":
        c = _global_coeffs(cfg)
        out["limit"] = "laplace" if bipartite else "exponential"
        out["variance"] = (theory.global_bipartite_limit_variance(c, beta) if bipartite
                           else theory.global_pair_limit_variance(c, beta))
        if bipartite:
            out["mean"] = theory.bipartite_mean(f, cfg.n, 1.0, "global")
        return out
    if cfg.regime == "meso":
        pred = theory.meso_bipartite_variance(f, beta) if bipartite else theory.meso_pair_variance(f, beta)
        out["variance"] = pred.value
        out["variance_error"] = pred.error
        out["formula"] = pred.regime
        if bipartite:
            out["mean"] = theory.bipartite_mean(f, cfg.n, cfg.L, "meso")
        if cfg.statistic == "surrogate":
            a = st.surrogate_weights(f, cfg.L, beta, cfg.d)
            out["finite_d_variance"] = float(np.sum(a * a)) / cfg.L
        return out
    # local regime: the limit formulas are for the CUE
    if beta != 2.0:
        out["note"] = "local-regime limits are stated for beta = 2 only"
    if bipartite:
        case = {"cbe": "i", "uniform": "ii", "equispaced": "iii"}[cfg.ensembles[0].tag]
        pred = theory.local_bipartite_variance(f, case)
        out["case"] = case
        out["mean"] = theory.bipartite_mean(f, cfg.n, cfg.L, "local")
    else:
        pred = theory.local_pair_variance(f)
    out["variance"] = pred.value
    out["variance_error"] = pred.error
    out["formula"] = pred.regime
    return out


def _limit_draws(cfg, bipartite):
    c = _global_coeffs(cfg)
    rng = replica_rng(cfg.seed, AUX_KEY)
    if bipartite:
        return theory.global_bipartite_limit_sample(c, cfg.beta, rng, size=cfg.limit_draws)
    return theory.global_pair_limit_sample(c, cfg.beta, rng, size=cfg.limit_draws)


def _evaluate(cfg, samples, bipartite, extra, audits, t0, threads) -> ExperimentResult:
    M = samples.size
    mean = float(np.mean(samples))
    var = float(np.var(samples, ddof=1))
    scale = _scale(cfg)
    normalized = (samples - mean) / scale
    th = _theory_block(cfg, bipartite)
    pv = th.get("variance")
    diag: dict = {"normalized_variance": var / scale ** 2,
                  "variance_se": var / scale ** 2 * math.sqrt(2.0 / (M - 1)),
                  "mean_se": math.sqrt(var / M)}
    diag["skewness"], diag["excess_kurtosis"] = _moments(samples)
    if cfg.regime == "global":
        ref = _limit_draws(cfg, bipartite)
        diag["w1_limit"] = wasserstein1_empirical(normalized, ref)
    elif pv is not None and pv > 0:
        sd = math.sqrt(pv)
        diag["variance_ratio"] = diag["normalized_variance"] / pv
        if M >= 100:
            # the surrogate's exact finite-d variance is known, so standardize by it
            ks_sd = math.sqrt(th["finite_d_variance"]) if "finite_d_variance" in th else sd
            diag["ks_statistic"], diag["ks_threshold"] = ks_normal(normalized, ks_sd)
        diag["w1_normal"] = wasserstein1_empirical(normalized, lambda x: sps.norm.cdf(x, scale=sd))
    if "mean" in th:
        diag["mean_z"] = (mean - th["mean"]) / diag["mean_se"] if diag["mean_se"] > 0 else 0.0
    if audits:
        diag["audit_replicas"] = len(audits)
        diag["audit_max_rel_error"] = max(audits.values())

    A = cfg.assertions
    res: dict = {}
    if "variance_rel_tol" in A and pv is not None:
        err = abs(diag["normalized_variance"] / pv - 1.0) if pv > 0 else math.inf
        res["variance_rel_tol"] = {"value": err, "limit": A["variance_rel_tol"],
                                   "pass": bool(err <= A["variance_rel_tol"])}
    if A.get("ks") and "ks_statistic" in diag:
        res["ks"] = {"value": diag["ks_statistic"], "limit": diag["ks_threshold"],
                     "pass": bool(diag["ks_statistic"] < diag["ks_threshold"])}
    if "mean_se" in A and "mean_z" in diag:
        res["mean_se"] = {"value": abs(diag["mean_z"]), "limit": A["mean_se"],
                          "pass": bool(abs(diag["mean_z"]) <= A["mean_se"])}
    if "max_variance_over_n" in A:
        v = var / cfg.n
        res["max_variance_over_n"] = {"value": v, "limit": A["max_variance_over_n"],
                                      "pass": bool(v < A["max_variance_over_n"])}
    if "w1_limit_max" in A and "w1_limit" in diag:
        res["w1_limit_max"] = {"value": diag["w1_limit"], "limit": A["w1_limit_max"],
                               "pass": bool(diag["w1_limit"] < A["w1_limit_max"])}
    if A.get("audit", True) and audits:
        worst = max(audits.values())
        res["audit"] = {"value": worst, "limit": AUDIT_RTOL, "pass": bool(worst <= AUDIT_RTOL)}

    runtime = {"seconds": time.perf_counter() - t0, "threads": threads}
    return ExperimentResult(cfg, samples, mean, var, normalized, scale, th, diag, res, runtime,
                            [replica_seed(cfg.seed, r) for r in range(M)], extra)


def run_pair_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Pair statistic (or its Gaussian surrogate) over cfg.replicas independent draws."""
    if cfg.statistic not in ("pair", "surrogate", "global"):
        raise ParameterOutOfRange(f"run_pair_experiment cannot run statistic {cfg.statistic!r}")
    t0 = time.perf_counter()
    work, width = (_surrogate_work if cfg.statistic == "surrogate" else _pair_work)(cfg)
    table, audits = _run_replicas(cfg, work, threads, width)
    extra = {}
    if width == 3 and not np.isnan(table[0, 1]):
        extra["truncated"] = table[:, 1].copy()
        extra["tail"] = table[:, 2].copy()
        tail = extra["tail"]
        extra["tail_mean_abs_dev"] = float(np.mean(np.abs(tail - tail.mean())) / math.sqrt(cfg.L))
    return _evaluate(cfg, table[:, 0].copy(), False, extra, audits, t0, threads)


def run_bipartite_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Bipartite statistic between two independent configurations per replica."""
    if cfg.statistic != "bipartite":
        raise ParameterOutOfRange("run_bipartite_experiment needs statistic = bipartite")
    if cfg.regime == "local" and cfg.ensembles[1].tag != "cbe":
        raise ParameterOutOfRange("the local bipartite limits take the second ensemble to be CUE")
    t0 = time.perf_counter()
    work, width = _bipartite_work(cfg)
    table, audits = _run_replicas(cfg, work, threads, width)
    return _evaluate(cfg, table[:, 0].copy(), True, {}, audits, t0, threads)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    if cfg.statistic == "bipartite":
        return run_bipartite_experiment(cfg, threads)
    return run_pair_experiment(cfg, threads)


# ---------------------------------------------------------------------------
# trace moments


def trace_moment_report(beta: float, n: int, kmax: int, mmax: int, replicas: int,
                        rng: np.random.Generator, ks=None) -> list[dict]:
    """Empirical E|T^(k)|^(2m) with standard errors next to the moment bound.

    ``ks`` selects the powers (default 1..kmax).  The bound is reported only
    where k m <= n; the CUE second moment min(k, n) only for beta = 2, m = 1.
    """
    if replicas < 2:
        raise ParameterOutOfRange("need at least 2 replicas")
    if ks is None:
        if kmax * mmax > n:
            raise ParameterOutOfRange("kmax * mmax must not exceed n")
        ks = range(1, kmax + 1)
    ks = [int(k) for k in ks]
    from .ensemble import EnsembleKind

    kind = EnsembleKind.cbe(beta)
    top = max(ks)
    absq = np.empty((replicas, len(ks)))
    idx = np.asarray(ks) - 1
    for r in range(replicas):
        tv = st.traces(sample(kind, n, rng), top)
        absq[r] = tv.abs2()[idx]
    rows = []
    for j, k in enumerate(ks):
        for m in range(1, mmax + 1):
            x = absq[:, j] ** m
            row = {"k": k, "m": m, "mean": float(x.mean()),
                   "se": float(x.std(ddof=1) / math.sqrt(replicas))}
            try:
                row["bound"] = theory.jm_moment_bound(k, m, n, beta)
            except ParameterOutOfRange:
                row["bound"] = None
            if beta == 2.0 and m == 1:
                row["cue"] = theory.cue_trace_second_moment(k, n)
            rows.append(row)
    return rows


__all__ = ["ExperimentResult", "ks_normal", "wasserstein1_empirical", "run_pair_experiment",
           "run_bipartite_experiment", "run_experiment", "trace_moment_report",
           "replica_seed", "replica_rng", "quadrature_oracle", "CBEError"]
