"""Fast invariant suite behind ``cbeclt validate``.

Each check has a stable identifier and returns (pass, detail).  Everything is
small-N and seeded, so the whole suite runs in well under a minute.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import _kernels
from . import ensemble as ens
from . import stats as st
from . import testfn as tf
from . import theory
from .errors import CBEError
from .oracle import quadrature_oracle

SEED = 20240611


def _rng(k):
    return np.random.default_rng([SEED, k])


def _functions():
    return [tf.XBump(1.0), tf.FreqBump(1.0), tf.FreqBump(2.0), tf.GaussianProfile(1.0)]


def _kinds():
    return [ens.EnsembleKind.cbe(2.0), ens.EnsembleKind.cbe(1.0), ens.EnsembleKind.uniform(),
            ens.EnsembleKind.equispaced()]


# ---------------------------------------------------------------------------
# ensemble


def check_ens_rotation():
    """Re T^(1) has the same law before and after a fixed rotation (two-sample KS)."""
    from scipy.stats import ks_2samp

    worst = 1.0
    for i, kind in enumerate([ens.EnsembleKind.cbe(2.0), ens.EnsembleKind.cbe(1.0), ens.EnsembleKind.uniform()]):
        rng = _rng(10 + i)
        a = np.array([st.traces(ens.sample(kind, 8, rng), 1).values[0].real for _ in range(2000)])
        b = np.array([st.traces(ens.sample(kind, 8, rng).rotated(1.234), 1).values[0].real
                      for _ in range(2000)])
        worst = min(worst, float(ks_2samp(a, b).pvalue))
    return worst > 1e-3, f"smallest two-sample KS p-value {worst:.3g}"


def check_ens_free_case():
    worst = 0.0
    for n in range(1, 5):
        for phi in (0.0, 0.7, 2.5):
            alpha = np.zeros(n, complex)
            alpha[-1] = np.exp(1j * phi)
            got = ens.eigenvalues_from_verblunsky(ens.VerblunskyCoefficients(alpha, 2.0)).angles
            want = np.sort(np.mod((-phi + 2 * math.pi * np.arange(n)) / n, 2 * math.pi))
            diff = np.angle(np.exp(1j * (got - want)))
            worst = max(worst, float(np.max(np.abs(diff))))
    return worst < 1e-11, f"max deviation from rotated roots of unity {worst:.2e}"


def check_ens_phase_monotone():
    rng = _rng(20)
    bad = 0
    for beta in (0.5, 1.0, 2.0, 4.0):
        for _ in range(20):
            vc = ens.sample_verblunsky(48, beta, rng)
            th = np.linspace(0.0, 2 * math.pi, 4001)
            F = np.empty(th.size)
            D = np.empty(th.size)
            _kernels.phase_batch(vc.alpha.real.copy(), vc.alpha.imag.copy(), 24, th, F, D)
            bad += int(np.any(np.diff(F) < 0)) + int(abs(F[-1] - F[0] - 2 * math.pi * 48) > 1e-6)
    return bad == 0, f"{bad} non-monotone phase scans out of 80"


def check_ens_determinism():
    a = ens.sample(ens.EnsembleKind.cbe(2.0), 33, np.random.default_rng(5))
    b = ens.sample(ens.EnsembleKind.cbe(2.0), 33, np.random.default_rng(5))
    same = a.angles.tobytes() == b.angles.tobytes()
    return same, "identical seeds give byte-identical angles" if same else "seeded draws differ"


def check_ens_roots_vs_polynomial():
    """Eigenangles agree with the zeros of the Szego polynomial found by np.roots."""
    rng = _rng(21)
    worst = 0.0
    for _ in range(50):
        vc = ens.sample_verblunsky(12, 2.0, rng)
        phi = np.array([1.0 + 0j])
        for a in vc.alpha:
            star = np.conj(phi[::-1])
            phi = np.concatenate([[0], phi]) - np.conj(a) * np.concatenate([star, [0]])
        want = np.sort(np.mod(np.angle(np.roots(phi[::-1])), 2 * math.pi))
        got = ens.eigenvalues_from_verblunsky(vc).angles
        worst = max(worst, float(np.max(np.abs(np.angle(np.exp(1j * (got - want)))))))
    return worst < 1e-9, f"max |angle error| {worst:.2e}"


# ---------------------------------------------------------------------------
# testfn


def check_tfn_plancherel():
    worst, name = 0.0, ""
    for f in _functions():
        x, t = tf.plancherel_sides(f)
        rel = abs(x - t) / abs(t)
        if rel >= worst:
            worst, name = rel, repr(f)
    return worst < 1e-7, f"worst relative gap {worst:.2e} ({name})"


def check_tfn_synthesis():
    rng = _rng(30)
    worst = 0.0
    for f in _functions():
        for L in (1.0, 4.0):
            th = rng.uniform(-math.pi, math.pi, 50)
            M = tf.fourier_cutoff(f, L, 1, 1e-12) + 1
            m = np.arange(1, M + 1)
            c = tf.circle_coefficient(f, L, m)
            synth = float(tf.circle_coefficient(f, L, 0)) + 2.0 * np.cos(np.outer(th, m)) @ c
            worst = max(worst, float(np.max(np.abs(synth - tf.periodized_eval(f, L, th)))))
    return worst < 1e-8, f"max synthesis error {worst:.2e}"


def check_tfn_even():
    rng = _rng(31)
    worst = 0.0
    for f in _functions():
        x = rng.uniform(-20, 20, 100)
        worst = max(worst, float(np.max(np.abs(f.eval(x) - f.eval(-x)))),
                    float(np.max(np.abs(f.fourier(x) - f.fourier(-x)))))
    return worst == 0.0, f"max asymmetry {worst:.2e}"


# ---------------------------------------------------------------------------
# stats


def check_sta_identity():
    rng = _rng(40)
    worst = 0.0
    for n, reps in ((8, 3), (64, 3), (256, 1)):
        L = max(n / 4.0, 1.0)
        for kind in _kinds():
            for f in _functions():
                cut = max(tf.fourier_cutoff(f, L, n), 1)
                for _ in range(reps):
                    a, b = ens.sample(kind, n, rng), ens.sample(kind, n, rng)
                    ta, tb = st.traces(a, cut), st.traces(b, cut)
                    d = st.pair_statistic_direct(a, f, L)
                    worst = max(worst, abs(d - st.pair_statistic_fourier(ta, f, L)) / (1 + abs(d)))
                    d = st.bipartite_direct(a, b, f, L)
                    worst = max(worst, abs(d - st.bipartite_fourier(ta, tb, f, L)) / (1 + abs(d)))
    return worst < 1e-8, f"max relative direct/Fourier gap {worst:.2e}"


def check_sta_rotation():
    rng = _rng(41)
    worst = 0.0
    for f in _functions():
        c = ens.sample(ens.EnsembleKind.cbe(2.0), 32, rng)
        s0 = st.pair_statistic_direct(c, f, 4.0)
        for shift in rng.uniform(0, 2 * math.pi, 3):
            worst = max(worst, abs(st.pair_statistic_direct(c.rotated(shift), f, 4.0) - s0))
    return worst < 1e-10, f"max change under rotation {worst:.2e}"


def check_sta_symmetry():
    rng = _rng(42)
    worst = 0.0
    for f in _functions():
        a = ens.sample(ens.EnsembleKind.cbe(2.0), 20, rng)
        b = ens.sample(ens.EnsembleKind.uniform(), 20, rng)
        worst = max(worst, abs(st.bipartite_direct(a, b, f, 3.0) - st.bipartite_direct(b, a, f, 3.0)))
    return worst < 1e-10, f"max asymmetry {worst:.2e}"


def check_sta_decomposition():
    rng = _rng(43)
    worst = 0.0
    for f in (tf.XBump(1.0), tf.GaussianProfile(1.0), tf.FreqBump(2.0)):
        L, n = 6.0, 32
        top = tf.fourier_cutoff(f, L, n, st.TAIL_STAT_TOL)
        tv = st.traces(ens.sample(ens.EnsembleKind.cbe(2.0), n, rng), max(top, 32))
        vals = [st.truncated_statistic(tv, f, L, d) + st.tail_statistic(tv, f, L, d) for d in range(1, 33)]
        worst = max(worst, max(vals) - min(vals))
    return worst < 1e-10, f"max variation over d {worst:.2e}"


def check_sta_eq6():
    rng = _rng(44)
    worst = 0.0
    for f in _functions():
        L, n = 5.0, 24
        tv = st.traces(ens.sample(ens.EnsembleKind.cbe(2.0), n, rng), tf.fourier_cutoff(f, L, n) + 1)
        exact = st.pair_statistic_fourier(tv, f, L)
        gap = exact - st.pair_statistic_eq6(tv, f, L) + n * float(tf.circle_coefficient(f, L, 0))
        worst = max(worst, abs(gap) / (1.0 + abs(exact)))
    return worst < 1e-8, f"relative |exact - shifted form + N ghat(0)| {worst:.2e}"


def check_sta_equispaced_traces():
    tv = st.traces(ens.sample(ens.EnsembleKind.equispaced(), 6, None), 24)
    want = np.array([6.0 if k % 6 == 0 else 0.0 for k in range(1, 25)])
    err = float(np.max(np.abs(tv.values - want)))
    return err < 1e-12, f"max deviation {err:.2e}"


# ---------------------------------------------------------------------------
# theory


def check_thy_scaling():
    worst = 0.0
    for f in _functions():
        ref = theory.meso_pair_variance(f, 1.0).value
        for beta in (0.5, 2.0, 4.0, 7.3):
            worst = max(worst, abs(theory.meso_pair_variance(f, beta).value * beta ** 2 - ref) / ref)
    return worst < 1e-12, f"max relative variation of beta^2 * variance {worst:.2e}"


def check_thy_dominance():
    ok = all(theory.local_bipartite_variance(f, "i").value <= theory.local_bipartite_variance(f, "ii").value
             for f in _functions())
    return ok, "case (i) <= case (ii) for every provided function"


def check_thy_consistency():
    worst = 0.0
    for b in (0.25, 0.5):
        f = tf.FreqBump(b)
        p = theory.local_pair_variance(f).value
        q = theory.local_bipartite_variance(f, "i").value
        worst = max(worst, abs(p - 2 * q) / p)
    return worst < 1e-9, f"relative gap local pair vs 2 x case (i) {worst:.2e}"


def check_thy_moment_bound():
    rng = _rng(50)
    n, reps = 64, 1500
    worst = -math.inf
    for beta in (1.0, 2.0, 4.0):
        kind = ens.EnsembleKind.cbe(beta)
        absq = np.array([st.traces(ens.sample(kind, n, rng), n // 4).abs2() for _ in range(reps)])
        for k in (1, 2, 4, 8, 16):
            for m in (1, 2, 3):
                if k * m > n:
                    continue
                x = absq[:, k - 1] ** m
                z = (x.mean() - theory.jm_moment_bound(k, m, n, beta)) / (x.std(ddof=1) / math.sqrt(reps))
                worst = max(worst, z)
    return worst < 5.0, f"largest excess over the bound {worst:.2f} standard errors"


# ---------------------------------------------------------------------------
# montecarlo


def check_mc_reproducibility():
    from .config import parse_config
    from .montecarlo import run_experiment

    raw = {"statistic": "pair", "beta": 2, "n": 32, "L": {"rule": "power", "gamma": 0.5},
           "test_function": {"form": "freqbump", "b": 1.0}, "replicas": 24, "seed": 9}
    a = run_experiment(parse_config(raw), threads=1).samples
    b = run_experiment(parse_config(raw), threads=3).samples
    same = a.tobytes() == b.tobytes()
    return same, "bit-identical samples for 1 and 3 threads" if same else "samples depend on threads"


def check_mc_audit():
    from .config import parse_config
    from .montecarlo import run_experiment

    raw = {"statistic": "pair", "beta": 2, "n": 48, "L": {"rule": "fixed", "value": 6},
           "test_function": {"form": "xbump", "a": 1.0}, "replicas": 40, "seed": 3, "audit_fraction": 0.25}
    res = run_experiment(parse_config(raw))
    worst = res.diagnostics["audit_max_rel_error"]
    return worst < 1e-8, f"audit max relative error {worst:.2e} over {res.diagnostics['audit_replicas']} replicas"


def check_mc_oracle():
    """Exact sampler, Metropolis sampler and quadrature agree on E|T^(1)|^2."""
    worst = 0.0
    for i, beta in enumerate((1.0, 2.0, 4.0)):
        for n in (2, 3):
            exact = quadrature_oracle(beta, n, "trace_second_moment", k=1)
            rng = _rng(60 + 2 * i + n)
            x = np.array([abs(np.sum(np.exp(1j * ens.sample(ens.EnsembleKind.cbe(beta), n, rng).angles))) ** 2
                          for _ in range(8000)])
            y = np.array([abs(np.sum(np.exp(1j * ens.mcmc_sample(n, beta, 20, 2.5, rng).angles))) ** 2
                          for _ in range(2000)])
            for s in (x, y):
                worst = max(worst, abs(s.mean() - exact) / (s.std(ddof=1) / math.sqrt(s.size)))
    return worst < 5.0, f"largest deviation {worst:.2f} standard errors"


def check_mc_normalization():
    from .montecarlo import _scale
    from .config import parse_config

    base = {"beta": 2, "n": 64, "test_function": {"form": "freqbump", "b": 1.0}, "replicas": 2}
    meso = _scale(parse_config({**base, "L": {"rule": "power", "gamma": 0.5}}))
    local = _scale(parse_config({**base, "L": "local"}))
    ok = meso == math.sqrt(8.0) and local == math.sqrt(64.0)
    return ok, f"meso divides by sqrt(L) = {meso:g}, local by sqrt(N) = {local:g}"


def check_mc_quadrature_normalization():
    worst = 0.0
    for beta in (1.0, 2.0, 4.0):
        for n in (2, 3):
            worst = max(worst, abs(quadrature_oracle(beta, n, "normalization") - 1.0))
    return worst < 1e-6, f"max |integral of density - 1| {worst:.2e}"


# ---------------------------------------------------------------------------
# cli


def check_cli_exit_codes():
    import contextlib
    import io

    from .cli import main

    sink = io.StringIO()
    with contextlib.redirect_stderr(sink), contextlib.redirect_stdout(sink):
        usage = main(["no-such-command"])
        missing = main(["experiment"])
    ok = usage == 2 and missing == 2
    return ok, f"unknown subcommand -> {usage}, missing config -> {missing}"


def check_cli_json_embeds_config():
    import contextlib
    import io
    import json
    import tempfile
    from pathlib import Path

    from . import __version__
    from .cli import main

    cfg = {"statistic": "pair", "beta": 2, "n": 8, "L": {"rule": "fixed", "value": 2},
           "test_function": {"form": "freqbump", "b": 1.0}, "replicas": 2, "seed": 1,
           "assertions": {"audit": False}}
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "c.json"
        path.write_text(json.dumps(cfg))
        with contextlib.redirect_stdout(io.StringIO()):
            code = main(["experiment", "--config", str(path), "--out", tmp])
        out = json.loads((Path(tmp) / "result.json").read_text())
    ok = code == 0 and out.get("version") == __version__ and out["config"]["n"] == 8
    return ok, f"exit {code}, version {out.get('version')!r}, config echoed: {'config' in out}"


CHECKS = {
    "ENS-ROTATION": check_ens_rotation,
    "ENS-FREE-CASE": check_ens_free_case,
    "ENS-PHASE-MONOTONE": check_ens_phase_monotone,
    "ENS-DETERMINISM": check_ens_determinism,
    "ENS-POLY-ROOTS": check_ens_roots_vs_polynomial,
    "TFN-PLANCHEREL": check_tfn_plancherel,
    "TFN-SYNTHESIS": check_tfn_synthesis,
    "TFN-EVEN": check_tfn_even,
    "STA-DIRECT-FOURIER": check_sta_identity,
    "STA-ROTATION": check_sta_rotation,
    "STA-BIPARTITE-SYMMETRY": check_sta_symmetry,
    "STA-DECOMPOSITION": check_sta_decomposition,
    "STA-SHIFTED-FORM": check_sta_eq6,
    "STA-EQUISPACED-TRACES": check_sta_equispaced_traces,
    "THY-BETA-SCALING": check_thy_scaling,
    "THY-DOMINANCE": check_thy_dominance,
    "THY-CONSISTENCY": check_thy_consistency,
    "THY-MOMENT-BOUND": check_thy_moment_bound,
    "MC-REPRODUCIBILITY": check_mc_reproducibility,
    "MC-AUDIT": check_mc_audit,
    "MC-ORACLE-AGREEMENT": check_mc_oracle,
    "MC-NORMALIZATION": check_mc_normalization,
    "MC-QUADRATURE-NORMALIZATION": check_mc_quadrature_normalization,
    "CLI-EXIT-CODES": check_cli_exit_codes,
    "CLI-JSON-EMBEDS-CONFIG": check_cli_json_embeds_config,
}


def run_suite(only=None) -> list[dict]:
    report = []
    for cid, fn in CHECKS.items():
        if only and cid not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except (CBEError, ValueError, ArithmeticError) as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        report.append({"id": cid, "pass": bool(ok), "detail": detail,
                       "seconds": round(time.perf_counter() - t0, 3)})
    return report
