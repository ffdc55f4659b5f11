"""Full-scale acceptance criteria; each test records one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from cbeclt import cli
from cbeclt import ensemble as ens
from cbeclt import montecarlo as mc
from cbeclt import stats as st
from cbeclt import testfn as tf
from cbeclt import theory as th
from cbeclt.config import parse_config
from cbeclt.oracle import quadrature_oracle

pytestmark = pytest.mark.acceptance

SEED = 20240611
BETAS = (1.0, 2.0, 4.0)


def _rng(*key):
    return np.random.default_rng([SEED, *key])


# -- 1: identities ----------------------------------------------------------


def test_criterion_1_identity_suite(acceptance_report):
    t0 = time.perf_counter()
    kinds = [ens.EnsembleKind.cbe(b) for b in BETAS] + [ens.EnsembleKind.uniform()]
    funcs = [tf.XBump(1.0), tf.FreqBump(1.0), tf.GaussianProfile(1.0)]
    worst_pair = worst_bip = 0.0
    for n in (8, 64, 256):
        L = math.floor(n ** 0.6 + 1e-9)
        for j, kind in enumerate(kinds):
            rng = _rng(1, n, j)
            confs = [ens.sample(kind, n, rng) for _ in range(201)]
            tops = {f: tf.fourier_cutoff(f, L, n) for f in funcs}
            for i in range(200):
                f = funcs[i % 3]
                ta, tb = st.traces(confs[i], tops[f]), st.traces(confs[i + 1], tops[f])
                direct = st.pair_statistic_direct(confs[i], f, L)
                fourier = st.pair_statistic_fourier(ta, f, L, tops[f])
                worst_pair = max(worst_pair, abs(direct - fourier) / (1 + abs(direct)))
                direct = st.bipartite_direct(confs[i], confs[i + 1], f, L)
                fourier = st.bipartite_fourier(ta, tb, f, L, tops[f])
                worst_bip = max(worst_bip, abs(direct - fourier) / (1 + abs(direct)))
    secs = time.perf_counter() - t0
    ok = worst_pair < 1e-8 and worst_bip < 1e-8 and secs < 60
    acceptance_report(1, ok, f"max rel. gap pair {worst_pair:.2e}, bipartite {worst_bip:.2e} "
                             f"(< 1e-8), {secs:.1f} s (< 60 s)")
    assert ok


# -- 2: small-N oracle --------------------------------------------------------


def _trace_sq(conf, k):
    return abs(np.sum(np.exp(1j * k * conf.angles))) ** 2


def test_criterion_2_small_n_oracle(acceptance_report):
    t0 = time.perf_counter()
    reps, sweeps, step = 100_000, 40, 2.5
    norm_err = max(abs(quadrature_oracle(b, n, "normalization") - 1.0) for b in BETAS for n in (2, 3))
    cue2 = quadrature_oracle(2.0, 2, "trace_second_moment", k=1)
    worst = 0.0
    for i, beta in enumerate(BETAS):
        for n in (2, 3):
            exact = {k: quadrature_oracle(beta, n, "trace_second_moment", k=k) for k in (1, 2)}
            rng = _rng(2, i, n)
            kind = ens.EnsembleKind.cbe(beta)
            xs = [ens.sample(kind, n, rng) for _ in range(reps)]
            ys = [ens.mcmc_sample(n, beta, sweeps, step, rng) for _ in range(reps)]
            for k in (1, 2):
                x = np.array([_trace_sq(c, k) for c in xs])
                y = np.array([_trace_sq(c, k) for c in ys])
                se_x, se_y = x.std(ddof=1) / math.sqrt(reps), y.std(ddof=1) / math.sqrt(reps)
                worst = max(worst, abs(x.mean() - exact[k]) / se_x, abs(y.mean() - exact[k]) / se_y,
                            abs(x.mean() - y.mean()) / math.hypot(se_x, se_y))
    secs = time.perf_counter() - t0
    ok = norm_err < 1e-6 and abs(cue2 - 1.0) < 1e-6 and worst < 5.0 and secs < 300
    acceptance_report(2, ok, f"normalization error {norm_err:.1e}, CUE E|T1|^2 at N=2 = {cue2:.8f}, "
                             f"worst sampler deviation {worst:.2f} SE (< 5), {secs:.0f} s (< 300 s)")
    assert ok


# -- 3: trace moments ----------------------------------------------------------


def test_criterion_3_trace_moments(acceptance_report):
    reps = 100_000
    rows = mc.trace_moment_report(2.0, 64, 0, 1, reps, _rng(3, 2), ks=[1, 8, 64, 128])
    cue_z = max(abs(r["mean"] - min(r["k"], 64)) / r["se"] for r in rows)
    jm_z = -math.inf
    checked = 0
    for beta in (1.0, 4.0):
        for r in mc.trace_moment_report(beta, 64, 21, 3, reps, _rng(3, int(beta))):
            if r["bound"] is not None:
                checked += 1
                jm_z = max(jm_z, (r["mean"] - r["bound"]) / r["se"])
    ok = cue_z < 5 and jm_z < 5
    acceptance_report(3, ok, f"CUE moments worst {cue_z:.2f} SE (< 5); moment bound worst excess "
                             f"{jm_z:.2f} SE over {checked} (k, m, beta) cells (< 5)")
    assert ok


# -- 4, 5, 10: mesoscopic regime through the CLI --------------------------------

MESO = {"beta": 2, "n": 1024, "L": {"rule": "power", "gamma": 0.6},
        "d": {"rule": "power", "eps": 0.1, "exponent": 1.0},
        "test_function": {"form": "freqbump", "b": 1.0}, "replicas": 4000, "seed": SEED,
        "save_samples": True, "audit_fraction": 0.01}


def _cli_run(tmp, name, raw, *extra):
    path = tmp / f"{name}.json"
    path.write_text(json.dumps(raw, indent=2))
    code = cli.main(["experiment", "--config", str(path), "--out", str(tmp / name), *extra])
    return code, json.loads((tmp / name / "result.json").read_text())


@pytest.fixture(scope="module")
def meso_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("meso")


@pytest.fixture(scope="module")
def meso_pair_runs(meso_dir):
    out = {}
    for beta in BETAS:
        raw = {**MESO, "beta": beta, "assertions": {"variance_rel_tol": 0.15, "ks": True, "audit": True}}
        out[beta] = _cli_run(meso_dir, f"pair_b{beta:g}", raw)
    return out


def test_criterion_4_mesoscopic_clt(meso_pair_runs, acceptance_report):
    parts, ok = [], True
    for beta, (code, res) in meso_pair_runs.items():
        dg = res["diagnostics"]
        good = (code == 0 and res["pass"] and res["config"]["L"] == 64 and res["config"]["d"] == 128
                and abs(dg["variance_ratio"] - 1) < 0.15 and dg["ks_statistic"] < dg["ks_threshold"])
        ok &= good
        parts.append(f"beta={beta:g}: var ratio {dg['variance_ratio']:.3f}, "
                     f"KS {dg['ks_statistic']:.4f}/{dg['ks_threshold']:.4f}")
    acceptance_report(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_bipartite_mesoscopic(meso_pair_runs, meso_dir, acceptance_report):
    parts, ok = [], True
    for beta in BETAS:
        raw = {**MESO, "statistic": "bipartite", "ensembles": ["cbe", "cbe"], "beta": beta,
               "assertions": {"variance_rel_tol": 0.15, "mean_se": 3, "audit": True}}
        code, res = _cli_run(meso_dir, f"bip_b{beta:g}", raw)
        dg = res["diagnostics"]
        half = 0.5 * th.meso_pair_variance(tf.FreqBump(1.0), beta).value
        ratio = dg["normalized_variance"] / half
        expected_mean = th.bipartite_mean(tf.FreqBump(1.0), 1024, 64, "meso")
        good = code == 0 and res["pass"] and abs(ratio - 1) < 0.15 and abs(dg["mean_z"]) < 3
        good &= res["theory"]["mean"] == pytest.approx(expected_mean, rel=1e-12)
        ok &= good
        parts.append(f"beta={beta:g}: var / half-pair {ratio:.3f}, mean {dg['mean_z']:+.2f} SE")
    acceptance_report(5, ok, "; ".join(parts))
    assert ok


def test_criterion_10_reproducibility(meso_pair_runs, meso_dir, acceptance_report):
    # same config file, different thread count
    code = cli.main(["experiment", "--config", str(meso_dir / "pair_b2.json"),
                     "--out", str(meso_dir / "pair_b2_rerun"), "--threads", "3"])
    a = (meso_dir / "pair_b2" / "samples.csv").read_bytes()
    b = (meso_dir / "pair_b2_rerun" / "samples.csv").read_bytes()
    ok = a == b and code == meso_pair_runs[2.0][0]
    acceptance_report(10, ok, f"beta=2 rerun with 3 threads: samples.csv "
                              f"{'bit-identical' if a == b else 'differs'} ({len(a)} bytes)")
    assert ok


# -- 6, 7: local regime -----------------------------------------------------------

LOCAL = {"beta": 2, "n": 256, "L": "local", "replicas": 4000, "seed": SEED, "audit_fraction": 0.01}


def test_criterion_6_local_bipartite(acceptance_report):
    parts, ok = [], True
    for case, first in (("i", "cbe"), ("ii", "uniform"), ("iii", "equispaced")):
        cfg = parse_config({**LOCAL, "statistic": "bipartite", "ensembles": [first, "cbe"],
                            "test_function": {"form": "freqbump", "b": 2.0}, "seed": SEED + ord(case[-1])})
        res = mc.run_experiment(cfg)
        pred = th.local_bipartite_variance(tf.FreqBump(2.0), case).value
        ratio = res.diagnostics["normalized_variance"] / pred
        ok &= abs(ratio - 1) < 0.15 and res.theory["case"] == case
        parts.append(f"({case}) ratio {ratio:.3f}")
    cfg = parse_config({**LOCAL, "statistic": "bipartite", "ensembles": ["equispaced", "cbe"],
                        "test_function": {"form": "freqbump", "b": 1.0}})
    res = mc.run_experiment(cfg)
    zero_ratio = res.variance / 256
    ok &= zero_ratio < 1e-6
    parts.append(f"(iii, b=1) Var/N {zero_ratio:.1e} (< 1e-6)")
    acceptance_report(6, ok, ", ".join(parts))
    assert ok


def test_criterion_7_local_pair(acceptance_report):
    parts, ok = [], True
    narrow = tf.FreqBump(0.5)
    reduced = th.fhat_sq_t_sq(narrow)[0] / math.pi
    for b, seed in ((0.5, SEED + 70), (2.0, SEED + 71)):
        f = tf.FreqBump(b)
        cfg = parse_config({**LOCAL, "statistic": "pair", "test_function": {"form": "freqbump", "b": b},
                            "seed": seed})
        res = mc.run_experiment(cfg)
        nv = res.diagnostics["normalized_variance"]
        pred = reduced if b == 0.5 else th.local_pair_variance(f).value
        ratio = nv / pred
        ok &= abs(ratio - 1) < 0.15
        note = ""
        if b == 2.0:
            # the quadrant reading of the corner term, reported for comparison only
            alt = th.local_pair_variance(f, corner="quadrant").value
            note = f" [quadrant reading would give {nv / alt:.3f}]"
        parts.append(f"b={b:g}: Var/N over prediction {ratio:.3f}{note}")
    acceptance_report(7, ok, "; ".join(parts))
    assert ok


# -- 8: global limit ------------------------------------------------------------------


def test_criterion_8_global_limits(acceptance_report):
    base = {"beta": 2, "n": 512, "L": "global", "test_function": {"form": "cosine", "coeffs": [1.0]},
            "replicas": 4000, "limit_draws": 1_000_000, "assertions": {"w1_limit_max": 0.05}}
    pair = mc.run_experiment(parse_config({**base, "statistic": "pair", "seed": SEED + 80}))
    bip = mc.run_experiment(parse_config({**base, "statistic": "bipartite", "seed": SEED + 81}))
    w_pair, w_bip = pair.diagnostics["w1_limit"], bip.diagnostics["w1_limit"]
    ok = w_pair < 0.05 and w_bip < 0.05 and pair.theory["limit"] == "exponential" \
        and bip.theory["limit"] == "laplace"
    acceptance_report(8, ok, f"W1 to shifted exponential {w_pair:.4f}, to Laplace {w_bip:.4f} (< 0.05)")
    assert ok


# -- 9: surrogate coupling trend -------------------------------------------------------

# beta = 1/2 with L = N^0.4 is where the coupling error clears the Monte Carlo noise floor
TREND = {"statistic": "pair", "beta": 0.5, "L": {"rule": "power", "gamma": 0.4},
         "d": {"rule": "power", "eps": 0.1, "exponent": 1.0},
         "test_function": {"form": "gaussian", "sigma": 1.0}, "replicas": 4000, "seed": SEED + 90,
         "assertions": {"audit": False}}


def test_criterion_9_surrogate_trend(acceptance_report):
    w1s, tails, noise = [], [], []
    for n in (256, 512, 1024):
        res = mc.run_experiment(parse_config({**TREND, "n": n}))
        L, d = res.config.L, res.config.d
        sur = st.gaussian_surrogate_batch(res.config.test_function, L, 0.5, d, 1_000_000,
                                          mc.replica_rng(res.config.seed, mc.AUX_KEY))
        root = math.sqrt(L)
        w1s.append(mc.wasserstein1_empirical(res.extra["truncated"] / root, sur / root))
        noise.append(mc.wasserstein1_empirical(sur[:4000] / root, sur[4000:8000] / root))
        tail = res.extra["tail"]
        tails.append(float(np.mean(np.abs(tail - tail.mean()))) / root)
    ok = w1s[0] > w1s[1] > w1s[2] and tails[0] > tails[1] > tails[2]
    fmt = lambda xs: " -> ".join(f"{x:.4f}" for x in xs)  # noqa: E731
    acceptance_report(9, ok, f"W1 {fmt(w1s)} (noise floor ~{max(noise):.3f}); tail {fmt(tails)}")
    assert ok
