import math

import numpy as np
import pytest
from scipy import integrate, stats as sps
from scipy.stats import qmc

from cbeclt import ensemble as ens
from cbeclt import stats as st
from cbeclt import testfn as tf
from cbeclt import theory as th
from cbeclt.errors import ParameterOutOfRange, QuadratureFailure
from cbeclt.oracle import quadrature_oracle

from conftest import ZeroFunction

# FreqBump(b=2) local pair pieces (each divided by pi), frozen after the domain check below
FB2_FIRST = 0.03299748170007653
FB2_CROSS = 0.018425558115924362
FB2_CORNER_QUADRANT = 0.005003119010218875
FB2_LOCAL_PAIR = 0.00456568556371442
FB2_LOCAL_BIPARTITE = {"i": 0.016498740850038263, "ii": 0.022608898968069432, "iii": 0.022117269450386928}
FB1_MESO_PAIR_BETA2 = 0.004868620160381182


def _random_functions(rng, count=20):
    out = []
    for _ in range(count):
        form = rng.integers(3)
        p = float(rng.uniform(0.3, 3.0))
        out.append((tf.XBump, tf.FreqBump, tf.GaussianProfile)[form](p))
    return out


# -- mesoscopic -------------------------------------------------------------


def test_gaussian_meso_pair_closed_form():
    want = 1 / (2 * math.sqrt(math.pi))
    assert th.meso_pair_variance(tf.GaussianProfile(1.0), 2.0).value == pytest.approx(want, rel=1e-10)
    q, _ = integrate.quad(lambda t: t * t * math.exp(-t * t), -np.inf, np.inf)
    assert q / math.pi == pytest.approx(want, rel=1e-12)


def test_meso_beta_scaling():
    for f in (tf.XBump(1.0), tf.FreqBump(1.0), tf.GaussianProfile(2.0)):
        v = th.meso_pair_variance(f, 1.3).value
        assert th.meso_pair_variance(f, 2.6).value == pytest.approx(v / 4, rel=1e-12)


def test_zero_function_predictions():
    z = ZeroFunction()
    assert th.meso_pair_variance(z, 2.0).value == 0.0
    assert th.meso_bipartite_variance(z, 2.0).value == 0.0
    assert th.local_pair_variance(z).value == 0.0
    assert th.bipartite_mean(z, 100, 10, "meso") == 0.0


def test_meso_bipartite_is_half(rng):
    for f in _random_functions(rng):
        beta = float(rng.uniform(0.5, 6))
        p = th.meso_pair_variance(f, beta).value
        assert th.meso_bipartite_variance(f, beta).value == pytest.approx(p / 2, rel=1e-15)


def test_gaussian_meso_bipartite():
    want = 1 / (4 * math.sqrt(math.pi))
    assert th.meso_bipartite_variance(tf.GaussianProfile(1.0), 2.0).value == pytest.approx(want, rel=1e-10)


def test_freqbump_meso_regression():
    assert th.meso_pair_variance(tf.FreqBump(1.0), 2.0).value == pytest.approx(FB1_MESO_PAIR_BETA2, rel=1e-9)


def test_meso_rejects_bad_beta():
    with pytest.raises(ParameterOutOfRange):
        th.meso_pair_variance(tf.XBump(1.0), 0.0)


# -- local pair -------------------------------------------------------------


def test_local_pair_reduces_for_narrow_support():
    f = tf.FreqBump(0.5)
    first, cross, corner = th.local_pair_terms(f)
    assert cross == 0.0 and corner == 0.0
    q, _ = integrate.quad(lambda t: float(f.fourier(t)) ** 2 * t * t, -0.5, 0.5, epsabs=1e-14)
    assert th.local_pair_variance(f).value == pytest.approx(q / math.pi, rel=1e-9)


def test_local_pair_terms_against_domain_quasi_monte_carlo():
    f = tf.FreqBump(2.0)
    x = qmc.Sobol(2, scramble=True, seed=1).random_base2(23) * 4 - 2  # 8.4e6 points on [-2, 2]^2
    s, t = x[:, 0], x[:, 1]
    w = f.fourier(s) * f.fourier(t) * 16 / len(s) / math.pi
    cross = np.sum(w * (1 - np.abs(s - t)) * ((np.abs(s - t) <= 1) & (np.maximum(abs(s), abs(t)) >= 1)))
    corner = np.sum(w * (np.abs(s + t) - 1) * ((abs(s) <= 1) & (abs(t) <= 1) & (np.abs(s + t) > 1)))
    first, q_cross, q_corner = th.local_pair_terms(f)
    assert q_cross == pytest.approx(cross, rel=1e-3)
    # the corner region has two mirror-image triangles
    assert 2 * q_corner == pytest.approx(corner, rel=1e-3)
    one_d, _ = integrate.quad(lambda u: float(f.fourier(u)) ** 2 * min(abs(u), 1) ** 2, -2, 2, points=[-1, 1])
    assert first == pytest.approx(one_d / math.pi, rel=1e-9)


def test_local_pair_regression_constants():
    f = tf.FreqBump(2.0)
    first, cross, corner = th.local_pair_terms(f)
    assert (first, cross, corner) == pytest.approx((FB2_FIRST, FB2_CROSS, FB2_CORNER_QUADRANT), rel=1e-9)
    assert th.local_pair_variance(f).value == pytest.approx(FB2_LOCAL_PAIR, rel=1e-9)
    assert th.local_pair_variance(f).value == pytest.approx(first - cross - 2 * corner, rel=1e-12)
    assert th.local_pair_variance(f, corner="quadrant").value == pytest.approx(first - cross - corner, rel=1e-12)


def test_local_pair_corner_option_validated():
    with pytest.raises(ParameterOutOfRange):
        th.local_pair_variance(tf.FreqBump(1.0), corner="both")


def test_local_pair_consistency_with_bipartite():
    for b in (0.2, 0.35, 0.5):
        f = tf.FreqBump(b)
        assert th.local_pair_variance(f).value == pytest.approx(
            2 * th.local_bipartite_variance(f, "i").value, rel=1e-9)


# -- local bipartite --------------------------------------------------------


def test_local_bipartite_case_iii_vanishes():
    assert th.local_bipartite_variance(tf.FreqBump(1.0), "iii").value == 0.0


def test_local_bipartite_dominance(rng):
    for f in _random_functions(rng):
        assert th.local_bipartite_variance(f, "i").value <= th.local_bipartite_variance(f, "ii").value


def test_gaussian_case_ii_by_quadrature():
    # weight min(|t|, 1): |t| inside the unit interval
    inner, _ = integrate.quad(lambda t: abs(t) * math.exp(-t * t), -1, 1, points=[0.0])
    outer, _ = integrate.quad(lambda t: math.exp(-t * t), 1, np.inf)
    want = (inner + 2 * outer) / (2 * math.pi)
    assert th.local_bipartite_variance(tf.GaussianProfile(1.0), "ii").value == pytest.approx(want, rel=1e-9)


def test_gaussian_case_iii_lattice_sum():
    want = 2 * sum(math.exp(-l * l) for l in range(1, 30)) / (2 * math.pi)
    assert th.local_bipartite_variance(tf.GaussianProfile(1.0), "iii").value == pytest.approx(want, rel=1e-12)


def test_local_bipartite_regression():
    for case, v in FB2_LOCAL_BIPARTITE.items():
        assert th.local_bipartite_variance(tf.FreqBump(2.0), case).value == pytest.approx(v, rel=1e-9)


def test_local_bipartite_unknown_case():
    with pytest.raises(ParameterOutOfRange):
        th.local_bipartite_variance(tf.FreqBump(1.0), "iv")


def test_circle_native_functions_rejected():
    with pytest.raises(ParameterOutOfRange):
        th.meso_pair_variance(tf.CosineSeries(), 2.0)


# -- prediction record ------------------------------------------------------


def test_variance_prediction_invariants():
    assert th.VariancePrediction(-1e-18, "meso_pair", 1e-12).value == 0.0
    with pytest.raises(QuadratureFailure):
        th.VariancePrediction(-1.0, "meso_pair", 0.0)
    with pytest.raises(QuadratureFailure):
        th.VariancePrediction(1.0, "meso_pair", 1e-3)
    assert th.VariancePrediction(0.5, "local_pair", 1e-10).to_json() == {
        "value": 0.5, "regime": "local_pair", "error": 1e-10}


# -- global limits ----------------------------------------------------------


def test_global_pair_cosine_moments(rng):
    for beta in (1.0, 2.0, 4.0):
        x = th.global_pair_limit_sample([0.5], beta, rng, size=400_000)
        assert abs(x.mean()) < 5 * x.std() / math.sqrt(x.size)
        assert th.global_pair_limit_variance([0.5], beta) == pytest.approx(4 / beta ** 2)


def test_global_pair_is_shifted_exponential(rng):
    x = th.global_pair_limit_sample([0.5], 2.0, rng, size=100_000)
    assert sps.kstest(x + 1, "expon").pvalue > 1e-3


def test_global_zero_coefficients(rng):
    assert th.global_pair_limit_sample([0.0, 0.0], 2.0, rng) == 0.0
    assert th.global_bipartite_limit_sample([0.0], 2.0, rng) == 0.0


def test_global_pair_two_harmonics_variance(rng):
    x = th.global_pair_limit_sample([0.5, 0.5], 2.0, rng, size=1_000_000)
    v = x.var(ddof=1)
    # SE of a sample variance: sqrt((m4 - v^2) / n)
    se = math.sqrt((np.mean((x - x.mean()) ** 4) - v * v) / x.size)
    assert abs(v - 5.0) < 5 * se
    assert th.global_pair_limit_variance([0.5, 0.5], 2.0) == pytest.approx(5.0)


def test_global_bipartite_cosine(rng):
    x = th.global_bipartite_limit_sample([0.5], 2.0, rng, size=1_000_000)
    v = x.var(ddof=1)
    se = math.sqrt((np.mean((x - x.mean()) ** 4) - v * v) / x.size)
    assert abs(v - 0.5) < 5 * se
    assert abs(sps.skew(x)) < 5 * math.sqrt(6 / x.size) * 3  # heavy tails inflate the skewness SE
    assert th.global_bipartite_limit_variance([0.5], 2.0) == pytest.approx(0.5)


def test_global_samplers_validate_beta(rng):
    with pytest.raises(ParameterOutOfRange):
        th.global_pair_limit_sample([0.5], -1.0, rng)


# -- means ------------------------------------------------------------------


def test_bipartite_mean_meso():
    f = tf.GaussianProfile(1.0)
    integral = math.sqrt(2 * math.pi)
    assert th.bipartite_mean(f, 100, 10, "meso") == pytest.approx(1e4 / (2 * math.pi * 10) * integral, rel=1e-12)


def test_bipartite_mean_local_equispaced():
    f, n = tf.FreqBump(1.0), 64
    a = ens.sample(ens.EnsembleKind.equispaced(), n)
    direct = st.bipartite_direct(a, a, f, float(n))
    assert abs(direct / th.bipartite_mean(f, n, n, "local") - 1) < 1e-8


def test_bipartite_mean_matches_monte_carlo(rng):
    f, n, L = tf.XBump(1.0), 32, 4.0
    x = np.array([st.bipartite_direct(ens.sample(ens.EnsembleKind.cbe(2.0), n, rng),
                                      ens.sample(ens.EnsembleKind.cbe(2.0), n, rng), f, L) for _ in range(3000)])
    assert abs(x.mean() - th.bipartite_mean(f, n, L, "meso")) < 5 * x.std() / math.sqrt(x.size)


def test_bipartite_mean_local_requires_l_equal_n():
    with pytest.raises(ParameterOutOfRange):
        th.bipartite_mean(tf.FreqBump(1.0), 64, 32, "local")


# -- moment bounds ----------------------------------------------------------


@pytest.mark.parametrize("k,m", [(1, 1), (3, 2), (5, 3), (2, 4)])
def test_jm_bound_beta2(k, m):
    assert th.jm_moment_bound(k, m, 64, 2.0) == pytest.approx(k ** m * math.factorial(m))


def test_jm_bound_second_moment_matches_cue():
    for k in range(1, 11):
        assert th.jm_moment_bound(k, 1, 10, 2.0) == k
        assert th.cue_trace_second_moment(k, 10) <= th.jm_moment_bound(k, 1, 10, 2.0)


def test_jm_bound_beta4_arithmetic():
    # (1 + (1/2) / (100 - 4 + 1/2))^4 * (1/2)^2 * 2^2 * 2!
    want = (1 + 0.5 / 96.5) ** 4 * 0.25 * 4 * 2
    assert th.jm_moment_bound(2, 2, 100, 4.0) == pytest.approx(want, rel=1e-15)
    assert th.jm_moment_bound(2, 2, 100, 4.0) == pytest.approx(2.0417740477, rel=1e-10)


def test_jm_bound_range():
    with pytest.raises(ParameterOutOfRange):
        th.jm_moment_bound(8, 3, 20, 2.0)


def test_cue_second_moment():
    assert th.cue_trace_second_moment(0, 5) == 0
    assert th.cue_trace_second_moment(3, 10) == 3
    assert th.cue_trace_second_moment(30, 10) == 10
    assert th.cue_trace_second_moment(-4, 10) == 4


def test_cue_second_moment_quadrature():
    assert quadrature_oracle(2.0, 2, "trace_second_moment", k=1) == pytest.approx(1.0, abs=1e-6)
