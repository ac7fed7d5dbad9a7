import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from infogeo.divergence import (
    Metric,
    divergence_from_t,
    estimate_divergence,
    fisher_approximation,
    gaussian_divergence_oracle,
    pointwise_g,
    t_values,
)
from infogeo.errors import ValidationError
from infogeo.kde import DensityEstimate

from conftest import random_orthonormal

SYMMETRIC = [Metric.HELLINGER_SQ, Metric.SYMMETRIC_KL, Metric.BHATTACHARYA]


def _pair(seed, d=2, n_f=120, n_g=90, shift=0.8, scale=1.3):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n_f, d))
    g = rng.standard_normal((n_g, d)) * scale + shift
    return f, g


# --- T values ---------------------------------------------------------------

def test_t_identical_is_half():
    x = np.random.default_rng(0).standard_normal((50, 2))
    tv = t_values(DensityEstimate.from_data(x), DensityEstimate.from_data(x))
    assert np.all(tv.on_f == 0.5) and np.all(tv.on_g == 0.5)


def test_t_far_separated():
    rng = np.random.default_rng(1)
    f = DensityEstimate(rng.standard_normal((40, 1)), [1.0])
    g = DensityEstimate(rng.standard_normal((40, 1)) + 1000.0, [1.0])
    tv = t_values(f, g)
    assert np.all(tv.on_f >= 1 - 1e-6)
    assert np.all(tv.on_g <= 1e-6)
    assert np.all(tv.on_f < 1) and np.all(tv.on_g > 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-3, 3))
def test_t_swap_is_exact_complement(seed, shift):
    f, g = _pair(seed, shift=shift)
    a = t_values(f, g)
    b = t_values(g, f)
    assert np.array_equal(b.on_f, 1.0 - a.on_g)
    assert np.array_equal(b.on_g, 1.0 - a.on_f)
    assert np.all((a.on_f > 0) & (a.on_f < 1))


def test_t_projection_recomputes_bandwidth():
    f, g = _pair(2, d=3)
    A = random_orthonormal(2, 3, np.random.default_rng(0))
    a = t_values(f, g, A)
    b = t_values(f @ A.T, g @ A.T)
    np.testing.assert_allclose(a.on_f, b.on_f, rtol=1e-12)


# --- estimators -------------------------------------------------------------

@pytest.mark.parametrize("metric", list(Metric))
def test_identical_sets_give_zero(metric):
    x = np.random.default_rng(3).standard_normal((80, 2))
    assert estimate_divergence(metric, x, x) == 0.0


def test_hellinger_saturates_for_far_sets():
    rng = np.random.default_rng(4)
    f = rng.standard_normal((500, 1)) - 100
    g = rng.standard_normal((500, 1)) + 100
    val = estimate_divergence("hellinger", f, g)
    assert 1.99 <= val <= 2.0


def test_skl_unit_gaussians():
    rng = np.random.default_rng(5)
    f = rng.standard_normal((2000, 1))
    g = rng.standard_normal((2000, 1)) + 1.0
    assert estimate_divergence("skl", f, g) == pytest.approx(1.0, abs=0.2)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    d=st.integers(1, 4),
    shift=st.floats(-2, 2),
    scale=st.floats(0.3, 3),
)
def test_symmetry_bounds_and_identity(seed, d, shift, scale):
    f, g = _pair(seed, d=d, shift=shift, scale=scale)
    for metric in SYMMETRIC:
        assert estimate_divergence(metric, f, g) == estimate_divergence(metric, g, f)
    h = estimate_divergence("hellinger", f, g)
    assert 0.0 <= h <= 2.0
    assert estimate_divergence("skl", f, g) >= 0.0
    tv = t_values(f, g)
    b = divergence_from_t("bhattacharya", tv)
    h = divergence_from_t("hellinger", tv)
    assert abs(b - (-np.log(1 - h / 2))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(t=st.floats(1e-12, 1 - 1e-12))
def test_pointwise_nonnegative(t):
    assert pointwise_g("hellinger", t) >= 0
    assert pointwise_g("skl", t) >= 0
    assert pointwise_g("hellinger", t) <= 1


def test_plain_kl_can_be_negative_pointwise():
    # G(T) = T log(T/(1-T)) < 0 below T = 1/2
    assert pointwise_g("kl", 0.3) < 0


def test_skl_consistent_with_oracle():
    rng = np.random.default_rng(6)
    cov = np.array([[1.0, 0.3], [0.3, 0.8]])
    f = rng.multivariate_normal([0, 0], np.eye(2), 2000)
    g = rng.multivariate_normal([0.8, -0.4], cov, 2000)
    for metric in ("skl", "hellinger"):
        truth = gaussian_divergence_oracle(metric, [0, 0], np.eye(2), [0.8, -0.4], cov)
        assert estimate_divergence(metric, f, g) == pytest.approx(truth, rel=0.2)


def test_dimension_mismatch():
    with pytest.raises(ValidationError, match="dimension mismatch"):
        estimate_divergence("skl", np.zeros((5, 2)), np.zeros((5, 3)))


def test_frozen_bandwidths_used():
    f, g = _pair(7, d=1)
    wide = estimate_divergence("skl", f, g, bandwidths=([3.0], [3.0]))
    default = estimate_divergence("skl", f, g)
    assert wide < default


# --- Fisher scaling ---------------------------------------------------------

def test_fisher_approximation_examples():
    assert fisher_approximation("skl", 1.0) == 1.0
    assert fisher_approximation("hellinger", 0.0) == 0.0
    assert fisher_approximation("hellinger", 0.25) == 1.0


@pytest.mark.parametrize("metric", ["kl", "bhattacharya"])
def test_fisher_approximation_unsupported(metric):
    with pytest.raises(ValidationError):
        fisher_approximation(metric, 0.5)


# --- closed-form oracle -----------------------------------------------------

def _quad(fun):
    return integrate.quad(fun, -40, 40, limit=200, epsabs=1e-12)[0]


def test_oracle_examples():
    assert gaussian_divergence_oracle("kl", [0], [[1]], [1], [[1]]) == pytest.approx(0.5, abs=1e-15)
    for metric in Metric:
        assert gaussian_divergence_oracle(metric, [1, 2], np.eye(2), [1, 2], np.eye(2)) == 0.0
    assert gaussian_divergence_oracle("skl", [0], [[1]], [0], [[4]]) == pytest.approx(1.125, abs=1e-14)


@pytest.mark.parametrize("m1,s1,m2,s2", [(0, 1, 0, 2), (0.3, 0.7, -1.1, 1.6), (2, 1.5, 2.5, 0.4)])
def test_oracle_matches_quadrature(m1, s1, m2, s2):
    p, q = stats.norm(m1, s1), stats.norm(m2, s2)
    kl_pq = _quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)))
    kl_qp = _quad(lambda x: q.pdf(x) * (q.logpdf(x) - p.logpdf(x)))
    bc = _quad(lambda x: np.sqrt(p.pdf(x) * q.pdf(x)))
    args = ([m1], [[s1**2]], [m2], [[s2**2]])
    assert gaussian_divergence_oracle("kl", *args) == pytest.approx(kl_pq, rel=1e-8)
    assert gaussian_divergence_oracle("skl", *args) == pytest.approx(kl_pq + kl_qp, rel=1e-8)
    assert gaussian_divergence_oracle("bhattacharya", *args) == pytest.approx(-np.log(bc), rel=1e-8)
    hel = _quad(lambda x: (np.sqrt(p.pdf(x)) - np.sqrt(q.pdf(x))) ** 2)
    assert gaussian_divergence_oracle("hellinger", *args) == pytest.approx(hel, rel=1e-8)


def test_oracle_rejects_non_spd():
    with pytest.raises(ValidationError, match="not positive definite"):
        gaussian_divergence_oracle("kl", [0, 0], [[1, 2], [2, 1]], [0, 0], np.eye(2))


def _random_spd(d, rng):
    M = rng.standard_normal((d, d))
    return M @ M.T + 0.2 * np.eye(d)


def test_oracle_projection_never_increases():
    rng = np.random.default_rng(8)
    worst = -np.inf
    for _ in range(120):
        d = int(rng.integers(2, 7))
        m = int(rng.integers(1, d))
        mu1, mu2 = rng.standard_normal(d), rng.standard_normal(d)
        S1, S2 = _random_spd(d, rng), _random_spd(d, rng)
        A = random_orthonormal(m, d, rng)
        for metric in ("kl", "skl", "hellinger"):
            full = gaussian_divergence_oracle(metric, mu1, S1, mu2, S2)
            proj = gaussian_divergence_oracle(metric, A @ mu1, A @ S1 @ A.T, A @ mu2, A @ S2 @ A.T)
            worst = max(worst, proj - full)
    assert worst <= 1e-10


def test_logit_carried_without_cancellation():
    from infogeo.divergence import LOGIT_CLAMP, _ratio_from_logs

    t, lt = _ratio_from_logs(np.array([20.0, -20.0, 40.0]), np.zeros(3))
    assert lt[0] == 20.0 and lt[1] == -20.0
    assert lt[2] == LOGIT_CLAMP
    assert t[0] + t[1] == 1.0
    # rebuilding the logit from the rounded T is off in the 8th digit
    assert abs(np.log(t[0]) - np.log(1 - t[0]) - 20.0) > 1e-9
