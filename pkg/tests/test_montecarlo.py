import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from schatten.linops import DenseSym, diagonal, identity
from schatten.matgen import SyntheticSpec, gen_synthetic
from schatten.montecarlo import (McConfig, NegativeMeanError, NonIntegerPowerError, NotSPSDError,
                                 cheby_sample_bound, pth_power_variance, sample_bound,
                                 schatten_estimate, schatten_exact, spsd_eigenvalues,
                                 trace_estimate, variance_bound)
from schatten.probes import ProbeStream


def test_identity_rademacher_is_exact():
    rep = schatten_estimate(identity(16), McConfig(4, 3, seed=7, distribution="rademacher"))
    assert rep.value == 2.0
    assert trace_estimate(identity(9), 11, seed=1, distribution="rademacher").value == 9.0


def test_zero_matrix_trace():
    assert trace_estimate(DenseSym(np.zeros((4, 4))), 5).value == 0.0


def test_p1_matches_trace_estimate():
    A, _ = gen_synthetic(SyntheticSpec("linear", 30))
    a = schatten_estimate(A, McConfig(1, 50, seed=3))
    b = trace_estimate(A, 50, seed=3)
    assert a.value == b.value


def test_trace_estimate_diag123():
    rep = trace_estimate(diagonal([1, 2, 3]), 10**5, seed=2)
    assert abs(rep.value - 6.0) <= 5 * math.sqrt(2 * 14 / 1e5)


def test_hand_computed_samples():
    # X^p for one probe equals w^T A^p w
    A = diagonal([1.0, 2.0, 3.0])
    for p in (1, 2, 3, 4, 5):
        rep = schatten_estimate(A, McConfig(p, 4, seed=5))
        W = ProbeStream(3, 5).block(0, 4)
        expected = np.sum(W**2 * np.array([1.0, 2.0, 3.0])[:, None] ** p, axis=0)
        assert np.allclose(rep.samples, expected, rtol=1e-13)


@pytest.mark.parametrize("p", [1, 2, 3, 6, 7])
def test_matvec_budget(p):
    A = diagonal(np.arange(1.0, 6.0))
    rep = schatten_estimate(A, McConfig(p, 13))
    assert rep.matvecs == math.ceil(p / 2) * 13 == A.matvecs


def test_non_integer_p_rejected_with_hint():
    with pytest.raises(NonIntegerPowerError, match="Chebyshev"):
        McConfig(2.5, 10)
    assert McConfig(3.0, 1).p == 3


def test_thread_count_does_not_change_result(monkeypatch):
    import schatten.montecarlo as mc
    monkeypatch.setattr(mc, "BLOCK_ENTRIES", 64)
    A, _ = gen_synthetic(SyntheticSpec("quadratic", 16))
    ref = schatten_estimate(A, McConfig(3, 101, seed=11, threads=1))
    for t in (2, 3, 8):
        rep = schatten_estimate(A, McConfig(3, 101, seed=11, threads=t))
        assert rep.value == ref.value
        assert np.array_equal(rep.samples, ref.samples)


def test_threads_from_environment(monkeypatch):
    from schatten.montecarlo import resolve_threads
    monkeypatch.setenv("SCHATTEN_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2


def test_streaming_mode_discards_samples():
    rep = schatten_estimate(identity(3), McConfig(2, 10, keep_samples=False))
    assert rep.samples is None


def test_negative_mean_raises():
    A = DenseSym(np.diag([-1.0, -2.0]))
    with pytest.raises(NegativeMeanError):
        schatten_estimate(A, McConfig(1, 5))


def test_report_schema():
    d = schatten_estimate(identity(4), McConfig(2, 3, seed=1)).to_dict()
    for key in ("value", "p", "method", "M", "N", "matvecs", "seed", "elapsed_s"):
        assert key in d


# -- dense oracle ----------------------------------------------------------------

def test_exact_small_cases():
    assert schatten_exact(diagonal([1, 2, 3]), 2) == pytest.approx(math.sqrt(14), rel=1e-14)
    assert schatten_exact(identity(5), 3) == pytest.approx(5 ** (1 / 3), rel=1e-14)


def test_exact_quadratic_family_partial_sum():
    oracle = float(mpmath.sqrt(mpmath.fsum(mpmath.mpf(k) ** -4 for k in range(1, 101))))
    A, _ = gen_synthetic(SyntheticSpec("quadratic", 100))
    assert schatten_exact(A, 2) == pytest.approx(oracle, rel=1e-10)


def test_exact_large_p_no_overflow():
    A = diagonal([1e3, 2e3])
    assert schatten_exact(A, 500) == pytest.approx(2e3 * (1 + 2.0**-500) ** (1 / 500))


def test_non_spsd_rejected():
    with pytest.raises(NotSPSDError):
        schatten_exact(diagonal([1.0, -0.5]), 2)
    # tiny negative eigenvalues are clipped
    lam = spsd_eigenvalues(np.diag([1.0, -1e-13]))
    assert lam[0] == 0.0


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=8).filter(lambda v: max(v) > 0),
       st.floats(1.0, 50.0))
def test_norm_monotone_in_p(vals, p):
    A = diagonal(vals)
    assert schatten_exact(A, p + 1.0) <= schatten_exact(A, p) * (1 + 1e-12)
    assert schatten_exact(A, p) >= max(vals) * (1 - 1e-12)


# -- bounds ----------------------------------------------------------------------

def _mp_bound(C, eps, delta):
    return int(mpmath.ceil(C * mpmath.mpf(eps) ** -2 * mpmath.log(2 / mpmath.mpf(delta))))


def test_sample_bound_values():
    assert sample_bound(1.0, 2 / math.e) == 8
    assert sample_bound(1.0, 0.7357588823) == 8
    assert sample_bound(0.1, 0.05) == 2952 == _mp_bound(8, "0.1", "0.05")
    assert sample_bound(0.2, 0.1) == 600 == _mp_bound(8, "0.2", "0.1")
    assert cheby_sample_bound(0.5, 0.01) == 1526 == _mp_bound(72, "0.5", "0.01")


@given(st.floats(0.01, 1.0), st.floats(1e-6, 0.99))
def test_sample_bound_matches_high_precision(eps, delta):
    exact = 8 * mpmath.mpf(eps) ** -2 * mpmath.log(2 / mpmath.mpf(delta))
    M = sample_bound(eps, delta)
    # integer within the documented 1e-9 relative slack of the ceiling
    assert M >= exact * (1 - 1e-9) and M - 1 < exact


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (1.5, 0.1), (0.1, 0.0), (0.1, 1.0)])
def test_sample_bound_range(eps, delta):
    with pytest.raises(ValueError):
        sample_bound(eps, delta)


def test_variance_bound_values():
    A = diagonal([1, 2, 3])
    assert variance_bound(A, 2, 100) == pytest.approx(0.14, rel=1e-13)
    assert variance_bound(A, 1, 10) == pytest.approx(2 * 14 / 10, rel=1e-13)
    n, p, M = 6, 3, 7
    assert variance_bound(identity(n), p, M) == pytest.approx(2 * n ** (2 / p - 1) / M)
    assert pth_power_variance(A, 2, 100) == pytest.approx(2 * 98 / 100)
    with pytest.raises(ValueError):
        variance_bound(DenseSym(np.zeros((2, 2))), 2, 1)


# -- statistical properties --------------------------------------------------------

def test_unbiased_pth_power():
    A = diagonal([1, 2, 3])
    R, M = 500, 1000
    vals = [schatten_estimate(A, McConfig(2, M, seed=r)).p_power_mean for r in range(R)]
    assert abs(np.mean(vals) - 14) <= 3 * math.sqrt(2 * 98 / (M * R))


def test_jensen_direction():
    A, d = gen_synthetic(SyntheticSpec("linear", 20))
    p, M, R = 3, 5, 10**4
    big = schatten_estimate(A, McConfig(p, M * R, seed=1)).samples.reshape(R, M)
    X = big.mean(axis=1) ** (1 / p)
    exact = np.sum(d**p) ** (1 / p)
    assert X.mean() <= exact + 5 * X.std(ddof=1) / math.sqrt(R)


def test_error_decays_with_M():
    A, d = gen_synthetic(SyntheticSpec("linear", 50))
    exact = np.sum(d**3) ** (1 / 3)
    errs = []
    for M in (10, 40, 160, 640):
        vals = np.array([schatten_estimate(A, McConfig(3, M, seed=1000 * M + r)).value
                         for r in range(500)])
        errs.append(np.mean(np.abs(vals - exact)) / exact)
    inversions = [(a, b) for a, b in zip(errs, errs[1:]) if b > a]
    assert len(inversions) <= 1 and all(b < 1.1 * a for a, b in inversions)
