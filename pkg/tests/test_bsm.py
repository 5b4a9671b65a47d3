import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcsqkd.bsm import (
    BASIS_COMBOS,
    Basis,
    ChannelDetector,
    ClickModel,
    CoincidencePattern,
    PhotonBudgetError,
    Polarization,
    exact_single_photon_stats,
    gain_and_qber,
    mode_vector,
    pattern_yields,
    polarization_gain,
    subset_probability,
    subset_yields,
    yield_pair,
    yield_tables,
)
from mcsqkd.sources import calibrate_mcs, mcs_distribution, poisson_distribution

H, V, P, M = Polarization.H, Polarization.V, Polarization.PLUS, Polarization.MINUS
ETAS = st.floats(0.0, 1.0)
DARKS = st.floats(0.0, 1e-5)
Z_PAIRS = st.sampled_from(BASIS_COMBOS[Basis.Z])
X_PAIRS = st.sampled_from(BASIS_COMBOS[Basis.X])
ANY_PAIR = st.one_of(Z_PAIRS, X_PAIRS)


def _perm(a):
    n = a.shape[0]
    return sum(np.prod([a[i, s[i]] for i in range(n)]) for s in itertools.permutations(range(n))) if n else 1.0


def _brute_force_yields(n, m, pa, pb, eta, dark):
    """Permanent-based output distribution, then literal per-detector click factors."""
    cols = np.column_stack(
        [mode_vector("alice", pa)] * n + [mode_vector("bob", pb)] * m
    ) if n + m else np.zeros((4, 0))

    def click(k):
        return 1 - (1 - eta) ** k + dark

    def silent(k):
        return ((1 - eta) * (1 - dark)) ** k

    patterns = [((0, 1), (2, 3)), ((2, 3), (0, 1)), ((0, 3), (2, 1)), ((2, 1), (0, 3))]
    ys = np.zeros(4)
    for k in itertools.product(range(n + m + 1), repeat=4):
        if sum(k) != n + m:
            continue
        rows = [i for i in range(4) for _ in range(k[i])]
        norm = math.prod(math.factorial(x) for x in k) * math.factorial(n) * math.factorial(m)
        w = abs(_perm(cols[rows, :])) ** 2 / norm
        for j, (on, off) in enumerate(patterns):
            ys[j] += w * click(k[on[0]]) * click(k[on[1]]) * silent(k[off[0]]) * silent(k[off[1]])
    return ys


# --- types ------------------------------------------------------------------------


def test_bell_classes():
    assert CoincidencePattern.D1H_D1V.bell_class == "psi_plus"
    assert CoincidencePattern.D2H_D2V.bell_class == "psi_plus"
    assert CoincidencePattern.D1H_D2V.bell_class == "psi_minus"
    assert CoincidencePattern.D2H_D1V.bell_class == "psi_minus"


def test_channel_detector_validation():
    with pytest.raises(ValueError):
        ChannelDetector(1.5, 0.0)
    with pytest.raises(ValueError):
        ChannelDetector(0.5, 0.02)
    assert ChannelDetector(0.5, 0.0, "normalized").click_model is ClickModel.NORMALIZED


def test_polarization_basis():
    assert H.basis is Basis.Z and P.basis is Basis.X
    # orthonormal diagonal modes
    assert abs(np.vdot(mode_vector("alice", P), mode_vector("alice", M))) < 1e-15


# --- subset probabilities ------------------------------------------------------------


def test_subset_probability_examples():
    assert subset_probability(1, 0, 0, 0) == 0.5
    assert subset_probability(1, 0, 1, 0) == 0.5
    for p, q in itertools.product(range(2), repeat=2):
        assert subset_probability(1, 1, p, q) == 0.25


@pytest.mark.parametrize("n, m", list(itertools.product(range(7), repeat=2)))
def test_subset_probabilities_sum_to_one(n, m):
    total = math.fsum(subset_probability(n, m, p, q) for p in range(n + 1) for q in range(m + 1))
    assert total == pytest.approx(1.0, abs=1e-15)


@given(st.integers(0, 8), st.integers(0, 8), st.data())
def test_subset_probability_amplitude_form(n, m, data):
    p = data.draw(st.integers(0, n))
    q = data.draw(st.integers(0, m))
    f = math.factorial
    amp = math.comb(n, p) * math.comb(m, q) * math.sqrt(f(p) * f(q) * f(n - p) * f(m - q))
    amp /= math.sqrt(2 ** (n + m) * f(n) * f(m))
    assert subset_probability(n, m, p, q) == pytest.approx(amp**2, rel=1e-12)


def test_subset_probability_out_of_range():
    with pytest.raises(IndexError):
        subset_probability(1, 1, 2, 0)
    with pytest.raises(IndexError):
        subset_probability(20, 13, 0, 0)


# --- subset yields --------------------------------------------------------------------


def test_subset_yield_examples():
    perfect = ChannelDetector(1.0, 0.0)
    assert subset_yields(1, 1, 1, 1, perfect) == pytest.approx((1.0, 0.0, 0.0, 0.0))
    assert subset_yields(1, 0, 1, 1, perfect) == pytest.approx((0.0, 0.0, 1.0, 0.0))
    cd = ChannelDetector(0.37, 4e-6)
    y = subset_yields(1, 1, 1, 1, ChannelDetector(0.37, 0.0))
    assert y[0] == pytest.approx(0.37**2)
    assert subset_yields(0, 0, 0, 0, cd) == pytest.approx((16e-12,) * 4)


# --- yield pairs ------------------------------------------------------------------------


def test_yield_pair_examples():
    perfect = ChannelDetector(1.0, 0.0)
    r = yield_pair(1, 1, H, V, perfect)
    assert (r.gain, r.error_fraction) == pytest.approx((1.0, 0.0))
    assert yield_pair(1, 1, H, H, perfect).gain == pytest.approx(0.0, abs=1e-15)
    r = yield_pair(1, 1, P, P, perfect)
    assert r.gain == pytest.approx(0.5) and r.error_fraction == pytest.approx(0.0, abs=1e-15)
    dark = 1e-5
    r = yield_pair(0, 0, P, M, ChannelDetector(0.4, dark))
    assert r.gain == pytest.approx(4 * dark**2)


def test_yield_pair_rejects_mixed_bases_and_budget():
    with pytest.raises(ValueError):
        yield_pair(1, 1, H, P, ChannelDetector(1.0, 0.0))
    with pytest.raises(PhotonBudgetError):
        yield_pair(17, 16, H, V, ChannelDetector(1.0, 0.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), ANY_PAIR, ETAS, DARKS)
def test_yields_match_permanent_oracle(n, m, pols, eta, dark):
    cd = ChannelDetector(eta, dark)
    got = pattern_yields(n, m, *pols, cd)
    np.testing.assert_allclose(got, _brute_force_yields(n, m, *pols, eta, dark), rtol=1e-10, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8), st.sampled_from([(H, V), (V, H)]), ETAS, DARKS,
       st.sampled_from(list(ClickModel)))
def test_engine_matches_closed_form(n, m, pols, eta, dark, model):
    cd = ChannelDetector(eta, dark, model)
    a = pattern_yields(n, m, *pols, cd)
    b = pattern_yields(n, m, *pols, cd, engine=True)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1), st.integers(0, 1), ANY_PAIR, ETAS, ETAS, DARKS, DARKS)
def test_gain_monotone_in_eta_and_dark(n, m, pols, e1, e2, d1, d2):
    lo_e, hi_e = sorted((e1, e2))
    lo_d, hi_d = sorted((d1, d2))
    g = lambda e, d: yield_pair(n, m, *pols, ChannelDetector(e, d)).gain  # noqa: E731
    assert g(lo_e, lo_d) <= g(hi_e, lo_d) + 1e-13
    assert g(lo_e, lo_d) <= g(lo_e, hi_d) + 1e-13


def test_multi_photon_gain_can_fall_with_eta():
    # more transmitted photons means more three- and four-detector events, which are discarded
    lossy = _brute_force_yields(1, 3, H, V, 0.5, 0.0).sum()
    ideal = _brute_force_yields(1, 3, H, V, 1.0, 0.0).sum()
    assert ideal < lossy
    assert yield_pair(1, 3, H, V, ChannelDetector(1.0, 0.0)).gain == pytest.approx(ideal)
    assert yield_pair(1, 3, H, V, ChannelDetector(0.5, 0.0)).gain == pytest.approx(lossy)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8), ANY_PAIR, ETAS, DARKS)
def test_yield_bounds(n, m, pols, eta, dark):
    ys = pattern_yields(n, m, *pols, ChannelDetector(eta, dark))
    assert np.all(ys >= -1e-15)
    assert np.all(ys <= (1 + dark) ** 2 + 1e-12)
    assert ys.sum() <= 1 + 1e-4


@given(ETAS, st.sampled_from([(H, V), (V, H)]))
def test_single_photon_z_error_free(eta, pols):
    assert yield_pair(1, 1, *pols, ChannelDetector(eta, 0.0)).error_fraction == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), ETAS)
def test_z_errors_come_only_from_same_polarization(n, m, eta):
    cd = ChannelDetector(eta, 0.0)
    assert yield_pair(n, m, H, V, cd).error_gain == 0.0
    assert yield_pair(n, m, V, H, cd).error_gain == 0.0
    hh = yield_pair(n, m, H, H, cd)
    assert hh.error_gain == pytest.approx(hh.gain)
    if n + m < 2 or n == 0 or m == 0:
        # a single party's photons all share one polarization, so no H/V coincidence
        assert hh.gain == pytest.approx(0.0, abs=1e-15)


# --- intensity level ---------------------------------------------------------------------


def test_relabeling_symmetry():
    cd = ChannelDetector(0.2, 6e-6)
    d = poisson_distribution(0.5)
    assert polarization_gain(d, d, H, V, cd).gain == pytest.approx(
        polarization_gain(d, d, V, H, cd).gain, rel=1e-13
    )


def test_vacuum_without_darks_has_zero_gain():
    vac = poisson_distribution(0.0)
    r = gain_and_qber(vac, vac, Basis.Z, ChannelDetector(0.5, 0.0))
    assert r.gain == 0.0 and r.error_fraction == 0.0


@pytest.mark.parametrize("basis", list(Basis))
@pytest.mark.parametrize("eta", [1.0, 0.1, 0.01])
def test_basis_average_matches_per_pair_sum(basis, eta):
    cd = ChannelDetector(eta, 6e-6)
    d = mcs_distribution(calibrate_mcs(0.5, 3.0))
    fast = gain_and_qber(d, d, basis, cd)
    pairs = [polarization_gain(d, d, pa, pb, cd) for pa, pb in BASIS_COMBOS[basis]]
    q = math.fsum(r.gain for r in pairs) / 4
    eq = math.fsum(r.error_gain for r in pairs) / 4
    assert fast.gain == pytest.approx(q, rel=1e-12)
    assert fast.error_gain == pytest.approx(eq, rel=1e-10, abs=1e-18)


def test_yield_tables_are_read_only():
    t = yield_tables(ChannelDetector(0.3, 6e-6), Basis.X)
    with pytest.raises(ValueError):
        t.gain[0, 0] = 1.0
    assert np.all(t.error <= t.gain + 1e-16)


@pytest.mark.parametrize("basis", list(Basis))
@pytest.mark.parametrize("c", [None, 3.0])
def test_cutoff_twelve_is_converged(basis, c):
    d = poisson_distribution(0.5) if c is None else mcs_distribution(calibrate_mcs(0.5, c))
    cd = ChannelDetector(1.0, 6e-6)
    q12 = gain_and_qber(d, d, basis, cd, 12).gain
    q16 = gain_and_qber(d, d, basis, cd, 16).gain
    assert abs(q16 - q12) / q16 < 1e-8


def test_cutoff_twelve_truncates_squeezed_tail():
    # C = 1 squeezing leaves P(12) ~ 2e-5; at eta = 0.1 the neglected multi-photon
    # yields move Q by a few 1e-4 relative
    d = mcs_distribution(calibrate_mcs(0.5, 1.0))
    cd = ChannelDetector(0.1, 6e-6)
    q12 = gain_and_qber(d, d, Basis.Z, cd, 12).gain
    q16 = gain_and_qber(d, d, Basis.Z, cd, 16).gain
    assert 1e-4 < (q16 - q12) / q16 < 1e-3


# --- exact single-photon statistics ---------------------------------------------------------


def test_single_photon_stats_perfect_channel():
    s = exact_single_photon_stats(ChannelDetector(1.0, 0.0))
    assert s.y11_z == pytest.approx(0.5)
    assert s.e11_x == pytest.approx(0.0, abs=1e-15)


@given(ETAS)
def test_single_photon_yield_scales_with_eta_squared(eta):
    s = exact_single_photon_stats(ChannelDetector(eta, 0.0))
    assert s.y11_z == pytest.approx(eta**2 / 2, abs=1e-15)
    assert s.y11_x == pytest.approx(eta**2 / 2, abs=1e-15)


def test_normalized_click_model_is_close():
    a = gain_and_qber(poisson_distribution(0.5), poisson_distribution(0.5), Basis.Z,
                      ChannelDetector(0.1, 6e-6))
    b = gain_and_qber(poisson_distribution(0.5), poisson_distribution(0.5), Basis.Z,
                      ChannelDetector(0.1, 6e-6, ClickModel.NORMALIZED))
    # each detector factor moves by a relative O(k * d)
    assert a.gain != b.gain
    assert a.gain == pytest.approx(b.gain, rel=1e-4)
