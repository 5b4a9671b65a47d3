import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite as npherm
from scipy.special import gammaincc

from mcsqkd.sources import (
    MOMENT_N_MAX,
    CalibrationError,
    DegenerateSqueezingError,
    McsParams,
    PhotonDistribution,
    SourceKind,
    SourceSpec,
    TailTooHeavyError,
    calibrate_mcs,
    hermite,
    hermite_log_sequence,
    mcs_distribution,
    mean_photon_number,
    poisson_distribution,
    source_distribution,
)


def _printed(xi, c):
    # the printed gamma is rounded, so rebuild it from xi to keep gamma^2 = 1 + xi^2
    return McsParams.from_xi(xi, c)


# --- hermite ------------------------------------------------------------------


def test_hermite_trivial_values():
    assert hermite(0, 1.7) == 1.0
    assert hermite(2, 1.0) == 2.0
    assert abs(hermite(3, math.sqrt(1.5))) < 1e-12


@given(st.integers(0, 30), st.floats(-3, 3))
def test_hermite_matches_numpy_series(n, x):
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    expected = npherm.hermval(x, coef)
    assert hermite(n, x) == pytest.approx(expected, rel=1e-9, abs=1e-9 * max(1.0, 2.0**n))


@given(st.integers(0, 40), st.floats(0.05, 2.5))
def test_hermite_log_sequence_matches_mpmath(n, x):
    sign, logabs = hermite_log_sequence(n, x)
    ref = mpmath.hermite(n, mpmath.mpf(x))
    if abs(ref) < mpmath.mpf(10) ** (-6) * mpmath.mpf(2) ** n:
        return  # near a root the absolute value is cancellation-limited
    assert sign[n] == (1.0 if ref > 0 else -1.0)
    assert logabs[n] == pytest.approx(float(mpmath.log(abs(ref))), abs=1e-9)


def test_hermite_log_sequence_survives_large_orders():
    sign, logabs = hermite_log_sequence(400, 1.3)
    assert np.all(np.isfinite(logabs))
    ref = mpmath.hermite(400, mpmath.mpf(1.3))
    assert logabs[400] == pytest.approx(float(mpmath.log(abs(ref))), rel=1e-10)


# --- poisson --------------------------------------------------------------------


def test_poisson_table_values():
    # reference WCS values: single-photon 0.30326, multi-photon 9.0204e-2
    d = poisson_distribution(0.5, 40)
    assert d[1] == pytest.approx(0.30326, abs=1e-5)
    assert d.multi_photon() == pytest.approx(9.0204e-2, abs=1e-6)


def test_poisson_vacuum():
    d = poisson_distribution(0.0, 40)
    assert d[0] == 1.0
    assert np.count_nonzero(d.probs) == 1


@given(st.floats(0.0, 1.0), st.integers(0, 30))
def test_poisson_tail_matches_incomplete_gamma(mu, cutoff):
    d = poisson_distribution(mu, cutoff)
    # P(X <= k) = Q(k + 1, mu)
    assert d.tail_mass == pytest.approx(1.0 - gammaincc(cutoff + 1, mu), abs=1e-14)


@given(st.floats(0.0, 1.0))
def test_poisson_normalized(mu):
    d = poisson_distribution(mu, 50)
    assert abs(math.fsum(d.probs) - 1.0) < 1e-8
    assert mean_photon_number(d) == pytest.approx(mu, abs=1e-10)


@pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
def test_exact_regime_tail_poisson(mu):
    d = poisson_distribution(mu, 40)
    # the stored tail is 1 - fsum(probs); the true tail is far below double resolution
    assert -1e-12 <= d.tail_mass < 1e-20
    assert float(mpmath.gammainc(41, 0, mu, regularized=True)) < 1e-20


@pytest.mark.parametrize("c", [1.0, 3.0])
def test_squeezed_tail_beyond_protocol_cutoff(c):
    # squeezing fattens the tail: beyond n = 40 the mass is ~1e-15 for C = 1 at mu = 0.5
    d = mcs_distribution(calibrate_mcs(0.5, c), 200)
    assert math.fsum(d.probs[41:]) < 1e-14
    assert mcs_distribution(calibrate_mcs(0.5, c), 40).tail_mass >= -1e-12


# --- distribution container ------------------------------------------------------


def test_distribution_is_read_only_and_padded():
    d = poisson_distribution(0.5, 5)
    with pytest.raises(ValueError):
        d.probs[0] = 0.0
    t = d.truncated(8)
    assert t.shape == (9,) and t[6:].sum() == 0.0
    assert d[99] == 0.0
    assert math.fsum(d.probs) + d.tail_mass == pytest.approx(1.0, abs=1e-15)


def test_distribution_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        PhotonDistribution([0.5, -0.1])
    with pytest.raises(ValueError):
        PhotonDistribution([1.5])


# --- MCS --------------------------------------------------------------------------


def test_mcs2_printed_parameters():
    d = mcs_distribution(_printed(0.531601, 1.0), MOMENT_N_MAX)
    assert d[2] <= 1e-9
    assert d[1] == pytest.approx(0.30113, abs=1e-4)
    assert mean_photon_number(d) == pytest.approx(0.5, abs=1e-3)


def test_mcs3_printed_parameters():
    d = mcs_distribution(_printed(0.229002, 3.0), MOMENT_N_MAX)
    assert d[3] <= 1e-9
    assert d[1] == pytest.approx(0.37757, abs=1e-4)
    assert d.multi_photon() == pytest.approx(5.8606e-2, abs=1e-5)


def test_mcs_degenerate_squeezing():
    with pytest.raises(DegenerateSqueezingError):
        mcs_distribution(McsParams(alpha=0.7, gamma=1.0, xi=0.0))


def test_mcs_params_validation():
    with pytest.raises(ValueError):
        McsParams(alpha=1.0, gamma=1.2, xi=0.5)
    p = McsParams.from_xi(0.3, 2.0)
    assert p.elimination_c == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.3, 5.0))
def test_mcs_mean_matches_closed_form(xi, c):
    # displaced squeezed vacuum: <n> = |alpha|^2 (gamma - xi)^2 + xi^2 for real parameters
    p = McsParams.from_xi(xi, c)
    d = mcs_distribution(p, 200)
    total = math.fsum(np.arange(d.n_max + 1) * d.probs)
    assert total == pytest.approx(p.analytic_mean(), rel=1e-9)
    assert abs(math.fsum(d.probs) - 1.0) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.3, 4.0))
def test_mcs_matches_mpmath_amplitudes(xi, c):
    p = McsParams.from_xi(xi, c)
    d = mcs_distribution(p, 30)
    mp = mpmath.mp
    g, x_, a = mp.mpf(p.gamma), mp.mpf(p.xi), mp.mpf(p.alpha)
    arg = a / mp.sqrt(2 * g * x_)
    for n in (0, 1, 4, 9, 30):
        amp2 = (
            (x_ / (2 * g)) ** n
            / (mp.factorial(n) * g)
            * mp.exp(x_ * a**2 / g - a**2)
            * mp.hermite(n, arg) ** 2
        )
        assert d[n] == pytest.approx(float(amp2), rel=1e-9, abs=1e-300)


def test_mean_photon_number_rejects_heavy_tail():
    with pytest.raises(TailTooHeavyError):
        mean_photon_number(poisson_distribution(5.0, 5))
    assert mean_photon_number(poisson_distribution(0.0, 5)) == 0.0


# --- calibration --------------------------------------------------------------------


def test_calibration_printed_values():
    p1 = calibrate_mcs(0.5, 1.0)
    assert p1.gamma == pytest.approx(1.13252, abs=1e-4)
    assert p1.xi == pytest.approx(0.531601, abs=1e-4)
    p3 = calibrate_mcs(0.5, 3.0)
    assert p3.gamma == pytest.approx(1.02589, abs=1e-4)
    assert p3.xi == pytest.approx(0.229002, abs=1e-4)


@pytest.mark.parametrize("mu", [0.1, 0.3, 0.5, 0.8])
@pytest.mark.parametrize("c, order", [(1.0, 2), (3.0, 3)])
def test_calibration_eliminates_component(mu, c, order):
    p = calibrate_mcs(mu, c)
    d = mcs_distribution(p, MOMENT_N_MAX)
    assert d[order] <= 1e-9
    assert abs(p.gamma**2 - 1.0 - p.xi**2) < 1e-10
    assert abs(p.alpha**2 - c * p.gamma * p.xi) < 1e-10
    assert mean_photon_number(d) == pytest.approx(mu, abs=1e-8)
    assert p.analytic_mean() == pytest.approx(mu, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.2, 6.0))
def test_calibration_round_trip(mu, c):
    try:
        p = calibrate_mcs(mu, c)
    except CalibrationError:
        return
    assert p.analytic_mean() == pytest.approx(mu, abs=1e-8)
    assert abs(p.gamma**2 - 1.0 - p.xi**2) < 1e-10


def test_calibration_errors():
    with pytest.raises(CalibrationError):
        calibrate_mcs(-1.0, 1.0)
    with pytest.raises(CalibrationError):
        calibrate_mcs(1e6, 1.0)


def test_dominance_at_half():
    wcs = poisson_distribution(0.5)
    mcs2 = mcs_distribution(calibrate_mcs(0.5, 1.0))
    mcs3 = mcs_distribution(calibrate_mcs(0.5, 3.0))
    assert mcs2.multi_photon() < wcs.multi_photon()
    assert mcs3.multi_photon() < wcs.multi_photon()
    assert mcs3[1] > wcs[1]


@given(st.floats(0.0, 1.0))
def test_normalization_at_moment_cutoff(mu):
    for d in (
        poisson_distribution(mu, MOMENT_N_MAX),
        source_distribution(SourceSpec(SourceKind.WEAK_COHERENT, mu), MOMENT_N_MAX),
    ):
        assert abs(math.fsum(d.probs) - 1.0) < 1e-8


@pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("c", [1.0, 3.0])
def test_mcs_normalization_at_moment_cutoff(mu, c):
    d = source_distribution(SourceSpec(SourceKind.MODIFIED_COHERENT, mu, c), MOMENT_N_MAX)
    assert abs(math.fsum(d.probs) - 1.0) < 1e-8


def test_source_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec(SourceKind.VACUUM, 0.1)
    with pytest.raises(ValueError):
        SourceSpec(SourceKind.MODIFIED_COHERENT, 0.5)
    with pytest.raises(ValueError):
        SourceSpec(SourceKind.WEAK_COHERENT, -0.5)
    assert SourceSpec(SourceKind.VACUUM).distribution()[0] == 1.0
