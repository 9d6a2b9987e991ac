import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dmkit import (
    InputError,
    NominalInstabilityError,
    classical_margins,
    gain_margins,
    phase_margin,
    poles,
    scalar_close,
    is_stable,
    tf,
    tfm,
)

L1 = tf([25], [1, 10, 10, 10])

BADL = tf(
    [-47.252, -20.234, -135.4086, 61.6166, 804.6454, 600.0611, 59.1451, 1.888],
    [99.8696, 175.5045, 673.7378, 890.5109, 553.1742, -49.2268, 12.1448, 1.0],
)


def test_example1_gain_margins():
    gl, gu, (wl, wu) = gain_margins(L1)
    assert gl == 0.0
    assert_allclose(gu, 3.6, rtol=1e-9)
    assert wl is None
    assert_allclose(wu, math.sqrt(10), rtol=1e-9)


def test_example1_phase_margin():
    phi, w = phase_margin(L1)
    assert_allclose(math.degrees(phi), 29.1103691316, rtol=1e-8)
    assert_allclose(w, 1.7844356208, rtol=1e-8)


def test_example1_full_report():
    cm = classical_margins(L1)
    assert cm.g_lower == 0.0
    assert_allclose(cm.g_upper, 3.6, rtol=1e-9)
    assert_allclose(math.degrees(cm.phi_upper), 29.1103691316, rtol=1e-8)
    assert_allclose(cm.critical_gain_freq, 3.1622776602, rtol=1e-8)
    assert_allclose(cm.critical_phase_freq, 1.7844356208, rtol=1e-8)
    assert cm.phase_crossover_freqs == (cm.critical_gain_freq,)
    assert cm.gain_crossover_freqs == (cm.critical_phase_freq,)
    assert cm.extra_stable_gain_intervals == ()


def test_example1_margin_boundaries_destabilize():
    # just inside the reported interval stays stable, just beyond does not
    assert is_stable(scalar_close(L1, 3.6 * 0.999))
    assert not is_stable(scalar_close(L1, 3.6 * 1.001))
    phi = classical_margins(L1).phi_upper
    assert is_stable(scalar_close(L1, np.exp(1j * 0.999 * phi)))
    assert not is_stable(scalar_close(L1, np.exp(1j * 1.001 * phi)))


def test_badl_margins():
    cm = classical_margins(BADL)
    assert_allclose(cm.g_lower, 0.2000872390, rtol=1e-8)
    assert_allclose(cm.g_upper, 2.1135528655, rtol=1e-8)
    assert_allclose(math.degrees(cm.phi_upper), 44.8555511, rtol=1e-8)
    # upper gain margin binds through loss of well-posedness at w = inf
    assert cm.critical_gain_freq == math.inf
    assert math.inf in cm.phase_crossover_freqs
    assert_allclose(min(cm.phase_crossover_freqs), 0.18616710, rtol=1e-6)
    assert_allclose(cm.critical_phase_freq, 1.43321048, rtol=1e-6)


def test_badl_paper_rounding():
    cm = classical_margins(BADL)
    assert_allclose(cm.g_lower, 0.2, rtol=0.03)
    assert_allclose(cm.g_upper, 2.1, rtol=0.03)
    assert_allclose(math.degrees(cm.phi_upper), 45.0, rtol=0.03)


def test_integrator_loop_has_open_gain_interval():
    cm = classical_margins(tf([1], [1, 0]))
    assert cm.g_lower == 0.0
    assert cm.g_upper == math.inf
    assert_allclose(math.degrees(cm.phi_upper), 90.0, rtol=1e-9)
    assert_allclose(cm.critical_phase_freq, 1.0, rtol=1e-9)


def test_no_gain_crossover_means_infinite_phase_margin():
    # |L| < 1 everywhere
    cm = classical_margins(tf([0.5], [1, 1]))
    assert cm.phi_upper == math.inf
    assert cm.critical_phase_freq is None


def test_unstable_nominal_rejected():
    with pytest.raises(NominalInstabilityError):
        classical_margins(tf([1], [1, -1]))


def test_mimo_rejected():
    P = tfm([[([1], [1, 1]), ([0], [1])], [([0], [1]), ([1], [1, 2])]])
    with pytest.raises(InputError):
        classical_margins(P)


def test_positive_feedback_sign_handling():
    # -1/s under positive feedback is 1/s under negative feedback
    cm = classical_margins(tf([-1], [1, 0], feedback_sign="positive"))
    assert cm.g_lower == 0.0
    assert cm.g_upper == math.inf
    assert_allclose(math.degrees(cm.phi_upper), 90.0, rtol=1e-9)


def test_gain_candidates_are_axis_crossings():
    # closing at each reported margin puts poles on the axis
    for g, w in ((3.6, math.sqrt(10)),):
        closed = scalar_close(L1, g)
        assert min(abs(z - 1j * w) for z in poles(closed)) < 1e-6


def test_multiple_phase_crossings_loop():
    # L = 25 (s+1)/(s^3+10s^2+10s+10) scaled down: add a stable window probe
    num = [-47.252, -20.234, -135.4086, 61.6166, 804.6454, 600.0611, 59.1451, 1.888]
    den = [99.8696, 175.5045, 673.7378, 890.5109, 553.1742, -49.2268, 12.1448, 1.0]
    gl, gu, _ = gain_margins(tf(num, den))
    # interval around 1 is maximal: both ends destabilize
    assert not is_stable(scalar_close(tf(num, den), gl * 0.98))
    assert is_stable(scalar_close(tf(num, den), gl * 1.02))
    assert is_stable(scalar_close(tf(num, den), gu * 0.98))
    assert not is_stable(scalar_close(tf(num, den), gu * 1.02))
