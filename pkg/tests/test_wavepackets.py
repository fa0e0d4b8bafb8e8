import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockwave.wavepackets import (BasisSet, GaussianPacket, RectangularPacket, SampledPacket, gram_matrix,
                                  load_csv, overlap, packet_from_config, quadrature_grid)


def test_gaussian_peak_value():
    assert GaussianPacket(1.0)(0.0) == pytest.approx((2 * math.pi) ** -0.25, abs=1e-12)
    assert abs(GaussianPacket(1.0)(0.0)) == pytest.approx(0.63161878, abs=1e-8)


def test_rectangular_value():
    pkt = RectangularPacket(4.0)
    assert pkt(2.0) == pytest.approx(0.5)
    assert pkt(-0.1) == 0 and pkt(4.0) == 0


def test_gaussian_norm_by_independent_simpson():
    from scipy.integrate import simpson
    pkt = GaussianPacket(1.46, 3.0)
    t = np.linspace(3 - 8 / 1.46, 3 + 8 / 1.46, 4001)
    assert simpson(np.abs(pkt(t)) ** 2, x=t) == pytest.approx(1, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 50), st.floats(-20, 20), st.floats(-5, 5))
def test_gaussian_norm_and_symmetry(omega, t_a, s):
    pkt = GaussianPacket(omega, t_a)
    assert pkt.norm_check() == pytest.approx(1, abs=1e-9)
    s = s / omega
    assert abs(pkt(t_a + s)) == pytest.approx(abs(pkt(t_a - s)), abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(-20, 20), st.floats(-50, 50))
def test_detuning_keeps_modulus_and_uses_negative_phase(omega, detuning, t):
    plain, det = GaussianPacket(omega), GaussianPacket(omega, detuning=detuning)
    t = t / omega
    assert abs(det(t)) == pytest.approx(abs(plain(t)), abs=1e-14)
    assert det(t) == pytest.approx(plain(t) * np.exp(-1j * detuning * t), abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5), st.floats(-30, 30))
def test_norm_translation_invariant(omega, shift):
    assert GaussianPacket(omega, shift).norm_check() == pytest.approx(GaussianPacket(omega).norm_check(), abs=1e-10)


def test_rectangular_norm():
    assert RectangularPacket(0.37, 2.0).norm_check() == pytest.approx(1, abs=1e-12)


def test_sampled_packet_scaling_and_support():
    base = SampledPacket.from_function(GaussianPacket(1.0), -8, 8, 2001)
    assert base.norm_check() == pytest.approx(1, abs=1e-9)
    doubled = SampledPacket(2 * base.values, base.dt, base.t0)
    assert doubled.norm_check() == pytest.approx(4, abs=1e-9)
    assert base(20.0) == 0 and base(-9.0) == 0
    assert base.scale() == pytest.approx(1.0, rel=1e-3)


def test_csv_round_trip(tmp_path):
    t = np.linspace(-5, 5, 501)
    vals = GaussianPacket(1.3)(t) * np.exp(0.3j * t)
    path = tmp_path / "pkt.csv"
    path.write_text("# sampled packet\ntime,re,im\n" + "\n".join(f"{a},{b.real},{b.imag}" for a, b in zip(t, vals)))
    pkt = load_csv(path)
    assert pkt(t[17]) == pytest.approx(vals[17])
    same = packet_from_config({"kind": "sampled", "file": "pkt.csv"}, tmp_path)
    assert same(0.123) == pkt(0.123)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n0.1,1\n0.3,1\n")
    with pytest.raises(ValueError, match="uniform"):
        load_csv(bad)


def test_gram_examples():
    assert gram_matrix([GaussianPacket(1.0)]) == pytest.approx(np.array([[1.0]]), abs=1e-8)
    far = BasisSet([GaussianPacket(1.0, 0.0), GaussianPacket(1.0, 20.0)])
    g = far.gram_matrix()
    analytic = math.exp(-20.0 ** 2 / 8)
    assert abs(g[0, 1] - analytic) <= 1e-6
    assert np.allclose(g, np.eye(2), atol=1e-6)
    same = BasisSet([GaussianPacket(1.0)] * 2)
    assert np.allclose(same.gram_matrix(), np.ones((2, 2)), atol=1e-8)
    assert not same.is_orthonormal()


def test_overlap_of_partially_shifted_gaussians():
    # analytic overlap of two equal-width Gaussians offset by d is exp(-omega^2 d^2 / 8)
    a, b = GaussianPacket(2.0), GaussianPacket(2.0, 0.7)
    assert overlap(a, b).real == pytest.approx(math.exp(-4 * 0.49 / 8), abs=1e-10)


def test_quadrature_grid_respects_range():
    x, w = quadrature_grid([RectangularPacket(2.0)], (0.5, 1.0))
    assert 0.5 < x.min() and x.max() < 1.0
    assert w.sum() == pytest.approx(0.5)


def test_invalid_packets():
    with pytest.raises(ValueError):
        GaussianPacket(0.0)
    with pytest.raises(ValueError):
        RectangularPacket(-1.0)
    with pytest.raises(ValueError):
        packet_from_config({"kind": "lorentzian"})
