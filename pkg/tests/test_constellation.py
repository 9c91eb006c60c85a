"""Constellation geometry against brute-force lattice enumeration.

The square-QAM oracle below builds the odd-integer lattice directly and
computes ring radii, multiplicities and moments without going through the
package's grouping code, so any disagreement points at a real defect.
"""
from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdmpcs import (
    Constellation,
    Distribution,
    expand_ring_mass,
    from_json,
    from_rings,
    make_constellation,
    moment,
    to_json,
    validate,
)


def lattice_qam(order: int) -> np.ndarray:
    side = int(round(order**0.5))
    axis = np.arange(-(side - 1), side, 2)
    re, im = np.meshgrid(axis, axis)
    pts = (re + 1j * im).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def exact_uniform_m4(order: int) -> Fraction:
    side = int(round(order**0.5))
    axis = [Fraction(k) for k in range(-(side - 1), side, 2)]
    sq = [a * a + b * b for a in axis for b in axis]
    m2 = sum(sq) / len(sq)
    m4 = sum(s * s for s in sq) / len(sq)
    return m4 / (m2 * m2)


class TestQamGeometry:
    @pytest.mark.parametrize("order", [4, 16, 64, 256])
    def test_points_match_lattice(self, order):
        c = make_constellation("qam", order)
        got = np.sort_complex(np.round(c.points, 12))
        want = np.sort_complex(np.round(lattice_qam(order), 12))
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_16qam_rings(self, qam16):
        np.testing.assert_allclose(np.sort(qam16.ring_amps**2), [0.2, 1.0, 1.8], atol=1e-12)
        counts = dict(zip(np.round(qam16.ring_amps**2, 6), qam16.ring_counts))
        assert counts == {0.2: 4, 1.0: 8, 1.8: 4}

    def test_64qam_rings(self, qam64):
        # ring radii r^2 * 42 on the odd-integer lattice
        want_sq = np.array([2, 10, 18, 26, 34, 50, 58, 74, 98]) / 42
        want_counts = {2: 4, 10: 8, 18: 4, 26: 8, 34: 8, 50: 12, 58: 8, 74: 8, 98: 4}
        order = np.argsort(qam64.ring_amps)
        np.testing.assert_allclose(qam64.ring_amps[order] ** 2, want_sq, atol=1e-12)
        for a2, n in zip(qam64.ring_amps[order] ** 2, qam64.ring_counts[order]):
            assert want_counts[int(round(a2 * 42))] == n

    def test_ring_index_consistent(self, qam64):
        amps = np.abs(qam64.points)
        np.testing.assert_allclose(amps, qam64.ring_amps[qam64.ring_index], atol=1e-12)

    @pytest.mark.parametrize("order", [4, 16, 64, 256])
    def test_unit_average_power(self, order):
        c = make_constellation("qam", order)
        d = Distribution.uniform(c)
        assert moment(c, d, 2) == pytest.approx(1.0, abs=1e-12)


class TestPsk:
    def test_constant_modulus(self, psk64):
        np.testing.assert_allclose(np.abs(psk64.points), 1.0, atol=1e-12)
        assert psk64.ring_amps.shape == (1,)
        assert psk64.ring_counts[0] == 64

    def test_moments_are_one(self, psk64):
        d = Distribution.uniform(psk64)
        assert moment(psk64, d, 2) == pytest.approx(1.0, abs=1e-14)
        assert moment(psk64, d, 4) == pytest.approx(1.0, abs=1e-14)


class TestMoments:
    def test_16qam_uniform_m4_exact(self, qam16, uniform16):
        # 33/25 on the exact lattice
        assert exact_uniform_m4(16) == Fraction(33, 25)
        assert moment(qam16, uniform16, 4) == pytest.approx(1.32, abs=1e-12)

    def test_64qam_uniform_m4_exact(self, qam64, uniform64):
        want = exact_uniform_m4(64)
        assert want == Fraction(2436, 1764)
        assert moment(qam64, uniform64, 4) == pytest.approx(float(want), abs=1e-12)

    def test_rejects_other_orders(self, qam16, uniform16):
        with pytest.raises(ValueError):
            moment(qam16, uniform16, 3)

    @given(masses=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    @settings(max_examples=50, deadline=None)
    def test_m4_at_least_m2_squared(self, masses):
        # Jensen: E[A^4] >= (E[A^2])^2 for any ring loading.
        c = make_constellation("qam", 16)
        w = np.asarray(masses) / np.sum(masses)
        d = Distribution.from_ring_mass(c, w)
        m2 = float(np.sum(d.ring_mass * c.ring_amps**2))
        assert moment(c, d, 4) >= m2**2 - 1e-12


class TestDistribution:
    def test_uniform_masses(self, qam16, uniform16):
        np.testing.assert_allclose(uniform16.ring_mass, qam16.ring_counts / 16)
        np.testing.assert_allclose(uniform16.per_point, np.full(16, 1 / 16))

    def test_expand_ring_mass_splits_equally(self, qam16):
        d = expand_ring_mass(qam16, [0.5, 0.25, 0.25])
        for w, amp in enumerate(qam16.ring_amps):
            idx = qam16.ring_index == w
            np.testing.assert_allclose(d.per_point[idx], d.ring_mass[w] / np.sum(idx), atol=1e-15)
        assert np.sum(d.per_point) == pytest.approx(1.0, abs=1e-12)

    def test_from_per_point_regroups(self, qam16, rng):
        p = rng.random(16)
        p /= p.sum()
        d = Distribution.from_per_point(qam16, p)
        for w in range(3):
            assert d.ring_mass[w] == pytest.approx(np.sum(p[qam16.ring_index == w]), abs=1e-12)

    def test_bad_masses_rejected(self, qam16):
        with pytest.raises(ValueError):
            Distribution.from_ring_mass(qam16, [0.5, 0.5])  # wrong length
        with pytest.raises(ValueError):
            Distribution.from_ring_mass(qam16, [0.9, 0.2, 0.1])  # not normalized
        with pytest.raises(ValueError):
            Distribution.from_ring_mass(qam16, [1.2, -0.2, 0.0])


class TestSerialization:
    def test_round_trip_bytes(self, qam64):
        d = Distribution.from_ring_mass(qam64, np.ones(9) / 9)
        blob = to_json(qam64, d)
        c2, d2 = from_json(blob)
        assert to_json(c2, d2) == blob
        np.testing.assert_array_equal(c2.points, qam64.points)
        np.testing.assert_array_equal(d2.per_point, d.per_point)

    def test_json_is_valid_and_stable(self, qam16, uniform16):
        blob = to_json(qam16, uniform16)
        parsed = json.loads(blob)
        assert {"family", "order", "rings"} <= set(parsed)
        assert to_json(qam16, uniform16) == blob


class TestValidate:
    def test_uniform_passes(self, qam64, uniform64):
        diag = validate(qam64, uniform64)
        assert diag.ok
        assert all(chk.passed for chk in diag.checks)

    def test_unnormalized_fails(self, qam16):
        d = Distribution.uniform(qam16)
        bad = Distribution(per_point=d.per_point * 1.01, ring_mass=d.ring_mass * 1.01)
        diag = validate(qam16, bad)
        assert not diag.ok
        assert any(chk.name == "probability_sum" and not chk.passed for chk in diag.checks)


class TestFromRings:
    def test_reconstructs(self):
        c = from_rings([1.0, 2.0], [4, 4], phase_offsets=[0.0, np.pi / 4])
        assert c.points.shape == (8,)
        # power-normalized: E|A|^2 = 1 under uniform
        d = Distribution.uniform(c)
        assert moment(c, d, 2) == pytest.approx(1.0, abs=1e-12)
