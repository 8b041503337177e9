import math

import numpy as np
import pytest

from conftest import GOLDEN_FREQ, GOLDEN_OMEGA_STAR
from toruskit import explorer as ex
from toruskit.dynamics import DissStdMapParams, ForcedPendulumParams
from toruskit.errors import (
    BracketInvalid,
    FlatDerivative,
    InsufficientSamples,
    MaxIterExceeded,
)

TWO_PI = 2.0 * math.pi


class TestFolding:
    def test_map_band(self):
        assert ex.fold_frequency(2.4, "std_map") == pytest.approx(2.4)
        assert ex.fold_frequency(-2.4, "std_map") == pytest.approx(2.4)
        assert ex.fold_frequency(2.4 + TWO_PI, "std_map") == pytest.approx(2.4)
        assert ex.fold_frequency(4.0, "std_map") == pytest.approx(TWO_PI - 4.0)

    def test_pendulum_band(self):
        assert ex.fold_frequency(0.382, "pendulum") == pytest.approx(0.382)
        assert ex.fold_frequency(0.618, "pendulum") == pytest.approx(-0.382)
        assert ex.fold_frequency(-0.1, "pendulum") == pytest.approx(-0.1)


class TestMeasure:
    def test_map_identity_at_zero_eps(self):
        for Om in (0.5, 1.3, 2.4):
            s = ex.measure_omega1(DissStdMapParams(0.0, 0.1, Om), 2**12)
            assert abs(s.omega1 - Om) < 1e-9
            assert s.relaxed

    def test_pendulum_identity_at_zero_eps(self):
        for Om in (0.21, 0.382, 0.44):
            s = ex.measure_omega1(ForcedPendulumParams(0.0, 0.1, Om), 2**11)
            assert abs(s.omega1 - Om) < 1e-9

    def test_amplitude_tracks_action_scale(self):
        s = ex.measure_omega1(DissStdMapParams(0.0, 0.1, 2.4), 2**10)
        assert s.amplitude == pytest.approx(2.4, rel=1e-3)


class TestScan:
    def test_identity_scan_and_order(self):
        cfg = ex.FrequencyScanConfig(
            system="std_map", epsilon=0.0, eta=0.1,
            omega_grid=(0.5, 1.5, 9), N=2**11,
        )
        samples = ex.scan_frequency_map(cfg)
        oms = [s.Omega for s in samples]
        assert oms == sorted(oms) and len(samples) == 9
        assert max(abs(s.omega1 - s.Omega) for s in samples) < 1e-9

    def test_single_point_grid(self):
        cfg = ex.FrequencyScanConfig(
            system="std_map", epsilon=0.0, eta=0.1,
            omega_grid=(0.9, 0.9, 1), N=2**10,
        )
        samples = ex.scan_frequency_map(cfg)
        ref = ex.measure_omega1(DissStdMapParams(0.0, 0.1, 0.9), 2**10)
        assert len(samples) == 1
        assert samples[0].omega1 == ref.omega1

    def test_thread_order_independence(self):
        cfg1 = ex.FrequencyScanConfig(
            system="std_map", epsilon=0.4, eta=0.1,
            omega_grid=(2.3, 2.5, 8), N=2**11, threads=1,
        )
        cfg2 = ex.FrequencyScanConfig(
            system="std_map", epsilon=0.4, eta=0.1,
            omega_grid=(2.3, 2.5, 8), N=2**11, threads=2,
        )
        a = ex.scan_frequency_map(cfg1)
        b = ex.scan_frequency_map(cfg2)
        assert [s.omega1 for s in a] == [s.omega1 for s in b]

    def test_plateau_flagging(self):
        samples = [
            ex.FrequencyMapSample(Omega=float(i), omega1=v, amplitude=1.0)
            for i, v in enumerate([0.1, 0.2, 0.3, 0.3, 0.3, 0.4])
        ]
        ex._mark_plateaus(samples)
        assert [s.plateau_suspect for s in samples] == [
            False, False, True, True, True, False,
        ]


def synthetic_samples(vals, lo=0.0, hi=1.0):
    oms = np.linspace(lo, hi, len(vals))
    return [
        ex.FrequencyMapSample(Omega=float(o), omega1=float(v), amplitude=1.0)
        for o, v in zip(oms, vals)
    ]


class TestRegularityVerdict:
    def test_linear_crossing_persists(self):
        vals = np.linspace(0.3, 0.5, 17)
        v = ex.regularity_verdict(synthetic_samples(vals), 0.4123)
        assert v is ex.Verdict.TorusPersists

    def test_plateau_at_crossing_broken(self):
        vals = list(np.linspace(0.30, 0.39, 7)) + [0.4] * 4 + list(
            np.linspace(0.41, 0.50, 6)
        )
        v = ex.regularity_verdict(synthetic_samples(vals), 0.4)
        assert v is ex.Verdict.TorusBroken

    def test_jump_at_crossing_broken(self):
        vals = list(np.linspace(0.30, 0.36, 8)) + list(np.linspace(0.44, 0.50, 9))
        v = ex.regularity_verdict(synthetic_samples(vals), 0.4)
        assert v is ex.Verdict.TorusBroken

    def test_wiggly_crossing_inconclusive(self):
        t = np.linspace(0.0, 1.0, 17)
        vals = 0.3 + 0.2 * t + 0.03 * np.sin(5.5 * math.pi * t)
        v = ex.regularity_verdict(synthetic_samples(vals), 0.4)
        assert v is ex.Verdict.Inconclusive

    def test_no_crossing_raises(self):
        vals = np.linspace(0.3, 0.5, 17)
        with pytest.raises(InsufficientSamples):
            ex.regularity_verdict(synthetic_samples(vals), 0.9)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamples):
            ex.regularity_verdict(synthetic_samples([0.3, 0.5]), 0.4)

    def test_negative_slope_not_persists(self):
        vals = np.linspace(0.5, 0.3, 17)
        v = ex.regularity_verdict(synthetic_samples(vals), 0.4)
        assert v is not ex.Verdict.TorusPersists


class TestNewton:
    def test_identity_map_converges_immediately(self):
        Om, its = ex.invert_frequency_map(
            0.3, "pendulum", 0.0, 0.1, 0.31, N=2**11
        )
        assert abs(Om - 0.3) < 1e-9
        assert its <= 3

    def test_map_inversion_small_eps(self):
        target = 2.405
        Om, its = ex.invert_frequency_map(
            target, "std_map", 0.05, 0.1, target, N=2**13
        )
        s = ex.measure_omega1(DissStdMapParams(0.05, 0.1, Om), 2**13)
        assert abs(s.omega1 - target) < 1e-9

    def test_flat_derivative_on_plateau(self):
        # 3/8 resonance plateau of the near-critical map swallows the
        # finite difference
        with pytest.raises(FlatDerivative):
            ex.invert_frequency_map(
                2.3562, "std_map", 0.9719, 0.1, 2.39, N=2**12,
            )

    def test_max_iter(self):
        with pytest.raises(MaxIterExceeded):
            ex.invert_frequency_map(
                2.405, "std_map", 0.3, 0.1, 2.2,
                cfg=ex.NewtonConfig(max_iter=1), N=2**11,
            )

    def test_quadratic_tail_and_proximity(self):
        # |Omega* - omega1*| = O(eps^2), calibrated at eps = 0.01
        consts = {}
        for eps in (0.01, 0.02, 0.03):
            hist = []
            Om, _ = ex.invert_frequency_map(
                GOLDEN_FREQ, "pendulum", eps, 0.1, GOLDEN_FREQ, N=2**13,
                history=hist,
            )
            consts[eps] = abs(Om - GOLDEN_FREQ) / eps**2
            rel = [h["rel_correction"] for h in hist]
            tail = [r for r in rel if r > 0][-3:]
            assert all(a > b for a, b in zip(tail, tail[1:]))
        C = consts[0.01] * 1.7
        assert consts[0.02] < C and consts[0.03] < C


class TestDiophantine:
    def test_golden_pair(self):
        p = ex.DiophantineParams(gamma=0.1, tau=1.2)
        assert ex.diophantine_check((GOLDEN_FREQ, 1.0), p, 100) is True

    def test_rational_fails(self):
        p = ex.DiophantineParams(gamma=0.1, tau=1.2)
        assert ex.diophantine_check((0.5, 1.0), p, 5) is False

    def test_kmax_one_tiny_gamma(self):
        p = ex.DiophantineParams(gamma=1e-12, tau=1.0)
        assert ex.diophantine_check((0.7390851, 1.0), p, 1) is True

    def test_matches_bruteforce(self):
        p = ex.DiophantineParams(gamma=0.05, tau=1.5)
        for w1 in (0.3819660112501051, 0.2, 0.456720397):
            brute = True
            for n1 in range(-20, 21):
                if n1 == 0:
                    continue
                for n2 in range(-20, 21):
                    if abs(n1 * w1 + n2) < p.gamma / abs(n1) ** p.tau:
                        brute = False
            assert ex.diophantine_check((w1, 1.0), p, 20) is brute

    def test_param_validation(self):
        with pytest.raises(ValueError):
            ex.DiophantineParams(gamma=1.5, tau=1.0)
        with pytest.raises(ValueError):
            ex.DiophantineParams(gamma=0.1, tau=0.5)


class TestThresholdPlumbing:
    def test_invalid_bracket_order(self):
        with pytest.raises(BracketInvalid):
            ex.find_threshold(2.4, 0.1, "std_map", (0.9, 0.8))

    def test_threshold_result_fields(self):
        res = ex.ThresholdResult(2.4, 0.1, 0.96, 0.98)
        assert res.eps_c == pytest.approx(0.97)
        assert res.uncertainty == pytest.approx(0.01)


class TestGoldenBreakdownProbes:
    """The golden torus of the map at eta = 0.1 persists at eps = 0.9719 and
    is destroyed at eps = 0.9721 (the bracketing pair of the breakdown)."""

    GOLDEN_MAP = TWO_PI * GOLDEN_FREQ

    def test_persists_just_below(self):
        res = ex.probe_verdict(
            "std_map", 0.9719, 0.1, self.GOLDEN_MAP, self.GOLDEN_MAP, N=2**16
        )
        assert res.verdict is ex.Verdict.TorusPersists

    def test_broken_just_above(self):
        res = ex.probe_verdict(
            "std_map", 0.9721, 0.1, self.GOLDEN_MAP, self.GOLDEN_MAP, N=2**16
        )
        assert res.verdict is ex.Verdict.TorusBroken
