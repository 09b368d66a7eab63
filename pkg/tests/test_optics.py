"""Closed-form interferometer model against amplitude-level oracles."""

import math

import pytest

from qrngsim.optics import (
    ClickDistribution,
    Detector,
    DetectorBank,
    InterferometerConfig,
    OutputDistribution,
    UnsupportedReflectivity,
    click_distribution,
    output_distribution,
    single_photon_split,
    visibility,
)

from oracles import (
    amplitude_two_photon_probs,
    classical_two_photon_probs,
    enumerate_click_probs,
    wavepacket_overlap,
)

TAU_C = 222.0


def ideal(delay=0.0, v0=1.0, tau_c=TAU_C):
    return InterferometerConfig(
        delay_fs=delay, coherence_time_fs=tau_c, visibility_ceiling=v0
    )


class TestConfigValidation:
    def test_rejects_nonpositive_coherence_time(self):
        with pytest.raises(ValueError):
            InterferometerConfig(coherence_time_fs=0.0)

    def test_rejects_out_of_range_reflectivity(self):
        with pytest.raises(ValueError):
            InterferometerConfig(reflectivity=1.2)

    def test_rejects_out_of_range_ceiling(self):
        with pytest.raises(ValueError):
            InterferometerConfig(visibility_ceiling=-0.1)

    def test_bank_validation(self):
        with pytest.raises(ValueError):
            DetectorBank(efficiency=1.5)
        with pytest.raises(ValueError):
            DetectorBank(dark_rate_hz=-1.0)

    def test_output_distribution_must_normalize(self):
        with pytest.raises(ValueError):
            OutputDistribution(p20=0.5, p02=0.5, p11=0.5)


class TestVisibility:
    def test_zero_delay_is_unity(self):
        assert visibility(ideal(0.0)) == 1.0

    def test_gaussian_tail_vanishes(self):
        assert visibility(ideal(10.0 * TAU_C)) < 1e-43

    def test_one_coherence_time_matches_overlap_integral(self):
        # independent oracle: squared wavepacket overlap at offset tau_c
        oracle = wavepacket_overlap(TAU_C, TAU_C) ** 2
        v = visibility(ideal(TAU_C))
        assert v == pytest.approx(oracle, abs=1e-10)
        assert v == pytest.approx(0.367879, abs=5e-7)

    def test_ceiling_scales_visibility(self):
        assert visibility(ideal(0.0, v0=0.9)) == pytest.approx(0.9)


class TestOutputDistribution:
    def test_perfect_interference_suppresses_cross_arm(self):
        dist = output_distribution(ideal(0.0))
        assert (dist.p20, dist.p02, dist.p11) == (0.5, 0.5, 0.0)

    def test_distinguishable_limit_matches_classical_enumeration(self):
        oracle = classical_two_photon_probs()
        dist = output_distribution(ideal(40.0 * TAU_C))
        assert dist.p20 == pytest.approx(oracle[0], abs=1e-12)
        assert dist.p02 == pytest.approx(oracle[1], abs=1e-12)
        assert dist.p11 == pytest.approx(oracle[2], abs=1e-12)

    def test_offset_by_coherence_time_matches_amplitude_oracle(self):
        oracle = amplitude_two_photon_probs(TAU_C, TAU_C)
        dist = output_distribution(ideal(TAU_C))
        assert dist.p11 == pytest.approx(oracle[2], abs=1e-9)
        assert dist.p11 == pytest.approx(0.316060, abs=5e-7)
        assert dist.p20 == pytest.approx(0.341970, abs=5e-7)

    def test_unbalanced_splitter_rejected(self):
        with pytest.raises(UnsupportedReflectivity):
            output_distribution(InterferometerConfig(reflectivity=0.4))

    @pytest.mark.parametrize("delay", [0.0, 50.0, 150.0, 400.0, 2000.0])
    @pytest.mark.parametrize("v0", [0.5, 0.9, 1.0])
    def test_normalization_and_symmetry(self, delay, v0):
        dist = output_distribution(ideal(delay, v0=v0))
        assert abs(dist.p20 + dist.p02 + dist.p11 - 1.0) <= 1e-12
        assert dist.p20 == dist.p02

    def test_p11_monotone_in_visibility(self):
        delays = [0.0, 50.0, 100.0, 200.0, 400.0, 900.0]
        dists = [output_distribution(ideal(d)) for d in delays]
        p11s = [d.p11 for d in dists]
        bunched = [d.p20 + d.p02 for d in dists]
        assert p11s == sorted(p11s)  # growing delay: V falls, p11 rises
        assert bunched == sorted(bunched, reverse=True)


class TestClickDistribution:
    def test_perfect_state_pattern_probabilities(self):
        dist = OutputDistribution(0.5, 0.5, 0.0)
        cd = click_distribution(dist, DetectorBank(efficiency=1.0))
        assert cd.probability(Detector.D1, Detector.D2) == pytest.approx(0.25)
        assert cd.probability(Detector.D3, Detector.D4) == pytest.approx(0.25)
        for det in Detector:
            assert cd.probability(det) == pytest.approx(0.125)
        for d_a in (Detector.D1, Detector.D2):
            for d_b in (Detector.D3, Detector.D4):
                assert cd.probability(d_a, d_b) == 0.0

    def test_mixed_state_cross_patterns(self):
        dist = OutputDistribution(0.25, 0.25, 0.5)
        cd = click_distribution(dist, DetectorBank(efficiency=1.0))
        for d_a in (Detector.D1, Detector.D2):
            for d_b in (Detector.D3, Detector.D4):
                assert cd.probability(d_a, d_b) == pytest.approx(0.125)

    def test_zero_efficiency_never_clicks(self):
        dist = OutputDistribution(0.25, 0.25, 0.5)
        cd = click_distribution(dist, DetectorBank(efficiency=0.0))
        assert cd.probability() == pytest.approx(1.0)

    @pytest.mark.parametrize("eta", [0.05, 0.3, 0.6, 0.85, 1.0])
    @pytest.mark.parametrize("delay", [0.0, 100.0, 250.0, 600.0])
    def test_matches_exhaustive_enumeration(self, eta, delay):
        dist = output_distribution(ideal(delay))
        oracle = enumerate_click_probs(dist.p20, dist.p02, dist.p11, eta)
        cd = click_distribution(dist, DetectorBank(efficiency=eta))
        patterns = set(oracle) | {frozenset(int(d) for d in p) for p in cd}
        for pattern in patterns:
            want = oracle.get(pattern, 0.0)
            got = cd[frozenset(Detector(i) for i in pattern)]
            assert got == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("target_v", [0.25, 0.5, 0.75, 1.0])
    def test_amplitude_oracle_equivalence(self, target_v):
        # pick the delay whose squared overlap equals the target visibility
        delay = TAU_C * math.sqrt(-math.log(target_v)) if target_v < 1.0 else 0.0
        p20, p02, p11 = amplitude_two_photon_probs(delay, TAU_C)
        for eta in (0.4, 1.0):
            oracle = enumerate_click_probs(p20, p02, p11, eta)
            cd = click_distribution(
                output_distribution(ideal(delay)), DetectorBank(efficiency=eta)
            )
            for pattern, want in oracle.items():
                got = cd[frozenset(Detector(i) for i in pattern)]
                assert got == pytest.approx(want, abs=1e-9)

    def test_distinguishable_oracle_equivalence(self):
        p20, p02, p11 = classical_two_photon_probs()
        oracle = enumerate_click_probs(p20, p02, p11, 0.7)
        cd = click_distribution(
            output_distribution(ideal(7.0 * TAU_C)), DetectorBank(efficiency=0.7)
        )
        for pattern, want in oracle.items():
            got = cd[frozenset(Detector(i) for i in pattern)]
            assert got == pytest.approx(want, abs=1e-9)

    @pytest.mark.parametrize("eta", [0.2, 0.7, 1.0])
    @pytest.mark.parametrize("delay", [0.0, 123.0, 456.0])
    @pytest.mark.parametrize("v0", [0.8, 1.0])
    def test_normalization_grid(self, eta, delay, v0):
        cd = click_distribution(
            output_distribution(ideal(delay, v0=v0)), DetectorBank(efficiency=eta)
        )
        assert abs(sum(cd.values()) - 1.0) <= 1e-12

    def test_within_arm_label_exchange_symmetry(self):
        cd = click_distribution(
            output_distribution(ideal(137.0)), DetectorBank(efficiency=0.63)
        )
        swap = {
            Detector.D1: Detector.D2,
            Detector.D2: Detector.D1,
            Detector.D3: Detector.D4,
            Detector.D4: Detector.D3,
        }
        for pattern in cd:
            mirrored = frozenset(swap[d] for d in pattern)
            assert cd[pattern] == pytest.approx(cd[mirrored], abs=1e-15)


class TestSinglePhotonSplit:
    def test_unit_efficiency_is_fifty_fifty(self):
        cd = single_photon_split(1.0)
        assert cd.probability(Detector.D1) == pytest.approx(0.5)
        assert cd.probability(Detector.D3) == pytest.approx(0.5)
        assert cd.probability() == 0.0

    def test_zero_efficiency(self):
        cd = single_photon_split(0.0)
        assert cd.probability() == pytest.approx(1.0)

    def test_partial_efficiency_scales_linearly(self):
        cd = single_photon_split(0.6)
        assert cd.probability(Detector.D1) == pytest.approx(0.3)
        assert cd.probability(Detector.D3) == pytest.approx(0.3)
        assert cd.probability() == pytest.approx(0.4)

    def test_rejects_bad_efficiency(self):
        with pytest.raises(ValueError):
            single_photon_split(1.01)
