"""SP 800-22 battery against closed-form and brute-force oracles."""

import json
import math

import numpy as np
import pytest

from qrngsim.statskit import (
    EmptyStream,
    InvalidBlockLength,
    InvalidPatternLength,
    SequenceTooShort,
    SuiteConfig,
    approx_entropy_test,
    as_bit_array,
    block_frequency_test,
    cusum_test,
    default_serial_m,
    frequency_test,
    longest_run_test,
    run_suite,
    runs_test,
    serial_test,
    spectral_test,
)
from qrngsim.statskit.sp800_22 import _overlapping_pattern_counts

from oracles import (
    cusum_pvalue_reference,
    direct_dft_magnitudes,
    erfc_quadrature,
    igamc_quadrature,
    longest_run_reference,
)


def fair_bits(n, seed):
    return np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)


class TestFrequency:
    def test_worked_example(self):
        report = frequency_test("11010")
        assert report.p_values[0] == pytest.approx(0.654721, abs=5e-7)
        assert report.p_values[0] == pytest.approx(
            erfc_quadrature(1.0 / math.sqrt(10.0)), rel=1e-12
        )
        assert not report.applicable  # n < 100

    def test_alternating_is_perfectly_balanced(self):
        report = frequency_test("10" * 200)
        assert report.p_values[0] == 1.0
        assert report.applicable and report.passed

    def test_all_zeros_fails(self):
        report = frequency_test("0" * 100)
        want = erfc_quadrature(100.0 / math.sqrt(200.0))
        assert report.p_values[0] == pytest.approx(want, rel=1e-9, abs=1e-30)
        assert report.p_values[0] < 2e-23
        assert not report.passed

    def test_empty_raises(self):
        with pytest.raises(EmptyStream):
            frequency_test("")


class TestBlockFrequency:
    def test_worked_example(self):
        report = block_frequency_test("0110011010", m=3)
        assert report.statistic == pytest.approx(1.0)
        assert report.p_values[0] == pytest.approx(0.801252, abs=5e-7)
        assert report.p_values[0] == pytest.approx(igamc_quadrature(1.5, 0.5), rel=1e-10)

    def test_perfectly_balanced_blocks(self):
        report = block_frequency_test("0101" * 64, m=4)
        assert report.statistic == 0.0
        assert report.p_values[0] == 1.0

    def test_all_ones_example(self):
        report = block_frequency_test("1" * 12, m=3)
        assert report.statistic == pytest.approx(12.0)
        assert report.p_values[0] == pytest.approx(0.017351, abs=5e-7)
        assert report.p_values[0] == pytest.approx(7.0 * math.exp(-6.0), rel=1e-10)

    def test_invalid_block_length(self):
        with pytest.raises(InvalidBlockLength):
            block_frequency_test("0101", m=0)
        with pytest.raises(InvalidBlockLength):
            block_frequency_test("0101", m=10)


class TestRuns:
    def test_worked_example(self):
        report = runs_test("1001101011")
        assert report.statistic == 7.0
        assert report.p_values[0] == pytest.approx(0.147232, abs=5e-7)

    def test_constant_sequence_not_applicable(self):
        report = runs_test("1" * 256)
        assert not report.applicable
        assert report.p_values == ()

    def test_alternating_fails(self):
        report = runs_test("10" * 50)
        want = erfc_quadrature(50.0 / (2.0 * math.sqrt(200.0) * 0.25))
        assert report.p_values[0] == pytest.approx(want, rel=1e-9, abs=1e-40)
        assert report.p_values[0] < 1e-21
        assert not report.passed


class TestLongestRun:
    def test_too_short(self):
        with pytest.raises(SequenceTooShort):
            longest_run_test("1" * 127)

    def test_all_zeros_matches_brute_force(self):
        report = longest_run_test("0" * 128)
        want = longest_run_reference(
            "0" * 128, 8, (1, 2, 3, 4), (0.21484375, 0.3671875, 0.23046875, 0.1875)
        )
        assert report.p_values[0] == pytest.approx(want, rel=1e-9)
        assert not report.passed

    def test_all_ones_lands_in_top_category_and_fails(self):
        report = longest_run_test("1" * 128)
        want = longest_run_reference(
            "1" * 128, 8, (1, 2, 3, 4), (0.21484375, 0.3671875, 0.23046875, 0.1875)
        )
        assert report.p_values[0] == pytest.approx(want, rel=1e-9)
        assert report.p_values[0] < 0.01

    def test_block_order_invariance(self):
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, 1024, dtype=np.uint8)
        base = longest_run_test(bits).p_values[0]
        blocks = bits.reshape(-1, 8)
        shuffled = blocks[rng.permutation(len(blocks))].ravel()
        assert longest_run_test(shuffled).p_values[0] == pytest.approx(base, rel=1e-12)

    def test_random_input_against_brute_force(self):
        bits = fair_bits(4096, seed=9)
        text = "".join(str(b) for b in bits)
        report = longest_run_test(bits)
        want = longest_run_reference(
            text,
            8,
            (1, 2, 3, 4),
            (0.21484375, 0.3671875, 0.23046875, 0.1875),
        )
        assert report.p_values[0] == pytest.approx(want, rel=1e-9)


class TestCusum:
    def test_alternating_is_near_one(self):
        report = cusum_test("10" * 5000, "forward")
        assert report.statistic == 1.0
        assert report.p_values[0] == pytest.approx(1.0, abs=1e-9)

    def test_constant_fails_hard(self):
        report = cusum_test("1" * 100, "forward")
        want = cusum_pvalue_reference(100, 100)
        assert report.p_values[0] == pytest.approx(want, rel=1e-8, abs=1e-30)
        assert report.p_values[0] < 1e-20

    def test_palindrome_modes_agree(self):
        text = "0110011001100110"[::-1] + "0110011001100110"  # its own reversal
        assert text == text[::-1]
        fwd = cusum_test(text, "forward").p_values[0]
        bwd = cusum_test(text, "backward").p_values[0]
        assert fwd == pytest.approx(bwd, rel=1e-14)

    def test_formula_against_quadrature_phi(self):
        bits = fair_bits(2000, seed=3)
        report = cusum_test(bits, "forward")
        z = int(report.statistic)
        assert report.p_values[0] == pytest.approx(
            cusum_pvalue_reference(z, 2000), rel=1e-9
        )

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            cusum_test("0101", "sideways")


class TestApproxEntropy:
    def test_pattern_counts_sum_to_n(self):
        bits = fair_bits(999, seed=11)
        for m in (1, 2, 3, 7):
            assert _overlapping_pattern_counts(bits, m).sum() == 999

    def test_constant_sequence_fails(self):
        n = 200
        report = approx_entropy_test("1" * n, m=2)
        assert report.statistic == pytest.approx(2.0 * n * math.log(2.0), rel=1e-12)
        want = igamc_quadrature(2.0, n * math.log(2.0))
        assert report.p_values[0] == pytest.approx(want, rel=1e-8, abs=1e-70)
        assert not report.passed

    def test_alternating_m1_is_deterministic(self):
        # balanced single bits, fully determined two-bit patterns
        report = approx_entropy_test("10" * 100, m=1)
        assert report.statistic == pytest.approx(2.0 * 200 * math.log(2.0), rel=1e-12)
        assert report.p_values[0] < 1e-50

    def test_invalid_pattern_length(self):
        with pytest.raises(InvalidPatternLength):
            approx_entropy_test("0101", m=0)


class TestSerial:
    def test_m2_reduces_to_frequency_statistic(self):
        bits = fair_bits(4000, seed=21)
        counts1 = _overlapping_pattern_counts(bits, 1).astype(float)
        psi1 = float((counts1**2).sum() * 2.0 / 4000 - 4000)
        s = 2.0 * counts1[1] - 4000
        assert psi1 == pytest.approx(s * s / 4000, rel=1e-9)

    def test_constant_sequence_fails(self):
        report = serial_test("1" * 200, m=3)
        assert report.statistic == pytest.approx(800.0)
        assert max(report.p_values) < 1e-80
        assert not report.passed

    def test_worked_constant_values(self):
        report = serial_test("1" * 200, m=3)
        assert report.p_values[0] == pytest.approx(
            igamc_quadrature(2.0, 400.0), rel=1e-6, abs=1e-180
        )
        assert report.p_values[1] == pytest.approx(
            igamc_quadrature(1.0, 200.0), rel=1e-6, abs=1e-95
        )

    def test_default_pattern_length_scales(self):
        assert default_serial_m(10**6) == 16
        assert default_serial_m(10**5) == 13
        assert default_serial_m(1000) == 6
        assert default_serial_m(10) == 2

    def test_invalid_pattern_length(self):
        with pytest.raises(InvalidPatternLength):
            serial_test("0101", m=1)


class TestSpectral:
    def test_alternating_fails_with_known_statistic(self):
        report = spectral_test("10" * 500)
        assert report.statistic == pytest.approx(7.2547625011, rel=1e-9)
        assert report.p_values[0] == pytest.approx(4.0236721907e-13, rel=1e-8)
        assert not report.passed

    def test_against_direct_dft(self):
        bits = fair_bits(512, seed=33)
        x = 2.0 * bits - 1.0
        mags = direct_dft_magnitudes(x)[:256]
        threshold = math.sqrt(512 * math.log(1.0 / 0.05))
        n1 = int((mags < threshold).sum())
        d = (n1 - 0.475 * 512) / math.sqrt(512 * 0.95 * 0.05 / 4.0)
        want = erfc_quadrature(abs(d) / math.sqrt(2.0))
        report = spectral_test(bits)
        assert report.statistic == pytest.approx(d, rel=1e-12)
        assert report.p_values[0] == pytest.approx(want, rel=1e-10)

    def test_complement_invariance(self):
        bits = fair_bits(2048, seed=4)
        a = spectral_test(bits).p_values[0]
        b = spectral_test(1 - bits).p_values[0]
        assert a == pytest.approx(b, rel=1e-12)

    def test_too_short(self):
        with pytest.raises(SequenceTooShort):
            spectral_test("1")


class TestComplementSymmetry:
    @pytest.mark.parametrize(
        "runner",
        [
            lambda b: frequency_test(b),
            lambda b: runs_test(b),
            lambda b: approx_entropy_test(b, m=2),
            lambda b: serial_test(b, m=5),
            lambda b: spectral_test(b),
        ],
        ids=["frequency", "runs", "approx_entropy", "serial", "spectral"],
    )
    def test_p_values_invariant_under_complement(self, runner):
        bits = fair_bits(4096, seed=17)
        a = runner(bits)
        b = runner(1 - bits)
        assert a.p_values == pytest.approx(b.p_values, rel=1e-10)


class TestSensitivity:
    def test_constant_fails_frequency_runs_apen(self):
        bits = "0" * 2048
        assert not frequency_test(bits).passed
        assert not runs_test(bits).applicable
        assert not approx_entropy_test(bits).passed

    def test_periodic_fails_spectral_and_serial(self):
        bits = "10" * 2048
        assert not spectral_test(bits).passed
        assert not serial_test(bits, m=4).passed

    def test_blockwise_skew_fails_block_frequency(self):
        bits = ("1" * 128 + "0" * 128) * 16
        assert not block_frequency_test(bits, m=128).passed


class TestSuiteRunner:
    def test_canonical_order_and_overall_pass(self):
        report = run_suite(fair_bits(20000, seed=2), SuiteConfig())
        names = [t.test_name for t in report.tests]
        assert names == [
            "frequency",
            "block_frequency",
            "runs",
            "longest_run",
            "cumulative_sums",
            "approximate_entropy",
            "serial",
            "spectral",
        ]
        assert report.overall_pass
        assert report.n_bits == 20000

    def test_biased_stream_fails_frequency(self):
        rng = np.random.default_rng(8)
        bits = (rng.random(100_000) < 0.6).astype(np.uint8)
        report = run_suite(bits)
        by_name = {t.test_name: t for t in report.tests}
        assert not by_name["frequency"].passed
        assert not report.overall_pass

    def test_cumulative_sums_carries_both_directions(self):
        report = run_suite(fair_bits(5000, seed=13))
        by_name = {t.test_name: t for t in report.tests}
        assert len(by_name["cumulative_sums"].p_values) == 2
        assert len(by_name["serial"].p_values) == 2

    def test_short_input_marks_tests_not_applicable_without_crashing(self):
        report = run_suite("1010011", SuiteConfig())
        by_name = {t.test_name: t for t in report.tests}
        assert not by_name["longest_run"].applicable
        assert by_name["longest_run"].p_values == ()
        assert not by_name["block_frequency"].applicable

    def test_fuzz_corpus_p_values_stay_in_range(self):
        rng = np.random.default_rng(123)
        for _ in range(60):
            n = int(rng.integers(1, 10_000))
            bias = rng.uniform(0.05, 0.95)
            bits = (rng.random(n) < bias).astype(np.uint8)
            report = run_suite(bits)
            for t in report.tests:
                for p in t.p_values:
                    assert 0.0 <= p <= 1.0

    def test_json_schema_and_key_order(self):
        report = run_suite(fair_bits(4096, seed=1), sequence_id="seq-a")
        payload = json.loads(report.to_json())
        assert list(payload) == [
            "sequence_id",
            "n_bits",
            "alpha",
            "tests",
            "overall_pass",
        ]
        assert list(payload["tests"][0]) == [
            "name",
            "p_values",
            "statistic",
            "passed",
            "applicable",
        ]
        # byte-stable serialization
        again = run_suite(fair_bits(4096, seed=1), sequence_id="seq-a")
        assert report.to_json() == again.to_json()

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            SuiteConfig(alpha=0.0)

    def test_alpha_plumbing_at_half(self):
        # at alpha = 0.5 on fair input, about half of all P-values sit
        # below the bar, so pass flags must track the configured level
        p_values = []
        for seed in range(40):
            report = run_suite(fair_bits(20_000, seed=1000 + seed), SuiteConfig(alpha=0.5))
            for t in report.tests:
                if t.applicable:
                    p_values.extend(t.p_values)
                    assert t.passed == (min(t.p_values) >= 0.5)
        below = sum(p < 0.5 for p in p_values) / len(p_values)
        assert abs(below - 0.5) < 4.0 * math.sqrt(0.25 / len(p_values))

    def test_as_bit_array_accepts_newlines(self):
        arr = as_bit_array("10\n01\r\n1")
        assert arr.tolist() == [1, 0, 0, 1, 1]
