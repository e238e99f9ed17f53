import math
import random

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from aipatient.ingest import ConfusionCounts
from aipatient.metrics import (
    DegeneratePooled,
    DegenerateWithinVariance,
    EmptyText,
    PerfectChanceAgreement,
    anova_oneway,
    betainc_reg,
    cohens_kappa,
    confusion_metrics,
    count_syllables,
    erf,
    erfc,
    f_sf,
    fk_grade,
    flesch_reading_ease,
    normal_sf,
    text_stats,
    two_proportion_test,
)

from oracles import erf_series, f_p_value_quadrature, normal_two_sided_p

# Hand-counted under the documented tokenizer and syllable heuristic:
# (text, words, sentences, syllables).
GOLDEN_TEXTS = [
    ("The cat sat on the mat.", 6, 1, 6),
    ("Hello. World.", 2, 2, 3),
    ("I am here now.", 4, 1, 4),
    ("A table sits in the corner of the room.", 9, 1, 11),
    ("Doctors use simple language to explain complex ideas.", 8, 1, 14),
    ("He felt sick. She called the doctor. They waited all night.", 11, 3, 14),
    ("Whales apparently generate extraordinarily complicated vocalizations.", 6, 1, 24),
    ("Stay calm. Breathe in. Breathe out. Rest well.", 8, 4, 8),
    ("The nurse gave me a little blue pill yesterday evening.", 10, 1, 15),
    ("Everything will be fine!", 4, 1, 7),
]


class TestTextStats:
    @pytest.mark.parametrize("text,words,sentences,syllables", GOLDEN_TEXTS)
    def test_golden_counts(self, text, words, sentences, syllables):
        stats = text_stats(text)
        assert stats.word_count == words
        assert stats.sentence_count == sentences
        assert stats.syllable_count == syllables

    def test_empty_text_raises(self):
        with pytest.raises(EmptyText):
            text_stats("")
        with pytest.raises(EmptyText):
            text_stats("...!!!")

    def test_syllable_edge_cases(self):
        assert count_syllables("table") == 2  # consonant + le keeps the e
        assert count_syllables("whale") == 1  # vowel + le drops it
        assert count_syllables("rhythm") == 1  # y as the only vowel
        assert count_syllables("97") == 1  # minimum one

    def test_apostrophes_stay_in_words(self):
        stats = text_stats("Don't panic.")
        assert stats.word_count == 2


class TestReadabilityFormulas:
    def test_direct_substitution_examples(self):
        stats6 = text_stats("The cat sat on the mat.")  # ASL 6, ASW 1
        assert flesch_reading_ease(stats6) == pytest.approx(116.145, abs=1e-9)
        assert fk_grade(stats6) == pytest.approx(-1.45, abs=1e-9)

    def test_asl1_asw1_substitution(self):
        # One monosyllabic word in one sentence.
        stats = text_stats("Stop.")
        assert stats.asl == 1 and stats.asw == 1
        assert flesch_reading_ease(stats) == pytest.approx(121.22, abs=1e-9)
        assert fk_grade(stats) == pytest.approx(-3.40, abs=1e-9)

    @pytest.mark.parametrize("text,words,sentences,syllables", GOLDEN_TEXTS)
    def test_golden_scores_match_spreadsheet(self, text, words, sentences, syllables):
        asl = words / sentences
        asw = syllables / words
        expected_fre = 206.835 - (1.015 * asl) - (84.6 * asw)
        expected_fkg = (0.39 * asl) + (11.8 * asw) - 15.59
        stats = text_stats(text)
        assert flesch_reading_ease(stats) == pytest.approx(expected_fre, abs=1e-9)
        assert fk_grade(stats) == pytest.approx(expected_fkg, abs=1e-9)

    @given(
        asl=st.floats(min_value=1.0, max_value=60.0),
        asw=st.floats(min_value=1.0, max_value=5.0),
        bump=st.floats(min_value=0.01, max_value=2.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotonicity(self, asl, asw, bump):
        from aipatient.metrics import TextStats

        def fre(a, w):
            return 206.835 - 1.015 * a - 84.6 * w

        def fkg(a, w):
            return 0.39 * a + 11.8 * w - 15.59

        assert fre(asl + bump, asw) < fre(asl, asw)
        assert fre(asl, asw + bump) < fre(asl, asw)
        assert fkg(asl + bump, asw) > fkg(asl, asw)
        assert fkg(asl, asw + bump) > fkg(asl, asw)


class TestConfusionMetrics:
    def test_hand_values(self):
        rates = confusion_metrics(ConfusionCounts(tp=8, fp=2, tn=88, fn=2))
        assert rates.precision == pytest.approx(0.8)
        assert rates.recall == pytest.approx(0.8)
        assert rates.f1 == pytest.approx(0.8)
        assert rates.tpr == pytest.approx(0.8)
        assert rates.fpr == pytest.approx(2 / 90)

    def test_empty_empty_convention(self):
        rates = confusion_metrics(ConfusionCounts(tp=0, fp=0, tn=0, fn=0))
        assert rates.precision == 1.0
        assert rates.recall == 1.0
        assert rates.f1 == 1.0
        assert rates.fpr == 0.0

    def test_zero_sum_f1(self):
        rates = confusion_metrics(ConfusionCounts(tp=0, fp=3, tn=0, fn=2))
        assert rates.precision == 0.0
        assert rates.recall == 0.0
        assert rates.f1 == 0.0

    @given(tp=st.integers(0, 500), fp=st.integers(0, 500), fn=st.integers(0, 500),
           tn=st.integers(0, 500))
    @settings(max_examples=100, deadline=None)
    def test_f1_equals_harmonic_mean_formula(self, tp, fp, fn, tn):
        rates = confusion_metrics(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn))
        if rates.precision + rates.recall > 0:
            harmonic = 2 * rates.precision * rates.recall / (rates.precision + rates.recall)
            assert rates.f1 == pytest.approx(harmonic, abs=1e-12)
        else:
            assert rates.f1 == 0.0


class TestSpecialFunctions:
    # Reference grid evaluated with mpmath at 30 digits.
    GRID = [0.05, 0.25, 0.5, 0.8427, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.5]

    def test_erf_matches_high_precision_grid(self):
        mp.mp.dps = 30
        for x in self.GRID:
            assert erf(x) == pytest.approx(float(mp.erf(x)), abs=1e-9)
            assert erf(-x) == pytest.approx(float(mp.erf(-x)), abs=1e-9)
            assert erfc(x) == pytest.approx(float(mp.erfc(x)), abs=1e-9)

    def test_erf_matches_series_oracle(self):
        for x in [0.1, 0.7, 1.3, 2.2, 3.1]:
            assert erf(x) == pytest.approx(erf_series(x), abs=1e-9)

    def test_betainc_matches_high_precision_grid(self):
        mp.mp.dps = 30
        for a, b in [(0.5, 0.5), (1.0, 3.0), (3.0, 6.0), (10.0, 2.5), (50.0, 50.0)]:
            for x in [0.01, 0.2, 0.5, 0.8, 0.99]:
                want = float(mp.betainc(a, b, 0, x, regularized=True))
                assert betainc_reg(a, b, x) == pytest.approx(want, abs=1e-9)

    def test_normal_sf_symmetry(self):
        for z in [0.0, 0.5, 1.96, 3.2]:
            assert normal_sf(z) + normal_sf(-z) == pytest.approx(1.0, abs=1e-12)


class TestAnova:
    def test_identical_groups(self):
        result = anova_oneway([[1, 2, 3], [1, 2, 3]])
        assert result.f_value == 0.0
        assert result.p_value == 1.0

    def test_hand_decomposition(self):
        result = anova_oneway([[1, 1, 0, 0], [1, 1, 1, 1]])
        assert result.ss_between == pytest.approx(0.5, abs=1e-12)
        assert result.ss_within == pytest.approx(1.0, abs=1e-12)
        assert result.df_between == 1
        assert result.df_within == 6
        assert result.f_value == 3.0

    def test_p_matches_quadrature_oracle(self):
        cases = [(3.0, 1, 6), (0.6126, 3, 1541), (5.3038, 3, 1596), (1.25, 4, 40)]
        for f_value, d1, d2 in cases:
            assert f_sf(f_value, d1, d2) == pytest.approx(
                f_p_value_quadrature(f_value, d1, d2), abs=1e-6
            )

    def test_degenerate_within_variance(self):
        with pytest.raises(DegenerateWithinVariance):
            anova_oneway([[1.0, 1.0], [0.0, 0.0]])

    def test_all_constant_is_f0_p1(self):
        result = anova_oneway([[2.0, 2.0], [2.0, 2.0]])
        assert result.f_value == 0.0 and result.p_value == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            anova_oneway([[1.0, 2.0]])
        with pytest.raises(ValueError):
            anova_oneway([[1.0], []])
        with pytest.raises(ValueError):
            anova_oneway([[1.0], [2.0]])  # n == k

    @given(
        shift=st.floats(min_value=-50, max_value=50),
        scale=st.floats(min_value=0.1, max_value=20),
        seed=st.integers(min_value=0, max_value=9999),
    )
    @settings(max_examples=40, deadline=None)
    def test_f_invariant_under_shift_and_scale(self, shift, scale, seed):
        rng = random.Random(seed)
        groups = [[rng.uniform(0, 10) for _ in range(rng.randint(2, 6))] for _ in range(3)]
        base = anova_oneway(groups)
        shifted = anova_oneway([[x + shift for x in g] for g in groups])
        scaled = anova_oneway([[x * scale for x in g] for g in groups])
        assert shifted.f_value == pytest.approx(base.f_value, rel=1e-7, abs=1e-9)
        assert scaled.f_value == pytest.approx(base.f_value, rel=1e-7, abs=1e-9)

    def test_p_monotone_decreasing_in_f(self):
        previous = 1.0
        for f_value in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]:
            p = f_sf(f_value, 3, 40)
            assert p < previous
            previous = p


class TestTwoProportion:
    def test_hand_z(self):
        result = two_proportion_test(90, 100, 80, 100)
        pooled = 170 / 200
        se = math.sqrt(pooled * (1 - pooled) * (1 / 100 + 1 / 100))
        assert result.z == pytest.approx(0.1 / se, abs=1e-12)
        assert result.z == pytest.approx(1.9803, abs=1e-4)

    def test_p_matches_series_oracle(self):
        for x1, n1, x2, n2 in [(90, 100, 80, 100), (50, 60, 45, 55), (10, 400, 30, 420)]:
            result = two_proportion_test(x1, n1, x2, n2)
            assert result.p_two_sided == pytest.approx(
                normal_two_sided_p(result.z), abs=1e-9
            )

    def test_equal_proportions(self):
        result = two_proportion_test(40, 80, 30, 60)
        assert result.z == 0.0
        assert result.p_two_sided == 1.0

    def test_degenerate_pooled_equal(self):
        result = two_proportion_test(0, 10, 0, 25)
        assert result.z == 0.0 and result.p_two_sided == 1.0
        result = two_proportion_test(10, 10, 25, 25)
        assert result.z == 0.0 and result.p_two_sided == 1.0

    def test_antisymmetry(self):
        a = two_proportion_test(90, 100, 70, 90)
        b = two_proportion_test(70, 90, 90, 100)
        assert a.z == pytest.approx(-b.z, abs=1e-12)
        assert a.p_two_sided == pytest.approx(b.p_two_sided, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            two_proportion_test(5, 0, 1, 10)
        with pytest.raises(ValueError):
            two_proportion_test(11, 10, 1, 10)


class TestKappa:
    def test_identical_sequences(self):
        result = cohens_kappa(["a", "b", "a", "c"], ["a", "b", "a", "c"])
        assert result.kappa == pytest.approx(1.0)
        assert result.observed_agreement == 1.0

    def test_hand_2x2(self):
        a = ["yes"] * 40 + ["no"] * 40 + ["yes"] * 10 + ["no"] * 10
        b = ["yes"] * 40 + ["no"] * 40 + ["no"] * 10 + ["yes"] * 10
        result = cohens_kappa(a, b)
        assert result.observed_agreement == pytest.approx(0.8)
        assert result.expected_agreement == pytest.approx(0.5)
        assert result.kappa == pytest.approx(0.6)

    def test_perfect_chance_agreement(self):
        with pytest.raises(PerfectChanceAgreement):
            cohens_kappa(["x", "x", "x"], ["x", "x", "x"])

    def test_random_permutation_kappa_near_zero(self):
        rng = random.Random(42)
        base = [rng.choice(["a", "b", "c"]) for _ in range(200)]
        total = 0.0
        trials = 1000
        for _ in range(trials):
            shuffled = base[:]
            rng.shuffle(shuffled)
            total += cohens_kappa(base, shuffled).kappa
        assert abs(total / trials) < 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            cohens_kappa(["a"], ["a", "b"])
        with pytest.raises(ValueError):
            cohens_kappa([], [])
