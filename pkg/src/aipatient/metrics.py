"""Readability and statistical primitives used by the evaluation framework.

Everything here is dependency-free and pure: tokenization rules, the two
Flesch formulas, confusion-matrix rates, one-way ANOVA, the pooled
two-proportion z test, and Cohen's kappa.  The p-values are computed from
self-contained special functions (error function via power series plus a
continued fraction, regularized incomplete beta via Lentz's algorithm), so
no external statistics package is involved.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence


class MetricsError(Exception):
    pass


class EmptyText(MetricsError):
    pass


class DegenerateWithinVariance(MetricsError):
    pass


class DegeneratePooled(MetricsError):
    pass


class PerfectChanceAgreement(MetricsError):
    pass


# ---------------------------------------------------------------------------
# Text statistics and readability
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[A-Za-z0-9']+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+(?=\s|$)")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


@dataclass(frozen=True)
class TextStats:
    word_count: int
    sentence_count: int
    syllable_count: int

    @property
    def asl(self) -> float:
        """Average sentence length: words per sentence."""
        return self.word_count / self.sentence_count

    @property
    def asw(self) -> float:
        """Average syllables per word."""
        return self.syllable_count / self.word_count


@dataclass(frozen=True)
class ReadabilityScores:
    flesch_reading_ease: float
    fk_grade: float


def count_syllables(word: str) -> int:
    """Heuristic syllable count: vowel groups (a,e,i,o,u,y), silent trailing
    'e' removed unless the word ends in consonant+'le', minimum one."""
    w = word.lower()
    count = len(_VOWEL_GROUP_RE.findall(w))
    if w.endswith("e"):
        consonant_le = (
            len(w) >= 3 and w.endswith("le") and w[-3] not in "aeiouy" and w[-3].isalpha()
        )
        if not consonant_le:
            count -= 1
    return max(count, 1)


def text_stats(text: str) -> TextStats:
    words = _WORD_RE.findall(text)
    if not words:
        raise EmptyText("readability is undefined for text with no words")
    segments = _SENTENCE_SPLIT_RE.split(text)
    sentences = sum(1 for seg in segments if _WORD_RE.search(seg))
    syllables = sum(count_syllables(word) for word in words)
    return TextStats(word_count=len(words), sentence_count=sentences, syllable_count=syllables)


def flesch_reading_ease(stats: TextStats) -> float:
    return 206.835 - (1.015 * stats.asl) - (84.6 * stats.asw)


def fk_grade(stats: TextStats) -> float:
    return (0.39 * stats.asl) + (11.8 * stats.asw) - 15.59


def readability_scores(text: str) -> ReadabilityScores:
    stats = text_stats(text)
    return ReadabilityScores(flesch_reading_ease(stats), fk_grade(stats))


# ---------------------------------------------------------------------------
# Confusion-matrix rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSet:
    tpr: float
    fpr: float
    precision: float
    recall: float
    f1: float


def confusion_metrics(counts) -> RateSet:
    """TPR/FPR/precision/recall/F1 from tp/fp/tn/fn counts.

    Empty-denominator convention: a rate whose denominator vanishes is 1.0
    when both the prediction side and the gold side are empty, 0.0 otherwise;
    FPR with no negatives is 0.0; F1 is 0.0 when precision + recall is 0.
    """
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    predicted_empty = tp + fp == 0
    gold_empty = tp + fn == 0

    if predicted_empty:
        precision = 1.0 if gold_empty else 0.0
    else:
        precision = tp / (tp + fp)
    if gold_empty:
        recall = 1.0 if predicted_empty else 0.0
    else:
        recall = tp / (tp + fn)
    tpr = recall
    fpr = fp / (tn + fp) if tn + fp > 0 else 0.0
    # F1 = 2PR/(P+R); evaluated from raw counts, which is algebraically
    # identical whenever tp > 0 and exact in floating point.
    if predicted_empty and gold_empty:
        f1 = 1.0
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * tp / (2 * tp + fp + fn)
    return RateSet(tpr=tpr, fpr=fpr, precision=precision, recall=recall, f1=f1)


# ---------------------------------------------------------------------------
# Special functions (self-contained)
# ---------------------------------------------------------------------------

_SQRT_PI = math.sqrt(math.pi)
_EPS = 1e-16
_TINY = 1e-300


def erf(x: float) -> float:
    if x < 0:
        return -erf(-x)
    if x == 0:
        return 0.0
    if x < 2.5:
        # All-positive-term series: erf(x) = (2x/sqrt(pi)) e^{-x^2} sum (2x^2)^n / (2n+1)!!
        term = 1.0
        total = 1.0
        two_x2 = 2.0 * x * x
        n = 0
        while True:
            n += 1
            term *= two_x2 / (2 * n + 1)
            total += term
            if term < _EPS * total:
                break
        return (2.0 * x / _SQRT_PI) * math.exp(-x * x) * total
    return 1.0 - erfc(x)


def erfc(x: float) -> float:
    if x < 0:
        return 2.0 - erfc(-x)
    if x < 2.5:
        return 1.0 - erf(x)
    # Continued fraction erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(...))))
    # evaluated with the modified Lentz algorithm.
    f = _TINY
    c = f
    d = 0.0
    a = 1.0
    k = 0
    while True:
        k += 1
        b = x
        d = b + a * d
        if d == 0.0:
            d = _TINY
        c = b + a / c
        if c == 0.0:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < _EPS or k > 300:
            break
        a = k / 2.0
    return math.exp(-x * x) / _SQRT_PI * f


def normal_sf(z: float) -> float:
    """Survival function of the standard normal distribution."""
    return 0.5 * erfc(z / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f_value: float, df_num: int, df_den: int) -> float:
    """Survival function of the F distribution."""
    if f_value <= 0.0:
        return 1.0
    x = df_den / (df_den + df_num * f_value)
    return betainc_reg(df_den / 2.0, df_num / 2.0, x)


# ---------------------------------------------------------------------------
# Statistical tests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnovaResult:
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    f_value: float
    p_value: float


@dataclass(frozen=True)
class TwoPropResult:
    z: float
    p_two_sided: float


@dataclass(frozen=True)
class KappaResult:
    observed_agreement: float
    expected_agreement: float
    kappa: float


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    if len(groups) < 2:
        raise ValueError("ANOVA requires at least two groups")
    if any(len(g) < 1 for g in groups):
        raise ValueError("every group needs at least one observation")
    n_total = sum(len(g) for g in groups)
    k = len(groups)
    if n_total <= k:
        raise ValueError("total observations must exceed the number of groups")

    grand_mean = sum(sum(g) for g in groups) / n_total
    means = [sum(g) / len(g) for g in groups]
    ss_between = sum(len(g) * (m - grand_mean) ** 2 for g, m in zip(groups, means))
    ss_within = sum(sum((x - m) ** 2 for x in g) for g, m in zip(groups, means))
    df_between = k - 1
    df_within = n_total - k

    if ss_within == 0.0:
        if ss_between > 0.0:
            raise DegenerateWithinVariance(
                "within-group variance is zero while group means differ"
            )
        return AnovaResult(0.0, 0.0, df_between, df_within, 0.0, 1.0)

    f_value = (ss_between * df_within) / (ss_within * df_between)
    p_value = f_sf(f_value, df_between, df_within)
    return AnovaResult(ss_between, ss_within, df_between, df_within, f_value, p_value)


def two_proportion_test(x1: int, n1: int, x2: int, n2: int) -> TwoPropResult:
    for x, n in ((x1, n1), (x2, n2)):
        if n <= 0:
            raise ValueError("sample sizes must be positive")
        if not 0 <= x <= n:
            raise ValueError("successes must lie in [0, n]")
    p1 = x1 / n1
    p2 = x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    if pooled == 0.0 or pooled == 1.0:
        if p1 == p2:
            return TwoPropResult(z=0.0, p_two_sided=1.0)
        raise DegeneratePooled("pooled proportion is degenerate with unequal proportions")
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (p1 - p2) / se
    p = min(1.0, erfc(abs(z) / math.sqrt(2.0)))
    return TwoPropResult(z=z, p_two_sided=p)


def cohens_kappa(labels_a: Sequence, labels_b: Sequence) -> KappaResult:
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences must have equal length")
    n = len(labels_a)
    if n == 0:
        raise ValueError("label sequences must be non-empty")

    p_o = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    categories = set(labels_a) | set(labels_b)
    counts_a = {c: 0 for c in categories}
    counts_b = {c: 0 for c in categories}
    for a in labels_a:
        counts_a[a] += 1
    for b in labels_b:
        counts_b[b] += 1
    # p_e == 1 exactly when both raters always used one and the same category.
    if len(set(labels_a)) == 1 and set(labels_a) == set(labels_b):
        raise PerfectChanceAgreement("expected agreement is 1; kappa undefined")
    p_e = sum((counts_a[c] / n) * (counts_b[c] / n) for c in categories)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaResult(observed_agreement=p_o, expected_agreement=p_e, kappa=kappa)
