import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from biolip.errors import (
    EmptyVideo,
    SeriesTooShort,
    SingleClass,
    ZeroPooledVariance,
    ZeroWithinVariance,
)
from biolip.evaluation import (
    ScoredVideo,
    anova_f,
    band_energy,
    cohens_d,
    evaluate,
    mann_whitney_u,
    roc_auc,
    trajectory_psd,
    video_score,
)


def brute_force_auc(scores, labels):
    """Pairwise counting oracle: wins + half-ties over all pos/neg pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_video_score_examples():
    assert video_score([0.0, 0.0]) == 0.5
    z = math.log(3)
    assert math.isclose(video_score([z, -z]), 0.5, rel_tol=1e-12)
    assert math.isclose(video_score([1.7]), 1 / (1 + math.exp(-1.7)), rel_tol=1e-12)
    with pytest.raises(EmptyVideo):
        video_score([])


def test_roc_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.9, 0.1, 0.8, 0.2], [1, 0, 0, 1]) == 0.75  # brute force: 3/4 pairs
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5
    with pytest.raises(SingleClass):
        roc_auc([0.1, 0.2], [1, 1])


def test_roc_auc_matches_brute_force_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(4, 50))
        scores = rng.integers(0, 10, size=n).astype(float) / 10  # many ties
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert roc_auc(scores, labels) == brute_force_auc(scores, labels)


def test_auc_invariances():
    rng = np.random.default_rng(1)
    scores = rng.random(40)
    labels = rng.integers(0, 2, size=40)
    labels[0], labels[1] = 0, 1
    base = roc_auc(scores, labels)
    # strictly increasing transforms preserve AUC
    for f in (lambda x: 3 * x + 1, np.exp, lambda x: x ** 3 + x):
        assert math.isclose(roc_auc(f(scores), labels), base, rel_tol=1e-12)
    # label flip complements
    assert math.isclose(roc_auc(scores, 1 - labels), 1.0 - base, rel_tol=1e-12)


def test_cohens_d_examples():
    assert cohens_d([1, 2, 3], [1, 2, 3]) == 0.0
    assert math.isclose(cohens_d([1, 2, 3], [2, 3, 4]), -1.0, rel_tol=1e-12)
    with pytest.raises(ZeroPooledVariance):
        cohens_d([0.0, 0.0], [0.0, 0.0])


def test_cohens_d_symmetry_and_affine_invariance():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(20), rng.standard_normal(25) + 0.4
    assert math.isclose(cohens_d(a, b), -cohens_d(b, a), rel_tol=1e-12)
    alpha, beta = 2.3, -0.7
    assert math.isclose(cohens_d(alpha * a + beta, alpha * b + beta),
                        cohens_d(a, b), rel_tol=1e-10)


def test_mann_whitney_examples():
    u, _ = mann_whitney_u([1, 2], [3, 4])
    assert u == 0.0  # every pair loses
    u, p = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert u == 4.5  # n^2 / 2
    assert p > 0.9
    u, _ = mann_whitney_u([5], [1])
    assert u == 1.0


def test_mann_whitney_u_sum_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.standard_normal(rng.integers(2, 30))
        b = rng.standard_normal(rng.integers(2, 30))
        ua, _ = mann_whitney_u(a, b)
        ub, _ = mann_whitney_u(b, a)
        assert math.isclose(ua + ub, len(a) * len(b), rel_tol=1e-12)


def test_mann_whitney_p_bounds():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.standard_normal(10)
        b = rng.standard_normal(12) + rng.uniform(-2, 2)
        _, p = mann_whitney_u(a, b)
        assert 0.0 <= p <= 1.0


def test_anova_examples():
    f, _ = anova_f([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    assert f == 0.0
    f, p = anova_f([[1, 2, 3], [4, 5, 6]])
    assert math.isclose(f, 13.5, rel_tol=1e-12)  # SSB 13.5, MSW 1
    assert 0 < p < 0.05
    with pytest.raises(ZeroWithinVariance):
        anova_f([[1.0, 1.0], [2.0, 2.0]])


def test_anova_equals_t_squared():
    rng = np.random.default_rng(5)
    for _ in range(30):
        a = rng.standard_normal(rng.integers(3, 25))
        b = rng.standard_normal(rng.integers(3, 25)) + rng.uniform(-1, 1)
        f, _ = anova_f([a, b])
        na, nb = len(a), len(b)
        sp2 = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
        t = (a.mean() - b.mean()) / math.sqrt(sp2 * (1 / na + 1 / nb))
        assert math.isclose(f, t * t, rel_tol=1e-9)


def f_pdf(x, d1, d2):
    c = (gamma_fn((d1 + d2) / 2) / (gamma_fn(d1 / 2) * gamma_fn(d2 / 2))
         * (d1 / d2) ** (d1 / 2))
    return c * x ** (d1 / 2 - 1) * (1 + d1 * x / d2) ** (-(d1 + d2) / 2)


def test_anova_pvalue_against_quadrature():
    # independent oracle: integrate the F density upper tail
    for groups, d1, d2 in [([[1, 2, 3], [4, 5, 6]], 1, 4),
                           ([[1.0, 3, 2, 5], [2.0, 2, 4, 1], [0.5, 1, 0, 2]], 2, 9)]:
        f, p = anova_f(groups)
        tail, _ = integrate.quad(f_pdf, f, np.inf, args=(d1, d2))
        assert math.isclose(p, tail, rel_tol=1e-8)


def test_psd_constant_series_is_silent():
    freqs, power = trajectory_psd(np.full(64, 2.5), fs=25.0)
    np.testing.assert_allclose(power, 0.0, atol=1e-28)


def test_psd_sine_concentrates_in_band():
    fs, n = 25.0, 250
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * 5.0 * t)
    freqs, power = trajectory_psd(x, fs)
    total = band_energy(freqs, power, 0.0, fs / 2)
    in_band = band_energy(freqs, power, 4.0, 6.0)
    assert in_band / total >= 0.99


def test_psd_parseval():
    rng = np.random.default_rng(6)
    for n in (64, 121, 250):
        x = rng.standard_normal(n)
        freqs, power = trajectory_psd(x, fs=25.0)
        df = freqs[1] - freqs[0]
        total = power.sum() * df
        # direct time-domain oracle under the documented convention
        w = np.hanning(n + 1)[:-1]
        x0 = x - x.mean()
        want = ((x0 * w) ** 2).sum() / (w ** 2).sum()
        assert math.isclose(total, want, rel_tol=1e-9)


def test_psd_too_short():
    with pytest.raises(SeriesTooShort):
        trajectory_psd(np.zeros(15), fs=25.0)


def _sv(vid, label, tag, logits):
    z = np.asarray(logits, dtype=float)
    return ScoredVideo(vid, label, tag, z, video_score(z))


def test_evaluate_per_generator_mean():
    # tag A perfectly separated (AUC 1.0), tag B at chance (AUC 0.5) -> mean 0.75
    videos = [
        _sv("r1", 0, None, [-4.0]), _sv("r2", 0, None, [-3.0]),
        _sv("a1", 1, "genA", [5.0]), _sv("a2", 1, "genA", [6.0]),
        _sv("b1", 1, "genB", [0.0]), _sv("b2", 1, "genB", [-5.0]),
    ]
    rep = evaluate(videos)
    per = dict((t, auc) for t, _, auc in rep.per_generator)
    assert per["genA"] == 1.0
    assert per["genB"] == 0.5
    assert math.isclose(rep.generator_mean_auc, 0.75, rel_tol=1e-12)


def test_evaluate_single_generator_equals_overall():
    videos = [_sv("r1", 0, None, [-1.0]), _sv("r2", 0, None, [0.2]),
              _sv("f1", 1, "g", [1.0]), _sv("f2", 1, "g", [0.1])]
    rep = evaluate(videos)
    assert rep.per_generator[0][2] == rep.overall_auc
    assert rep.generator_mean_auc == rep.overall_auc
