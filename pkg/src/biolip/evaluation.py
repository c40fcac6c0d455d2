"""Scoring and statistical analysis: window-to-video aggregation,
rank-based ROC-AUC, effect sizes, rank tests, one-way ANOVA, and
spectral estimation for trajectory series.

AUC uses the rank-sum formulation with midrank tie handling. The
Mann-Whitney p-value comes from the normal approximation with tie and
continuity corrections; the ANOVA p-value from the regularized
incomplete beta. Results are pure reductions over their inputs, safe to
shard and merge deterministically.

PSD convention: single periodogram of the mean-removed series under a
periodic Hann window, one-sided, scaled so that sum(power) * bin_width
equals the window-weighted series variance sum((x - mean(x))^2 * w^2) /
sum(w^2) (checked to 1e-9 by the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import (
    EmptyVideo,
    SeriesTooShort,
    SingleClass,
    ZeroPooledVariance,
    ZeroWithinVariance,
)
from .kinematics import FeatureConfig, VideoFeatures, per_order_window_means
from .network import ModelParams, forward
from .regions import REGION_NAMES, RegionMap
from .training import sigmoid

ORDER_NAMES = {0: "displacement", 1: "velocity", 2: "acceleration", 3: "jerk"}


@dataclass
class ScoredVideo:
    video_id: str
    label: int | None
    generator_tag: str | None
    window_logits: np.ndarray
    score: float


@dataclass
class StatReport:
    name: str
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    std_a: float
    std_b: float
    cohens_d: float
    u_stat: float
    u_pvalue: float
    f_stat: float
    f_pvalue: float


@dataclass
class EvalReport:
    overall_auc: float
    n_videos: int
    per_generator: list[tuple[str, int, float]]  # (tag, n_videos incl. reals, auc)
    generator_mean_auc: float | None
    order_reports: list[StatReport] | None = None


def video_score(window_logits) -> float:
    """Mean of per-window sigmoids."""
    z = np.asarray(window_logits, dtype=np.float64)
    if z.size == 0:
        raise EmptyVideo("video has no windows")
    return float(sigmoid(z).mean())


def score_videos(params: ModelParams, videos: list[VideoFeatures]) -> list[ScoredVideo]:
    out = []
    for v in videos:
        logits, _ = forward(params, v.x_t, v.x_s, v.x_r, mode="eval")
        out.append(ScoredVideo(video_id=v.video_id, label=v.label,
                               generator_tag=v.generator_tag,
                               window_logits=logits, score=video_score(logits)))
    return out


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the mean of their rank span."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Rank-sum AUC with midrank tie handling."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"{n_pos} positives / {n_neg} negatives")
    ranks = _midranks(s)
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def cohens_d(group_a, group_b) -> float:
    """(mean_a - mean_b) / pooled sample standard deviation."""
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each group needs at least 2 samples")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    pooled = ((a.size - 1) * va + (b.size - 1) * vb) / (a.size + b.size - 2)
    if pooled <= 0.0:
        raise ZeroPooledVariance("pooled variance is zero")
    return float((a.mean() - b.mean()) / math.sqrt(pooled))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(group_a, group_b) -> tuple[float, float]:
    """U statistic of group_a and a two-sided p from the normal
    approximation with midranks, tie correction and continuity correction."""
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    n_a, n_b = a.size, b.size
    if n_a == 0 or n_b == 0:
        raise ValueError("both groups must be nonempty")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    u_a = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)

    n = n_a + n_b
    mu = n_a * n_b / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts.astype(np.float64) ** 3 - counts).sum())
    var = (n_a * n_b / 12.0) * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0.0:
        return u_a, 1.0
    z = (abs(u_a - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = min(1.0, 2.0 * _normal_sf(z))
    return u_a, p


def anova_f(groups: list) -> tuple[float, float]:
    """One-way ANOVA: F = between-group MS / within-group MS, with the
    upper-tail p from the F distribution (df k-1, N-k)."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(arrays)
    if k < 2 or any(a.size < 2 for a in arrays):
        raise ValueError("need >= 2 groups with >= 2 samples each")
    n_total = sum(a.size for a in arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = sum(a.size * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(((a - a.mean()) ** 2).sum() for a in arrays)
    df_b = k - 1
    df_w = n_total - k
    ms_within = ss_within / df_w
    if ms_within <= 0.0:
        raise ZeroWithinVariance("within-group variance is zero")
    f = float((ss_between / df_b) / ms_within)
    # P(F > f) = I_{dfw/(dfw + dfb f)}(dfw/2, dfb/2)
    x = df_w / (df_w + df_b * f)
    p = float(betainc(df_w / 2.0, df_b / 2.0, x))
    return f, min(max(p, 0.0), 1.0)


def trajectory_psd(series, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Hann periodogram of the mean-removed series.

    Returns (frequencies, power density); see the module docstring for
    the normalization contract.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < 16:
        raise SeriesTooShort(f"need >= 16 samples, got {x.size}")
    if not fs > 0:
        raise ValueError("fs must be positive")
    n = x.size
    x0 = x - x.mean()
    w = np.hanning(n + 1)[:-1]  # periodic Hann
    xw = x0 * w
    spec = np.fft.rfft(xw)
    scale = 1.0 / (fs * (w ** 2).sum())
    power = (np.abs(spec) ** 2) * scale
    if n % 2 == 0:
        power[1:-1] *= 2.0  # all but DC and Nyquist
    else:
        power[1:] *= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    return freqs, power


def band_energy(freqs: np.ndarray, power: np.ndarray,
                f_lo: float, f_hi: float) -> float:
    """Integrated power over [f_lo, f_hi] (rectangle rule over bins)."""
    df = freqs[1] - freqs[0]
    mask = (freqs >= f_lo) & (freqs <= f_hi)
    return float(power[mask].sum() * df)


def mean_landmark_psd(frames: np.ndarray, fs: float,
                      axis: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """PSD of each landmark's coordinate series, averaged across landmarks."""
    n_landmarks = frames.shape[1]
    acc = None
    freqs = None
    for i in range(n_landmarks):
        freqs, p = trajectory_psd(frames[:, i, axis], fs)
        acc = p if acc is None else acc + p
    return freqs, acc / n_landmarks


# --- reports ---

def order_stat_reports(videos: list[VideoFeatures],
                       cfg: FeatureConfig) -> list[StatReport]:
    """Fake-vs-real comparison of per-window mean stds, one report per
    enabled order. Group a = fake windows, group b = real windows."""
    fake, real = [], []
    for v in videos:
        if v.label is None:
            continue
        (fake if v.label == 1 else real).append(per_order_window_means(v.x_s, cfg))
    if not fake or not real:
        raise SingleClass("need both labels for the order analysis")
    fake = np.concatenate(fake)
    real = np.concatenate(real)
    out = []
    for j, k in enumerate(cfg.orders):
        a, b = fake[:, j], real[:, j]
        u, p_u = mann_whitney_u(a, b)
        f, p_f = anova_f([a, b])
        out.append(StatReport(
            name=ORDER_NAMES.get(k, f"order{k}"),
            n_a=a.size, n_b=b.size,
            mean_a=float(a.mean()), mean_b=float(b.mean()),
            std_a=float(a.std(ddof=1)), std_b=float(b.std(ddof=1)),
            cohens_d=cohens_d(a, b),
            u_stat=u, u_pvalue=p_u, f_stat=f, f_pvalue=p_f))
    return out


def region_stat_reports(videos: list[VideoFeatures], cfg: FeatureConfig,
                        rm: RegionMap, landmark_ids: list[int]) -> list[StatReport]:
    """Fake-vs-real comparison of per-window region-mean displacement std."""
    if 0 not in cfg.orders or "y" not in cfg.axes:
        raise ValueError("region analysis needs order 0 and the y axis enabled")
    block = cfg.orders.index(0) * cfg.n_axes + cfg.axes.index("y")
    n_lm = len(landmark_ids)
    rows = rm.region_rows(landmark_ids)
    fake, real = [], []
    for v in videos:
        if v.label is None:
            continue
        sigma0 = v.x_s[:, block * n_lm:(block + 1) * n_lm]
        means = np.stack([sigma0[:, rows[name]].mean(axis=1) for name in REGION_NAMES],
                         axis=1)
        (fake if v.label == 1 else real).append(means)
    if not fake or not real:
        raise SingleClass("need both labels for the region analysis")
    fake = np.concatenate(fake)
    real = np.concatenate(real)
    out = []
    for j, name in enumerate(REGION_NAMES):
        a, b = fake[:, j], real[:, j]
        u, p_u = mann_whitney_u(a, b)
        f, p_f = anova_f([a, b])
        out.append(StatReport(
            name=name, n_a=a.size, n_b=b.size,
            mean_a=float(a.mean()), mean_b=float(b.mean()),
            std_a=float(a.std(ddof=1)), std_b=float(b.std(ddof=1)),
            cohens_d=cohens_d(a, b),
            u_stat=u, u_pvalue=p_u, f_stat=f, f_pvalue=p_f))
    return out


def evaluate(scored: list[ScoredVideo],
             videos: list[VideoFeatures] | None = None,
             cfg: FeatureConfig | None = None) -> EvalReport:
    """Overall AUC, per-generator AUC (each generator's fakes against all
    reals) and their mean; optionally the per-order stat reports when the
    window features are supplied."""
    labeled = [v for v in scored if v.label is not None]
    if not labeled:
        raise SingleClass("no labeled videos")
    scores = np.array([v.score for v in labeled])
    labels = np.array([v.label for v in labeled])
    overall = roc_auc(scores, labels)

    reals = [v for v in labeled if v.label == 0]
    tags = sorted({v.generator_tag for v in labeled
                   if v.label == 1 and v.generator_tag is not None})
    per_tag = []
    for tag in tags:
        fakes = [v for v in labeled if v.label == 1 and v.generator_tag == tag]
        subset = reals + fakes
        auc = roc_auc(np.array([v.score for v in subset]),
                      np.array([v.label for v in subset]))
        per_tag.append((tag, len(subset), auc))
    mean_auc = float(np.mean([t[2] for t in per_tag])) if per_tag else None

    order_reports = None
    if videos is not None and cfg is not None:
        order_reports = order_stat_reports(videos, cfg)
    return EvalReport(overall_auc=overall, n_videos=len(labeled),
                      per_generator=per_tag, generator_mean_auc=mean_auc,
                      order_reports=order_reports)
