"""Acceptance gate: every criterion at its pinned tolerance.

Run with `pytest -s tests/test_acceptance.py` to see one line per
criterion. The synthetic end-to-end fixture (dataset generation through
training) is shared by several criteria and runs once per session.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from biolip.evaluation import (
    anova_f,
    band_energy,
    cohens_d,
    evaluate,
    mean_landmark_psd,
    order_stat_reports,
    roc_auc,
    score_videos,
    trajectory_psd,
)
from biolip.kinematics import FeatureConfig, kinematic_stats, per_order_window_means
from biolip.network import ModelConfig, backward, forward, init_params, param_count
from biolip.perturbation import inject_noise, sequence_seed
from biolip.pipeline import features_from_sequences, load_features, load_sequences
from biolip.synthetic import SynthConfig, gen_dataset, gen_smooth, jitter_from_smooth
from biolip.training import TrainConfig, bce_logits_grad, train, weighted_bce_logits


def report(criterion, ok, detail):
    print(f"[{criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{criterion}: {detail}"


# --- shared end-to-end run (dataset -> files -> features -> training) ---

@pytest.fixture(scope="module")
def a3(tmp_path_factory):
    base = tmp_path_factory.mktemp("accept")
    scfg = SynthConfig(jitter_sigma=0.01)
    fcfg = FeatureConfig()
    t0 = time.perf_counter()
    tr_ss, va_ss, te_ss = np.random.SeedSequence(42).spawn(3)
    gen_dataset(scfg, 200, 200, tr_ss, base / "train")
    gen_dataset(scfg, 50, 50, va_ss, base / "val")
    gen_dataset(scfg, 50, 50, te_ss, base / "test")
    train_v, _ = load_features(base / "train")
    val_v, _ = load_features(base / "val")
    test_v, _ = load_features(base / "test")
    tcfg = TrainConfig(epochs=10, patience=10, seed=42)
    result = train(train_v, val_v, cfg=tcfg, feature_cfg=fcfg)
    scored = score_videos(result.best_params, test_v)
    auc = evaluate(scored).overall_auc
    elapsed = time.perf_counter() - t0
    test_seqs, _ = load_sequences(base / "test")
    return {
        "base": base, "scfg": scfg, "fcfg": fcfg, "params": result.best_params,
        "test_videos": test_v, "test_seqs": test_seqs, "auc": auc,
        "elapsed_s": elapsed, "result": result,
    }


def test_a1_gradient_correctness():
    t0 = time.perf_counter()
    cfg = ModelConfig()
    params = init_params(cfg, np.random.default_rng(0))
    pick = np.random.default_rng(7)
    names = list(params.tensors)
    h = 1e-4
    worst = 0.0
    for batch_seed in range(3):
        rng = np.random.default_rng(batch_seed)
        xt = rng.standard_normal((2, 25, 256)) * 0.5
        xs = np.abs(rng.standard_normal((2, 256))) * 0.4
        xr = rng.standard_normal((2, 8)) * 0.5
        y = np.array([1.0, 0.0])

        def loss_of():
            logits, cache = forward(params, xt, xs, xr, mode="train",
                                    dropout_rng=np.random.default_rng(99))
            return weighted_bce_logits(logits, y, 1.3), cache, logits

        loss, cache, logits = loss_of()
        grads = backward(params, cache, bce_logits_grad(logits, y, 1.3))
        for _ in range(64):
            name = names[pick.integers(len(names))]
            arr = params.tensors[name]
            idx = pick.integers(arr.size)
            orig = arr.flat[idx]
            arr.flat[idx] = orig + h
            lp, _, _ = loss_of()
            arr.flat[idx] = orig - h
            lm, _, _ = loss_of()
            arr.flat[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[name].flat[idx]
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-6))
    elapsed = time.perf_counter() - t0
    report("A1", worst < 1e-4 and elapsed < 60,
           f"max relative error {worst:.2e} over 64 params x 3 batches "
           f"(limit 1e-4), {elapsed:.1f}s (limit 60s)")


def test_a2_parameter_counts():
    full = param_count(init_params(ModelConfig(), np.random.default_rng(0)))
    no_stat = param_count(init_params(ModelConfig(stat_enabled=False),
                                      np.random.default_rng(0)))
    ok = full == 302145 and no_stat == 260737
    report("A2", ok, f"default {full} (want 302145), "
           f"stat-branch-off {no_stat} (want 260737 = 302145 - 41408)")


def test_a3_synthetic_end_to_end(a3):
    ok = a3["auc"] >= 0.95 and a3["elapsed_s"] < 900
    report("A3", ok, f"test video AUC {a3['auc']:.4f} (need >= 0.95), "
           f"full run {a3['elapsed_s']:.0f}s (limit 900s)")


def test_a4_effect_size_reproduction(a3):
    reports = order_stat_reports(a3["test_videos"], a3["fcfg"])
    by_name = {r.name: r for r in reports}
    ds = {name: by_name[name].cohens_d for name in
          ("displacement", "velocity", "acceleration", "jerk")}
    ps = {name: by_name[name].u_pvalue for name in ds}
    ok = (all(d > 0 for d in ds.values())
          and all(p < 1e-3 for p in ps.values())
          and ds["jerk"] > ds["velocity"])
    detail = ", ".join(f"{k}: d={v:.3f} p={ps[k]:.1e}" for k, v in ds.items())
    report("A4", ok, detail + f"; jerk>velocity: {ds['jerk'] > ds['velocity']}")


def test_a5_latency_and_memory(a3):
    from biolip.cli import bench_forward
    stats = bench_forward(a3["params"], a3["fcfg"], warmup=100, iters=10000)
    rss_mb = (stats["rss_delta_bytes"] or 0) / 1e6
    ok = stats["mean_ms"] < 5.0 and rss_mb < 32.0
    report("A5", ok, f"single-window eval mean {stats['mean_ms']:.3f} ms "
           f"(limit 5 ms, p99 {stats['p99_ms']:.3f} ms), "
           f"rss delta {rss_mb:.1f} MB over 10k iters (limit 32 MB)")


def test_a6_smoothed_jitter_analog(a3):
    scfg = a3["scfg"]
    smoothed_cfg = replace(scfg, jitter_mode="smoothed")
    ch = np.random.SeedSequence(4206).spawn(50)
    smooth_seqs, white_seqs, smoothed_seqs = [], [], []
    for i, root in enumerate(ch):
        s_ss, n_white, n_smoothed = root.spawn(3)
        smooth = gen_smooth(scfg, s_ss, f"a6_smooth_{i:03d}")
        smooth_seqs.append(smooth)
        white_seqs.append(jitter_from_smooth(smooth, scfg, n_white, f"a6_white_{i:03d}"))
        smoothed_seqs.append(jitter_from_smooth(smooth, smoothed_cfg, n_smoothed,
                                                f"a6_smoothed_{i:03d}"))
    videos = features_from_sequences(smooth_seqs + smoothed_seqs, a3["fcfg"])
    auc_smoothed = evaluate(score_videos(a3["params"], videos)).overall_auc
    drop = a3["auc"] - auc_smoothed

    def mean_band(seqs):
        return float(np.mean([band_energy(*mean_landmark_psd(s.frames, s.fps), 1.0, 8.0)
                              for s in seqs]))

    e_smooth = mean_band(smooth_seqs)
    e_white = mean_band(white_seqs)
    e_smoothed = mean_band(smoothed_seqs)
    psd_ok = abs(e_smoothed - e_smooth) < abs(e_white - e_smooth)
    ok = drop >= 0.05 and psd_ok
    report("A6", ok, f"smoothed-jitter AUC {auc_smoothed:.4f}, drop {drop:.3f} "
           f"(need >= 0.05); band energy smooth {e_smooth:.2e}, "
           f"smoothed {e_smoothed:.2e}, white {e_white:.2e} (smoothed closer: {psd_ok})")


def test_a7_noise_control_monotonicity(a3):
    sigmas = [0.0, 0.001, 0.002, 0.005, 0.01]
    means = {0: [], 1: []}
    aucs = {}
    for sigma in sigmas:
        pert = [inject_noise(s, sigma, sequence_seed(777, s.video_id))
                for s in a3["test_seqs"]]
        videos = features_from_sequences(pert, a3["fcfg"])
        for label in (0, 1):
            vals = np.concatenate([per_order_window_means(v.x_s, a3["fcfg"])[:, 3]
                                   for v in videos if v.label == label])
            means[label].append(float(vals.mean()))
        aucs[sigma] = evaluate(score_videos(a3["params"], videos)).overall_auc
    mono = (all(np.diff(means[0]) >= 0) and all(np.diff(means[1]) >= 0))
    auc_ok = abs(aucs[0.005] - aucs[0.0]) <= 0.05
    ok = mono and auc_ok
    report("A7", ok, f"mean jerk real {['%.4f' % m for m in means[0]]}, "
           f"fake {['%.4f' % m for m in means[1]]} (non-decreasing: {mono}); "
           f"AUC {aucs[0.0]:.4f} -> {aucs[0.005]:.4f} at sigma 0.005 (within 0.05: {auc_ok})")


def test_a8_statistics_oracles():
    # roc_auc vs brute-force pairwise counting, exact, 1000 instances
    rng = np.random.default_rng(12)
    exact = True
    for _ in range(1000):
        n = int(rng.integers(4, 51))
        scores = rng.integers(0, 12, size=n).astype(float) / 11.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        brute = (np.sum(pos[:, None] > neg[None, :])
                 + 0.5 * np.sum(pos[:, None] == neg[None, :])) / (pos.size * neg.size)
        if roc_auc(scores, labels) != brute:
            exact = False
            break

    # anova_f(k=2) == t^2 within 1e-9
    t2_ok = True
    for _ in range(200):
        a = rng.standard_normal(rng.integers(3, 40))
        b = rng.standard_normal(rng.integers(3, 40)) + rng.uniform(-1, 1)
        f, _ = anova_f([a, b])
        sp2 = (((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1))
               / (a.size + b.size - 2))
        t = (a.mean() - b.mean()) / math.sqrt(sp2 * (1 / a.size + 1 / b.size))
        if not math.isclose(f, t * t, rel_tol=1e-9):
            t2_ok = False
            break

    # PSD Parseval within 1e-9 relative
    parseval_ok = True
    for n in (64, 100, 121, 250):
        x = rng.standard_normal(n)
        freqs, power = trajectory_psd(x, fs=25.0)
        total = power.sum() * (freqs[1] - freqs[0])
        w = np.hanning(n + 1)[:-1]
        x0 = x - x.mean()
        want = ((x0 * w) ** 2).sum() / (w ** 2).sum()
        if not math.isclose(total, want, rel_tol=1e-9):
            parseval_ok = False
            break

    # kinematic_stats vs naive reimplementation within 1e-12 relative, 1000 windows
    fcfg = FeatureConfig()
    kin_ok = True
    worst_rel = 0.0
    for _ in range(1000):
        win = rng.standard_normal((25, 64, 3))
        got = kinematic_stats(win, fcfg)
        want = _naive_stats(win)
        rel = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-300))
        worst_rel = max(worst_rel, rel)
        if rel > 1e-12:
            kin_ok = False
            break
    ok = exact and t2_ok and parseval_ok and kin_ok
    report("A8", ok, f"roc exact over 1000: {exact}; F==t^2 @1e-9: {t2_ok}; "
           f"Parseval @1e-9: {parseval_ok}; kinematics vs naive @1e-12: {kin_ok} "
           f"(worst {worst_rel:.1e})")


def _naive_stats(win):
    out = []
    for k in range(4):
        for lm in range(64):
            series = [float(v) for v in win[:, lm, 1]]
            for _ in range(k):
                series = [series[i + 1] - series[i] for i in range(len(series) - 1)]
            m = sum(series) / len(series)
            out.append(math.sqrt(sum((x - m) ** 2 for x in series) / len(series)))
    return np.array(out)


def test_a9_determinism_and_roundtrip(tmp_path):
    from biolip.checkpoint import load_checkpoint, save_checkpoint
    from biolip.cli import main
    scfg = SynthConfig(n_frames=60, jitter_sigma=0.03)
    from biolip.synthetic import save_synth_config
    cfg_path = tmp_path / "synth.json"
    save_synth_config(scfg, cfg_path)
    for name, seed in (("tr", 1), ("va", 2)):
        main(["synth", "--out", str(tmp_path / name), "--config", str(cfg_path),
              "--n-real", "5", "--n-fake", "5", "--seed", str(seed)])
    tcfg_path = tmp_path / "train.json"
    tcfg_path.write_text('{"epochs": 3, "patience": 3, "batch_size": 32, "seed": 13}')
    ckpts = []
    for tag in ("run1", "run2"):
        out = tmp_path / f"{tag}.ckpt"
        rc = main(["train", "--train", str(tmp_path / "tr"), "--val", str(tmp_path / "va"),
                   "--config", str(tcfg_path), "--out", str(out)])
        assert rc == 0
        ckpts.append(out)
    identical = ckpts[0].read_bytes() == ckpts[1].read_bytes()

    params, fcfg, state = load_checkpoint(ckpts[0])
    resaved = tmp_path / "resaved.ckpt"
    save_checkpoint(resaved, params, fcfg, state)
    roundtrip = resaved.read_bytes() == ckpts[0].read_bytes()
    ok = identical and roundtrip
    report("A9", ok, f"two seeded runs bit-identical: {identical}; "
           f"load->save round trip bit-exact: {roundtrip}")


AVLIPS_VARS = ("BIOLIP_AVLIPS_TRAIN", "BIOLIP_AVLIPS_VAL", "BIOLIP_AVLIPS_TEST")


def test_a10_avlips_indistribution(tmp_path):
    if not all(os.environ.get(v) for v in AVLIPS_VARS):
        pytest.skip("AVLips landmark exports not supplied "
                    f"(set {', '.join(AVLIPS_VARS)})")
    fcfg = FeatureConfig()
    train_v, _ = load_features(os.environ["BIOLIP_AVLIPS_TRAIN"])
    val_v, _ = load_features(os.environ["BIOLIP_AVLIPS_VAL"])
    test_v, _ = load_features(os.environ["BIOLIP_AVLIPS_TEST"])
    result = train(train_v, val_v, cfg=TrainConfig(), feature_cfg=fcfg)
    from biolip.checkpoint import save_checkpoint
    save_checkpoint(tmp_path / "avlips.ckpt", result.best_params, fcfg, None)
    auc = evaluate(score_videos(result.best_params, test_v)).overall_auc
    report("A10a", auc >= 0.95, f"AVLips in-distribution video AUC {auc:.4f} (need >= 0.95)")


def test_a10_lipsynctimit_crf23():
    ckpt_path = os.environ.get("BIOLIP_AVLIPS_CKPT")
    data_dir = os.environ.get("BIOLIP_LIPSYNCTIMIT_CRF23")
    if not (ckpt_path and data_dir):
        pytest.skip("LipSyncTIMIT CRF=23 exports or AVLips checkpoint not supplied "
                    "(set BIOLIP_AVLIPS_CKPT and BIOLIP_LIPSYNCTIMIT_CRF23)")
    from biolip.checkpoint import load_checkpoint
    params, fcfg, _ = load_checkpoint(ckpt_path)
    videos, _ = load_features(data_dir, cfg=fcfg or FeatureConfig())
    rep = evaluate(score_videos(params, videos))
    mean_auc = rep.generator_mean_auc or rep.overall_auc
    report("A10b", mean_auc >= 0.85,
           f"LipSyncTIMIT CRF=23 mean AUC {mean_auc:.4f} (need >= 0.85)")
