"""Command-line entry point.

Subcommands: synth, extract, train, eval, perturb, stats, bench. Every
run writes one line-delimited manifest next to its outputs (command,
resolved config, seed, paths, version, wall time) so any artifact can
be regenerated from its manifest alone. Outputs are written atomically
(temp file + rename). Exit codes: 0 success, 1 domain error, 2 usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import BiolipError
from .evaluation import (
    StatReport,
    band_energy,
    evaluate,
    mean_landmark_psd,
    order_stat_reports,
    region_stat_reports,
    score_videos,
)
from .kinematics import (
    FeatureConfig,
    per_order_window_means,
    write_feature_cache,
)
from .network import ModelConfig, forward
from .perturbation import PerturbSpec, apply_perturbation
from .pipeline import features_from_sequences, load_features, load_sequences
from .regions import default_region_map, load_region_map
from .synthetic import SynthConfig, gen_dataset, load_synth_config
from .trajectory import normalized_to_raw, write_sequence_jsonl
from .training import TrainConfig, history_to_csv, train


@contextmanager
def atomic_write(path, mode="w", **kwargs):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Run:
    """Collects manifest records for one CLI invocation."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.t0 = time.perf_counter()
        self.record = {
            "command": command,
            "argv": {k: (str(v) if isinstance(v, Path) else v)
                     for k, v in vars(args).items() if k != "func"},
            "version": __version__,
            "config": {},
            "inputs": [],
            "outputs": [],
            "notes": [],
        }

    def config(self, **kwargs):
        self.record["config"].update(kwargs)

    def add_input(self, path):
        self.record["inputs"].append(str(path))

    def add_output(self, path):
        self.record["outputs"].append(str(path))

    def note(self, text):
        self.record["notes"].append(text)
        print(text)

    def finish(self, manifest_path):
        self.record["wall_seconds"] = round(time.perf_counter() - self.t0, 3)
        with atomic_write(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.record) + "\n")


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _region_map(args):
    if getattr(args, "region_map", None):
        return load_region_map(args.region_map)
    return default_region_map()


def _feature_config(args) -> FeatureConfig:
    if getattr(args, "feature_config", None):
        return FeatureConfig.from_dict(_load_json(args.feature_config))
    return FeatureConfig()


# --- subcommands ---

def cmd_synth(args) -> int:
    run = _Run("synth", args)
    cfg = load_synth_config(args.config) if args.config else SynthConfig()
    rm = _region_map(args)
    run.config(synth=cfg.to_dict(), seed=args.seed,
               n_real=args.n_real, n_fake=args.n_fake)
    paths = gen_dataset(cfg, args.n_real, args.n_fake, args.seed, args.out, rm=rm)
    for p in paths:
        run.add_output(p)
    run.note(f"wrote {len(paths)} sequences to {args.out}")
    run.finish(Path(args.out) / "manifest.jsonl")
    return 0


def cmd_extract(args) -> int:
    run = _Run("extract", args)
    rm = _region_map(args)
    fcfg = _feature_config(args)
    run.config(feature=fcfg.to_dict())
    run.add_input(args.inp)
    videos, stats = load_features(args.inp, rm, fcfg)
    n_windows = sum(v.n_windows for v in videos)
    write_feature_cache(args.cache, videos, fcfg)
    run.add_output(args.cache)
    run.add_output(str(args.cache) + ".meta.json")
    run.note(f"{stats.summary()}; {n_windows} windows cached")
    run.note(f"malformed_lines={stats.malformed_lines} windows={n_windows}")
    run.finish(str(args.cache) + ".manifest.jsonl")
    return 0


def cmd_train(args) -> int:
    run = _Run("train", args)
    rm = _region_map(args)
    fcfg = _feature_config(args)
    tcfg = TrainConfig.from_dict(_load_json(args.config)) if args.config else TrainConfig()
    run.config(feature=fcfg.to_dict(), train=tcfg.to_dict(), seed=tcfg.seed)
    run.add_input(args.train)
    run.add_input(args.val)

    train_videos, tstats = load_features(args.train, rm, fcfg)
    val_videos, vstats = load_features(args.val, rm, fcfg)
    run.note(f"train: {tstats.summary()}")
    run.note(f"val: {vstats.summary()}")

    model_cfg = None
    if args.model_config:
        model_cfg = ModelConfig.from_dict(_load_json(args.model_config))
    resume = None
    if args.resume:
        params, ck_fcfg, state = load_checkpoint(args.resume)
        if state is None:
            raise BiolipError(f"{args.resume} carries no training state to resume from")
        resume = (params, state)

    result = train(train_videos, val_videos, cfg=tcfg, model_cfg=model_cfg,
                   feature_cfg=fcfg, resume=resume,
                   stop_after_epoch=args.stop_after_epoch,
                   log=(print if args.verbose else None))
    save_checkpoint(args.out, result.best_params, fcfg, result.best_state)
    run.add_output(args.out)
    history_path = args.history or (str(args.out) + ".history.csv")
    history_to_csv(result.history, history_path)
    run.add_output(history_path)
    if args.save_last:
        save_checkpoint(args.save_last, result.last_params, fcfg, result.last_state)
        run.add_output(args.save_last)
    best = result.history.best_epoch
    best_auc = next(r.val_auc for r in result.history.epochs if r.epoch == best)
    run.note(f"best epoch {best} val_auc {best_auc:.4f} "
             f"({len(result.history.epochs)} epochs run)")
    run.finish(str(args.out) + ".manifest.jsonl")
    return 0


def cmd_eval(args) -> int:
    run = _Run("eval", args)
    params, fcfg, _ = load_checkpoint(args.ckpt)
    fcfg = fcfg or FeatureConfig()
    rm = _region_map(args)
    run.add_input(args.ckpt)
    run.add_input(args.data)
    videos, stats = load_features(args.data, rm, fcfg)
    run.note(f"data: {stats.summary()}")
    scored = score_videos(params, videos)
    report = evaluate(scored)
    with atomic_write(args.report, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scope", "n_videos", "auc"])
        w.writerow(["overall", report.n_videos, repr(report.overall_auc)])
        for tag, n, auc in report.per_generator:
            w.writerow([f"generator:{tag}", n, repr(auc)])
        if report.generator_mean_auc is not None:
            w.writerow(["generator_mean", report.n_videos,
                        repr(report.generator_mean_auc)])
    run.add_output(args.report)
    run.note(f"overall video AUC {report.overall_auc:.4f} over {report.n_videos} videos")
    run.finish(str(args.report) + ".manifest.jsonl")
    return 0


def _stat_rows(kind: str, reports: list[StatReport]):
    for r in reports:
        yield [kind, r.name, r.n_a, r.n_b,
               repr(r.mean_a), repr(r.mean_b), repr(r.std_a), repr(r.std_b),
               repr(r.cohens_d), repr(r.u_stat), repr(r.u_pvalue),
               repr(r.f_stat), repr(r.f_pvalue)]


def cmd_stats(args) -> int:
    run = _Run("stats", args)
    rm = _region_map(args)
    fcfg = _feature_config(args)
    run.add_input(args.data)
    seqs, stats = load_sequences(args.data, rm)
    run.note(f"data: {stats.summary()}")
    videos = features_from_sequences(seqs, fcfg, rm)
    orders = order_stat_reports(videos, fcfg)
    regions = region_stat_reports(videos, fcfg, rm, seqs[0].landmark_ids)

    with atomic_write(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "name", "n_fake", "n_real", "mean_fake", "mean_real",
                    "std_fake", "std_real", "cohens_d", "u_stat", "u_pvalue",
                    "f_stat", "f_pvalue"])
        w.writerows(_stat_rows("order", orders))
        w.writerows(_stat_rows("region", regions))
    run.add_output(args.out)

    # class-mean PSD over a common series length
    n_common = min(len(s) for s in seqs)
    by_class: dict[str, list[np.ndarray]] = {"real": [], "fake": []}
    freqs = None
    for s in seqs:
        if s.label is None:
            continue
        freqs, p = mean_landmark_psd(s.frames[:n_common], s.fps)
        by_class["fake" if s.label == 1 else "real"].append(p)
    class_power = {name: np.mean(ps, axis=0) for name, ps in by_class.items() if ps}
    if args.psd and class_power:
        with atomic_write(args.psd, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency"] + [f"power_{n}" for n in class_power])
            for i, f in enumerate(freqs):
                w.writerow([repr(float(f))] + [repr(float(class_power[n][i]))
                                               for n in class_power])
        run.add_output(args.psd)
        for name, p in class_power.items():
            run.note(f"{name}: 1-8 Hz band energy {band_energy(freqs, p, 1.0, 8.0):.3e}")

    if not args.no_figs:
        from .figures import (
            render_class_psd,
            render_order_distributions,
            render_region_effects,
        )
        fig_dir = Path(args.figs) if args.figs else Path(args.out).parent
        fig_dir.mkdir(parents=True, exist_ok=True)
        fake_m, real_m = [], []
        for v in videos:
            if v.label is None:
                continue
            (fake_m if v.label == 1 else real_m).append(per_order_window_means(v.x_s, fcfg))
        order_values = {}
        if fake_m and real_m:
            fa, re = np.concatenate(fake_m), np.concatenate(real_m)
            for j, rep in enumerate(orders):
                order_values[rep.name] = (fa[:, j], re[:, j])
            p1 = fig_dir / "stats_orders.png"
            render_order_distributions(order_values, orders, p1)
            run.add_output(p1)
        if class_power:
            p2 = fig_dir / "stats_psd.png"
            render_class_psd(freqs, class_power, p2)
            run.add_output(p2)
        p3 = fig_dir / "stats_regions.png"
        render_region_effects(regions, p3)
        run.add_output(p3)
    run.finish(str(args.out) + ".manifest.jsonl")
    return 0


def cmd_perturb(args) -> int:
    run = _Run("perturb", args)
    rm = _region_map(args)
    spec = PerturbSpec(kind=args.kind, sigma=args.sigma, rate=args.rate,
                       drop_mode=args.drop_mode, seed=args.seed)
    run.config(perturb={"kind": spec.kind, "sigma": spec.sigma, "rate": spec.rate,
                        "drop_mode": spec.drop_mode, "seed": spec.seed})
    run.add_input(args.inp)
    seqs, stats = load_sequences(args.inp, rm)
    run.note(f"data: {stats.summary()}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = {"kind": spec.kind, "seed": spec.seed, "coords": "normalized"}
    if spec.kind == "noise":
        provenance["sigma"] = spec.sigma
    else:
        provenance.update(rate=spec.rate, drop_mode=spec.drop_mode)
    for seq in seqs:
        perturbed = apply_perturbation(seq, spec)
        raw = normalized_to_raw(perturbed, rm.commissure_ids)
        raw.extra_header["perturb"] = provenance
        path = out_dir / f"{seq.video_id}.jsonl"
        with atomic_write(path, "w", encoding="utf-8") as fh:
            write_sequence_jsonl(raw, fh)
        run.add_output(path)
    run.note(f"perturbed {len(seqs)} sequences into {out_dir}")
    run.finish(out_dir / "manifest.jsonl")
    return 0


def bench_forward(params, fcfg: FeatureConfig, warmup: int, iters: int,
                  with_features: bool = False, rm=None):
    """Latency of single-window eval forwards; returns timing/memory dict."""
    from .synthetic import gen_smooth
    rm = rm or default_region_map()
    from .kinematics import extract_video_features
    from .synthetic import SynthConfig
    scfg = SynthConfig(n_frames=max(25, fcfg.window_len))
    seq = gen_smooth(scfg, seed=7, rm=rm)
    vf = extract_video_features(seq, fcfg, rm)
    xt, xs, xr = vf.x_t[:1], vf.x_s[:1], vf.x_r[:1]
    window = seq.frames[:fcfg.window_len]

    def call():
        if with_features:
            from .kinematics import kinematic_stats, region_ratios, temporal_tensor
            a = temporal_tensor(window, fcfg)[None]
            b = kinematic_stats(window, fcfg)[None]
            c = region_ratios(window, rm, seq.landmark_ids)[None]
            forward(params, a, b, c, mode="eval")
        else:
            forward(params, xt, xs, xr, mode="eval")

    for _ in range(warmup):
        call()
    try:
        import psutil
        rss_before = psutil.Process().memory_info().rss
    except ImportError:
        psutil = None
        rss_before = None
    times = np.empty(iters)
    for i in range(iters):
        t0 = time.perf_counter()
        call()
        times[i] = time.perf_counter() - t0
    rss_after = psutil.Process().memory_info().rss if psutil else None
    ms = times * 1e3
    return {
        "iters": iters,
        "mean_ms": float(ms.mean()),
        "p50_ms": float(np.percentile(ms, 50)),
        "p99_ms": float(np.percentile(ms, 99)),
        "rss_before": rss_before,
        "rss_after": rss_after,
        "rss_delta_bytes": (rss_after - rss_before) if rss_before is not None else None,
    }


def cmd_bench(args) -> int:
    run = _Run("bench", args)
    params, fcfg, _ = load_checkpoint(args.ckpt)
    fcfg = fcfg or FeatureConfig()
    run.add_input(args.ckpt)
    stats = bench_forward(params, fcfg, args.warmup, args.iters,
                          with_features=args.with_features)
    run.config(bench=stats)
    run.note(f"single-window eval forward over {stats['iters']} iters: "
             f"mean {stats['mean_ms']:.3f} ms, p50 {stats['p50_ms']:.3f} ms, "
             f"p99 {stats['p99_ms']:.3f} ms"
             + (" (features included)" if args.with_features else ""))
    if stats["rss_delta_bytes"] is not None:
        run.note(f"rss delta over measurement loop: {stats['rss_delta_bytes'] / 1e6:.1f} MB")
    run.finish(str(args.ckpt) + ".bench.manifest.jsonl")
    return 0


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biolip",
                                description="coordinate-only lip-sync forgery detection")
    p.add_argument("--version", action="version", version=f"biolip {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common_io(sp, region=True, feature=False):
        if region:
            sp.add_argument("--region-map", help="region map JSON (default: built-in map)")
        if feature:
            sp.add_argument("--feature-config", help="feature config JSON")

    sp = sub.add_parser("synth", help="generate a synthetic landmark dataset")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", help="synth config JSON")
    sp.add_argument("--n-real", type=int, default=20)
    sp.add_argument("--n-fake", type=int, default=20)
    sp.add_argument("--seed", type=int, default=42)
    common_io(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("extract", help="landmark JSONL -> binary feature cache")
    sp.add_argument("--in", dest="inp", required=True, help="input directory")
    sp.add_argument("--cache", required=True, help="output cache file")
    common_io(sp, feature=True)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="train the classifier")
    sp.add_argument("--train", required=True, help="training JSONL directory")
    sp.add_argument("--val", required=True, help="validation JSONL directory")
    sp.add_argument("--config", help="train config JSON")
    sp.add_argument("--model-config", help="model config JSON")
    sp.add_argument("--out", required=True, help="output checkpoint")
    sp.add_argument("--history", help="history CSV (default: <out>.history.csv)")
    sp.add_argument("--resume", help="checkpoint with training state to resume from")
    sp.add_argument("--save-last", help="also save the last epoch's state here")
    sp.add_argument("--stop-after-epoch", type=int,
                    help="pause after this epoch of the schedule (resume later)")
    sp.add_argument("--verbose", action="store_true")
    common_io(sp, feature=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a dataset with a checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--data", required=True, help="JSONL directory")
    sp.add_argument("--report", required=True, help="report CSV")
    common_io(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stats", help="kinematic statistics report (+ figures)")
    sp.add_argument("--data", required=True, help="JSONL directory")
    sp.add_argument("--out", required=True, help="stats CSV")
    sp.add_argument("--psd", help="optional PSD CSV (frequency, power per class)")
    sp.add_argument("--figs", help="figure directory (default: alongside --out)")
    sp.add_argument("--no-figs", action="store_true", help="skip figure rendering")
    common_io(sp, feature=True)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("perturb", help="noise / frame-drop robustness transforms")
    sp.add_argument("--kind", required=True, choices=["noise", "frame_drop"])
    sp.add_argument("--sigma", type=float, default=0.0, help="noise std, normalized units")
    sp.add_argument("--rate", type=float, default=0.0, help="frame-drop probability")
    sp.add_argument("--drop-mode", default="hold_last", choices=["hold_last", "delete"])
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=42)
    common_io(sp)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("bench", help="single-window inference latency")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--warmup", type=int, default=100)
    sp.add_argument("--iters", type=int, default=10000)
    sp.add_argument("--with-features", action="store_true",
                    help="include kinematic feature computation per call")
    sp.set_defaults(func=cmd_bench)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BiolipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
