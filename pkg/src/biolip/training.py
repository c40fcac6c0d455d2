"""Window-level training loop: weighted BCE on logits, AdamW with
decoupled weight decay, per-epoch cosine annealing, early stopping on
validation video-level AUC.

All randomness (init, shuffling, dropout) derives from one seed through
spawned generators, so a fixed (seed, data, config) triple reproduces
checkpoints and history bit for bit. Window labels are the parent video
label; video scores average window sigmoids. Biases and batch-norm
affines are excluded from weight decay. A trailing batch of size 1 is
dropped (batch-norm needs two samples).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedTraining, NonFiniteGradient, SingleClassDataset
from .kinematics import FeatureConfig, VideoFeatures
from .network import ModelConfig, ModelParams, backward, forward, init_params


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-4
    lr_min: float = 1e-5
    weight_decay: float = 1e-4
    epochs: int = 60
    patience: int = 30
    batch_size: int = 256
    pos_weight: float | str = "auto"   # "auto" = negative/positive window ratio
    seed: int = 42
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr_min > self.lr:
            raise ValueError("lr_min must not exceed lr")
        if self.patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if isinstance(self.pos_weight, (int, float)) and not self.pos_weight > 0:
            raise ValueError("pos_weight must be positive")

    def to_dict(self) -> dict:
        return {"lr": self.lr, "lr_min": self.lr_min, "weight_decay": self.weight_decay,
                "epochs": self.epochs, "patience": self.patience,
                "batch_size": self.batch_size, "pos_weight": self.pos_weight,
                "seed": self.seed, "betas": list(self.betas), "eps": self.eps}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "betas" in doc:
            doc["betas"] = tuple(doc["betas"])
        return cls(**doc)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_auc: float
    lr: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


@dataclass
class TrainResult:
    best_params: ModelParams
    best_state: dict
    last_params: ModelParams
    last_state: dict
    history: TrainHistory


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z) without overflow for |z| up to 1e4 and beyond
    return np.logaddexp(0.0, z)


def weighted_bce_logits(logits, labels, pos_weight: float = 1.0) -> float:
    """Mean of -[w_p*y*log(sigmoid z) + (1-y)*log(1 - sigmoid z)], stable form."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    per = pos_weight * y * _softplus(-z) + (1.0 - y) * _softplus(z)
    return float(per.mean())


def bce_logits_grad(logits, labels, pos_weight: float = 1.0) -> np.ndarray:
    """d(mean loss)/d(logits)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    grad = -pos_weight * y * sigmoid(-z) + (1.0 - y) * sigmoid(z)
    return grad / z.shape[0]


def auto_pos_weight(labels) -> float:
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassDataset(f"{n_pos} positive / {n_neg} negative windows")
    return n_neg / n_pos


def cosine_lr(epoch: int, cfg: TrainConfig) -> float:
    """Annealed rate at epoch e in [0, epochs]: lr at 0, lr_min at the end."""
    if not 0 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + math.cos(math.pi * epoch / cfg.epochs))


# --- optimizer ---

@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def initial(cls, params: ModelParams) -> "AdamWState":
        return cls(m={k: np.zeros_like(a) for k, a in params.tensors.items()},
                   v={k: np.zeros_like(a) for k, a in params.tensors.items()})


def adamw_step(params: ModelParams, grads: dict, state: AdamWState,
               lr: float, cfg: TrainConfig) -> None:
    """One bias-corrected update; decay multiplies the pre-step value."""
    state.t += 1
    b1, b2 = cfg.betas
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    decayed = set(params.decayed_names())
    decay_factor = 1.0 - lr * cfg.weight_decay
    for name, theta in params.tensors.items():
        g = grads[name]
        if g is None or not np.isfinite(g).all():
            raise NonFiniteGradient(f"gradient of {name} is not finite")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        if name in decayed and cfg.weight_decay != 0.0:
            theta *= decay_factor
        theta -= update
        if not np.isfinite(theta).all():
            raise NonFiniteGradient(f"{name} became non-finite after update")
    params.step = state.t


# --- data plumbing ---

def flatten_windows(videos: list[VideoFeatures]):
    """Stack all windows of all videos; labels must be present."""
    if any(v.label is None for v in videos):
        missing = [v.video_id for v in videos if v.label is None][:3]
        raise SingleClassDataset(f"unlabeled videos in training data: {missing}")
    xt = np.concatenate([v.x_t for v in videos])
    xs = np.concatenate([v.x_s for v in videos])
    xr = np.concatenate([v.x_r for v in videos])
    y = np.concatenate([np.full(v.n_windows, v.label, dtype=np.float64) for v in videos])
    return xt, xs, xr, y


def _val_video_auc(params: ModelParams, videos: list[VideoFeatures]) -> float:
    from .evaluation import roc_auc, video_score
    scores, labels = [], []
    for v in videos:
        logits, _ = forward(params, v.x_t, v.x_s, v.x_r, mode="eval")
        scores.append(video_score(logits))
        labels.append(v.label)
    return roc_auc(np.array(scores), np.array(labels))


def _snapshot_state(epoch: int, adam: AdamWState, shuffle_rng, dropout_rng,
                    best_epoch: int, best_auc: float, cfg: TrainConfig) -> dict:
    return {
        "epoch": epoch,
        "adam_t": adam.t,
        "best_epoch": best_epoch,
        "best_val_auc": best_auc,
        "train_config": cfg.to_dict(),
        "rng": {"shuffle": shuffle_rng.bit_generator.state,
                "dropout": dropout_rng.bit_generator.state},
        "moments_m": {k: a.copy() for k, a in adam.m.items()},
        "moments_v": {k: a.copy() for k, a in adam.v.items()},
    }


def train(train_videos: list[VideoFeatures], val_videos: list[VideoFeatures],
          cfg: TrainConfig = TrainConfig(), model_cfg: ModelConfig | None = None,
          feature_cfg: FeatureConfig | None = None,
          resume: tuple[ModelParams, dict] | None = None,
          stop_after_epoch: int | None = None,
          log=None) -> TrainResult:
    """Fit the classifier; returns the best-AUC checkpoint, never the last.

    Stops when validation video-level AUC has not strictly improved for
    `patience` consecutive epochs, or at the epoch limit. On AUC ties
    the earlier epoch keeps the crown. `resume` takes (params,
    train_state) from a saved checkpoint and continues mid-schedule;
    `stop_after_epoch` pauses a run partway through the same schedule
    (resuming from its last_state reproduces the uninterrupted run
    bit for bit).
    """
    if not train_videos or not val_videos:
        raise SingleClassDataset("both train and validation splits must be nonempty")
    xt, xs, xr, y = flatten_windows(train_videos)
    if any(v.label is None for v in val_videos):
        raise SingleClassDataset("validation videos must be labeled")
    val_labels = [v.label for v in val_videos]
    if len(set(val_labels)) < 2:
        raise SingleClassDataset("validation split holds a single class")

    pos_weight = cfg.pos_weight
    if pos_weight == "auto":
        pos_weight = auto_pos_weight(y)
    pos_weight = float(pos_weight)

    root = np.random.SeedSequence(cfg.seed)
    init_ss, shuffle_ss, dropout_ss = root.spawn(3)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    if resume is not None:
        params, state_in = resume
        params = params.copy()
        model_cfg = params.config
        adam = AdamWState(m={k: a.copy() for k, a in state_in["moments_m"].items()},
                          v={k: a.copy() for k, a in state_in["moments_v"].items()},
                          t=int(state_in["adam_t"]))
        params.step = adam.t
        shuffle_rng.bit_generator.state = state_in["rng"]["shuffle"]
        dropout_rng.bit_generator.state = state_in["rng"]["dropout"]
        start_epoch = int(state_in["epoch"]) + 1
        best_epoch = int(state_in["best_epoch"])
        best_auc = float(state_in["best_val_auc"])
        best_params = params.copy()
        best_state = _snapshot_state(start_epoch - 1, adam, shuffle_rng, dropout_rng,
                                     best_epoch, best_auc, cfg)
    else:
        if model_cfg is None:
            if feature_cfg is not None:
                model_cfg = ModelConfig.from_feature_config(feature_cfg)
            else:
                model_cfg = ModelConfig(temporal_in=xs.shape[1], stat_in=xs.shape[1],
                                        window_len=xt.shape[1])
        params = init_params(model_cfg, np.random.default_rng(init_ss))
        adam = AdamWState.initial(params)
        start_epoch = 1
        best_epoch = 0
        best_auc = -np.inf
        best_params = params.copy()
        best_state = _snapshot_state(0, adam, shuffle_rng, dropout_rng, 0, best_auc, cfg)

    n = y.shape[0]
    history = TrainHistory(best_epoch=best_epoch)

    for epoch in range(start_epoch, cfg.epochs + 1):
        lr = cosine_lr(epoch - 1, cfg)
        order = shuffle_rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            if idx.shape[0] < 2:
                break  # batch-norm cannot run on one sample
            logits, cache = forward(params, xt[idx], xs[idx], xr[idx],
                                    mode="train", dropout_rng=dropout_rng)
            loss = weighted_bce_logits(logits, y[idx], pos_weight)
            if not math.isfinite(loss):
                raise DivergedTraining(f"loss {loss} at epoch {epoch}")
            grads = backward(params, cache, bce_logits_grad(logits, y[idx], pos_weight))
            adamw_step(params, grads, adam, lr, cfg)
            losses.append(loss)

        val_auc = _val_video_auc(params, val_videos)
        history.epochs.append(EpochRecord(epoch, float(np.mean(losses)), val_auc, lr))
        if log:
            log(f"epoch {epoch:3d}  loss {np.mean(losses):.5f}  "
                f"val_auc {val_auc:.4f}  lr {lr:.3e}")
        if val_auc > best_auc:
            best_auc = val_auc
            best_epoch = epoch
            best_params = params.copy()
            best_state = _snapshot_state(epoch, adam, shuffle_rng, dropout_rng,
                                         best_epoch, best_auc, cfg)
        if epoch - best_epoch >= cfg.patience:
            break
        if stop_after_epoch is not None and epoch >= stop_after_epoch:
            break

    history.best_epoch = best_epoch
    last_state = _snapshot_state(history.epochs[-1].epoch if history.epochs else 0,
                                 adam, shuffle_rng, dropout_rng, best_epoch, best_auc, cfg)
    return TrainResult(best_params=best_params, best_state=best_state,
                       last_params=params, last_state=last_state, history=history)


def history_to_csv(history: TrainHistory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "val_auc", "lr"])
        for rec in history.epochs:
            w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_auc), repr(rec.lr)])
