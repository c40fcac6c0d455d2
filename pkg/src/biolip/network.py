"""Three-branch window classifier with hand-written reverse-mode gradients.

Branches:

*   temporal — the (T, D) dynamics tensor, transposed to channels-first,
    through three 1-D conv blocks (kernel 3, zero padding 1, stride 1;
    conv, batch-norm, GELU), then multi-scale pooling (global mean,
    four adaptive segment means, global max -> 6C) and a linear
    projection to 128;
*   region — the 8 anatomical ratios through linear-GELU-linear 8-32-32;
*   stat — the variance summary through linear, batch-norm, GELU
    (D-128), then linear 128-64.

The branch embeddings are concatenated (224 under defaults) and a
three-layer head (224-128-64-1, GELU between layers, dropout 0.2 before
each linear in train mode) produces the logit. A disabled branch keeps
its slot in the fusion vector as zeros, so the head geometry never
changes; its parameters are simply not allocated.

Eval mode uses running batch-norm statistics, disables dropout, and
processes samples one at a time internally so a sample's logit is
bit-identical whether it is evaluated alone or inside any batch (BLAS
GEMM results vary with operand shape, so batched eval would not be).

Batch-norm convention: normalization uses the biased batch variance;
running_var stores the unbiased estimate (momentum 0.1, eps 1e-5).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import erf

from .errors import NonFiniteActivation, ShapeMismatch, StaleCache
from .kinematics import FeatureConfig

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ModelConfig:
    temporal_in: int = 256          # channels of the transposed dynamics tensor
    window_len: int = 25
    conv_channels: tuple[int, ...] = (128, 128, 64)
    kernel: int = 3
    segments: int = 4
    temporal_out: int = 128
    region_in: int = 8
    region_hidden: int = 32
    region_out: int = 32
    stat_in: int = 256
    stat_hidden: int = 128
    stat_out: int = 64
    head_hidden: tuple[int, int] = (128, 64)
    dropout: float = 0.2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    temporal_enabled: bool = True
    region_enabled: bool = True
    stat_enabled: bool = True

    def __post_init__(self):
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        if self.window_len < self.segments:
            raise ValueError("window shorter than the pooling segment count")

    @property
    def pooled_dim(self) -> int:
        return self.conv_channels[-1] * (2 + self.segments)

    @property
    def fusion_dim(self) -> int:
        # fixed, independent of branch enables: disabled slots are zero-filled
        return self.temporal_out + self.region_out + self.stat_out

    @classmethod
    def from_feature_config(cls, fc: FeatureConfig, n_landmarks: int = 64,
                            **overrides) -> "ModelConfig":
        d = fc.feature_dim(n_landmarks)
        return cls(temporal_in=d, stat_in=d, window_len=fc.window_len, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        for key in ("conv_channels", "head_hidden"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)   # trainable
    running: dict[str, np.ndarray] = field(default_factory=dict)   # bn statistics
    step: int = 0                                                  # optimizer steps applied

    def copy(self) -> "ModelParams":
        return ModelParams(self.config,
                           {k: v.copy() for k, v in self.tensors.items()},
                           {k: v.copy() for k, v in self.running.items()},
                           self.step)

    def trainable_names(self) -> list[str]:
        return list(self.tensors.keys())

    def decayed_names(self) -> list[str]:
        # weight matrices/kernels only; biases and norm affines are not decayed
        return [k for k in self.tensors if k.endswith(".w")]


def param_count(params: ModelParams) -> int:
    return int(sum(v.size for v in params.tensors.values()))


def _kaiming_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Kaiming-uniform weights (fan-in), zero biases, identity batch-norm."""
    p = ModelParams(cfg)
    t, r = p.tensors, p.running

    def linear(name, n_in, n_out):
        t[f"{name}.w"] = _kaiming_uniform(rng, (n_out, n_in), n_in)
        t[f"{name}.b"] = np.zeros(n_out)

    def bn(name, width):
        t[f"{name}.gamma"] = np.ones(width)
        t[f"{name}.beta"] = np.zeros(width)
        r[f"{name}.mean"] = np.zeros(width)
        r[f"{name}.var"] = np.ones(width)

    if cfg.temporal_enabled:
        c_in = cfg.temporal_in
        for i, c_out in enumerate(cfg.conv_channels, start=1):
            fan_in = c_in * cfg.kernel
            t[f"temporal.conv{i}.w"] = _kaiming_uniform(rng, (c_out, c_in, cfg.kernel), fan_in)
            t[f"temporal.conv{i}.b"] = np.zeros(c_out)
            bn(f"temporal.bn{i}", c_out)
            c_in = c_out
        linear("temporal.proj", cfg.pooled_dim, cfg.temporal_out)
    if cfg.region_enabled:
        linear("region.fc1", cfg.region_in, cfg.region_hidden)
        linear("region.fc2", cfg.region_hidden, cfg.region_out)
    if cfg.stat_enabled:
        linear("stat.fc1", cfg.stat_in, cfg.stat_hidden)
        bn("stat.bn", cfg.stat_hidden)
        linear("stat.fc2", cfg.stat_hidden, cfg.stat_out)
    linear("head.fc1", cfg.fusion_dim, cfg.head_hidden[0])
    linear("head.fc2", cfg.head_hidden[0], cfg.head_hidden[1])
    linear("head.fc3", cfg.head_hidden[1], 1)
    return p


# --- primitive layers ---

def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def segment_bounds(length: int, segments: int) -> list[tuple[int, int]]:
    """Adaptive partition: segment j covers [floor(j*T/S), floor((j+1)*T/S))."""
    if length < segments:
        raise ValueError("feature map shorter than segment count")
    edges = [(j * length) // segments for j in range(segments + 1)]
    return list(zip(edges[:-1], edges[1:]))


def local_segment_pool(feature_map: np.ndarray, segments: int = 4) -> np.ndarray:
    """Mean over each adaptive temporal segment; time is the last axis."""
    bounds = segment_bounds(feature_map.shape[-1], segments)
    return np.stack([feature_map[..., a:b].mean(axis=-1) for a, b in bounds], axis=-1)


def _conv1d_fwd(x, w, b):
    # x (B, Cin, T), w (Cout, Cin, K); zero padding (K-1)/2 keeps length T
    B, c_in, T = x.shape
    c_out, _, K = w.shape
    pad = (K - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, K, axis=2)  # (B, Cin, T, K)
    cols2 = np.ascontiguousarray(cols.transpose(1, 3, 0, 2)).reshape(c_in * K, B * T)
    y2 = w.reshape(c_out, c_in * K) @ cols2 + b[:, None]
    y = np.ascontiguousarray(y2.reshape(c_out, B, T).transpose(1, 0, 2))
    return y, cols2


def _conv1d_bwd(g, cols2, w, batch):
    # g (B, Cout, T)
    c_out, c_in, K = w.shape
    T = g.shape[2]
    pad = (K - 1) // 2
    g2 = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(c_out, batch * T)
    db = g2.sum(axis=1)
    dw = (g2 @ cols2.T).reshape(c_out, c_in, K)
    dcols2 = w.reshape(c_out, c_in * K).T @ g2
    dc = dcols2.reshape(c_in, K, batch, T)
    dxp = np.zeros((batch, c_in, T + 2 * pad))
    for k in range(K):
        dxp[:, :, k:k + T] += dc[:, k].transpose(1, 0, 2)
    dx = dxp[:, :, pad:pad + T]
    return dx, dw, db


def _bn_fwd(x, gamma, beta, run_mean, run_var, axes, eps, momentum,
            use_batch_stats, update_running):
    """Shared batch-norm core; axes are the reduction axes."""
    shape = [1] * x.ndim
    for ax in range(x.ndim):
        if ax not in axes:
            shape[ax] = x.shape[ax]
    if use_batch_stats:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)  # biased, used for normalization
        if update_running:
            n = x.size // mu.size
            run_mean *= (1.0 - momentum)
            run_mean += momentum * mu
            unbiased = var * (n / (n - 1)) if n > 1 else var
            run_var *= (1.0 - momentum)
            run_var += momentum * unbiased
    else:
        mu, var = run_mean, run_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu.reshape(shape)) * inv_std.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    cache = {"xhat": xhat, "inv_std": inv_std, "axes": axes, "shape": shape,
             "n": x.size // mu.size, "batch_stats": use_batch_stats}
    return y, cache


def _bn_bwd(g, gamma, cache):
    axes, shape, n = cache["axes"], cache["shape"], cache["n"]
    xhat, inv_std = cache["xhat"], cache["inv_std"]
    dgamma = (g * xhat).sum(axis=axes)
    dbeta = g.sum(axis=axes)
    scale = (gamma * inv_std).reshape(shape)
    if cache["batch_stats"]:
        dx = scale * (g - dbeta.reshape(shape) / n - xhat * dgamma.reshape(shape) / n)
    else:
        dx = scale * g  # frozen statistics: plain affine
    return dx, dgamma, dbeta


def _dropout_fwd(x, p, rng):
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


# --- model forward / backward ---

def _check_inputs(cfg: ModelConfig, xt, xs, xr):
    if xt.ndim != 3 or xt.shape[1] != cfg.window_len or xt.shape[2] != cfg.temporal_in:
        raise ShapeMismatch(
            f"x_t must be (B, {cfg.window_len}, {cfg.temporal_in}), got {xt.shape}")
    if xs.ndim != 2 or xs.shape[1] != cfg.stat_in:
        raise ShapeMismatch(f"x_s must be (B, {cfg.stat_in}), got {xs.shape}")
    if xr.ndim != 2 or xr.shape[1] != cfg.region_in:
        raise ShapeMismatch(f"x_r must be (B, {cfg.region_in}), got {xr.shape}")
    if not (xt.shape[0] == xs.shape[0] == xr.shape[0]):
        raise ShapeMismatch("branch inputs disagree on batch size")
    if not (np.isfinite(xt).all() and np.isfinite(xs).all() and np.isfinite(xr).all()):
        raise NonFiniteActivation("non-finite feature input")


def forward(params: ModelParams, xt, xs, xr, mode: str = "eval",
            dropout_rng: np.random.Generator | None = None,
            freeze_batchnorm: bool = False):
    """Run the classifier; returns (logits, cache). Cache is None in eval mode.

    Train mode needs batch size >= 2 (batch statistics) and a dropout
    generator when the dropout rate is nonzero. freeze_batchnorm keeps
    running statistics in use (and unmodified) during a train-mode pass.
    """
    cfg = params.config
    xt = np.asarray(xt, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    xr = np.asarray(xr, dtype=np.float64)
    _check_inputs(cfg, xt, xs, xr)
    batch = xt.shape[0]

    if mode == "eval":
        if batch > 1:
            # per-sample evaluation: bitwise independent of batch composition
            logits = np.concatenate([
                forward(params, xt[i:i + 1], xs[i:i + 1], xr[i:i + 1], "eval")[0]
                for i in range(batch)])
            return logits, None
        return _forward_impl(params, xt, xs, xr, train=False,
                             dropout_rng=None, freeze_bn=True)[0], None
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if batch < 2:
        raise ShapeMismatch("train mode needs batch size >= 2")
    if cfg.dropout > 0 and dropout_rng is None:
        raise ValueError("train mode needs a dropout generator")
    logits, cache = _forward_impl(params, xt, xs, xr, train=True,
                                  dropout_rng=dropout_rng, freeze_bn=freeze_batchnorm)
    return logits, cache


def _forward_impl(params, xt, xs, xr, train, dropout_rng, freeze_bn):
    cfg = params.config
    t, r = params.tensors, params.running
    batch = xt.shape[0]
    use_batch_stats = train and not freeze_bn
    update_running = train and not freeze_bn
    cache = {"mode": "train" if train else "eval", "params_step": params.step,
             "batch": batch, "conv": [], "masks": []}

    # temporal branch
    if cfg.temporal_enabled:
        h = np.ascontiguousarray(xt.transpose(0, 2, 1))  # (B, C, T)
        for i in range(1, len(cfg.conv_channels) + 1):
            y, cols2 = _conv1d_fwd(h, t[f"temporal.conv{i}.w"], t[f"temporal.conv{i}.b"])
            ybn, bn_cache = _bn_fwd(y, t[f"temporal.bn{i}.gamma"], t[f"temporal.bn{i}.beta"],
                                    r[f"temporal.bn{i}.mean"], r[f"temporal.bn{i}.var"],
                                    axes=(0, 2), eps=cfg.bn_eps, momentum=cfg.bn_momentum,
                                    use_batch_stats=use_batch_stats,
                                    update_running=update_running)
            h_next = gelu(ybn)
            cache["conv"].append({"cols2": cols2, "bn": bn_cache, "pre_gelu": ybn})
            h = h_next
        c_last = cfg.conv_channels[-1]
        gmean = h.mean(axis=2)
        bounds = segment_bounds(cfg.window_len, cfg.segments)
        segs = np.stack([h[:, :, a:b].mean(axis=2) for a, b in bounds], axis=1)
        amax = h.argmax(axis=2)
        gmax = np.take_along_axis(h, amax[:, :, None], axis=2)[:, :, 0]
        pooled = np.concatenate([gmean, segs.reshape(batch, -1), gmax], axis=1)
        ht = pooled @ t["temporal.proj.w"].T + t["temporal.proj.b"]
        cache["pool"] = {"bounds": bounds, "amax": amax, "c_last": c_last,
                         "conv_out_shape": h.shape, "pooled": pooled}
    else:
        ht = np.zeros((batch, cfg.temporal_out))

    # region branch
    if cfg.region_enabled:
        ra = xr @ t["region.fc1.w"].T + t["region.fc1.b"]
        rg = gelu(ra)
        hr = rg @ t["region.fc2.w"].T + t["region.fc2.b"]
        cache["region"] = {"xr": xr, "a": ra, "g": rg}
    else:
        hr = np.zeros((batch, cfg.region_out))

    # stat branch
    if cfg.stat_enabled:
        sa = xs @ t["stat.fc1.w"].T + t["stat.fc1.b"]
        sbn, sbn_cache = _bn_fwd(sa, t["stat.bn.gamma"], t["stat.bn.beta"],
                                 r["stat.bn.mean"], r["stat.bn.var"],
                                 axes=(0,), eps=cfg.bn_eps, momentum=cfg.bn_momentum,
                                 use_batch_stats=use_batch_stats,
                                 update_running=update_running)
        sg = gelu(sbn)
        hs = sg @ t["stat.fc2.w"].T + t["stat.fc2.b"]
        cache["stat"] = {"xs": xs, "a": sa, "bn": sbn_cache, "pre_gelu": sbn, "g": sg}
    else:
        hs = np.zeros((batch, cfg.stat_out))

    z = np.concatenate([ht, hr, hs], axis=1)
    cache["fused"] = z

    def drop(x):
        if train and cfg.dropout > 0:
            y, mask = _dropout_fwd(x, cfg.dropout, dropout_rng)
        else:
            y, mask = x, None
        cache["masks"].append(mask)
        return y

    d1 = drop(z)
    a1 = d1 @ t["head.fc1.w"].T + t["head.fc1.b"]
    g1 = gelu(a1)
    d2 = drop(g1)
    a2 = d2 @ t["head.fc2.w"].T + t["head.fc2.b"]
    g2 = gelu(a2)
    d3 = drop(g2)
    logits = (d3 @ t["head.fc3.w"].T + t["head.fc3.b"])[:, 0]
    cache["head"] = {"d1": d1, "a1": a1, "d2": d2, "a2": a2, "d3": d3}

    if not np.isfinite(logits).all():
        raise NonFiniteActivation("non-finite logit")
    return logits, cache


def backward(params: ModelParams, cache: dict, dlogits: np.ndarray) -> dict:
    """Exact gradients of every trainable tensor given d(loss)/d(logit)."""
    if cache is None or cache.get("mode") != "train":
        raise StaleCache("backward needs a cache from a train-mode forward")
    if cache.get("params_step") != params.step:
        raise StaleCache("parameters were updated after this cache was built")
    cfg = params.config
    t = params.tensors
    batch = cache["batch"]
    grads = {k: None for k in t}

    hd = cache["head"]
    m1, m2, m3 = cache["masks"]
    g = np.asarray(dlogits, dtype=np.float64).reshape(batch, 1)

    grads["head.fc3.w"] = g.T @ hd["d3"]
    grads["head.fc3.b"] = g.sum(axis=0)
    gd3 = g @ t["head.fc3.w"]
    if m3 is not None:
        gd3 = gd3 * m3
    ga2 = gd3 * gelu_grad(hd["a2"])
    grads["head.fc2.w"] = ga2.T @ hd["d2"]
    grads["head.fc2.b"] = ga2.sum(axis=0)
    gd2 = ga2 @ t["head.fc2.w"]
    if m2 is not None:
        gd2 = gd2 * m2
    ga1 = gd2 * gelu_grad(hd["a1"])
    grads["head.fc1.w"] = ga1.T @ hd["d1"]
    grads["head.fc1.b"] = ga1.sum(axis=0)
    gz = ga1 @ t["head.fc1.w"]
    if m1 is not None:
        gz = gz * m1

    g_ht = gz[:, :cfg.temporal_out]
    g_hr = gz[:, cfg.temporal_out:cfg.temporal_out + cfg.region_out]
    g_hs = gz[:, cfg.temporal_out + cfg.region_out:]

    if cfg.stat_enabled:
        st = cache["stat"]
        grads["stat.fc2.w"] = g_hs.T @ st["g"]
        grads["stat.fc2.b"] = g_hs.sum(axis=0)
        g_sg = g_hs @ t["stat.fc2.w"]
        g_sbn = g_sg * gelu_grad(st["pre_gelu"])
        g_sa, dgamma, dbeta = _bn_bwd(g_sbn, t["stat.bn.gamma"], st["bn"])
        grads["stat.bn.gamma"] = dgamma
        grads["stat.bn.beta"] = dbeta
        grads["stat.fc1.w"] = g_sa.T @ st["xs"]
        grads["stat.fc1.b"] = g_sa.sum(axis=0)

    if cfg.region_enabled:
        rc = cache["region"]
        grads["region.fc2.w"] = g_hr.T @ rc["g"]
        grads["region.fc2.b"] = g_hr.sum(axis=0)
        g_rg = g_hr @ t["region.fc2.w"]
        g_ra = g_rg * gelu_grad(rc["a"])
        grads["region.fc1.w"] = g_ra.T @ rc["xr"]
        grads["region.fc1.b"] = g_ra.sum(axis=0)

    if cfg.temporal_enabled:
        pool = cache["pool"]
        grads["temporal.proj.w"] = g_ht.T @ pool["pooled"]
        grads["temporal.proj.b"] = g_ht.sum(axis=0)
        g_pooled = g_ht @ t["temporal.proj.w"]

        c_last = pool["c_last"]
        B, C, T = pool["conv_out_shape"]
        n_seg = len(pool["bounds"])
        g_mean = g_pooled[:, :c_last]
        g_seg = g_pooled[:, c_last:c_last + n_seg * c_last].reshape(batch, n_seg, c_last)
        g_max = g_pooled[:, c_last + n_seg * c_last:]
        gh = np.zeros((B, C, T))
        gh += g_mean[:, :, None] / T
        for j, (a, b) in enumerate(pool["bounds"]):
            gh[:, :, a:b] += g_seg[:, j][:, :, None] / (b - a)
        bi = np.arange(B)[:, None]
        ci = np.arange(C)[None, :]
        gh[bi, ci, pool["amax"]] += g_max

        for i in range(len(cfg.conv_channels), 0, -1):
            blk = cache["conv"][i - 1]
            g_bn = gh * gelu_grad(blk["pre_gelu"])
            g_conv, dgamma, dbeta = _bn_bwd(g_bn, t[f"temporal.bn{i}.gamma"], blk["bn"])
            grads[f"temporal.bn{i}.gamma"] = dgamma
            grads[f"temporal.bn{i}.beta"] = dbeta
            gh, dw, db = _conv1d_bwd(g_conv, blk["cols2"], t[f"temporal.conv{i}.w"], batch)
            grads[f"temporal.conv{i}.w"] = dw
            grads[f"temporal.conv{i}.b"] = db

    return grads
