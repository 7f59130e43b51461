"""Compact graph-convolutional classifier with analytic gradients.

Pipeline per sample (X is channels x bands):

    X' = X * sigmoid(M)                    gated 2-D input attention
    H1 = relu(A_hat @ X' @ W1)             graph convolution over channels
    f  = flatten(H1)
    class logits  = f @ Wc + bc
    domain logits = f @ Wd + bd            through gradient reversal
    score         = f . wr + br            (regression head)

A_hat is the symmetric normalized adjacency built from a learnable raw
matrix. The domain head is adversarial: its gradient into shared parameters
is multiplied by -grl_lambda.

All gradients are computed by hand in closed form; no autograd framework.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid

from .errors import ConfigError, DataError, FormatError
from .features import SubjectDataset

CLASSIFICATION = "classification"
REGRESSION = "regression"

PARAM_FIELDS = (
    "attention", "adjacency_raw", "conv_weight",
    "class_w", "class_b", "domain_w", "domain_b",
    "reg_w", "reg_b",
)


@dataclass(frozen=True)
class ModelConfig:
    channels: int
    bands: int = 5
    hidden: int = 8
    classes: int = 5
    domains: int = 2
    grl_lambda: float = 0.1
    head_mode: str = CLASSIFICATION
    seed: int = 0

    def __post_init__(self):
        for name in ("channels", "bands", "hidden", "classes", "domains"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.grl_lambda < 0:
            raise ConfigError("grl_lambda must be >= 0")
        if self.head_mode not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown head_mode {self.head_mode!r}")


@dataclass
class ModelParams:
    attention: np.ndarray      # C x B
    adjacency_raw: np.ndarray  # C x C
    conv_weight: np.ndarray    # B x H
    class_w: np.ndarray        # (C*H) x N
    class_b: np.ndarray        # N
    domain_w: np.ndarray       # (C*H) x DN
    domain_b: np.ndarray       # DN
    reg_w: np.ndarray          # C*H
    reg_b: np.ndarray          # 1

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: getattr(self, k).copy() for k in PARAM_FIELDS})

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            **{k: np.zeros_like(getattr(self, k)) for k in PARAM_FIELDS})


Gradients = ModelParams  # same shapes, same container


@dataclass
class ForwardOutput:
    class_probs: np.ndarray
    domain_probs: np.ndarray
    regression_score: float | None
    cache: dict = field(repr=False, default_factory=dict)


def init_params(cfg: ModelConfig) -> ModelParams:
    """Deterministic initialization: zero gates, Glorot-uniform weights."""
    rng = np.random.default_rng(cfg.seed)
    C, B, H, N, DN = (cfg.channels, cfg.bands, cfg.hidden,
                      cfg.classes, cfg.domains)

    def glorot(fan_in, fan_out, shape):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    return ModelParams(
        attention=np.zeros((C, B)),
        adjacency_raw=np.zeros((C, C)),
        conv_weight=glorot(B, H, (B, H)),
        class_w=glorot(C * H, N, (C * H, N)),
        class_b=np.zeros(N),
        domain_w=glorot(C * H, DN, (C * H, DN)),
        domain_b=np.zeros(DN),
        reg_w=glorot(C * H, 1, (C * H,)),
        reg_b=np.zeros(1),
    )


def apply_attention(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Elementwise sigmoid-gated attention over channels and bands."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-2:] != M.shape:
        raise DataError(f"attention shape {M.shape} does not match input "
                        f"{X.shape[-2:]}")
    return X * sigmoid(M)


def normalize_adjacency(W_a: np.ndarray) -> np.ndarray:
    """Symmetric positive adjacency with self-loops, degree-normalized."""
    W_a = np.asarray(W_a, dtype=np.float64)
    if W_a.ndim != 2 or W_a.shape[0] != W_a.shape[1]:
        raise DataError("adjacency parameter must be square")
    S = W_a + W_a.T
    A_tilde = np.logaddexp(0.0, S) + np.eye(W_a.shape[0])  # softplus + I
    d = A_tilde.sum(axis=1)
    dm = 1.0 / np.sqrt(d)
    return A_tilde * dm[:, None] * dm[None, :]


def _adjacency_backward(W_a: np.ndarray, cache: dict, G: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. W_a given G = dL/dA_hat."""
    A_tilde, d, A_hat = cache["A_tilde"], cache["deg"], cache["A_hat"]
    dm = 1.0 / np.sqrt(d)
    dL_dAt = G * dm[:, None] * dm[None, :]
    # through the degree vector: d_i = sum_j A_tilde[i, j]
    dL_dd = -0.5 / d * ((G * A_hat).sum(axis=1) + (G * A_hat).sum(axis=0))
    dL_dAt = dL_dAt + dL_dd[:, None]
    dL_dS = dL_dAt * sigmoid(W_a + W_a.T)  # softplus derivative
    return dL_dS + dL_dS.T


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    Zs = Z - Z.max(axis=-1, keepdims=True)
    return Zs - np.log(np.exp(Zs).sum(axis=-1, keepdims=True))


def _forward_core(params: ModelParams, cfg: ModelConfig, Xb: np.ndarray) -> dict:
    """Shared forward pass over a batch Xb of shape (R, C, B)."""
    if not np.all(np.isfinite(Xb)):
        raise DataError("non-finite values in model input")
    R = Xb.shape[0]
    sigM = sigmoid(params.attention)
    Xp = Xb * sigM
    P1 = Xp @ params.conv_weight                      # (R, C, H)

    S = params.adjacency_raw + params.adjacency_raw.T
    A_tilde = np.logaddexp(0.0, S) + np.eye(cfg.channels)
    d = A_tilde.sum(axis=1)
    dm = 1.0 / np.sqrt(d)
    A_hat = A_tilde * dm[:, None] * dm[None, :]

    H_pre = np.einsum("ij,rjh->rih", A_hat, P1)
    H1 = np.maximum(H_pre, 0.0)
    F = H1.reshape(R, -1)                             # (R, C*H)

    Zc = F @ params.class_w + params.class_b
    Zd = F @ params.domain_w + params.domain_b
    logPc = _log_softmax(Zc)
    logPd = _log_softmax(Zd)
    return {
        "Xb": Xb, "sigM": sigM, "Xp": Xp, "P1": P1,
        "A_tilde": A_tilde, "deg": d, "A_hat": A_hat,
        "H_pre": H_pre, "F": F,
        "logPc": logPc, "Pc": np.exp(logPc),
        "logPd": logPd, "Pd": np.exp(logPd),
        "reg": F @ params.reg_w + params.reg_b[0],
    }


def forward_batch(params: ModelParams, cfg: ModelConfig,
                  Xb: np.ndarray) -> dict:
    """Batched forward; returns the cache with Pc/Pd/reg entries."""
    Xb = np.asarray(Xb, dtype=np.float64)
    if Xb.ndim != 3 or Xb.shape[1:] != (cfg.channels, cfg.bands):
        raise DataError(f"expected batch of shape (R, {cfg.channels}, "
                        f"{cfg.bands}), got {Xb.shape}")
    return _forward_core(params, cfg, Xb)


def forward(params: ModelParams, cfg: ModelConfig, X: np.ndarray) -> ForwardOutput:
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (cfg.channels, cfg.bands):
        raise DataError(f"expected input of shape ({cfg.channels}, "
                        f"{cfg.bands}), got {X.shape}")
    cache = _forward_core(params, cfg, X[None])
    score = float(cache["reg"][0]) if cfg.head_mode == REGRESSION else None
    return ForwardOutput(
        class_probs=cache["Pc"][0],
        domain_probs=cache["Pd"][0],
        regression_score=score,
        cache=cache,
    )


def _shared_backward(params: ModelParams, cfg: ModelConfig, cache: dict,
                     dF: np.ndarray, grads: ModelParams) -> None:
    """Backprop dL/dF into attention, adjacency and conv weights."""
    dH1 = dF.reshape(cache["H_pre"].shape)
    dH_pre = dH1 * (cache["H_pre"] > 0)
    grads.adjacency_raw += _adjacency_backward(
        params.adjacency_raw, cache,
        np.einsum("rih,rjh->ij", dH_pre, cache["P1"]))
    dP1 = np.einsum("ji,rjh->rih", cache["A_hat"], dH_pre)
    grads.conv_weight += np.einsum("rcb,rch->bh", cache["Xp"], dP1)
    dXp = dP1 @ params.conv_weight.T
    sigM = cache["sigM"]
    grads.attention += np.einsum(
        "rcb,rcb->cb", dXp, cache["Xb"]) * sigM * (1.0 - sigM)


def loss_and_gradients(
    params: ModelParams,
    cfg: ModelConfig,
    batch: list[tuple[np.ndarray, int, int]],
    w: float = 1.0,
) -> tuple[float, Gradients]:
    """Weighted class + adversarial domain loss over one subject batch.

    Returns w * (mean class cross-entropy + mean domain cross-entropy) and
    exact gradients; the domain loss contributes to shared parameters with
    factor -grl_lambda (gradient reversal). The weight w is a constant.
    """
    if not batch:
        raise DataError("empty batch")
    if w < 0:
        raise DataError("weight must be >= 0")
    Xb = np.stack([np.asarray(x, dtype=np.float64) for x, _, _ in batch])
    y = np.array([c for _, c, _ in batch], dtype=np.intp)
    dlab = np.array([d for _, _, d in batch], dtype=np.intp)
    if y.min() < 0 or y.max() >= cfg.classes:
        raise DataError("class label out of range")
    if dlab.min() < 0 or dlab.max() >= cfg.domains:
        raise DataError("domain label out of range")
    return _class_loss_and_gradients(params, cfg, forward_batch(params, cfg, Xb),
                                     y, dlab, w)


def _class_loss_and_gradients(params, cfg, cache, y, dlab, w):
    R = len(y)
    rows = np.arange(R)
    loss_class = -cache["logPc"][rows, y].mean()
    loss_domain = -cache["logPd"][rows, dlab].mean()
    loss = w * (loss_class + loss_domain)

    grads = params.zeros_like()
    if w == 0.0:
        return 0.0, grads

    Gc = cache["Pc"].copy()
    Gc[rows, y] -= 1.0
    Gc *= w / R
    Gd = cache["Pd"].copy()
    Gd[rows, dlab] -= 1.0
    Gd *= w / R

    F = cache["F"]
    grads.class_w += F.T @ Gc
    grads.class_b += Gc.sum(axis=0)
    grads.domain_w += F.T @ Gd
    grads.domain_b += Gd.sum(axis=0)

    dF = Gc @ params.class_w.T - cfg.grl_lambda * (Gd @ params.domain_w.T)
    _shared_backward(params, cfg, cache, dF, grads)
    return float(loss), grads


def regression_loss_and_gradients(
    params: ModelParams,
    cfg: ModelConfig,
    Xb: np.ndarray,
    target: float,
    domain_labels: np.ndarray,
    w: float = 1.0,
) -> tuple[float, Gradients]:
    """Weighted MSE on the regression head plus adversarial domain loss."""
    cache = forward_batch(params, cfg, np.asarray(Xb, dtype=np.float64))
    R = Xb.shape[0]
    rows = np.arange(R)
    dlab = np.asarray(domain_labels, dtype=np.intp)
    err = cache["reg"] - target
    loss_reg = float((err ** 2).mean())
    loss_domain = float(-cache["logPd"][rows, dlab].mean())
    loss = w * (loss_reg + loss_domain)

    grads = params.zeros_like()
    if w == 0.0:
        return 0.0, grads

    Gr = (2.0 * w / R) * err                          # (R,)
    F = cache["F"]
    grads.reg_w += F.T @ Gr
    grads.reg_b += np.array([Gr.sum()])

    Gd = cache["Pd"].copy()
    Gd[rows, dlab] -= 1.0
    Gd *= w / R
    grads.domain_w += F.T @ Gd
    grads.domain_b += Gd.sum(axis=0)

    dF = Gr[:, None] * params.reg_w[None, :] - cfg.grl_lambda * (Gd @ params.domain_w.T)
    _shared_backward(params, cfg, cache, dF, grads)
    return float(loss), grads


def momentum_zeros(params: ModelParams) -> ModelParams:
    return params.zeros_like()


def sgd_step(
    params: ModelParams,
    grads: Gradients,
    lr: float,
    velocity: ModelParams,
    momentum: float = 0.9,
) -> tuple[ModelParams, ModelParams]:
    """Classical momentum: v <- mu*v + g; p <- p - lr*v. Returns new (p, v)."""
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    new_v, new_p = {}, {}
    for name in PARAM_FIELDS:
        v = momentum * getattr(velocity, name) + getattr(grads, name)
        new_v[name] = v
        new_p[name] = getattr(params, name) - lr * v
    return ModelParams(**new_p), ModelParams(**new_v)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [X[rng.integers(len(X))]]
    for _ in range(1, k):
        d2 = np.min(
            [((X - c) ** 2).sum(axis=1) for c in centroids], axis=0)
        total = d2.sum()
        if total <= 0:
            centroids.append(X[rng.integers(len(X))])
            continue
        centroids.append(X[rng.choice(len(X), p=d2 / total)])
    return np.stack(centroids)


def ssp_partition(
    train_subjects: list[SubjectDataset],
    DN: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> dict[str, int]:
    """Cluster subjects into DN subdomains by mean feature vector (k-means)."""
    if DN > len(train_subjects):
        raise ConfigError(
            f"cannot partition {len(train_subjects)} subjects into {DN} domains")
    if DN == 1:
        return {s.subject_id: 0 for s in train_subjects}
    X = np.stack([s.feature_array().mean(axis=0).ravel()
                  for s in train_subjects])
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, DN, rng)
    labels = np.zeros(len(X), dtype=np.intp)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for k in range(DN):
            members = X[labels == k]
            if len(members):
                new_centroids[k] = members.mean(axis=0)
            else:  # reseat an empty cluster on the farthest point
                new_centroids[k] = X[d2.min(axis=1).argmax()]
        movement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if movement < tol:
            break
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return {s.subject_id: int(labels[i]) for i, s in enumerate(train_subjects)}


def predict_subject(
    params: ModelParams, cfg: ModelConfig, subject: SubjectDataset
) -> tuple[int, np.ndarray]:
    """Argmax of the mean per-epoch class probabilities (ties: lowest index)."""
    cache = forward_batch(params, cfg, subject.feature_array())
    mean_probs = cache["Pc"].mean(axis=0)
    return int(np.argmax(mean_probs)), mean_probs


def predict_subject_score(
    params: ModelParams, cfg: ModelConfig, subject: SubjectDataset
) -> float:
    """Mean regression-head output over the subject's epochs."""
    cache = forward_batch(params, cfg, subject.feature_array())
    return float(cache["reg"].mean())


_HEAD_CODE = {CLASSIFICATION: 0, REGRESSION: 1}
_CODE_HEAD = {v: k for k, v in _HEAD_CODE.items()}


def save_checkpoint(params: ModelParams, cfg: ModelConfig, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(b"DGCN")
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<IIIII", cfg.channels, cfg.bands, cfg.hidden,
                             cfg.classes, cfg.domains))
        fh.write(struct.pack("<dBq", cfg.grl_lambda,
                             _HEAD_CODE[cfg.head_mode], cfg.seed))
        for name in PARAM_FIELDS:
            arr = np.asarray(getattr(params, name), dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelParams, ModelConfig]:
    path = Path(path)
    with open(path, "rb") as fh:
        def need(n, what):
            buf = fh.read(n)
            if len(buf) != n:
                raise FormatError(f"{path}: truncated while reading {what}")
            return buf

        if need(4, "magic") != b"DGCN":
            raise FormatError(f"{path}: bad magic, not a checkpoint")
        (version,) = struct.unpack("<I", need(4, "version"))
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        C, B, H, N, DN = struct.unpack("<IIIII", need(20, "dims"))
        grl, head_code, seed = struct.unpack("<dBq", need(17, "config"))
        if head_code not in _CODE_HEAD:
            raise FormatError(f"{path}: unknown head code {head_code}")
        cfg = ModelConfig(channels=C, bands=B, hidden=H, classes=N, domains=DN,
                          grl_lambda=grl, head_mode=_CODE_HEAD[head_code],
                          seed=seed)
        tensors = {}
        for name in PARAM_FIELDS:
            (rank,) = struct.unpack("<I", need(4, f"{name} rank"))
            shape = struct.unpack(f"<{rank}I", need(4 * rank, f"{name} dims"))
            payload = need(8 * int(np.prod(shape)), f"{name} payload")
            tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    return ModelParams(**tensors), cfg
