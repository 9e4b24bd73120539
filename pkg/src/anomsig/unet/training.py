"""Denoising trainer: SGD with momentum over the standard noise-matching
objective. Forward/backward are written against the same architecture as
the compiled predictor; a consistency test pins the two together and a
finite-difference oracle checks the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffusion.schedule import NoiseSchedule
from ..errors import TrainingDivergenceError
from .config import UNetConfig, Weights
from .layers import (
    avg_pool2,
    avg_pool2_backward,
    conv2d,
    conv2d_backward,
    time_embedding,
    upsample2,
    upsample2_backward,
)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    batch_size: int = 16
    learning_rate: float = 3e-3
    momentum: float = 0.9
    seed: int = 0
    eval_every: int = 200
    heldout_fraction: float = 0.1


@dataclass
class TrainResult:
    weights: Weights
    initial_loss: float
    final_loss: float
    history: list[tuple[int, float]] = field(default_factory=list)


def _time_batch(ts: np.ndarray, dim: int) -> np.ndarray:
    return np.stack([time_embedding(t, dim) for t in ts])


def forward_batch(
    tensors: dict[str, np.ndarray], x: np.ndarray, temb: np.ndarray, cfg: UNetConfig
) -> tuple[np.ndarray, dict]:
    """Batched forward with caches for backprop. x: (B,1,s,s), temb: (B,E)."""
    w1, w2, _ = cfg.channel_widths

    def tbias(name: str) -> np.ndarray:
        per = tensors[f"{name}.bias"] + temb @ tensors[f"{name}.time"].T
        return per[:, :, None, None]

    z1 = conv2d(x, tensors["enc1.kernel"]) + tbias("enc1")
    e1 = z1 * (z1 >= 0)
    p1 = avg_pool2(e1)
    z2 = conv2d(p1, tensors["enc2.kernel"]) + tbias("enc2")
    e2 = z2 * (z2 >= 0)
    p2 = avg_pool2(e2)
    z3 = conv2d(p2, tensors["mid.kernel"]) + tbias("mid")
    m = z3 * (z3 >= 0)
    c2 = np.concatenate([upsample2(m), e2], axis=1)
    z4 = conv2d(c2, tensors["dec2.kernel"]) + tbias("dec2")
    d2 = z4 * (z4 >= 0)
    c1 = np.concatenate([upsample2(d2), e1], axis=1)
    z5 = conv2d(c1, tensors["dec1.kernel"]) + tbias("dec1")
    d1 = z5 * (z5 >= 0)
    c0 = np.concatenate([d1, x], axis=1)
    out = conv2d(c0, tensors["out.kernel"]) + tensors["out.bias"][None, :, None, None]
    cache = dict(x=x, temb=temb, z1=z1, p1=p1, z2=z2, p2=p2, z3=z3,
                 c2=c2, z4=z4, c1=c1, z5=z5, c0=c0, w1=w1, w2=w2)
    return out, cache


def backward_batch(
    tensors: dict[str, np.ndarray], grad_out: np.ndarray, cache: dict
) -> dict[str, np.ndarray]:
    """Parameter gradients for forward_batch under upstream grad_out."""
    temb = cache["temb"]
    w1, w2 = cache["w1"], cache["w2"]
    grads: dict[str, np.ndarray] = {}

    def conv_grads(name: str, x_in: np.ndarray, dz: np.ndarray, timed: bool = True):
        dx, dk = conv2d_backward(x_in, tensors[f"{name}.kernel"], dz)
        grads[f"{name}.kernel"] = dk
        grads[f"{name}.bias"] = dz.sum(axis=(0, 2, 3))
        if timed:
            grads[f"{name}.time"] = dz.sum(axis=(2, 3)).T @ temb
        return dx

    dc0 = conv_grads("out", cache["c0"], grad_out, timed=False)
    dd1 = dc0[:, :w1]
    dz5 = dd1 * (cache["z5"] >= 0)
    dc1 = conv_grads("dec1", cache["c1"], dz5)
    du1, de1_skip = dc1[:, :w2], dc1[:, w2:]
    dd2 = upsample2_backward(du1)
    dz4 = dd2 * (cache["z4"] >= 0)
    dc2 = conv_grads("dec2", cache["c2"], dz4)
    w3 = dc2.shape[1] - w2
    du2, de2_skip = dc2[:, :w3], dc2[:, w3:]
    dm = upsample2_backward(du2)
    dz3 = dm * (cache["z3"] >= 0)
    dp2 = conv_grads("mid", cache["p2"], dz3)
    de2 = avg_pool2_backward(dp2) + de2_skip
    dz2 = de2 * (cache["z2"] >= 0)
    dp1 = conv_grads("enc2", cache["p1"], dz2)
    de1 = avg_pool2_backward(dp1) + de1_skip
    dz1 = de1 * (cache["z1"] >= 0)
    conv_grads("enc1", cache["x"], dz1)
    return grads


def denoising_loss_and_grads(
    tensors: dict[str, np.ndarray],
    x0: np.ndarray,
    ts: np.ndarray,
    eps: np.ndarray,
    schedule: NoiseSchedule,
    cfg: UNetConfig,
    with_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray] | None]:
    """Mean squared noise-prediction error on one batch of flat images."""
    s = cfg.image_side
    b = x0.shape[0]
    abar = schedule.alpha_bars[ts]
    xt = (
        np.sqrt(abar)[:, None] * x0 + np.sqrt(1.0 - abar)[:, None] * eps
    ).reshape(b, 1, s, s)
    temb = _time_batch(ts, cfg.time_embed_dim)
    out, cache = forward_batch(tensors, xt, temb, cfg)
    resid = out - eps.reshape(b, 1, s, s)
    loss = float(np.mean(resid * resid))
    if not with_grads:
        return loss, None
    grad_out = (2.0 / resid.size) * resid
    return loss, backward_batch(tensors, grad_out, cache)


def train(
    dataset: np.ndarray,
    config: UNetConfig,
    schedule: NoiseSchedule,
    tc: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Fit the denoiser on flat images (N, n). Raises on divergence with the
    last finite snapshot attached; the result always improves held-out loss
    relative to initialization or a TrainingDivergenceError explains why not.
    """
    rng = np.random.default_rng(tc.seed)
    n_held = max(4, int(len(dataset) * tc.heldout_fraction))
    if len(dataset) <= n_held:
        raise ValueError("dataset too small for a held-out split")
    held, train_set = dataset[:n_held], dataset[n_held:]

    held_ts = rng.integers(1, schedule.T + 1, size=4 * n_held)
    held_x0 = np.repeat(held, 4, axis=0)
    held_eps = rng.standard_normal(held_x0.shape)

    init = Weights.init_random(config, seed=int(rng.integers(2**32)))
    tensors = {k: v.copy() for k, v in init.tensors.items()}
    velocity = {k: np.zeros_like(v) for k, v in tensors.items()}

    def heldout_loss() -> float:
        loss, _ = denoising_loss_and_grads(
            tensors, held_x0, held_ts, held_eps, schedule, config, with_grads=False
        )
        return loss

    initial = heldout_loss()
    history: list[tuple[int, float]] = [(0, initial)]
    last_finite = {k: v.copy() for k, v in tensors.items()}

    for step in range(1, tc.steps + 1):
        idx = rng.integers(0, len(train_set), size=tc.batch_size)
        ts = rng.integers(1, schedule.T + 1, size=tc.batch_size)
        eps = rng.standard_normal((tc.batch_size, train_set.shape[1]))
        loss, grads = denoising_loss_and_grads(
            tensors, train_set[idx], ts, eps, schedule, config
        )
        if not np.isfinite(loss):
            raise TrainingDivergenceError(
                f"loss became non-finite at step {step}",
                last_weights=Weights(config, last_finite),
            )
        for name in tensors:
            velocity[name] = tc.momentum * velocity[name] - tc.learning_rate * grads[name]
            tensors[name] = tensors[name] + velocity[name]
        if step % tc.eval_every == 0 or step == tc.steps:
            h = heldout_loss()
            if np.isfinite(h):
                last_finite = {k: v.copy() for k, v in tensors.items()}
            history.append((step, h))

    final = history[-1][1]
    return TrainResult(
        weights=Weights(config, tensors),
        initial_loss=initial,
        final_loss=final,
        history=history,
    )
