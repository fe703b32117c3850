"""Forward noising, clean-latent estimation, and deterministic sampling.

Latent videos are plain tensors shaped (c, n, h, w), optionally with a
leading batch dimension. All schedule math is kept in float64; values are
cast to the latent's dtype at the point of use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import DivergenceError, ScheduleRangeError, SingularityError


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal-retention table alpha_bar[0..T], alpha_bar[0] = 1.

    alpha_bar is strictly decreasing over 1..T and never reaches zero, so
    the clean-latent estimate stays finite at every timestep.
    """

    timesteps: int
    alpha_bar: np.ndarray  # float64, shape (T+1,)

    @classmethod
    def cosine(cls, timesteps: int, floor: float = 1e-4, s: float = 0.008) -> "NoiseSchedule":
        """Cosine schedule with a strictly decreasing floor near T.

        A hard clip at ``floor`` would flatten the tail and break strict
        monotonicity, so the floor itself decays linearly from 1.5*floor
        down to ``floor``.
        """
        t = np.arange(timesteps + 1, dtype=np.float64) / timesteps
        f = np.cos((t + s) / (1 + s) * math.pi / 2) ** 2
        raw = f / f[0]
        tail = floor * (1.0 + 0.5 * (1.0 - t))
        alpha_bar = np.maximum(raw, tail)
        alpha_bar[0] = 1.0
        sched = cls(timesteps=timesteps, alpha_bar=alpha_bar)
        sched.validate()
        return sched

    def validate(self) -> None:
        if self.alpha_bar.shape != (self.timesteps + 1,):
            raise ScheduleRangeError("alpha_bar must have length T+1")
        if self.alpha_bar[0] != 1.0:
            raise ScheduleRangeError("alpha_bar[0] must be exactly 1")
        if np.any(self.alpha_bar <= 0.0) or np.any(self.alpha_bar > 1.0):
            raise ScheduleRangeError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(self.alpha_bar[1:]) >= 0.0):
            raise ScheduleRangeError("alpha_bar must be strictly decreasing on 1..T")

    def alpha_bar_at(self, t) -> np.ndarray:
        """alpha_bar indexed by an int or an integer array, range-checked."""
        idx = np.asarray(t)
        if idx.size == 0 or np.any(idx < 0) or np.any(idx > self.timesteps):
            raise ScheduleRangeError(
                f"timestep {t} outside schedule range [0, {self.timesteps}]"
            )
        return self.alpha_bar[idx]

    def snr(self, t) -> np.ndarray:
        ab = self.alpha_bar_at(t)
        return ab / (1.0 - ab)


def _gather(sched: NoiseSchedule, t, like: torch.Tensor) -> torch.Tensor:
    """Schedule values for ``t`` shaped to broadcast against ``like``."""
    ab = sched.alpha_bar_at(t.cpu().numpy() if torch.is_tensor(t) else t)
    val = torch.as_tensor(ab, dtype=like.dtype, device=like.device)
    while val.dim() < like.dim():
        val = val.unsqueeze(-1)
    return val


def forward_noise(z0: torch.Tensor, t, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """z_t = sqrt(ab_t) * z0 + sqrt(1 - ab_t) * eps."""
    if eps.shape != z0.shape:
        raise ScheduleRangeError(f"eps shape {tuple(eps.shape)} != z0 shape {tuple(z0.shape)}")
    ab = _gather(sched, t, z0)
    return torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps


def estimate_z0(z_t: torch.Tensor, t, eps_pred: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Clean-latent estimate from a noisy latent and a noise prediction.

    z0_hat = z_t / sqrt(ab_t) - sqrt(1/ab_t - 1) * eps_pred. Linear in
    eps_pred, so gradients through it are the constant -sqrt(1/ab_t - 1).
    """
    ab = _gather(sched, t, z_t)
    if torch.any(ab == 0.0):
        raise SingularityError("alpha_bar reached 0; schedule must stay positive")
    return z_t / torch.sqrt(ab) - torch.sqrt(1.0 / ab - 1.0) * eps_pred


def sample_timesteps(sched: NoiseSchedule, steps: int) -> list[int]:
    """Uniformly strided descending timestep subset T..1 for sampling."""
    if steps < 1:
        raise ScheduleRangeError(f"steps must be >= 1, got {steps}")
    ts = np.linspace(sched.timesteps, 1, num=min(steps, sched.timesteps))
    ts = np.unique(np.round(ts).astype(int))[::-1]
    return [int(t) for t in ts]


def sample(
    model,
    sched: NoiseSchedule,
    shape: tuple[int, ...],
    steps: int,
    seed: int,
    *,
    init: torch.Tensor | None = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Deterministic ancestral sampling (DDIM update, eta = 0).

    ``model`` maps (z_t, t) -> eps_pred. The start state is seeded Gaussian
    noise; if ``init`` is given it is treated as a prior guess of the clean
    latent and forward-noised to timestep T.
    """
    gen = torch.Generator().manual_seed(seed)
    noise = torch.randn(shape, generator=gen, dtype=dtype)
    if init is not None:
        z = forward_noise(init.to(dtype), sched.timesteps, noise, sched)
    else:
        z = noise
    ts = sample_timesteps(sched, steps)
    for i, t in enumerate(ts):
        eps = model(z, t)
        z0_hat = estimate_z0(z, t, eps, sched)
        t_next = ts[i + 1] if i + 1 < len(ts) else 0
        ab_next = _gather(sched, t_next, z)
        z = torch.sqrt(ab_next) * z0_hat + torch.sqrt(1.0 - ab_next) * eps
        if not torch.isfinite(z).all():
            raise DivergenceError(f"non-finite latent at sampling step {i} (t={t})")
    return z
