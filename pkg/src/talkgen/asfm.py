"""Audio-Style Fusion inside each backbone block: parallel audio and style
cross-attention scaled by per-block factors, plus the downstream emotion
cross-attention. Output projections of all three attentions start at zero
so every added pathway is exactly inert at initialization.
"""
from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ShapeError


def scaled_dot_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                         heads: int = 1):
    """Softmax attention with 1/sqrt(d_head) scaling.

    q: (B, m_q, d), k/v: (B, m_kv, d). Returns (output, probs) where probs
    is (B, heads, m_q, m_kv). Softmax subtracts the row max internally, so
    logits up to +-1e4 stay finite.
    """
    b, mq, d = q.shape
    if d % heads != 0:
        raise ShapeError(f"dim {d} not divisible by heads {heads}")
    dh = d // heads
    qh = q.reshape(b, mq, heads, dh).transpose(1, 2)
    kh = k.reshape(b, k.shape[1], heads, dh).transpose(1, 2)
    vh = v.reshape(b, v.shape[1], heads, dh).transpose(1, 2)
    logits = qh @ kh.transpose(-1, -2) / math.sqrt(dh)
    probs = torch.softmax(logits, dim=-1)
    out = (probs @ vh).transpose(1, 2).reshape(b, mq, d)
    return out, probs


class CrossAttention(nn.Module):
    """Cross-attention with pre-layer-norm on the query stream only.

    ``zero_init_out`` zeroes the output projection so the module returns
    exactly zero until training moves it.
    """

    def __init__(self, dim: int, kv_dim: int | None = None, heads: int = 1,
                 zero_init_out: bool = True):
        super().__init__()
        kv_dim = dim if kv_dim is None else kv_dim
        self.heads = heads
        self.norm = nn.LayerNorm(dim)
        self.to_q = nn.Linear(dim, dim)
        self.to_k = nn.Linear(kv_dim, dim)
        self.to_v = nn.Linear(kv_dim, dim)
        self.to_out = nn.Linear(dim, dim)
        if zero_init_out:
            nn.init.zeros_(self.to_out.weight)
            nn.init.zeros_(self.to_out.bias)

    def forward(self, x: torch.Tensor, ctx: torch.Tensor,
                return_probs: bool = False):
        q = self.to_q(self.norm(x))
        out, probs = scaled_dot_attention(q, self.to_k(ctx), self.to_v(ctx), self.heads)
        out = self.to_out(out)
        return (out, probs) if return_probs else out


class AudioStyleFusion(nn.Module):
    """One block's ACA + SCA pair with scaled fusion.

    Fusion is residual by default: z + s_phi * SCA(z, c_s) + s_alpha *
    ACA(z, c_a). The non-residual literal form is kept as an ablation.
    """

    def __init__(self, dim: int, cond_dim: int, heads: int = 1):
        super().__init__()
        self.audio_attn = CrossAttention(dim, cond_dim, heads)
        self.style_attn = CrossAttention(dim, cond_dim, heads)

    def forward(self, z: torch.Tensor, c_a: torch.Tensor, c_s: torch.Tensor,
                s_alpha: torch.Tensor, s_phi: torch.Tensor,
                residual: bool = True) -> torch.Tensor:
        """z: (B, seq, d); c_a/c_s: (B, m, d_tau); s_*: (B,) scale factors."""
        aca = self.audio_attn(z, c_a)
        sca = self.style_attn(z, c_s)
        fused = s_phi[:, None, None] * sca + s_alpha[:, None, None] * aca
        return z + fused if residual else fused


class EmotionCrossAttention(nn.Module):
    """Residual cross-attention over the emotion embedding, zero-init out."""

    def __init__(self, dim: int, cond_dim: int, heads: int = 1):
        super().__init__()
        self.attn = CrossAttention(dim, cond_dim, heads)

    def forward(self, z: torch.Tensor, c_emo: torch.Tensor) -> torch.Tensor:
        return z + self.attn(z, c_emo)
