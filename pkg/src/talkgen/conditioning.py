"""Condition producers: toy audio/text/reference encoders behind pluggable
interfaces, the audio context fusion and projection, the phoneme mapping
table, the emotion prompt template, keypoint heatmap rendering, and the
Pose Adapter.

The toy encoders stand in for large pretrained models. Each one is frozen
and fully determined by ``encoder_seed``, so any control the trained model
exhibits is attributable to the trained modules, not to encoder drift.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch
from torch import nn

from .config import EMOTIONS, GENDERS, TrainConfig
from .errors import ConditioningError, FormatError, ShapeError, VocabularyError

AUDIO_TOKENS_PER_FRAME = 5    # l
FUSED_TOKENS = 50             # L = 10 * l
_WINDOW_OFFSETS = tuple(range(-4, 6))  # 4 preceding, self, 5 following

PHONEME_TABLE_VERSION = "v1"


# ---------------------------------------------------------------------------
# phoneme mapping table
# ---------------------------------------------------------------------------

def load_phoneme_table() -> dict[str, int]:
    """symbol -> index mapping from the versioned table shipped as data."""
    text = resources.files("talkgen.data").joinpath("phoneme_table.tsv").read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# talkgen-phoneme-table"):
        raise FormatError("phoneme table missing versioned header")
    version = lines[0].split("\t")[-1].strip()
    if version != PHONEME_TABLE_VERSION:
        raise FormatError(f"phoneme table version {version!r} unsupported")
    table: dict[str, int] = {}
    for ln in lines[1:]:
        if not ln.strip() or ln.startswith("#"):
            continue
        sym, idx = ln.split("\t")
        table[sym] = int(idx)
    indices = sorted(table.values())
    if indices != list(range(len(table))):
        raise FormatError("phoneme indices must be 0..V-1 without gaps")
    if table.get("SIL") != 0:
        raise FormatError("index 0 must be the silence symbol")
    return table


def phoneme_vocab_size() -> int:
    return len(load_phoneme_table())


# ---------------------------------------------------------------------------
# toy audio encoder + context fusion + projection
# ---------------------------------------------------------------------------

class ToyAudioEncoder:
    """Frozen waveform -> per-frame features (N, l=5, d_a).

    Each video frame's audio window is split into l sub-windows; simple
    energy statistics of each sub-window pass through a frozen random
    projection. The envelope is linearly recoverable from the features.
    """

    def __init__(self, audio_dim: int, seed: int):
        gen = torch.Generator().manual_seed(seed)
        self.weight = torch.randn(4, audio_dim, generator=gen, dtype=torch.float64)
        self.weight /= math.sqrt(4)
        self.bias = 0.1 * torch.randn(audio_dim, generator=gen, dtype=torch.float64)
        self.audio_dim = audio_dim

    def __call__(self, waveform: np.ndarray, n_frames: int, samples_per_frame: int) -> torch.Tensor:
        wav = np.asarray(waveform, dtype=np.float64).reshape(-1)
        need = n_frames * samples_per_frame
        if wav.shape[0] < need:
            wav = np.pad(wav, (0, need - wav.shape[0]))
        wav = wav[:need]
        sub = samples_per_frame // AUDIO_TOKENS_PER_FRAME
        x = wav[: n_frames * AUDIO_TOKENS_PER_FRAME * sub].reshape(
            n_frames, AUDIO_TOKENS_PER_FRAME, sub
        )
        rms = np.sqrt((x**2).mean(axis=-1))
        mav = np.abs(x).mean(axis=-1)
        zcr = (np.diff(np.sign(x), axis=-1) != 0).mean(axis=-1)
        peak = np.abs(x).max(axis=-1)
        stats = torch.from_numpy(np.stack([rms, mav, zcr, peak], axis=-1))
        feats = stats @ self.weight + self.bias
        return feats.to(torch.float32)


def fuse_audio_context(per_frame: torch.Tensor) -> torch.Tensor:
    """(N, l, d_a) -> (N, L=50, d_a): concatenate frames i-4..i+5, clamped.

    A pure gather: every output entry is a copy of an input entry, so the
    Jacobian is a 0/1 matrix.
    """
    if per_frame.dim() != 3 or per_frame.shape[1] != AUDIO_TOKENS_PER_FRAME:
        raise ShapeError(
            f"expected (N, {AUDIO_TOKENS_PER_FRAME}, d_a), got {tuple(per_frame.shape)}"
        )
    n = per_frame.shape[0]
    idx = torch.arange(n).unsqueeze(1) + torch.tensor(_WINDOW_OFFSETS).unsqueeze(0)
    idx = idx.clamp(0, n - 1)
    fused = per_frame[idx]  # (N, 10, l, d_a)
    return fused.reshape(n, FUSED_TOKENS, per_frame.shape[-1])


class AudioProjector(nn.Module):
    """P_A: two linear layers mapping fused audio to m_a condition tokens.

    The first layer maps each pixel frame's (L * d_a) fused block to the
    condition dim; the second mixes each latent frame's group of
    ``temporal_factor`` pixel frames into its audio token(s).
    """

    def __init__(self, cfg: TrainConfig):
        super().__init__()
        self.temporal_factor = cfg.temporal_factor
        self.tokens_per_frame = cfg.audio_tokens_per_frame
        self.cond_dim = cfg.cond_dim
        self.frame_proj = nn.Linear(FUSED_TOKENS * cfg.audio_dim, cfg.cond_dim)
        self.group_proj = nn.Linear(
            cfg.temporal_factor * cfg.cond_dim,
            cfg.audio_tokens_per_frame * cfg.cond_dim,
        )

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        """(..., N, L, d_a) -> (..., m_a, d_tau)."""
        lead = fused.shape[:-3]
        n = fused.shape[-3]
        if n % self.temporal_factor != 0:
            raise ShapeError(f"frame count {n} not divisible by {self.temporal_factor}")
        x = self.frame_proj(fused.reshape(*lead, n, -1))
        x = x.reshape(*lead, n // self.temporal_factor, self.temporal_factor * self.cond_dim)
        x = self.group_proj(x)
        return x.reshape(*lead, (n // self.temporal_factor) * self.tokens_per_frame,
                         self.cond_dim)


# ---------------------------------------------------------------------------
# emotion prompt + toy text embedder
# ---------------------------------------------------------------------------

def build_emotion_prompt(gender: str, emotion: str) -> str:
    if gender not in GENDERS:
        raise VocabularyError(f"unknown gender {gender!r}")
    if emotion not in EMOTIONS:
        raise VocabularyError(f"unknown emotion {emotion!r}")
    return f"This {gender} is {emotion} and talks"


_PROMPT_RE = re.compile(
    r"^This (man|woman) is (happy|sad|angry|disgusted|surprised|fearful|neutral) and talks$"
)


class ToyTextEmbedder:
    """Frozen hashed bag-of-tokens embedder for template prompts.

    Each whitespace token hashes (sha256) into a frozen lookup table; the
    sequence is padded to ``text_tokens`` rows with a frozen pad vector.
    Only prompts from the template grammar are accepted.
    """

    TABLE_ROWS = 4096

    def __init__(self, cond_dim: int, text_tokens: int, seed: int):
        gen = torch.Generator().manual_seed(seed)
        self.table = 0.5 * torch.randn(
            self.TABLE_ROWS, cond_dim, generator=gen, dtype=torch.float64
        )
        self.pad = 0.5 * torch.randn(cond_dim, generator=gen, dtype=torch.float64)
        self.text_tokens = text_tokens

    @staticmethod
    def _bucket(token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % ToyTextEmbedder.TABLE_ROWS

    def __call__(self, prompt: str) -> torch.Tensor:
        if not _PROMPT_RE.match(prompt):
            raise VocabularyError(f"prompt outside the template grammar: {prompt!r}")
        tokens = prompt.split()
        if len(tokens) > self.text_tokens:
            raise VocabularyError("prompt longer than the embedding length")
        rows = [self.table[self._bucket(t)] for t in tokens]
        rows += [self.pad] * (self.text_tokens - len(rows))
        return torch.stack(rows).to(torch.float32)


# ---------------------------------------------------------------------------
# toy reference-image encoder
# ---------------------------------------------------------------------------

class ToyReferenceEncoder:
    """Frozen quadrant-patch projection of the reference face."""

    def __init__(self, pixel_size: int, cond_dim: int, ref_tokens: int, seed: int):
        if ref_tokens != 4:
            raise ConditioningError("reference encoder emits one token per quadrant")
        gen = torch.Generator().manual_seed(seed)
        patch = 3 * (pixel_size // 2) ** 2
        self.weight = torch.randn(patch, cond_dim, generator=gen, dtype=torch.float64)
        self.weight /= math.sqrt(patch)
        self.pixel_size = pixel_size
        self.ref_tokens = ref_tokens

    def __call__(self, image: torch.Tensor) -> torch.Tensor:
        s = self.pixel_size
        if image.shape != (3, s, s):
            raise ShapeError(f"expected reference image (3, {s}, {s}), got {tuple(image.shape)}")
        half = s // 2
        x = image.to(torch.float64)
        quads = [
            x[:, :half, :half], x[:, :half, half:],
            x[:, half:, :half], x[:, half:, half:],
        ]
        rows = [q.reshape(-1) @ self.weight for q in quads]
        return torch.stack(rows).to(torch.float32)


# ---------------------------------------------------------------------------
# keypoint heatmaps + Pose Adapter
# ---------------------------------------------------------------------------

_KP_PALETTE = np.array(
    [
        [1.0, 0.2, 0.2],
        [0.2, 1.0, 0.2],
        [0.2, 0.2, 1.0],
        [1.0, 1.0, 0.2],
        [1.0, 0.2, 1.0],
        [0.2, 1.0, 1.0],
    ]
)


def render_keypoint_heatmaps(keypoints: np.ndarray, size: int) -> np.ndarray:
    """(N, K, 2) x/y keypoints -> (3, N, H, W) composited Gaussian blobs."""
    kps = np.asarray(keypoints, dtype=np.float64)
    if kps.ndim != 3 or kps.shape[-1] != 2:
        raise ShapeError(f"expected keypoints (N, K, 2), got {tuple(kps.shape)}")
    n, k, _ = kps.shape
    sigma = 0.04 * size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    canvas = np.zeros((3, n, size, size))
    for j in range(k):
        x = kps[:, j, 0][:, None, None]
        y = kps[:, j, 1][:, None, None]
        blob = np.exp(-((xs[None] - x) ** 2 + (ys[None] - y) ** 2) / (2 * sigma**2))
        color = _KP_PALETTE[j % len(_KP_PALETTE)]
        canvas += color[:, None, None, None] * blob[None]
    return np.clip(canvas, 0.0, 1.0).astype(np.float32)


class PoseAdapter(nn.Module):
    """3-layer 3D CNN mapping a keypoint video onto the latent grid.

    The final convolution is zero-initialized so pose injection starts as
    the identity and grows during training.
    """

    def __init__(self, cfg: TrainConfig):
        super().__init__()
        if cfg.spatial_factor != 4 or cfg.temporal_factor != 4:
            raise ShapeError("pose adapter strides assume spatial/temporal factor 4")
        self.conv1 = nn.Conv3d(3, 8, kernel_size=3, padding=1)
        self.conv2 = nn.Conv3d(8, 16, kernel_size=3, stride=2, padding=1)
        self.conv3 = nn.Conv3d(16, cfg.latent_channels, kernel_size=3, stride=2, padding=1)
        nn.init.zeros_(self.conv3.weight)
        nn.init.zeros_(self.conv3.bias)
        self.act = nn.SiLU()

    def forward(self, heatmaps: torch.Tensor) -> torch.Tensor:
        """(..., 3, M, H, W) -> (..., c, n, h, w)."""
        squeeze = heatmaps.dim() == 4
        x = heatmaps.unsqueeze(0) if squeeze else heatmaps
        if x.shape[-3] % 4 != 0:
            raise ShapeError("keypoint video length must be divisible by 4")
        x = self.act(self.conv1(x))
        x = self.act(self.conv2(x))
        x = self.conv3(x)
        return x.squeeze(0) if squeeze else x


def inject_pose(z0: torch.Tensor, z_pose: torch.Tensor, pose_weight: float) -> torch.Tensor:
    """z0 + w_p * z_pose; identity when the pose latent is zero."""
    if z_pose.shape != z0.shape:
        raise ShapeError(f"pose latent {tuple(z_pose.shape)} != latent {tuple(z0.shape)}")
    return z0 + pose_weight * z_pose


# ---------------------------------------------------------------------------
# condition bundle
# ---------------------------------------------------------------------------

@dataclass
class ConditionBundle:
    """Post-dropout conditioning set consumed by the backbone.

    All embeddings carry a batch dim: (B, m, d_tau); the pose latent is
    (B, c, n, h, w). ``drop_flags`` records which conditions were nulled.
    """

    c_a: torch.Tensor
    c_s: torch.Tensor
    c_emo: torch.Tensor
    c_ref: torch.Tensor
    z_pose: torch.Tensor
    drop_flags: dict[str, torch.Tensor]

    def validate(self, cond_dim: int) -> None:
        for name in ("c_a", "c_s", "c_emo", "c_ref"):
            t = getattr(self, name)
            if t.dim() != 3 or t.shape[-1] != cond_dim:
                raise ConditioningError(
                    f"{name} must be (B, m, {cond_dim}), got {tuple(t.shape)}"
                )
