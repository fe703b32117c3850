"""Run configuration: model dimensions, loss weights, training knobs.

A config serializes to a canonical JSON text whose SHA-256 hash is embedded
in checkpoints, so a checkpoint can refuse to load under a different config.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import FormatError

EMOTIONS = ("happy", "sad", "angry", "disgusted", "surprised", "fearful", "neutral")
GENDERS = ("man", "woman")


@dataclass(frozen=True)
class LossWeights:
    """Weights and window sizes of the training objective.

    ``latent_window`` (l_s) consecutive latent frames are decoded into
    ``decoded_window`` (L_s = l_s * 4) pixel frames, of which ``sync_frames``
    (L_f) consecutive ones are scored by the sync oracle.
    """

    lambda_id: float = 0.1
    lambda_sync: float = 0.1
    lambda_eye: float = 10.0
    lambda_s: float = 0.5
    latent_window: int = 2
    decoded_window: int = 8
    sync_frames: int = 5

    def validate(self) -> None:
        if self.decoded_window != self.latent_window * 4:
            raise FormatError(
                f"decoded_window must equal latent_window*4, got "
                f"{self.decoded_window} vs {self.latent_window}*4"
            )
        if self.sync_frames > self.decoded_window:
            raise FormatError("sync_frames must not exceed decoded_window")
        for name in ("lambda_id", "lambda_sync", "lambda_eye", "lambda_s"):
            if getattr(self, name) < 0:
                raise FormatError(f"{name} must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    # backbone dims
    blocks: int = 4                 # d_b, must be even
    token_dim: int = 64             # d_i
    cond_dim: int = 64              # d_tau (= d_s at desk scale)
    patch_size: int = 2
    heads: int = 1
    ff_ratio: int = 2
    align_depth: int = 2            # d, identity loss uses blocks 1..d
    align_norm: str = "align_depth"  # or "block_count"

    # video / latent geometry
    pixel_size: int = 32            # H = W
    pixel_frames: int = 64          # N, divisible by temporal_factor
    spatial_factor: int = 4
    temporal_factor: int = 4

    # diffusion schedule
    timesteps: int = 1000
    schedule_floor: float = 1e-4
    sample_steps: int = 24

    # conditioning
    audio_dim: int = 16             # d_a
    audio_tokens_per_frame: int = 1  # tokens per latent frame after projection
    text_tokens: int = 8            # m_1
    ref_tokens: int = 4             # m_2
    p_drop: float = 0.1
    pose_weight: float = 0.1        # w_p
    encoder_seed: int = 7001        # seeds every frozen toy encoder
    fps: int = 25
    sample_rate: int = 16000

    # losses
    loss: LossWeights = field(default_factory=LossWeights)

    # optimization
    optimizer: str = "adamw"
    lr: float = 1e-3
    weight_decay: float = 1e-4
    steps: int = 3000
    batch_size: int = 8
    seed: int = 0
    freeze_backbone_steps: int = 0
    dtype: str = "float32"          # or "float64"

    # ablation toggles
    disable_asfm: bool = False
    disable_pose: bool = False
    disable_lid: bool = False
    disable_lsync: bool = False
    disable_style_branch: bool = False
    disable_emotion_branch: bool = False
    disable_phonemes: bool = False
    no_residual_fusion: bool = False

    # geometry derived from the codec factors
    @property
    def latent_size(self) -> int:
        return self.pixel_size // self.spatial_factor

    @property
    def latent_frames(self) -> int:
        return self.pixel_frames // self.temporal_factor

    @property
    def latent_channels(self) -> int:
        return 3 * self.temporal_factor * self.spatial_factor**2

    @property
    def audio_tokens(self) -> int:
        """m_a: total audio tokens after the projection module."""
        return self.latent_frames * self.audio_tokens_per_frame

    @property
    def emotion_tokens(self) -> int:
        """m_e = m_1 + m_2."""
        return self.text_tokens + self.ref_tokens

    def validate(self) -> None:
        if self.blocks < 2 or self.blocks % 2 != 0:
            raise FormatError(f"blocks must be even and >= 2, got {self.blocks}")
        if self.pixel_size % self.spatial_factor != 0:
            raise FormatError("pixel_size not divisible by spatial_factor")
        if self.pixel_frames % self.temporal_factor != 0:
            raise FormatError("pixel_frames not divisible by temporal_factor")
        if self.latent_size % self.patch_size != 0:
            raise FormatError("latent_size not divisible by patch_size")
        if not 1 <= self.align_depth <= self.blocks:
            raise FormatError("align_depth must lie in [1, blocks]")
        if self.align_norm not in ("align_depth", "block_count"):
            raise FormatError(f"unknown align_norm {self.align_norm!r}")
        if self.dtype not in ("float32", "float64"):
            raise FormatError(f"unknown dtype {self.dtype!r}")
        if not 0.0 <= self.p_drop <= 1.0:
            raise FormatError("p_drop must lie in [0, 1]")
        if self.sample_rate % self.fps != 0:
            raise FormatError("sample_rate must be divisible by fps")
        self.loss.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_text(self) -> str:
        """Canonical structured-text form: sorted-key JSON, repr floats."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def replace(self, **kwargs) -> "TrainConfig":
        if "loss" in kwargs and isinstance(kwargs["loss"], dict):
            kwargs["loss"] = LossWeights(**kwargs["loss"])
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        if "loss" in raw and isinstance(raw["loss"], dict):
            loss_known = {f.name for f in dataclasses.fields(LossWeights)}
            loss_unknown = set(raw["loss"]) - loss_known
            if loss_unknown:
                raise FormatError(f"unknown loss config keys: {sorted(loss_unknown)}")
            raw["loss"] = LossWeights(**raw["loss"])
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.canonical_text())

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise FormatError("config file must contain a JSON object")
        return cls.from_dict(raw)
