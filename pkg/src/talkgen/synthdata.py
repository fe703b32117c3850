"""Synthetic talking-face clips with analytic ground truth, plus the toy
latent codec and the on-disk dataset container.

Every clip is rendered from closed-form geometry so that lip sync, head
pose, and emotion are measurable without any learned metric: mouth
openness tracks the audio envelope, the upper-face feature group
translates with yaw/pitch and tilts with roll, and emotion selects a hue
tint. Frames are quantized to the 1/255 grid at render time so the
container can store them losslessly as uint8.
"""
from __future__ import annotations

import colorsys
import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from .config import EMOTIONS, GENDERS, TrainConfig
from .errors import FormatError, IntegrityError, ShapeError

DATASET_FORMAT = "talkgen-dataset"
DATASET_VERSION = 1

# openness-ordered vowels used by the analytic phoneme labeller
_VOWEL_LADDER = ("IY", "IH", "EH", "AH", "AE", "AA", "AO", "AW")


# ---------------------------------------------------------------------------
# face geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceGeometry:
    """Pixel-space layout of the rendered face, scaled by frame size."""

    size: int

    @property
    def cx(self) -> float:
        return self.size / 2

    @property
    def cy(self) -> float:
        return self.size / 2

    @property
    def face_rx(self) -> float:
        return 0.34 * self.size

    @property
    def face_ry(self) -> float:
        return 0.40 * self.size

    @property
    def eye_dx(self) -> float:
        return 0.14 * self.size

    @property
    def eye_y(self) -> float:
        return 0.34 * self.size

    @property
    def eye_r(self) -> float:
        return 0.05 * self.size

    @property
    def nose_y(self) -> float:
        return 0.52 * self.size

    @property
    def nose_r(self) -> float:
        return 0.04 * self.size

    @property
    def mouth_y(self) -> float:
        return 0.72 * self.size

    @property
    def mouth_rx(self) -> float:
        return 0.14 * self.size

    def mouth_ry(self, openness) -> np.ndarray:
        """Mouth half-height in pixels; linear in openness."""
        return (0.023 + 0.094 * np.asarray(openness, dtype=np.float64)) * self.size

    @property
    def yaw_gain(self) -> float:
        """Horizontal pixel shift of the upper-face group per radian of yaw."""
        return 0.375 * self.size

    @property
    def pitch_gain(self) -> float:
        return 0.28 * self.size

    @property
    def mouth_box(self) -> np.ndarray:
        """(r0, r1, c0, c1), half-open rows/cols around the mouth."""
        s = self.size
        return np.array(
            [round(0.56 * s), round(0.875 * s), round(0.34 * s), round(0.66 * s)],
            dtype=np.int16,
        )

    @property
    def probe_rows(self) -> tuple[int, int]:
        """Row window containing the dark upper-face features at any pose."""
        return (round(0.16 * self.size), round(0.70 * self.size))

    def eye_centers(self, yaw, pitch, roll):
        """Per-frame (x, y) of both eyes under the pose trajectory."""
        yaw = np.asarray(yaw, dtype=np.float64)
        pitch = np.asarray(pitch, dtype=np.float64)
        roll = np.asarray(roll, dtype=np.float64)
        dx = self.yaw_gain * yaw
        dy = self.pitch_gain * pitch
        tilt = self.eye_dx * np.sin(roll)
        lx = self.cx - self.eye_dx + dx
        rx = self.cx + self.eye_dx + dx
        ly = self.eye_y + dy + tilt
        ry = self.eye_y + dy - tilt
        return (lx, ly), (rx, ry)

    def nose_center(self, yaw, pitch):
        dx = self.yaw_gain * np.asarray(yaw, dtype=np.float64)
        dy = self.pitch_gain * np.asarray(pitch, dtype=np.float64)
        return self.cx + dx, self.nose_y + dy

    def eye_box(self, ex, ey) -> np.ndarray:
        h = 0.08 * self.size
        return np.array(
            [math.floor(ey - h), math.ceil(ey + h), math.floor(ex - h), math.ceil(ex + h)],
            dtype=np.int16,
        )

    def keypoints(self, yaw, pitch, roll) -> np.ndarray:
        """(K=6, 2) x/y keypoints: eyes, nose, mouth corners, chin."""
        (lx, ly), (rx, ry) = self.eye_centers(yaw, pitch, roll)
        nx, ny = self.nose_center(yaw, pitch)
        return np.array(
            [
                [lx, ly],
                [rx, ry],
                [nx, ny],
                [self.cx - self.mouth_rx, self.mouth_y],
                [self.cx + self.mouth_rx, self.mouth_y],
                [self.cx, 0.875 * self.size],
            ],
            dtype=np.float64,
        )


def emotion_hue(emotion: str) -> float:
    return EMOTIONS.index(emotion) / len(EMOTIONS)


def emotion_colors(emotion: str) -> tuple[np.ndarray, np.ndarray]:
    """(background_rgb, skin_rgb) for an emotion's hue tint."""
    h = emotion_hue(emotion)
    bg = np.array(colorsys.hsv_to_rgb(h, 0.45, 0.50))
    skin = np.array(colorsys.hsv_to_rgb(h, 0.25, 0.75))
    return bg, skin


EYE_COLOR = np.array([0.08, 0.07, 0.07])
MOUTH_COLOR = np.array([0.97, 0.93, 0.91])

MAX_YAW = 0.35
MAX_PITCH = 0.30
MAX_ROLL = 0.25


# ---------------------------------------------------------------------------
# clip generation
# ---------------------------------------------------------------------------

@dataclass
class SyntheticClip:
    frames_u8: np.ndarray   # uint8 (3, N, H, W)
    waveform: np.ndarray    # float32 (samples,), 16 kHz mono
    audio_env: np.ndarray   # float32 (N,), in [0, 1]
    pose_traj: np.ndarray   # float32 (N, 3): yaw, pitch, roll radians
    mm_params: np.ndarray   # float32 (N, 64): pose + openness in dims 0..3
    phonemes: np.ndarray    # int16 (N,)
    keypoints: np.ndarray   # float32 (N, K, 2) x/y pixel coordinates
    eye_boxes: np.ndarray   # int16 (N, 2, 4) per-eye (r0, r1, c0, c1)
    mouth_box: np.ndarray   # int16 (4,)
    emotion: str
    gender: str
    seed: int

    @property
    def frames(self) -> np.ndarray:
        """float32 frames in [0, 1] on the exact 1/255 grid."""
        return self.frames_u8.astype(np.float32) / np.float32(255.0)

    @property
    def num_frames(self) -> int:
        return self.frames_u8.shape[1]

    def reference_frame(self) -> np.ndarray:
        return self.frames[:, 0]


def _coverage(dist: np.ndarray, radius, aa: float = 0.6) -> np.ndarray:
    """Smooth 0..1 indicator of dist <= radius with an anti-aliased edge."""
    return 1.0 / (1.0 + np.exp(np.clip((dist - radius) / aa, -40.0, 40.0)))


def _smooth_signal(rng: np.random.Generator, n: int, components: int,
                   max_cycles: float) -> np.ndarray:
    """Zero-mean band-limited random signal of length n."""
    t = np.arange(n, dtype=np.float64) / n
    out = np.zeros(n, dtype=np.float64)
    for _ in range(components):
        freq = rng.uniform(0.5, max_cycles)
        phase = rng.uniform(0.0, 2 * math.pi)
        out += rng.uniform(0.4, 1.0) * np.sin(2 * math.pi * freq * t + phase)
    return out


def _make_envelope(rng: np.random.Generator, n: int) -> np.ndarray:
    sig = _smooth_signal(rng, n, components=3, max_cycles=3.0)
    lo, hi = sig.min(), sig.max()
    if hi - lo < 1e-9:
        return np.full(n, 0.5)
    return 0.05 + 0.90 * (sig - lo) / (hi - lo)


def _make_pose(rng: np.random.Generator, n: int) -> np.ndarray:
    traj = np.zeros((n, 3), dtype=np.float64)
    for axis, amp in enumerate((MAX_YAW, MAX_PITCH, MAX_ROLL)):
        sig = _smooth_signal(rng, n, components=2, max_cycles=2.0)
        peak = np.abs(sig).max()
        scale = rng.uniform(0.6, 1.0) * amp / max(peak, 1e-9)
        traj[:, axis] = sig * scale
    return traj


def _make_waveform(rng: np.random.Generator, env: np.ndarray, spf: int,
                   sr: int) -> np.ndarray:
    n = env.shape[0]
    samples = n * spf
    idx = np.arange(samples, dtype=np.float64)
    centers = (np.arange(n) + 0.5) * spf
    env_s = np.interp(idx, centers, env)
    f0 = rng.uniform(110.0, 220.0)
    phase = rng.uniform(0.0, 2 * math.pi)
    carrier = 0.75 * np.sin(2 * math.pi * f0 * idx / sr + phase)
    carrier += 0.25 * rng.standard_normal(samples)
    return (env_s * carrier).astype(np.float32)


def _phonemes_from_env(env: np.ndarray, table: dict[str, int]) -> np.ndarray:
    """Openness-quantized vowel labels; index 0 (silence) below threshold."""
    ladder = np.array([table[s] for s in _VOWEL_LADDER], dtype=np.int16)
    bins = np.minimum((env * len(ladder)).astype(int), len(ladder) - 1)
    out = ladder[bins]
    out[env < 0.05] = table["SIL"]
    return out.astype(np.int16)


def render_frames(geom: FaceGeometry, env: np.ndarray, pose: np.ndarray,
                  emotion: str, gender: str,
                  identity_rng: np.random.Generator | None = None) -> np.ndarray:
    """Render (3, N, H, W) float64 frames in [0, 1] from analytic geometry."""
    n = env.shape[0]
    size = geom.size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    ys = ys[None] + 0.0  # (1, H, W), broadcast over frames
    xs = xs[None] + 0.0

    bg, skin = emotion_colors(emotion)
    rx, ry = geom.face_rx, geom.face_ry
    rx *= 1.02 if gender == "man" else 0.98
    texture = np.zeros((size, size))
    if identity_rng is not None:
        skin = skin * (1.0 + identity_rng.uniform(-0.06, 0.06))
        rx *= 1.0 + identity_rng.uniform(-0.03, 0.03)
        ry *= 1.0 + identity_rng.uniform(-0.03, 0.03)
        gy, gx = np.mgrid[0:size, 0:size].astype(np.float64) / size
        for _ in range(2):
            fy, fx = identity_rng.uniform(1.0, 3.0, size=2)
            py, px = identity_rng.uniform(0.0, 2 * math.pi, size=2)
            texture += identity_rng.uniform(0.01, 0.03) * np.cos(
                2 * math.pi * (fy * gy + px) ) * np.cos(2 * math.pi * (fx * gx + py))
        # keep the mouth measurement zone texture-free so openness stays an
        # exact function of the envelope
        mb = geom.mouth_box
        texture[max(mb[0] - 1, 0):mb[1] + 1, max(mb[2] - 1, 0):mb[3] + 1] = 0.0

    yaw, pitch, roll = pose[:, 0], pose[:, 1], pose[:, 2]
    col = lambda v: v[:, None, None, None]  # (3,) -> (3, 1, 1, 1) broadcast

    # face ellipse over tinted background
    d_face = np.sqrt(((xs - geom.cx) / rx) ** 2 + ((ys - geom.cy) / ry) ** 2)
    cov_face = _coverage(d_face, 1.0, aa=0.04)[None]  # (1, N?, H, W) via xs
    img = col(bg) * (1.0 - cov_face) + (col(skin) + texture[None, None]) * cov_face

    # dark upper-face features: eyes (pose + roll), nose (pose)
    (lx, ly), (rx_e, ry_e) = geom.eye_centers(yaw, pitch, roll)
    nx, ny = geom.nose_center(yaw, pitch)
    per = lambda v: np.asarray(v)[:, None, None]  # (N,) -> (N, 1, 1)
    cov_dark = np.zeros((n, size, size))
    for cx_f, cy_f, r in ((lx, ly, geom.eye_r), (rx_e, ry_e, geom.eye_r),
                          (nx, ny, geom.nose_r)):
        d = np.sqrt((xs - per(cx_f)) ** 2 + (ys - per(cy_f)) ** 2)
        cov_dark = np.maximum(cov_dark, _coverage(d, r, aa=0.5))
    img = img * (1.0 - cov_dark[None]) + col(EYE_COLOR) * cov_dark[None]

    # bright mouth, half-height linear in the envelope; anti-aliasing in
    # pixel units so the rendered edge width is openness-independent
    m_ry = per(geom.mouth_ry(env))
    d_mouth = np.sqrt(((xs - geom.cx) / geom.mouth_rx) ** 2
                      + ((ys - geom.mouth_y) / m_ry) ** 2)
    cov_mouth = _coverage(d_mouth * m_ry, m_ry, aa=0.45)
    img = img * (1.0 - cov_mouth[None]) + col(MOUTH_COLOR) * cov_mouth[None]

    return np.clip(img, 0.0, 1.0)


def quantize_frames(img: np.ndarray) -> np.ndarray:
    return np.round(img * 255.0).astype(np.uint8)


def generate_clip(seed: int, cfg: TrainConfig, *, phoneme_table: dict[str, int],
                  env: np.ndarray | None = None,
                  pose: np.ndarray | None = None,
                  emotion: str | None = None,
                  gender: str | None = None) -> SyntheticClip:
    """Deterministic clip from a seed; overrides pin individual signals."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    n = cfg.pixel_frames
    geom = FaceGeometry(cfg.pixel_size)

    auto_env = _make_envelope(rng, n)
    auto_pose = _make_pose(rng, n)
    auto_emotion = EMOTIONS[int(rng.integers(len(EMOTIONS)))]
    auto_gender = GENDERS[int(rng.integers(len(GENDERS)))]
    wave_rng = np.random.default_rng(np.random.PCG64(seed + 1_000_003))
    identity_rng = np.random.default_rng(np.random.PCG64(seed + 2_000_003))

    env = auto_env if env is None else np.asarray(env, dtype=np.float64)
    pose = auto_pose if pose is None else np.asarray(pose, dtype=np.float64)
    emotion = auto_emotion if emotion is None else emotion
    gender = auto_gender if gender is None else gender
    if emotion not in EMOTIONS:
        raise FormatError(f"unknown emotion {emotion!r}")
    if gender not in GENDERS:
        raise FormatError(f"unknown gender {gender!r}")
    if env.shape != (n,) or pose.shape != (n, 3):
        raise ShapeError("envelope/pose overrides must match the frame count")

    img = render_frames(geom, env, pose, emotion, gender, identity_rng)
    frames_u8 = quantize_frames(img)

    spf = cfg.sample_rate // cfg.fps
    waveform = _make_waveform(wave_rng, env, spf, cfg.sample_rate)

    mm = np.zeros((n, 64), dtype=np.float32)
    mm[:, 0] = pose[:, 0]
    mm[:, 1] = pose[:, 1]
    mm[:, 2] = pose[:, 2]
    mm[:, 3] = env

    kps = np.stack([geom.keypoints(*pose[i]) for i in range(n)])
    (lx, ly), (rx_e, ry_e) = geom.eye_centers(pose[:, 0], pose[:, 1], pose[:, 2])
    eye_boxes = np.stack(
        [np.stack([geom.eye_box(lx[i], ly[i]), geom.eye_box(rx_e[i], ry_e[i])])
         for i in range(n)]
    ).astype(np.int16)

    return SyntheticClip(
        frames_u8=frames_u8,
        waveform=waveform,
        audio_env=env.astype(np.float32),
        pose_traj=pose.astype(np.float32),
        mm_params=mm,
        phonemes=_phonemes_from_env(env, phoneme_table),
        keypoints=kps.astype(np.float32),
        eye_boxes=eye_boxes,
        mouth_box=geom.mouth_box,
        emotion=emotion,
        gender=gender,
        seed=seed,
    )


def eye_mask_latent(clip: SyntheticClip, frame: int, latent_size: int) -> np.ndarray:
    """Binary (1, h, w) latent-resolution eye mask for one pixel frame."""
    size = clip.frames_u8.shape[-1]
    scale = size // latent_size
    px = np.zeros((size, size), dtype=bool)
    for r0, r1, c0, c1 in clip.eye_boxes[frame]:
        px[max(r0, 0):min(r1, size), max(c0, 0):min(c1, size)] = True
    lat = px.reshape(latent_size, scale, latent_size, scale).any(axis=(1, 3))
    return lat[None].astype(np.float32)


# ---------------------------------------------------------------------------
# toy latent codec
# ---------------------------------------------------------------------------

def _dct_matrix(k: int) -> np.ndarray:
    j = np.arange(k, dtype=np.float64)
    mat = np.cos(math.pi * (j[None, :] + 0.5) * j[:, None] / k)
    mat *= math.sqrt(2.0 / k)
    mat[0] /= math.sqrt(2.0)
    return mat


def _haar4_matrix() -> np.ndarray:
    r2 = math.sqrt(2.0)
    return np.array(
        [
            [0.5, 0.5, 0.5, 0.5],
            [0.5, 0.5, -0.5, -0.5],
            [1 / r2, -1 / r2, 0.0, 0.0],
            [0.0, 0.0, 1 / r2, -1 / r2],
        ]
    )


class ToyCodec:
    """Fixed orthonormal video <-> latent transform.

    Spatially a blockwise DCT over ``spatial_factor`` x ``spatial_factor``
    tiles, temporally a Haar-style orthonormal transform over groups of 4
    frames. Linear, bias-free, exactly invertible, and differentiable, so
    gradients can flow from decoded pixels back to latents.
    """

    def __init__(self, spatial_factor: int = 4, temporal_factor: int = 4):
        if temporal_factor != 4:
            raise ShapeError("temporal factor is fixed at 4")
        self.spatial_factor = spatial_factor
        self.temporal_factor = temporal_factor
        self._dct = torch.from_numpy(_dct_matrix(spatial_factor))
        self._haar = torch.from_numpy(_haar4_matrix())

    def latent_channels(self, pixel_channels: int = 3) -> int:
        return pixel_channels * self.temporal_factor * self.spatial_factor**2

    def _mats(self, dtype, device):
        return self._dct.to(dtype=dtype, device=device), self._haar.to(dtype=dtype, device=device)

    def encode(self, video: torch.Tensor) -> torch.Tensor:
        """(..., 3, N, H, W) -> (..., c, n, h, w) with c = 3 * 4 * fs^2."""
        fs, ft = self.spatial_factor, self.temporal_factor
        if video.shape[-1] % fs or video.shape[-2] % fs or video.shape[-3] % ft:
            raise ShapeError(
                f"video dims {tuple(video.shape[-3:])} not divisible by "
                f"(temporal {ft}, spatial {fs})"
            )
        dct, haar = self._mats(video.dtype, video.device)
        lead = video.shape[:-4]
        ch, n_px, hh, ww = video.shape[-4:]
        v = video.reshape(-1, ch, n_px // ft, ft, hh // fs, fs, ww // fs, fs)
        v = torch.einsum("bctfhpwq,up,vq->bctfuvhw", v, dct, dct)
        v = torch.einsum("bctfuvhw,gf->bcguvthw", v, haar)
        c_lat = ch * ft * fs * fs
        out = v.reshape(-1, c_lat, n_px // ft, hh // fs, ww // fs)
        return out.reshape(*lead, c_lat, n_px // ft, hh // fs, ww // fs)

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        """Exact inverse of :meth:`encode`."""
        fs, ft = self.spatial_factor, self.temporal_factor
        lead = latent.shape[:-4]
        c_lat, n_lat, h, w = latent.shape[-4:]
        ch = c_lat // (ft * fs * fs)
        if ch * ft * fs * fs != c_lat:
            raise ShapeError(f"latent channel count {c_lat} incompatible with factors")
        dct, haar = self._mats(latent.dtype, latent.device)
        v = latent.reshape(-1, ch, ft, fs, fs, n_lat, h, w)
        v = torch.einsum("bcguvthw,gf->bctfuvhw", v, haar)
        v = torch.einsum("bctfuvhw,up,vq->bctfhpwq", v, dct, dct)
        out = v.reshape(-1, ch, n_lat * ft, h * fs, w * fs)
        return out.reshape(*lead, ch, n_lat * ft, h * fs, w * fs)

    def decode_window(self, latent_window: torch.Tensor) -> torch.Tensor:
        """Decode a contiguous latent-frame window (codec is time-local)."""
        return self.decode(latent_window)


def encode_clip(codec: ToyCodec, clip: SyntheticClip, dtype=torch.float32) -> torch.Tensor:
    video = torch.from_numpy(clip.frames).to(dtype)
    return codec.encode(video)


# ---------------------------------------------------------------------------
# dataset container
# ---------------------------------------------------------------------------

_ARRAY_ORDER = (
    ("frames_u8", np.uint8),
    ("waveform", np.float32),
    ("audio_env", np.float32),
    ("pose_traj", np.float32),
    ("mm_params", np.float32),
    ("phonemes", np.int16),
    ("keypoints", np.float32),
    ("eye_boxes", np.int16),
    ("mouth_box", np.int16),
)

_DTYPE_NAMES = {np.uint8: "uint8", np.float32: "float32", np.int16: "int16"}
_NAME_DTYPES = {"uint8": np.uint8, "float32": np.float32, "int16": np.int16}


def dataset_writer(clips: list[SyntheticClip], path: str | os.PathLike,
                   *, meta: dict | None = None, overwrite: bool = False) -> None:
    """Write clips into ``path``: manifest.txt + one binary blob per clip."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, "manifest.txt")
    if os.path.exists(manifest_path) and not overwrite:
        raise FormatError(f"refusing to overwrite existing dataset at {path}")
    os.makedirs(os.path.join(path, "clips"), exist_ok=True)

    lines = [f"{DATASET_FORMAT}\t{DATASET_VERSION}"]
    for key, value in sorted((meta or {}).items()):
        lines.append(f"meta\t{key}\t{value}")
    for idx, clip in enumerate(clips):
        rel = f"clips/{idx:06d}.bin"
        lines.append(
            f"clip\t{idx}\tseed={clip.seed}\temotion={clip.emotion}\t"
            f"gender={clip.gender}\tfile={rel}"
        )
        offset = 0
        payload = []
        for name, dtype in _ARRAY_ORDER:
            le = np.dtype(dtype).newbyteorder("<")
            arr = np.ascontiguousarray(getattr(clip, name), dtype=le)
            buf = arr.tobytes()
            shape = ",".join(str(s) for s in arr.shape)
            lines.append(
                f"array\t{idx}\t{name}\t{_DTYPE_NAMES[dtype]}\t{shape}\t{offset}\t{len(buf)}"
            )
            payload.append(buf)
            offset += len(buf)
        with open(os.path.join(path, rel), "wb") as fh:
            fh.write(b"".join(payload))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def dataset_reader(path: str | os.PathLike) -> tuple[list[SyntheticClip], dict]:
    """Read a dataset container back into clips, verifying the manifest."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise FormatError(f"no manifest.txt in {path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"empty manifest in {path}")
    head = lines[0].split("\t")
    if len(head) != 2 or head[0] != DATASET_FORMAT:
        raise FormatError(f"not a {DATASET_FORMAT} manifest: {lines[0]!r}")
    if int(head[1]) != DATASET_VERSION:
        raise FormatError(
            f"dataset version {head[1]} unsupported (expected {DATASET_VERSION})"
        )

    meta: dict = {}
    clip_meta: dict[int, dict] = {}
    arrays: dict[int, list[tuple]] = {}
    for ln in lines[1:]:
        parts = ln.split("\t")
        if parts[0] == "meta":
            meta[parts[1]] = parts[2]
        elif parts[0] == "clip":
            idx = int(parts[1])
            fields = dict(p.split("=", 1) for p in parts[2:])
            clip_meta[idx] = fields
        elif parts[0] == "array":
            idx = int(parts[1])
            name, dtype_name, shape_s, off_s, nbytes_s = parts[2:7]
            shape = tuple(int(s) for s in shape_s.split(","))
            arrays.setdefault(idx, []).append(
                (name, dtype_name, shape, int(off_s), int(nbytes_s))
            )
        else:
            raise FormatError(f"unknown manifest record {parts[0]!r}")

    clips = []
    for idx in sorted(clip_meta):
        fields = clip_meta[idx]
        blob_path = os.path.join(path, fields["file"])
        if not os.path.exists(blob_path):
            raise IntegrityError(f"clip payload missing: {fields['file']}")
        blob = open(blob_path, "rb").read()
        data = {}
        for name, dtype_name, shape, offset, nbytes in arrays.get(idx, []):
            if dtype_name not in _NAME_DTYPES:
                raise FormatError(f"unknown dtype {dtype_name!r} in manifest")
            dtype = np.dtype(_NAME_DTYPES[dtype_name]).newbyteorder("<")
            expected = int(np.prod(shape)) * dtype.itemsize
            if expected != nbytes:
                raise IntegrityError(
                    f"array {name} of clip {idx}: manifest shape {shape} needs "
                    f"{expected} bytes but declares {nbytes} (offset {offset})"
                )
            if offset + nbytes > len(blob):
                raise IntegrityError(
                    f"array {name} of clip {idx}: payload truncated at byte "
                    f"offset {len(blob)} (needs {offset + nbytes})"
                )
            data[name] = np.frombuffer(
                blob, dtype=dtype, count=int(np.prod(shape)), offset=offset
            ).reshape(shape).astype(_NAME_DTYPES[dtype_name], copy=True)
        missing = {name for name, _ in _ARRAY_ORDER} - set(data)
        if missing:
            raise IntegrityError(f"clip {idx} missing arrays: {sorted(missing)}")
        clips.append(
            SyntheticClip(
                emotion=fields["emotion"],
                gender=fields["gender"],
                seed=int(fields["seed"]),
                **data,
            )
        )
    return clips, meta
