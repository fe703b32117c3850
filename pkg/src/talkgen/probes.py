"""Deterministic analytic evaluation probes.

No learned metric models: lip sync is measured by correlating the bright
mouth mass with the audio envelope, head pose by the darkness centroid of
the upper-face feature group (calibrated against a canonical render), and
emotion by the hue of the mean frame color.
"""
from __future__ import annotations

import colorsys
import functools
import math

import numpy as np

from .config import EMOTIONS
from .synthdata import FaceGeometry, render_frames

BRIGHT_THRESHOLD = 0.80   # mouth interior sits well above skin tones
DARK_THRESHOLD = 0.25     # eyes/nose sit well below background tones


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.std() < 1e-12 or b.std() < 1e-12:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def _gray(frames: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(frames, dtype=np.float64), 0.0, 1.0).mean(axis=0)


def mouth_openness_signal(frames: np.ndarray, mouth_box: np.ndarray) -> np.ndarray:
    """Per-frame bright mass inside the mouth box; affine in open area."""
    r0, r1, c0, c1 = (int(v) for v in mouth_box)
    crop = _gray(frames)[:, r0:r1, c0:c1]
    return np.maximum(crop - BRIGHT_THRESHOLD, 0.0).sum(axis=(1, 2))


def mouth_height_px(frames: np.ndarray, mouth_box: np.ndarray) -> np.ndarray:
    """Per-frame pixel height of the bright mouth interior.

    Integrates fractional brightness coverage down the box's center column,
    so the estimate is subpixel-accurate against anti-aliased edges.
    """
    r0, r1, c0, c1 = (int(v) for v in mouth_box)
    gray = _gray(frames)
    center = (c0 + c1) // 2
    column = gray[:, r0:r1, center - 1:center + 1].mean(axis=2)
    skin = np.median(gray[:, r1 - 1, c0:c1], axis=1, keepdims=True)
    cov = np.clip((column - skin) / (0.93 - skin), 0.0, 1.0)
    return cov.sum(axis=1)


def lip_sync_corr(frames: np.ndarray, audio_env: np.ndarray,
                  mouth_box: np.ndarray) -> float:
    return pearson(mouth_openness_signal(frames, mouth_box), audio_env)


def envelope_from_waveform(waveform: np.ndarray, n_frames: int,
                           samples_per_frame: int) -> np.ndarray:
    """Per-frame RMS normalized to [0, 1]; zero for silent audio."""
    wav = np.asarray(waveform, dtype=np.float64).reshape(-1)
    need = n_frames * samples_per_frame
    if wav.shape[0] < need:
        wav = np.pad(wav, (0, need - wav.shape[0]))
    frames = wav[:need].reshape(n_frames, samples_per_frame)
    rms = np.sqrt((frames**2).mean(axis=1))
    peak = rms.max()
    if peak < 1e-8:
        return np.zeros(n_frames)
    return rms / peak


# ---------------------------------------------------------------------------
# pose probe
# ---------------------------------------------------------------------------

def _darkness_centroids(frames: np.ndarray, geom: FaceGeometry):
    """Per-frame (mx, my) of the dark upper-face feature mass."""
    r0, r1 = geom.probe_rows
    gray = _gray(frames)[:, r0:r1, :]
    w = np.maximum(DARK_THRESHOLD - gray, 0.0)
    ys, xs = np.mgrid[r0:r1, 0:gray.shape[2]].astype(np.float64)
    mass = np.maximum(w.sum(axis=(1, 2)), 1e-9)
    mx = (w * xs).sum(axis=(1, 2)) / mass
    my = (w * ys).sum(axis=(1, 2)) / mass
    return mx, my


def _eye_tilt(frames: np.ndarray, geom: FaceGeometry, mx: np.ndarray,
              pitch: np.ndarray) -> np.ndarray:
    """Per-frame y(left eye) - y(right eye), from an eye-row band split
    left/right of the group center; the nose lies below the band."""
    gray = _gray(frames)
    size = gray.shape[-1]
    band = int(round(0.11 * size))
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros(gray.shape[0])
    for i in range(gray.shape[0]):
        cy = geom.eye_y + geom.pitch_gain * pitch[i]
        r0 = max(int(round(cy - band)), 0)
        r1 = min(int(round(cy + band)) + 1, size)
        w = np.maximum(DARK_THRESHOLD - gray[i, r0:r1, :], 0.0)
        yy, xx = ys[r0:r1], xs[r0:r1]
        wl = np.where(xx < mx[i], w, 0.0)
        wr = np.where(xx >= mx[i], w, 0.0)
        ml, mr = max(wl.sum(), 1e-9), max(wr.sum(), 1e-9)
        out[i] = (wl * yy).sum() / ml - (wr * yy).sum() / mr
    return out


@functools.lru_cache(maxsize=8)
def _pose_calibration(size: int):
    """Neutral-pose probe readings from a canonical render."""
    geom = FaceGeometry(size)
    env = np.full(4, 0.3)
    zero = np.zeros((4, 3))
    neutral = render_frames(geom, env, zero, "neutral", "man")
    mx0, my0 = (v[0] for v in _darkness_centroids(neutral, geom))
    dy0 = _eye_tilt(neutral, geom, np.full(4, mx0), np.zeros(4))[0]
    return float(mx0), float(my0), float(dy0)


def estimate_pose(frames: np.ndarray, geom: FaceGeometry) -> np.ndarray:
    """(3, N, H, W) frames -> (N, 3) estimated yaw/pitch/roll radians."""
    mx0, my0, dy0 = _pose_calibration(geom.size)
    mx, my = _darkness_centroids(frames, geom)
    yaw = (mx - mx0) / geom.yaw_gain
    pitch = (my - my0) / geom.pitch_gain
    dy = _eye_tilt(frames, geom, mx, pitch) - dy0
    roll = np.arcsin(np.clip(dy / (2.0 * geom.eye_dx), -0.95, 0.95))
    return np.stack([yaw, pitch, roll], axis=1)


def pose_mse(est: np.ndarray, truth: np.ndarray) -> float:
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    return float(((est - truth) ** 2).mean())


# ---------------------------------------------------------------------------
# emotion probe
# ---------------------------------------------------------------------------

def classify_emotion(frames: np.ndarray) -> str:
    """Nearest emotion hue to the clip's mean color."""
    mean_rgb = np.clip(np.asarray(frames, dtype=np.float64), 0.0, 1.0).mean(axis=(1, 2, 3))
    h, s, _ = colorsys.rgb_to_hsv(*mean_rgb)
    best, best_d = EMOTIONS[0], math.inf
    for k, emotion in enumerate(EMOTIONS):
        target = k / len(EMOTIONS)
        d = abs(h - target)
        d = min(d, 1.0 - d)
        if d < best_d:
            best, best_d = emotion, d
    return best
