"""Ten-feature voice profiles and style clustering.

Per-utterance features: a loudness triplet (mean intensity, total
energy, max frame intensity), pitch statistics over voiced frames
(median and range), frame-to-frame jitter and shimmer, the spectral
slope of the log-magnitude spectrum over 50-5000 Hz in dB/octave,
syllable rate from intensity peaks, and pause rate from silent gaps.

Profiles are robust-scaled per feature ((x - median) / IQR, type-7
quartiles) and clustered with Lloyd's k-means under k-means++ seeding;
model quality is the mean per-point silhouette.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .dsp import HOP, N_FFT, AudioBuffer, track_f0

log = logging.getLogger(__name__)

_DB_FLOOR_EPS = 1e-10  # puts true silence at -100 dBFS
_SYLLABLE_GATE_DB = -40.0
_SYLLABLE_PROMINENCE_DB = 2.0
_PAUSE_GATE_DB = -35.0
_PAUSE_MIN_S = 0.150
_SLOPE_BAND_HZ = (50.0, 5000.0)
_MIN_DURATION_S = 0.5


class FeaturesError(ValueError):
    """Bad audio, malformed matrix, or impossible clustering request."""


FEATURE_NAMES = (
    "mean_intensity_db",
    "energy",
    "max_intensity_db",
    "median_pitch_hz",
    "pitch_range_hz",
    "shimmer_local",
    "jitter_local",
    "spectral_slope_db_per_octave",
    "speech_rate_syll_per_s",
    "pause_rate",
)


@dataclass(frozen=True)
class FeatureVector:
    """One utterance's profile; pitch fields are None when unvoiced."""

    mean_intensity_db: float
    energy: float
    max_intensity_db: float
    median_pitch_hz: float | None
    pitch_range_hz: float | None
    shimmer_local: float | None
    jitter_local: float | None
    spectral_slope_db_per_octave: float
    speech_rate_syll_per_s: float
    pause_rate: float

    def as_row(self) -> np.ndarray:
        vals = [getattr(self, name) for name in FEATURE_NAMES]
        return np.array(
            [np.nan if v is None else float(v) for v in vals]
        )

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "FeatureVector":
        if len(row) != len(FEATURE_NAMES):
            raise FeaturesError(
                f"need {len(FEATURE_NAMES)} values, got {len(row)}"
            )
        kwargs = {}
        for name, v in zip(FEATURE_NAMES, row):
            v = float(v)
            kwargs[name] = None if np.isnan(v) else v
        return cls(**kwargs)


# ------------------------------------------------------------ extraction

def _frame_intensities_db(x: np.ndarray) -> np.ndarray:
    pad = np.concatenate([x, np.zeros(N_FFT)])
    n_frames = max(1, 1 + (len(x) - 1) // HOP)
    frames = np.lib.stride_tricks.sliding_window_view(pad, N_FFT)[::HOP]
    frames = frames[:n_frames]
    return 10.0 * np.log10(np.mean(frames**2, axis=1) + _DB_FLOOR_EPS)


def _spectral_slope_db_per_octave(x: np.ndarray, sr: int) -> float:
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), 1.0 / sr)
    lo, hi = _SLOPE_BAND_HZ
    band = (freqs >= lo) & (freqs <= hi)
    if np.count_nonzero(band) < 2:
        return 0.0
    log_f = np.log2(freqs[band])
    log_mag = 20.0 * np.log10(spec[band] + 1e-12)
    slope, _ = np.polyfit(log_f, log_mag, 1)
    return float(slope)


def _relative_variation(values: np.ndarray, ok: np.ndarray) -> float | None:
    """mean |delta| / mean value over consecutive pairs where ok."""
    pair_ok = ok[:-1] & ok[1:]
    if not np.any(pair_ok):
        return None
    diffs = np.abs(np.diff(values))[pair_ok]
    level = np.mean(
        0.5 * (values[:-1] + values[1:])[pair_ok]
    )
    if level <= 0:
        return None
    return float(np.mean(diffs) / level)


def extract_features(audio: AudioBuffer) -> FeatureVector:
    """The ten-feature profile of one utterance (minimum 0.5 s)."""
    x = audio.samples
    sr = audio.sample_rate
    if len(x) < _MIN_DURATION_S * sr:
        raise FeaturesError(
            f"audio too short: {len(x) / sr:.3f} s < {_MIN_DURATION_S} s"
        )
    duration = len(x) / sr

    intensities = _frame_intensities_db(x)
    mean_intensity = float(
        10.0 * np.log10(np.mean(x**2) + _DB_FLOOR_EPS)
    )
    energy = float(np.sum(x**2))
    max_intensity = float(np.max(intensities))

    track = track_f0(audio)
    f0s = np.array(
        [f if f is not None else np.nan for _, f in track.frames]
    )
    voiced = ~np.isnan(f0s)
    if np.any(voiced):
        vf = f0s[voiced]
        median_pitch = float(np.median(vf))
        pitch_range = float(np.max(vf) - np.min(vf))
        periods = np.where(voiced, 1.0 / np.where(voiced, f0s, 1.0), 0.0)
        jitter = _relative_variation(periods, voiced)
        # per-frame peak amplitude stands in for the period amplitude
        pad = np.concatenate([x, np.zeros(N_FFT)])
        frames = np.lib.stride_tricks.sliding_window_view(pad, N_FFT)[::HOP]
        amps = np.max(np.abs(frames[: len(f0s)]), axis=1)
        shimmer = _relative_variation(amps, voiced)
    else:
        median_pitch = pitch_range = jitter = shimmer = None

    peaks, _ = find_peaks(
        intensities,
        height=_SYLLABLE_GATE_DB,
        prominence=_SYLLABLE_PROMINENCE_DB,
    )
    speech_rate = len(peaks) / duration

    silent = intensities < _PAUSE_GATE_DB
    min_frames = int(np.ceil(_PAUSE_MIN_S * sr / HOP))
    pauses = 0
    run = 0
    for s in np.concatenate([silent, [False]]):
        if s:
            run += 1
        else:
            if run >= min_frames:
                pauses += 1
            run = 0
    pause_rate = pauses / duration

    return FeatureVector(
        mean_intensity_db=mean_intensity,
        energy=energy,
        max_intensity_db=max_intensity,
        median_pitch_hz=median_pitch,
        pitch_range_hz=pitch_range,
        shimmer_local=shimmer,
        jitter_local=jitter,
        spectral_slope_db_per_octave=_spectral_slope_db_per_octave(x, sr),
        speech_rate_syll_per_s=speech_rate,
        pause_rate=pause_rate,
    )


# --------------------------------------------------------------- scaling

@dataclass(frozen=True)
class ScalerParams:
    medians: tuple[float, ...]
    iqrs: tuple[float, ...]
    degenerate: tuple[bool, ...]  # IQR == 0: centered only

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        iqrs = np.where(self.degenerate, 1.0, np.array(self.iqrs))
        return scaled * iqrs + np.array(self.medians)


def robust_scale(matrix) -> tuple[np.ndarray, ScalerParams]:
    """(x - median) / IQR per feature, type-7 (linear) quartiles.

    A zero-IQR feature is centered but not divided, and flagged.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise FeaturesError("need a 2-D matrix with at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise FeaturesError("non-finite feature values")
    medians = np.median(X, axis=0)
    q1 = np.percentile(X, 25, axis=0)
    q3 = np.percentile(X, 75, axis=0)
    iqrs = q3 - q1
    degenerate = iqrs == 0
    if np.any(degenerate):
        log.warning(
            "degenerate features (IQR=0) at columns %s",
            np.flatnonzero(degenerate).tolist(),
        )
    divisor = np.where(degenerate, 1.0, iqrs)
    scaled = (X - medians) / divisor
    params = ScalerParams(
        tuple(medians.tolist()),
        tuple(iqrs.tolist()),
        tuple(bool(d) for d in degenerate),
    )
    return scaled, params


# ------------------------------------------------------------ clustering

@dataclass(frozen=True)
class ClusterModel:
    k: int
    centers: np.ndarray
    silhouette: float
    inertia_history: tuple[float, ...]
    scaler: ScalerParams | None = None

    def __post_init__(self) -> None:
        if self.k < 2:
            raise FeaturesError("k must be >= 2")
        if not -1.0 <= self.silhouette <= 1.0:
            raise FeaturesError("silhouette out of [-1, 1]")


def _assign(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _plus_plus_seed(
    X: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            ((X[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(
                axis=2
            ),
            axis=1,
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=d2 / total)])
    return np.array(centers, dtype=float)


def kmeans(
    matrix, k: int, seed: int = 0, max_iter: int = 300
) -> ClusterModel:
    """Lloyd's iterations from a k-means++ start; deterministic per seed.

    An empty cluster is reseeded from the point farthest from its
    current center, so every iteration keeps k live clusters.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2:
        raise FeaturesError("need a 2-D matrix")
    if k < 2:
        raise FeaturesError("k must be >= 2")
    if k > len(X):
        raise FeaturesError(f"k={k} exceeds {len(X)} points")

    rng = np.random.default_rng(seed)
    centers = _plus_plus_seed(X, k, rng)
    labels = _assign(X, centers)
    history: list[float] = []
    for _ in range(max_iter):
        # empty-cluster repair before the update step
        for j in range(k):
            if not np.any(labels == j):
                dists = ((X - centers[labels]) ** 2).sum(axis=1)
                far = int(np.argmax(dists))
                centers[j] = X[far]
                labels[far] = j
        for j in range(k):
            centers[j] = X[labels == j].mean(axis=0)
        new_labels = _assign(X, centers)
        history.append(
            float(((X - centers[new_labels]) ** 2).sum())
        )
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    model = ClusterModel(
        k=k,
        centers=centers,
        silhouette=0.0,
        inertia_history=tuple(history),
    )
    return ClusterModel(
        k=k,
        centers=centers,
        silhouette=silhouette(model, X),
        inertia_history=tuple(history),
    )


def silhouette(model: ClusterModel, matrix) -> float:
    """Mean per-point silhouette of the model's assignment.

    Points in singleton clusters score 0, so k == n gives exactly 0.
    """
    X = np.asarray(matrix, dtype=float)
    labels = _assign(X, model.centers)
    n = len(X)
    dists = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = np.count_nonzero(own)
        if n_own <= 1:
            continue  # singleton: defined as 0
        a = dists[i, own].sum() / (n_own - 1)
        b = np.inf
        for j in range(model.k):
            if j == labels[i]:
                continue
            members = labels == j
            if np.any(members):
                b = min(b, dists[i, members].mean())
        if not np.isfinite(b):
            continue
        scores[i] = (b - a) / max(a, b)
    return float(np.mean(scores))


def silhouette_sweep(
    matrix, ks: Iterable[int], seed: int = 0
) -> list[tuple[int, float]]:
    """Silhouette for each candidate k (the model-selection curve)."""
    return [
        (k, kmeans(matrix, k, seed=seed).silhouette) for k in ks
    ]


def assign_clusters(model: ClusterModel, matrix) -> np.ndarray:
    return _assign(np.asarray(matrix, dtype=float), model.centers)


def cluster_ambiance_table(
    assignments: Sequence[int], ambiance_labels: Sequence[str]
) -> dict[str, dict[int, float]]:
    """Per-ambiance distribution over clusters; each row sums to 1."""
    if len(assignments) != len(ambiance_labels):
        raise FeaturesError("assignments and labels differ in length")
    clusters = sorted(set(int(a) for a in assignments))
    table: dict[str, dict[int, float]] = {}
    for amb in dict.fromkeys(ambiance_labels):  # first-seen order
        rows = [
            int(a) for a, lab in zip(assignments, ambiance_labels)
            if lab == amb
        ]
        table[amb] = {
            c: rows.count(c) / len(rows) for c in clusters
        }
    return table


# ----------------------------------------------------------------- CSV

def write_features_csv(
    path, rows: Iterable[tuple[str, str, FeatureVector]]
) -> None:
    """One row per utterance: utterance_id, ambiance, then the features."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "ambiance", *FEATURE_NAMES])
        for utt_id, ambiance, vec in rows:
            vals = [
                "" if v is None else repr(float(v))
                for v in (getattr(vec, n) for n in FEATURE_NAMES)
            ]
            writer.writerow([utt_id, ambiance, *vals])


def read_features_csv(path) -> list[tuple[str, str, FeatureVector]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["utterance_id", "ambiance", *FEATURE_NAMES]
        if reader.fieldnames != expected:
            raise FeaturesError(
                f"bad features CSV header: {reader.fieldnames}"
            )
        for row in reader:
            vals = [
                np.nan if row[n] == "" else float(row[n])
                for n in FEATURE_NAMES
            ]
            out.append(
                (
                    row["utterance_id"],
                    row["ambiance"],
                    FeatureVector.from_row(vals),
                )
            )
    return out
