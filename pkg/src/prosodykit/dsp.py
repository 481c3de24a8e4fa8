"""Prosody transforms on mono audio buffers.

The engine is a phase vocoder (1024-sample Hann analysis windows, 256
hop, weighted overlap-add resynthesis) with identity phase locking:
synthesis phases accumulate only at spectral peaks and neighboring bins
ride along, which keeps harmonics coherent under large stretches.

Rates come in as breakpoint profiles over *input* time: time-stretch
walks its analysis pointer at 1/ratio(t) frames per synthesis frame,
and pitch-shift is the standard composition — stretch by the pitch
ratio, then resample back onto the original timeline so duration is
exactly preserved.

f0 tracking is normalized autocorrelation (same frame/hop), lag-limited
to 50..600 Hz, with a 0.45 voicing threshold and parabolic peak
refinement. All transforms are deterministic.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .stimgen import BreakpointProfile, ProfileKind

log = logging.getLogger(__name__)

SAMPLE_RATE = 22050
N_FFT = 1024
HOP = 256
F0_MIN_HZ = 50.0
F0_MAX_HZ = 600.0
VOICING_THRESHOLD = 0.45


class DspError(ValueError):
    """Malformed audio, profile, or WAV data."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono float samples in [-1, 1]; construction clips tiny overshoot."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise DspError(f"audio must be mono 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise DspError("empty audio")
        if not np.all(np.isfinite(samples)):
            raise DspError("non-finite samples")
        if self.sample_rate <= 0:
            raise DspError("sample_rate must be positive")
        object.__setattr__(self, "samples", np.clip(samples, -1.0, 1.0))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame (time_s, f0_hz) pairs; f0 is None on unvoiced frames.

    Frame times are frame *starts* at multiples of the hop.
    """

    frames: tuple[tuple[float, float | None], ...]
    frame_hop_s: float

    def __post_init__(self) -> None:
        times = [t for t, _ in self.frames]
        if any(b >= a for b, a in zip(times, times[1:])):
            raise DspError("frame times must increase")
        for _, f0 in self.frames:
            if f0 is not None and not (
                F0_MIN_HZ <= f0 <= F0_MAX_HZ
            ):
                raise DspError(f"voiced f0 {f0} outside tracker range")

    def voiced(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = [(t, f) for t, f in self.frames if f is not None]
        if not pairs:
            return np.array([]), np.array([])
        t, f = zip(*pairs)
        return np.array(t), np.array(f)


# ----------------------------------------------------------- STFT core

def _window() -> np.ndarray:
    # periodic Hann: exact COLA at 75% overlap
    n = np.arange(N_FFT)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / N_FFT)


def _stft(x: np.ndarray) -> np.ndarray:
    """Complex frames (n_frames, N_FFT//2+1) at integer hops."""
    w = _window()
    x = np.concatenate([x, np.zeros(N_FFT)])
    n_frames = 1 + (len(x) - N_FFT) // HOP
    frames = np.lib.stride_tricks.sliding_window_view(x, N_FFT)[::HOP]
    frames = frames[:n_frames]
    return np.fft.rfft(frames * w, axis=1)


def _istft(spectra: np.ndarray, out_len: int) -> np.ndarray:
    """Weighted overlap-add; normalizes by the summed squared window."""
    w = _window()
    total = (len(spectra) - 1) * HOP + N_FFT
    y = np.zeros(total)
    norm = np.zeros(total)
    frames = np.fft.irfft(spectra, n=N_FFT, axis=1)
    for k in range(len(spectra)):
        start = k * HOP
        y[start:start + N_FFT] += frames[k] * w
        norm[start:start + N_FFT] += w * w
    good = norm > 1e-8
    y[good] /= norm[good]
    if out_len <= total:
        return y[:out_len]
    return np.concatenate([y, np.zeros(out_len - total)])


def _princarg(phi: np.ndarray) -> np.ndarray:
    return (phi + np.pi) % (2.0 * np.pi) - np.pi


def _peak_of_bin(mag: np.ndarray) -> np.ndarray:
    """Index of the controlling spectral peak for every bin."""
    interior = (mag[1:-1] >= mag[:-2]) & (mag[1:-1] > mag[2:])
    peaks = np.flatnonzero(interior) + 1
    if len(peaks) == 0:
        return np.arange(len(mag))
    # each bin belongs to the peak on its side of the magnitude valley
    cuts = (peaks[:-1] + peaks[1:]) // 2 + 1
    return peaks[np.searchsorted(cuts, np.arange(len(mag)))]


def _profile_integral(profile: BreakpointProfile, duration_s: float) -> float:
    """Integral of the piecewise-linear profile over [0, duration_s]."""
    ts = list(profile.times)
    vs = list(profile.values)
    if duration_s > ts[-1]:
        ts.append(duration_s)
        vs.append(vs[-1])
    total = 0.0
    for (t0, v0), (t1, v1) in zip(zip(ts, vs), zip(ts[1:], vs[1:])):
        if t0 >= duration_s:
            break
        t_hi = min(t1, duration_s)
        # value at t_hi by linearity
        v_hi = v0 + (v1 - v0) * (t_hi - t0) / (t1 - t0)
        total += 0.5 * (v0 + v_hi) * (t_hi - t0)
    return total


def _rate_at_samples(profile: BreakpointProfile, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    return np.interp(t, profile.times, profile.values)


# ----------------------------------------------------------- transforms

def time_stretch(
    audio: AudioBuffer, stretch_profile: BreakpointProfile
) -> AudioBuffer:
    """Time-varying phase-vocoder stretch; pitch is untouched.

    A local ratio s means that span of input plays s times slower, so
    the output duration is the integral of the ratio over input time
    (the result is trimmed/padded to exactly that length).
    """
    if stretch_profile.kind is not ProfileKind.STRETCH_RATIO:
        raise DspError(
            f"need a StretchRatio profile, got {stretch_profile.kind.value}"
        )
    x = audio.samples
    sr = audio.sample_rate
    target_len = max(1, round(_profile_integral(
        stretch_profile, len(x) / sr) * sr))

    spectra = _stft(x)
    n_frames = len(spectra)
    if n_frames == 1:
        y = _istft(spectra, target_len)
        return AudioBuffer(y, sr)

    mags = np.abs(spectra)
    phases = np.angle(spectra)
    omega = 2.0 * np.pi * np.arange(N_FFT // 2 + 1) * HOP / N_FFT

    out_spectra = []
    psi = phases[0].copy()
    pos = 0.0  # fractional analysis frame index
    while pos <= n_frames - 2:
        m = int(pos)
        frac = pos - m
        mag = (1.0 - frac) * mags[m] + frac * mags[m + 1]

        peaks = _peak_of_bin(mag)
        dphi = omega + _princarg(phases[m + 1] - phases[m] - omega)
        psi_peak = psi + dphi
        # identity locking: non-peak bins keep their offset to the peak
        psi = psi_peak[peaks] + (phases[m + 1] - phases[m + 1][peaks])
        out_spectra.append(mag * np.exp(1j * psi))

        t_in = pos * HOP / sr
        ratio = max(1e-6, float(np.interp(
            t_in, stretch_profile.times, stretch_profile.values)))
        pos += 1.0 / ratio

    if not out_spectra:
        out_spectra = [spectra[0]]
    y = _istft(np.array(out_spectra), target_len)
    return AudioBuffer(y, sr)


def pitch_shift(
    audio: AudioBuffer, pitch_profile: BreakpointProfile
) -> AudioBuffer:
    """Shift pitch by cents(t) without changing duration.

    Stretch by the pitch ratio, then resample back onto the original
    sample grid; the output length equals the input length exactly.
    """
    if pitch_profile.kind is not ProfileKind.PITCH_CENTS:
        raise DspError(
            f"need a PitchCents profile, got {pitch_profile.kind.value}"
        )
    sr = audio.sample_rate
    ratio_profile = BreakpointProfile(
        ProfileKind.STRETCH_RATIO,
        tuple(
            (t, float(2.0 ** (c / 1200.0)))
            for t, c in pitch_profile.breakpoints
        ),
    )
    stretched = time_stretch(audio, ratio_profile)

    n = len(audio)
    rate = _rate_at_samples(ratio_profile, n, sr)
    # cumulative stretched-time position for each original sample
    tau = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]))])
    y = np.interp(tau, np.arange(len(stretched)), stretched.samples)
    return AudioBuffer(y, sr)


def constant_profile(kind: ProfileKind, value: float) -> BreakpointProfile:
    return BreakpointProfile(kind, ((0.0, value),))


def track_f0(audio: AudioBuffer) -> PitchTrack:
    """Normalized-autocorrelation pitch track.

    Frames of 1024 samples every 256; a frame is voiced when its best
    normalized correlation in the 50..600 Hz lag range reaches 0.45.
    Among near-tied peaks the shortest lag wins, which keeps harmonic
    stacks on the fundamental. Peak lags are refined parabolically.
    """
    x = audio.samples
    sr = audio.sample_rate
    min_lag = max(2, int(sr / F0_MAX_HZ))
    max_lag = min(N_FFT // 2, int(np.ceil(sr / F0_MIN_HZ)))
    win = N_FFT - max_lag

    frames: list[tuple[float, float | None]] = []
    pos = 0
    while pos + N_FFT <= len(x) or pos == 0:
        frame = x[pos:pos + N_FFT]
        if len(frame) < N_FFT:
            frame = np.concatenate([frame, np.zeros(N_FFT - len(frame))])
        t = pos / sr
        f0 = _frame_f0(frame, sr, min_lag, max_lag, win)
        frames.append((t, f0))
        pos += HOP
    return PitchTrack(tuple(frames), HOP / sr)


def _frame_f0(
    frame: np.ndarray, sr: int, min_lag: int, max_lag: int, win: int
) -> float | None:
    base = frame[:win]
    if np.sqrt(np.mean(base**2)) < 1e-4:
        return None
    base_energy = float(np.dot(base, base))
    lags = np.arange(min_lag, max_lag + 1)
    # NCC over all lags, vectorized via a sliding view
    shifted = np.lib.stride_tricks.sliding_window_view(frame, win)
    cands = shifted[min_lag:max_lag + 1]
    num = cands @ base
    den = np.sqrt(base_energy * np.einsum("ij,ij->i", cands, cands))
    ncc = np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0)

    best = float(np.max(ncc))
    if best < VOICING_THRESHOLD:
        return None
    # shortest near-tied local peak -> fundamental, not a multiple
    is_peak = np.ones(len(ncc), dtype=bool)
    is_peak[1:] &= ncc[1:] >= ncc[:-1] - 1e-12
    is_peak[:-1] &= ncc[:-1] >= ncc[1:] - 1e-12
    good = np.flatnonzero((ncc >= 0.99 * best) & is_peak)
    i = int(good[0]) if len(good) else int(np.argmax(ncc))

    lag = float(lags[i])
    if 0 < i < len(ncc) - 1:
        a, b, c = ncc[i - 1], ncc[i], ncc[i + 1]
        den2 = a - 2 * b + c
        if abs(den2) > 1e-12:
            delta = 0.5 * (a - c) / den2
            if abs(delta) <= 1.0:
                lag += delta
    f0 = sr / lag
    return float(np.clip(f0, F0_MIN_HZ, F0_MAX_HZ))


def flatten_pitch(audio: AudioBuffer, target_hz: float = 120.0) -> AudioBuffer:
    """Move every voiced frame to a constant f0; unvoiced cents are 0."""
    track = track_f0(audio)
    _, voiced_f0 = track.voiced()
    if len(voiced_f0) == 0:
        raise DspError("no voiced frames")
    breakpoints = tuple(
        (
            t,
            1200.0 * float(np.log2(target_hz / f0)) if f0 is not None else 0.0,
        )
        for t, f0 in track.frames
    )
    profile = BreakpointProfile(ProfileKind.PITCH_CENTS, breakpoints)
    return pitch_shift(audio, profile)


def apply_profiles(
    audio: AudioBuffer,
    pitch_profile: BreakpointProfile,
    stretch_profile: BreakpointProfile,
) -> AudioBuffer:
    """Full trial rendering: pitch first, then duration."""
    return time_stretch(pitch_shift(audio, pitch_profile), stretch_profile)


# -------------------------------------------------------------- WAV I/O

def read_wav(path) -> AudioBuffer:
    """RIFF reader for 16-bit PCM and 32-bit float; stereo is averaged."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DspError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise DspError(
                f"{path}: truncated {cid.decode('ascii', 'replace')!r} chunk"
            )
        if cid == b"fmt ":
            if size < 16:
                raise DspError(f"{path}: short 'fmt ' chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise DspError(f"{path}: missing 'fmt ' chunk")
    if payload is None:
        raise DspError(f"{path}: missing 'data' chunk")

    code, channels, rate, _, _, bits = fmt
    if code == 1 and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(float) / 32768.0
    elif code == 3 and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(float)
    else:
        raise DspError(
            f"{path}: unsupported codec in 'fmt ' chunk:"
            f" format {code}, {bits}-bit"
        )
    if channels > 1:
        log.warning("%s: %d channels averaged to mono", path, channels)
        samples = samples[: len(samples) // channels * channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return AudioBuffer(samples, rate)


def write_wav(audio: AudioBuffer, path, fmt: str = "pcm16") -> None:
    """Write 16-bit PCM (default) or 32-bit float."""
    if fmt == "pcm16":
        code, bits = 1, 16
        body = (
            np.round(np.clip(audio.samples, -1, 1) * 32767.0)
            .astype("<i2")
            .tobytes()
        )
    elif fmt == "float32":
        code, bits = 3, 32
        body = audio.samples.astype("<f4").tobytes()
    else:
        raise DspError(f"unknown wav format {fmt!r}")
    block = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(body),
        b"WAVE",
        b"fmt ",
        16,
        code,
        1,
        audio.sample_rate,
        audio.sample_rate * block,
        block,
        bits,
        b"data",
        len(body),
    )
    with open(path, "wb") as fh:
        fh.write(header + body)


# ---------------------------------------------------------- word splice

_ACTIVITY_FLOOR = 10.0 ** (-60.0 / 20.0)  # -60 dBFS


def insert_word(
    phrase: AudioBuffer, word: AudioBuffer, gap_s: float = 0.120
) -> AudioBuffer:
    """Splice a word after the phrase with a fixed silent gap.

    The phrase is considered over after its last sample above -60 dBFS.
    The splice lands on the first zero crossing at or after end + gap
    (any phrase tail past it is dropped). If the target lies beyond the
    buffer, the gap is zero-padded, making the junction exactly zero.
    """
    if gap_s < 0:
        raise DspError("gap_s must be >= 0")
    if phrase.sample_rate != word.sample_rate:
        raise DspError("sample-rate mismatch between phrase and word")
    x = phrase.samples
    sr = phrase.sample_rate
    active = np.flatnonzero(np.abs(x) > _ACTIVITY_FLOOR)
    phrase_end = int(active[-1]) + 1 if len(active) else 0
    target = phrase_end + round(gap_s * sr)

    if target >= len(x):
        head = np.concatenate([x, np.zeros(target - len(x))])
        return AudioBuffer(
            np.concatenate([head, word.samples]), sr
        )

    splice = None
    for i in range(target, len(x)):
        if x[i] == 0.0:
            splice = i + 1
            break
        if i > 0 and x[i - 1] * x[i] < 0:
            # crossing between i-1 and i: keep the side nearer zero
            splice = i + 1 if abs(x[i]) <= abs(x[i - 1]) else i
            break
    if splice is None:
        log.warning("no zero crossing after %.3f s; splicing as-is",
                    target / sr)
        splice = target
    return AudioBuffer(
        np.concatenate([x[:splice], word.samples]), sr
    )
