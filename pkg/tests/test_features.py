"""Feature-extraction and clustering tests.

Synthetic signals are the oracles: a constant sine pins pitch, jitter,
and shimmer; a shaped spectrum pins the slope (|X| ~ f^a gives
20*log10(2)*a ~ 6.02a dB/octave); amplitude bursts pin the syllable
rate; separated Gaussian blobs pin the clustering. The [1,2,3,100]
quartile values (Q1 1.75, Q3 27.25) were computed by hand under linear
interpolation before being asserted here.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from prosodykit.dsp import SAMPLE_RATE, AudioBuffer
from prosodykit.features import (
    FEATURE_NAMES,
    ClusterModel,
    FeatureVector,
    FeaturesError,
    ScalerParams,
    assign_clusters,
    cluster_ambiance_table,
    extract_features,
    kmeans,
    read_features_csv,
    robust_scale,
    silhouette,
    silhouette_sweep,
    write_features_csv,
)

SR = SAMPLE_RATE


def sine(freq, dur_s, amp=0.5):
    t = np.arange(round(dur_s * SR)) / SR
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), SR)


class TestExtractFeatures:
    def test_constant_sine(self):
        vec = extract_features(sine(220, 1.0))
        assert vec.median_pitch_hz == pytest.approx(220, abs=2)
        assert vec.jitter_local <= 0.003
        assert vec.shimmer_local <= 0.005
        assert vec.pitch_range_hz < 5

    def test_silence(self):
        vec = extract_features(AudioBuffer(np.zeros(round(0.6 * SR))))
        assert vec.mean_intensity_db <= -90
        assert vec.max_intensity_db <= -90
        assert vec.speech_rate_syll_per_s == 0
        assert vec.median_pitch_hz is None
        assert vec.pitch_range_hz is None
        assert vec.jitter_local is None
        assert vec.shimmer_local is None
        assert vec.energy == 0

    def test_burst_syllable_rate(self):
        t = np.arange(2 * SR) / SR
        env = (np.sin(2 * np.pi * 4 * t) > 0).astype(float)
        x = AudioBuffer(0.5 * np.sin(2 * np.pi * 220 * t) * env, SR)
        vec = extract_features(x)
        assert vec.speech_rate_syll_per_s == pytest.approx(4, abs=0.5)

    def test_spectral_slope_shaped_spectrum(self):
        # |X| ~ f^-1 over the analysis band -> about -6.02 dB/octave
        rng = np.random.default_rng(7)
        n = SR  # 1 s, 1 Hz bins
        freqs = np.fft.rfftfreq(n, 1.0 / SR)
        mag = np.zeros_like(freqs)
        band = freqs >= 1.0
        mag[band] = (freqs[band] / 50.0) ** -1.0
        phases = rng.uniform(0, 2 * np.pi, len(freqs))
        x = np.fft.irfft(mag * np.exp(1j * phases), n=n)
        x = 0.4 * x / np.max(np.abs(x))
        vec = extract_features(AudioBuffer(x, SR))
        assert vec.spectral_slope_db_per_octave == pytest.approx(
            -6.02, abs=0.3
        )

    def test_gain_invariance(self):
        loud = sine(220, 1.0, amp=0.8)
        quiet = AudioBuffer(loud.samples * 0.5, SR)
        a = extract_features(loud)
        b = extract_features(quiet)
        shift = 20 * np.log10(0.5)
        assert b.mean_intensity_db - a.mean_intensity_db == pytest.approx(
            shift, abs=1e-6
        )
        assert b.max_intensity_db - a.max_intensity_db == pytest.approx(
            shift, abs=1e-6
        )
        assert b.median_pitch_hz == pytest.approx(a.median_pitch_hz, abs=0.1)
        assert b.energy == pytest.approx(0.25 * a.energy)

    def test_too_short_rejected(self):
        with pytest.raises(FeaturesError, match="short"):
            extract_features(sine(220, 0.3))

    def test_pause_rate_counts_long_gaps(self):
        # 0.5 s tone, 0.4 s silence, 0.5 s tone -> exactly one pause
        tone = sine(220, 0.5).samples
        x = AudioBuffer(
            np.concatenate([tone, np.zeros(round(0.4 * SR)), tone]), SR
        )
        vec = extract_features(x)
        assert vec.pause_rate == pytest.approx(1 / x.duration_s, rel=0.01)


class TestRobustScale:
    def test_hand_quartiles(self):
        X = np.array([[1.0], [2.0], [3.0], [100.0]])
        scaled, params = robust_scale(X)
        assert params.medians == (2.5,)
        assert params.iqrs == pytest.approx((25.5,))
        assert not params.degenerate[0]
        assert np.median(scaled[:, 0]) == pytest.approx(0.0)
        assert scaled[:, 0] == pytest.approx(
            (X[:, 0] - 2.5) / 25.5
        )

    def test_constant_feature_flagged(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        scaled, params = robust_scale(X)
        assert params.degenerate == (False, True)
        assert np.all(scaled[:, 1] == 0)

    def test_rescale_keeps_median_at_zero(self):
        rng = np.random.default_rng(0)
        X = rng.normal(3.0, 2.0, size=(40, 4))
        scaled, _ = robust_scale(X)
        again, params = robust_scale(scaled)
        assert np.allclose(params.medians, 0.0, atol=1e-12)
        assert np.allclose(np.median(again, axis=0), 0.0, atol=1e-12)

    def test_inverse_recovers(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 5)) * [1, 10, 100, 0.1, 3] + 7
        scaled, params = robust_scale(X)
        assert np.allclose(params.inverse(scaled), X, atol=1e-9)

    def test_needs_two_rows(self):
        with pytest.raises(FeaturesError, match="2 rows"):
            robust_scale(np.array([[1.0, 2.0]]))

    @given(
        X=arrays(
            float,
            (10, 3),
            elements=st.floats(
                min_value=-1e6, max_value=1e6, allow_nan=False
            ),
        )
    )
    @settings(max_examples=40, deadline=None)
    def test_inverse_roundtrip_property(self, X):
        scaled, params = robust_scale(X)
        assert np.allclose(params.inverse(scaled), X, atol=1e-6)


def two_blobs(n=50, sigma=0.1, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal((0.0, 0.0), sigma, size=(n, 2))
    b = rng.normal((10.0, 10.0), sigma, size=(n, 2))
    return np.vstack([a, b])


class TestKmeans:
    def test_two_blobs(self):
        X = two_blobs()
        model = kmeans(X, 2, seed=0)
        assert model.silhouette >= 0.9
        centers = model.centers[np.argsort(model.centers[:, 0])]
        assert np.allclose(centers[0], [0, 0], atol=0.2)
        assert np.allclose(centers[1], [10, 10], atol=0.2)

    def test_deterministic_per_seed(self):
        X = two_blobs(seed=3)
        a = kmeans(X, 3, seed=5)
        b = kmeans(X, 3, seed=5)
        assert np.array_equal(a.centers, b.centers)
        assert a.silhouette == b.silhouette

    def test_identical_points_reseed_path(self):
        X = np.ones((6, 2))
        model = kmeans(X, 2, seed=0)
        assert model.k == 2
        assert np.all(np.isfinite(model.centers))

    def test_k_equals_n_silhouette_zero(self):
        X = np.array([[0.0, 0], [1, 0], [2, 0], [3, 0], [4, 0]])
        model = kmeans(X, 5, seed=0)
        assert model.silhouette == 0.0

    def test_inertia_non_increasing(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 3))
        model = kmeans(X, 4, seed=1)
        hist = model.inertia_history
        assert all(
            later <= earlier + 1e-9
            for earlier, later in zip(hist, hist[1:])
        )

    def test_k_validation(self):
        X = two_blobs(n=5)
        with pytest.raises(FeaturesError, match=">= 2"):
            kmeans(X, 1)
        with pytest.raises(FeaturesError, match="exceeds"):
            kmeans(X, 11)

    def test_sweep_prefers_true_k(self):
        X = two_blobs(seed=4)
        sweep = dict(silhouette_sweep(X, range(2, 6), seed=0))
        assert max(sweep, key=sweep.get) == 2

    def test_assign_clusters_matches_centers(self):
        X = two_blobs()
        model = kmeans(X, 2, seed=0)
        labels = assign_clusters(model, X)
        assert set(labels) == {0, 1}
        # each blob lands in a single cluster
        assert len(set(labels[:50])) == 1
        assert len(set(labels[50:])) == 1


class TestAmbianceTable:
    def test_single_cluster(self):
        table = cluster_ambiance_table([0, 0, 0], ["fine", "fine", "casual"])
        assert table == {"fine": {0: 1.0}, "casual": {0: 1.0}}

    def test_uniform_two_clusters(self):
        table = cluster_ambiance_table([0, 1, 0, 1], ["x", "x", "x", "x"])
        assert table["x"] == {0: 0.5, 1: 0.5}

    def test_hand_tallied_fixture(self):
        assignments = [0, 0, 1, 0, 1, 1, 0, 1]
        ambiances = ["fine"] * 4 + ["casual"] * 4
        table = cluster_ambiance_table(assignments, ambiances)
        assert table["fine"] == {0: 0.75, 1: 0.25}
        assert table["casual"] == {0: 0.25, 1: 0.75}
        for row in table.values():
            assert sum(row.values()) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(FeaturesError, match="length"):
            cluster_ambiance_table([0, 1], ["a"])


class TestFeatureIO:
    def test_csv_roundtrip(self, tmp_path):
        vec_full = extract_features(sine(220, 0.9))
        vec_silent = extract_features(
            AudioBuffer(np.zeros(round(0.6 * SR)))
        )
        rows = [
            ("utt-1", "fine-dining", vec_full),
            ("utt-2", "casual", vec_silent),
        ]
        path = tmp_path / "feats.csv"
        write_features_csv(path, rows)
        header = path.read_text().splitlines()[0]
        assert header == "utterance_id,ambiance," + ",".join(FEATURE_NAMES)
        back = read_features_csv(path)
        assert back[0][0] == "utt-1"
        assert back[0][2] == vec_full
        assert back[1][2].median_pitch_hz is None

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(FeaturesError, match="header"):
            read_features_csv(path)

    def test_vector_row_roundtrip(self):
        vec = extract_features(sine(220, 0.7))
        assert FeatureVector.from_row(vec.as_row()) == vec


class TestModelInvariants:
    def test_cluster_model_validation(self):
        with pytest.raises(FeaturesError, match=">= 2"):
            ClusterModel(1, np.zeros((1, 2)), 0.0, ())
        with pytest.raises(FeaturesError, match="silhouette"):
            ClusterModel(2, np.zeros((2, 2)), 1.5, ())

    def test_scaler_params_inverse_with_degenerate(self):
        params = ScalerParams((1.0, 2.0), (3.0, 0.0), (False, True))
        scaled = np.array([[1.0, 0.5]])
        assert np.allclose(params.inverse(scaled), [[4.0, 2.5]])
