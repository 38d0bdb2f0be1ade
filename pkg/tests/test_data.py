import numpy as np
import pytest

from perimid.data.manifest import DatasetManifest, parse_tones, read_manifests
from perimid.data.synthetic import Tone, gen_multiperiod, gen_period_classes, inject_anomalies
from perimid.data.windowing import (
    gen_mask,
    split_bounds,
    split_reconstruction,
    split_windows,
    window,
    window_set,
)
from perimid.errors import ConfigurationError, DataError
from perimid.spectral import amplitude_spectrum


class TestSynthetic:
    def test_shape_and_metadata(self):
        series = gen_multiperiod(100, 3, [Tone(5, 1.0), (10, 0.5, 0.0)], 0.01, 0.0)
        assert series.values.shape == (100, 3)
        assert series.metadata()["tones"][1] == {"frequency": 10, "amplitude": 0.5, "phase": 0.0}

    def test_tone_lands_in_its_bin(self):
        series = gen_multiperiod(64, 1, [Tone(4, 1.0)])
        assert int(np.argmax(amplitude_spectrum(series.values)[1:])) + 1 == 4

    def test_periods_strongest_first(self):
        series = gen_multiperiod(400, 1, [Tone(50, 0.5), Tone(20, 1.0)])
        assert series.tone_periods() == [20.0, 8.0]
        assert series.window_frequencies(96) == [5, 12]

    def test_noise_is_seeded(self):
        a = gen_multiperiod(50, 2, [Tone(5)], noise_sigma=0.3, seed=4).values
        b = gen_multiperiod(50, 2, [Tone(5)], noise_sigma=0.3, seed=4).values
        c = gen_multiperiod(50, 2, [Tone(5)], noise_sigma=0.3, seed=5).values
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_duplicate_frequencies(self):
        with pytest.raises(DataError):
            gen_multiperiod(50, 1, [Tone(5), Tone(5, 2.0)])

    def test_anomalies_are_labelled_shifts(self):
        clean = gen_multiperiod(300, 2, [Tone(10)])
        dirty = inject_anomalies(clean, 3, magnitude=4.0, start=150, seed=1)
        labels = dirty.labels
        assert not labels[:150].any()
        starts = np.flatnonzero(np.diff(np.concatenate([[0], labels.astype(int)])) == 1)
        assert len(starts) == 3
        shift = dirty.values - clean.values
        np.testing.assert_array_equal(shift[~labels], 0.0)
        np.testing.assert_allclose(np.abs(shift[labels]), 4.0)

    def test_anomalies_need_room(self):
        with pytest.raises(DataError):
            inject_anomalies(gen_multiperiod(20, 1, [Tone(2)]), 1, min_len=5, max_len=5, start=16)

    def test_period_classes(self):
        windows, labels = gen_period_classes(5, 64, periods=(8.0, 16.0, 32.0))
        assert windows.shape == (15, 64, 1)
        np.testing.assert_array_equal(labels[:6], [0, 1, 2, 0, 1, 2])


class TestWindowing:
    def test_starts_with_stride(self):
        windows = window_set(np.arange(10.0), 4, 2, stride=2)
        np.testing.assert_array_equal(windows.starts, [0, 2, 4])
        np.testing.assert_array_equal(windows.inputs[1, :, 0], [2, 3, 4, 5])
        np.testing.assert_array_equal(windows.targets[1, :, 0], [6, 7])

    def test_pairs(self):
        pairs = window(np.arange(12.0).reshape(6, 2), 3, 1)
        assert len(pairs) == 3
        x, y = pairs[2]
        np.testing.assert_array_equal(x, [[4, 5], [6, 7], [8, 9]])
        np.testing.assert_array_equal(y, [[10, 11]])

    def test_series_too_short(self):
        with pytest.raises(DataError):
            window_set(np.arange(5.0), 4, 2)

    def test_split_bounds(self):
        assert split_bounds(10, (0.6, 0.2, 0.2)) == [(0, 6), (6, 8), (8, 10)]
        with pytest.raises(DataError):
            split_bounds(10, (0.6, 0.6, 0.2))

    def test_no_window_crosses_a_split(self):
        parts = split_windows(np.arange(200.0), 16, 4, 1)
        bounds = dict(zip(("train", "val", "test"), split_bounds(200, (0.6, 0.2, 0.2))))
        for name, part in parts.items():
            lo, hi = bounds[name]
            assert part.starts.min() >= lo
            assert part.starts.max() + 20 <= hi
            np.testing.assert_array_equal(part.inputs[:, 0, 0], part.starts)

    def test_short_splits_are_dropped(self):
        parts = split_windows(np.arange(50.0), 16, 4, 1)
        assert set(parts) == {"train"}

    def test_reconstruction_targets_are_inputs(self):
        parts = split_reconstruction(np.arange(100.0), 8, 4)
        np.testing.assert_array_equal(parts["val"].targets, parts["val"].inputs)

    def test_mask_counts(self):
        mask = gen_mask((3, 96, 2), 0.25, seed=1)
        np.testing.assert_array_equal(mask.sum(axis=1), np.full((3, 2), 24))
        assert not np.array_equal(mask[0, :, 0], mask[0, :, 1])

    def test_mask_half_of_two(self):
        assert gen_mask((2, 1), 0.5).sum() == 1

    @pytest.mark.parametrize("ratio", [-0.1, 1.0])
    def test_mask_ratio_range(self, ratio):
        with pytest.raises(DataError):
            gen_mask((8, 1), ratio)

    def test_mask_cannot_hide_a_whole_channel(self):
        with pytest.raises(DataError):
            gen_mask((2, 1), 0.9)

    def test_mask_is_seeded(self):
        np.testing.assert_array_equal(gen_mask((32, 2), 0.3, 7), gen_mask((32, 2), 0.3, 7))


class TestManifest:
    def test_parse_tones(self):
        assert parse_tones("4:1.5, 8, 12:0.5:1") == (
            Tone(4.0, 1.5, 0.0),
            Tone(8.0, 1.0, 0.0),
            Tone(12.0, 0.5, 1.0),
        )
        assert parse_tones("") == ()

    @pytest.mark.parametrize("text", ["4:x", "1:2:3:4"])
    def test_bad_tones(self, text):
        with pytest.raises(ConfigurationError):
            parse_tones(text)

    def test_from_mapping(self):
        manifest = DatasetManifest.from_mapping(
            {"length": "500", "noise_sigma": "0.0", "has_header": "no", "csv": ""}
        )
        assert manifest.length == 500
        assert manifest.noise_sigma == 0.0
        assert manifest.has_header is False
        assert manifest.csv is None

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            DatasetManifest.from_mapping({"lenght": "5"})

    def test_bad_value(self):
        with pytest.raises(ConfigurationError):
            DatasetManifest.from_mapping({"length": "many"})

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ConfigurationError):
            DatasetManifest(train_fraction=0.5)

    def test_synthetic_load(self):
        manifest = DatasetManifest(length=300, channels=2, noise_sigma=0.0)
        values, labels = manifest.load_labelled()
        assert values.shape == (300, 2)
        assert labels is None

    def test_synthetic_anomalies_land_in_test_split(self):
        manifest = DatasetManifest(length=500, anomalies=2, noise_sigma=0.0)
        _, labels = manifest.load_labelled()
        test_start = split_bounds(500, manifest.fractions)[2][0]
        assert labels.any()
        assert not labels[:test_start].any()

    def test_all_zero_series(self):
        with pytest.raises(DataError):
            DatasetManifest(tones="", noise_sigma=0.0).load()

    def test_csv_wins(self, csv_file):
        path = csv_file("a\n1\n2\n3\n")
        manifest = DatasetManifest(csv=str(path), length=300)
        np.testing.assert_array_equal(manifest.load(), [[1], [2], [3]])

    def test_read_manifests(self, tmp_path):
        path = tmp_path / "data.ini"
        path.write_text("[small]\nlength = 200\n\n[wide]\nchannels = 4\nstride = 8\n")
        manifests = read_manifests(path)
        assert set(manifests) == {"small", "wide"}
        assert manifests["small"].length == 200
        assert manifests["wide"].stride == 8

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigurationError):
            read_manifests(tmp_path / "none.ini")
