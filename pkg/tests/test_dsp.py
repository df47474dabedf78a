import numpy as np
import pytest

from ecglite import dsp
from ecglite.synthetic import make_record
from ecglite.wfdb_io import RhythmClass


def median_oracle(x, window):
    """Per-window sort with replicate padding; the independent reference."""
    half = window // 2
    padded = np.concatenate([np.repeat(x[0], half), x, np.repeat(x[-1], half)])
    return np.array([sorted(padded[i:i + window])[half] for i in range(len(x))])


class TestMedianFilter:
    def test_spec_example(self):
        out = dsp.median_filter(np.array([1.0, 5, 2, 8, 3]), 3)
        assert out.tolist() == [1, 2, 5, 3, 3]

    def test_constant_unchanged(self):
        x = np.full(40, 2.5)
        assert np.array_equal(dsp.median_filter(x, 7), x)

    def test_window_one_is_identity(self):
        x = np.array([3.0, -1, 4, 1, 5])
        assert np.array_equal(dsp.median_filter(x, 1), x)

    @pytest.mark.parametrize("window", [0, -3, 2, 8])
    def test_bad_window_rejected(self, window):
        with pytest.raises(ValueError):
            dsp.median_filter(np.ones(10), window)

    def test_matches_sort_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            window = int(rng.choice([1, 3, 5, 7, 11, 25]))
            x = rng.normal(size=n)
            assert np.array_equal(dsp.median_filter(x, window), median_oracle(x, window))


class TestBaselineWindows:
    def test_window_sizes_at_128(self):
        assert dsp.median_window_samples(200, 128) == 25
        assert dsp.median_window_samples(600, 128) == 77

    def test_window_sizes_at_360(self):
        assert dsp.median_window_samples(200, 360) == 73
        assert dsp.median_window_samples(600, 360) == 217


class TestRemoveBaseline:
    def test_constant_maps_to_zero(self):
        x = np.full(500, 3.7)
        assert np.allclose(dsp.remove_baseline(x, 128), 0.0)

    def test_shift_invariance(self, rng):
        x = rng.normal(size=400)
        y1 = dsp.remove_baseline(x, 128)
        y2 = dsp.remove_baseline(x + 11.5, 128)
        assert np.allclose(y1, y2, atol=1e-12)

    def test_matches_two_pass_oracle(self, rng):
        x = rng.normal(size=300)
        w1 = dsp.median_window_samples(200, 128)
        w2 = dsp.median_window_samples(600, 128)
        expected = x - median_oracle(median_oracle(x, w1), w2)
        assert np.allclose(dsp.remove_baseline(x, 128), expected)

    def test_spike_survives_ramp_removed(self):
        fs = 128.0
        n = 512
        ramp = np.linspace(0, 2.0, n)
        x = ramp.copy()
        x[256] += 5.0
        y = dsp.remove_baseline(x, fs)
        assert y[256] > 4.0  # the narrow spike passes through
        interior = np.r_[y[64:250], y[263:448]]
        assert np.abs(interior).max() < 0.1  # the slow ramp does not

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            dsp.remove_baseline(np.ones(10), 0)


class TestResample:
    def test_identity_at_same_rate(self):
        x = np.sin(np.arange(100) * 0.1)
        assert np.array_equal(dsp.resample(x, 128, 128), x)

    def test_output_length_formula(self):
        assert dsp.resample(np.zeros(360), 360, 128).size == 128
        assert dsp.resample(np.zeros(361), 360, 128).size == int(361 * 128 / 360)

    def test_empty_input(self):
        assert dsp.resample(np.array([]), 360, 128).size == 0

    def test_sinusoid_360_to_128(self):
        fs_in, fs_out, f = 360.0, 128.0, 5.0
        t_in = np.arange(5 * int(fs_in)) / fs_in
        y = dsp.resample(np.sin(2 * np.pi * f * t_in), fs_in, fs_out)
        t_out = np.arange(y.size) / fs_out
        expected = np.sin(2 * np.pi * f * t_out)
        err = (y - expected)[64:-64]
        assert np.sqrt(np.mean(err ** 2)) < 1e-2

    def test_dc_preserved(self):
        x = np.full(720, 4.25)
        y = dsp.resample(x, 360, 128)
        assert y.size == 256
        assert np.allclose(y, 4.25, rtol=1e-12)

    def test_upsample_interpolates(self):
        x = np.array([0.0, 1.0, 2.0])
        y = dsp.resample(x, 1, 2)
        assert y.size == 6
        assert np.allclose(y[:4], [0.0, 0.5, 1.0, 1.5])

    def test_bad_rates(self):
        with pytest.raises(ValueError):
            dsp.resample(np.ones(5), 0, 128)


class TestNormalize:
    def test_spec_examples(self):
        assert dsp.normalize(np.array([0.0, 5, 10])).tolist() == [-1, 0, 1]
        assert np.array_equal(dsp.normalize(np.full(5, 3.0)), np.zeros(5))
        assert dsp.normalize(np.array([-3.0, 1.0])).tolist() == [-1, 1]

    def test_range_attained(self, rng):
        for _ in range(30):
            x = rng.normal(size=rng.integers(2, 50)) * rng.uniform(0.1, 100)
            y = dsp.normalize(x)
            assert y.min() == -1.0 and y.max() == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dsp.normalize(np.array([]))


class TestCleanRecord:
    def test_pipeline_output_contract(self):
        record = make_record("c1", [RhythmClass.N, RhythmClass.VT],
                             seconds_per_class=5.0, fs=360.0, seed=2)
        cleaned = dsp.clean_record(record)
        assert cleaned.header.sampling_rate == 128.0
        n_out = int(record.header.n_samples * 128 / 360)
        assert cleaned.channels.shape == (2, n_out)
        assert cleaned.channels.min() >= -1.0 and cleaned.channels.max() <= 1.0
        assert cleaned.rhythms[-1].end == n_out
        for a, b in zip(cleaned.rhythms, cleaned.rhythms[1:]):
            assert a.end == b.onset
        assert [iv.label for iv in cleaned.rhythms] == [RhythmClass.N, RhythmClass.VT]

    def test_128hz_record_keeps_length(self):
        record = make_record("c2", [RhythmClass.N], seconds_per_class=5.0,
                             fs=128.0, seed=3)
        cleaned = dsp.clean_record(record)
        assert cleaned.channels.shape[1] == record.header.n_samples
