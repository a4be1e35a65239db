import numpy as np
import pytest
from scipy.signal import welch

from levitodyn.psd import (TimeSeries, WelchAccumulator, default_segment_length, normalize_to_shot_noise,
                           read_time_series, synthesize, welch_psd, welch_psd_file, write_time_series)
from levitodyn.spectra import FrequencyGrid, Spectrum

FS = 1.0e6


def test_matches_scipy(rng):
    x = rng.standard_normal(50_000)
    for window in ("hann", "boxcar"):
        s = welch_psd(TimeSeries(FS, x), 1024, 0.5, window)
        f, ref = welch(x, FS, window=window, nperseg=1024, noverlap=512, detrend=False)
        np.testing.assert_allclose(s.grid.hz, f)
        np.testing.assert_allclose(s.values, ref, rtol=1e-10)


def test_parseval_rectangular(rng):
    x = rng.standard_normal(1 << 16)
    s = welch_psd(TimeSeries(FS, x), 4096, 0.0, "boxcar")
    df = FS / 4096
    assert np.sum(s.values) * df == pytest.approx(np.mean(x**2), rel=1e-3)


def test_sinusoid_power():
    n, amp = 1 << 16, 0.7
    nper = 4096
    f0 = 100 * FS / nper  # on a bin centre
    t = np.arange(n) / FS
    s = welch_psd(TimeSeries(FS, amp * np.sin(2 * np.pi * f0 * t)), nper, 0.5, "hann")
    df = FS / nper
    k = int(round(f0 / df))
    assert np.sum(s.values[k - 3:k + 4]) * df == pytest.approx(amp**2 / 2, rel=1e-3)


def test_white_noise_level(rng):
    s = welch_psd(TimeSeries(FS, rng.standard_normal(1 << 18)), 1024)
    level = np.mean(s.values[5:-5])
    assert level == pytest.approx(2 / FS, rel=0.05)


def test_dc_in_bin_zero():
    s = welch_psd(TimeSeries(FS, np.full(1 << 14, 3.0)), 1024, 0.5, "boxcar")
    assert s.values[0] == pytest.approx(9.0 * 1024 / FS, rel=1e-12)
    assert np.max(s.values[1:]) < 1e-20


def test_chunking_invariant(rng):
    x = rng.standard_normal(40_000)
    whole = welch_psd(TimeSeries(FS, x), 2048)
    acc = WelchAccumulator(FS, 2048)
    for c in np.array_split(x, 37):
        acc.feed(c)
    np.testing.assert_array_equal(acc.result().values, whole.values)


def test_too_short():
    with pytest.raises(ValueError):
        welch_psd(TimeSeries(FS, np.zeros(100)), 1024)
    with pytest.raises(ValueError):
        WelchAccumulator(FS, 64, overlap=0.95)


def test_default_segment_resolution():
    n = default_segment_length(FS)
    assert FS / n <= 50 and FS / (n // 2) > 50 and n & (n - 1) == 0


def test_synthesized_shape(rng):
    model = lambda f: 2 / FS * (1 + 4 * np.exp(-((f - 2e5) / 5e3) ** 2))
    s = welch_psd(TimeSeries(FS, synthesize(model, FS, 1 << 19, rng)), 1024)
    k = np.argmin(np.abs(s.grid.hz - 2e5))
    assert s.values[k] / model(s.grid.hz[k]) == pytest.approx(1.0, rel=0.1)


# --- normalization ---------------------------------------------------------------------

def _spec(values):
    g = FrequencyGrid.from_hz(0, 1e5, values.size)
    return Spectrum(g, values, "raw", "psd")


def test_normalize_scaled_model():
    f = np.linspace(0, 1e5, 1001)
    model = 1 + 5 * np.exp(-((f - 5e4) / 1e3) ** 2)
    out = normalize_to_shot_noise(_spec(3.7e-9 * model), (8e4, 1e5))
    np.testing.assert_allclose(out.values, model, rtol=1e-12)
    assert out.normalization == "shot-noise"


def test_normalize_constant_and_idempotent():
    out = normalize_to_shot_noise(_spec(np.full(101, 2.5)), (0, 1e5))
    np.testing.assert_array_equal(out.values, 1.0)
    again = normalize_to_shot_noise(out, (0, 1e5))
    np.testing.assert_array_equal(again.values, out.values)


def test_normalize_errors():
    with pytest.raises(ValueError):
        normalize_to_shot_noise(_spec(np.ones(11)), (2e5, 3e5))
    v = np.ones(101)
    v[50] = 100
    with pytest.warns(UserWarning, match="peak"):
        normalize_to_shot_noise(_spec(v), (0, 1e5))


# --- files ------------------------------------------------------------------------------

@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_round_trip(tmp_path, rng, suffix):
    ts = TimeSeries(FS, rng.standard_normal(5000), {"seed": 3})
    path = tmp_path / f"ts{suffix}"
    write_time_series(ts, path)
    back = read_time_series(path)
    np.testing.assert_array_equal(back.samples, ts.samples)
    assert back.sample_rate == FS and back.metadata["seed"] == 3


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_streamed_file_psd(tmp_path, rng, suffix):
    ts = TimeSeries(FS, rng.standard_normal(30_000))
    path = tmp_path / f"ts{suffix}"
    write_time_series(ts, path)
    streamed = welch_psd_file(path, 1024, chunk=777)
    np.testing.assert_array_equal(streamed.values, welch_psd(ts, 1024).values)


def test_bad_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        read_time_series(p)
    c = tmp_path / "x.csv"
    c.write_text("1\n2\n")
    with pytest.raises(ValueError):
        read_time_series(c)


def test_nyquist_check(strong):
    with pytest.raises(ValueError):
        TimeSeries(1e6, np.zeros(4)).check_nyquist(strong)
    TimeSeries(4e6, np.zeros(4)).check_nyquist(strong)
