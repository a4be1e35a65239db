"""Photocurrent time series and averaged power spectral densities.

PSD convention: one-sided density per Hz, so ``sum(psd) * df`` is the
signal variance. Window power is corrected with ``sum(w^2)``.

Binary time-series files are little-endian::

    b"LVTS" | uint32 header length | JSON header | float64 samples

The header holds ``schema_version``, ``sample_rate_hz``, ``n_samples`` and a
free ``metadata`` object. The CSV fallback has ``# key = value`` comment
lines (at least ``sample_rate_hz``) followed by one sample per line.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .constants import TWO_PI
from .params import SCHEMA_VERSION, SystemParams
from .spectra import FrequencyGrid, Spectrum

MAGIC = b"LVTS"
DEFAULT_RESOLUTION_HZ = 50.0
CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class TimeSeries:
    sample_rate: float
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        object.__setattr__(self, "samples", s)

    def check_nyquist(self, params: SystemParams) -> None:
        need = 2 * (params.omega_lo + max(params.omega_x, params.omega_y)) / TWO_PI
        if self.sample_rate <= need:
            raise ValueError(f"sample rate {self.sample_rate:g} Hz does not cover the heterodyne band (> {need:g} Hz)")


def default_segment_length(sample_rate: float, resolution_hz: float = DEFAULT_RESOLUTION_HZ) -> int:
    """Smallest power of two giving a bin width <= ``resolution_hz``."""
    return 1 << max(1, math.ceil(math.log2(sample_rate / resolution_hz)))


class WelchAccumulator:
    """Single-pass Welch estimator. Feed samples in any chunking."""

    def __init__(self, sample_rate: float, segment_length: int, overlap: float = 0.5, window="hann"):
        if not sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if segment_length < 2:
            raise ValueError("segment_length must be >= 2")
        if not 0.0 <= overlap <= 0.9:
            raise ValueError("overlap must lie in [0, 0.9]")
        self.fs = float(sample_rate)
        self.nperseg = int(segment_length)
        self.step = self.nperseg - int(round(overlap * self.nperseg))
        self.win = get_window(window, self.nperseg)
        self._buf = np.empty(0)
        self._sum = np.zeros(self.nperseg // 2 + 1)
        self.n_segments = 0

    def feed(self, chunk) -> None:
        buf = np.concatenate([self._buf, np.asarray(chunk, dtype=float).ravel()])
        start = 0
        while start + self.nperseg <= buf.size:
            seg = buf[start:start + self.nperseg]
            self._sum += np.abs(np.fft.rfft(seg * self.win)) ** 2
            self.n_segments += 1
            start += self.step
        self._buf = buf[start:]

    def result(self, metadata: dict | None = None) -> Spectrum:
        if self.n_segments < 2:
            raise ValueError(f"need at least 2 segments, have {self.n_segments}")
        psd = self._sum / self.n_segments / (self.fs * np.sum(self.win**2))
        psd[1:] *= 2
        if self.nperseg % 2 == 0:
            psd[-1] /= 2  # Nyquist bin is not doubled
        f = np.fft.rfftfreq(self.nperseg, 1 / self.fs)
        meta = {"sample_rate_hz": self.fs, "segment_length": self.nperseg,
                "n_segments": self.n_segments, "step": self.step}
        meta.update(metadata or {})
        return Spectrum(FrequencyGrid(TWO_PI * f), psd, "raw", "psd", meta)


def welch_psd(ts: TimeSeries, segment_length: int | None = None, overlap: float = 0.5,
              window="hann") -> Spectrum:
    n = segment_length or default_segment_length(ts.sample_rate)
    if n > ts.samples.size:
        raise ValueError("time series shorter than one segment")
    acc = WelchAccumulator(ts.sample_rate, n, overlap, window)
    acc.feed(ts.samples)
    return acc.result(ts.metadata)


def welch_psd_file(path, segment_length: int | None = None, overlap: float = 0.5,
                   window="hann", chunk: int = CHUNK) -> Spectrum:
    """Streamed Welch PSD of a time-series file; memory stays O(segment + chunk)."""
    header, chunks = _open_series(path, chunk)
    fs = header["sample_rate_hz"]
    acc = WelchAccumulator(fs, segment_length or default_segment_length(fs), overlap, window)
    for c in chunks:
        acc.feed(c)
    return acc.result(header.get("metadata", {}))


def normalize_to_shot_noise(psd: Spectrum, noise_band, peak_ratio: float = 10.0) -> Spectrum:
    """Divide by the median over ``noise_band = (f_lo, f_hi)`` [Hz].

    Warns if the band seems to contain a peak (a bin above ``peak_ratio``
    times the median).
    """
    f = psd.grid.hz
    lo, hi = sorted(noise_band)
    sel = (f >= lo) & (f <= hi)
    if not sel.any():
        raise ValueError(f"noise band [{lo:g}, {hi:g}] Hz contains no bins")
    ref = float(np.median(psd.values[sel]))
    if not ref > 0:
        raise ValueError("median over the noise band is not positive")
    if psd.values[sel].max() > peak_ratio * ref:
        warnings.warn("noise band appears to contain a spectral peak", stacklevel=2)
    meta = dict(psd.metadata)
    meta.update(noise_band_hz=[lo, hi], shot_noise_level=ref)
    return Spectrum(psd.grid, psd.values / ref, "shot-noise", "heterodyne-full", meta)


# --- synthesis -----------------------------------------------------------------

def synthesize(psd_of_hz, sample_rate: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian samples whose one-sided PSD is ``psd_of_hz(f)``.

    White noise of unit variance has density ``2/fs``; it is shaped in the
    Fourier domain by ``sqrt(S fs / 2)``.
    """
    white = rng.standard_normal(n)
    f = np.fft.rfftfreq(n, 1 / sample_rate)
    shape = np.sqrt(np.clip(psd_of_hz(f), 0, None) * sample_rate / 2)
    return np.fft.irfft(np.fft.rfft(white) * shape, n)


# --- file formats ----------------------------------------------------------------

def write_time_series(ts: TimeSeries, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lines = [f"# schema_version = {SCHEMA_VERSION}", f"# sample_rate_hz = {ts.sample_rate!r}"]
        lines += [f"# {k} = {v}" for k, v in sorted(ts.metadata.items())]
        body = "\n".join(f"{x:.17g}" for x in ts.samples)
        path.write_text("\n".join(lines) + "\n" + body + "\n")
        return
    header = json.dumps({"schema_version": SCHEMA_VERSION, "sample_rate_hz": ts.sample_rate,
                         "n_samples": int(ts.samples.size), "metadata": ts.metadata},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", len(header)) + header)
        fh.write(ts.samples.astype("<f8").tobytes())


def _read_csv_header(path):
    header, meta = {}, {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if "=" in line:
                k, v = (s.strip() for s in line[1:].split("=", 1))
                try:
                    v = float(v)
                except ValueError:
                    pass
                if k in ("sample_rate_hz", "schema_version"):
                    header[k] = v
                else:
                    meta[k] = v
    if "sample_rate_hz" not in header:
        raise ValueError(f"{path}: missing '# sample_rate_hz = ...' line")
    header["metadata"] = meta
    return header


def _open_series(path, chunk):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        header = _read_csv_header(path)

        def gen():
            buf = []
            with open(path) as fh:
                for line in fh:
                    s = line.strip()
                    if not s or s.startswith("#"):
                        continue
                    buf.append(float(s.split(",")[-1]))
                    if len(buf) >= chunk:
                        yield np.array(buf)
                        buf = []
            if buf:
                yield np.array(buf)
        return header, gen()

    fh = open(path, "rb")
    try:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a time-series file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
    except Exception:
        fh.close()
        raise

    def gen():
        with fh:
            while True:
                raw = fh.read(8 * chunk)
                if not raw:
                    break
                yield np.frombuffer(raw, dtype="<f8")
    return header, gen()


def read_time_series(path) -> TimeSeries:
    header, chunks = _open_series(path, CHUNK)
    parts = list(chunks)
    samples = np.concatenate(parts) if parts else np.empty(0)
    return TimeSeries(header["sample_rate_hz"], samples, header.get("metadata", {}))
