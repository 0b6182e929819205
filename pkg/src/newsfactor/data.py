"""Dataset construction: returns, word intensities, splits, synthetic data."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .admm import FactorModel
from .errors import DataError

__all__ = [
    "PriceSeries",
    "ArticleCounts",
    "Split",
    "SyntheticData",
    "compute_log_returns",
    "compute_word_intensity",
    "make_split",
    "generate_synthetic",
    "SyntheticCorpus",
    "generate_synthetic_corpus",
    "read_prices_csv",
    "write_prices_csv",
    "read_counts_csv",
    "write_counts_csv",
]

log = logging.getLogger(__name__)


@dataclass
class PriceSeries:
    """Open and close prices, one row per stock and one column per day ``0..s``.

    Missing prices are NaN.
    """

    tickers: list
    dates: list
    open: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        self.open = np.asarray(self.open, dtype=float)
        self.close = np.asarray(self.close, dtype=float)
        shape = (len(self.tickers), len(self.dates))
        if self.open.shape != shape or self.close.shape != shape:
            raise DataError(f"price arrays must have shape {shape}, got {self.open.shape}, {self.close.shape}")
        for name, arr in (("open", self.open), ("close", self.close)):
            bad = np.argwhere(~np.isnan(arr) & ~(arr > 0))
            if bad.size:
                i, t = bad[0]
                raise DataError(f"nonpositive {name} price for {self.tickers[i]} on {self.dates[t]}: {arr[i, t]}")

    @property
    def n(self):
        return len(self.tickers)

    @property
    def s(self):
        """Number of return days (one less than the number of price days)."""
        return len(self.dates) - 1


@dataclass
class ArticleCounts:
    """Per-word daily document counts, ``counts[j, t]``."""

    words: list
    dates: list
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.words), len(self.dates)):
            raise DataError("counts shape does not match words x dates")
        if np.any(self.counts < 0):
            raise DataError("article counts must be nonnegative")


def compute_log_returns(prices: PriceSeries):
    """Close-to-close log returns for days ``1..s``.

    Returns
    -------
    r : (n, s) array
        ``log(close[:, t]) - log(close[:, t-1])``; zero where undefined.
    mask : (n, s) bool array
        True where both closes are present.
    """
    close = prices.close
    if close.shape[1] < 2:
        raise DataError("need at least two days of prices")
    mask = ~np.isnan(close[:, 1:]) & ~np.isnan(close[:, :-1])
    logc = np.log(np.where(np.isnan(close), 1.0, close))
    r = np.where(mask, logc[:, 1:] - logc[:, :-1], 0.0)
    return r, mask


def compute_word_intensity(counts, window: int = 60, z_threshold: float = 3.0, mode: str = "threshold"):
    """Thresholded z-scores of daily article counts.

    Each day's count is standardized against the preceding ``window`` days
    (mean and sample standard deviation, the day itself excluded).

    Parameters
    ----------
    counts : (m, T) array
    window : int
        Length of the trailing baseline; days without a full window get 0.
    z_threshold : float
        With ``mode="threshold"`` only z-scores ``>= z_threshold`` are kept.
    mode : {"threshold", "clip"}
        ``"clip"`` keeps every nonnegative z-score instead.

    Returns
    -------
    (m, T) array of nonnegative intensities. A flat window (zero standard
    deviation) yields 0.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if mode not in ("threshold", "clip"):
        raise ValueError(f"unknown mode {mode!r}")
    c = np.atleast_2d(np.asarray(counts, dtype=float))
    m, T = c.shape
    y = np.zeros((m, T))
    if T <= window:
        return y
    win = np.lib.stride_tricks.sliding_window_view(c, window, axis=1)[:, : T - window, :]
    mean = win.mean(axis=2)
    std = win.std(axis=2, ddof=1)
    cur = c[:, window:]
    ok = std > 0
    z = np.zeros_like(cur)
    z[ok] = (cur[ok] - mean[ok]) / std[ok]
    floor = 0.0 if mode == "clip" else z_threshold
    y[:, window:] = np.where(ok & (z >= floor) & (z >= 0), z, 0.0)
    return y


@dataclass(frozen=True)
class Split:
    """Contiguous train/validation/test ranges of return days (1-based, inclusive starts)."""

    train: range
    val: range
    test: range

    @staticmethod
    def columns(days: range) -> slice:
        """Matrix columns of a day range (day ``t`` lives in column ``t - 1``)."""
        return slice(days.start - 1, days.stop - 1)


def make_split(s: int, boundaries) -> Split:
    """Split days ``1..s`` at ``(b1, b2)``: train ``1..b1``, val ``b1+1..b2``, test ``b2+1..s``."""
    b1, b2 = boundaries
    if not 0 <= b1 <= b2 <= s:
        raise ValueError(f"boundaries must satisfy 0 <= b1 <= b2 <= s, got ({b1}, {b2}) with s={s}")
    return Split(range(1, b1 + 1), range(b1 + 1, b2 + 1), range(b2 + 1, s + 1))


class SyntheticData(NamedTuple):
    prices: PriceSeries
    y: np.ndarray
    model: FactorModel
    r: np.ndarray


def generate_synthetic(n, m, s, d, sparsity=0.8, noise_sigma=0.0, seed=0,
                       density=0.3, return_scale=0.01) -> SyntheticData:
    """Draw a dataset from the factor model itself.

    ``U*`` is uniform on [0, 1), ``W*`` Gaussian with ``ceil(sparsity * m)``
    zeroed columns, rescaled so the noiseless returns have standard
    deviation ``return_scale``. ``Y`` has a fraction ``density`` of nonzero
    entries distributed as ``3 + Exp(1)``, mimicking thresholded z-scores.
    Returns are ``U* W* Y`` plus Gaussian noise of standard deviation
    ``noise_sigma``; prices integrate the returns from a random start, with
    each day opening at the previous close.

    Independent random streams are used for each component, so changing
    ``noise_sigma`` leaves ``U*``, ``W*`` and ``Y`` untouched.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must lie in [0, 1]")
    rng_u, rng_w, rng_y, rng_noise, rng_px = (
        np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(5)
    )
    u = rng_u.random((n, d))
    w = rng_w.standard_normal((d, m))
    n_zero = math.ceil(sparsity * m)
    w[:, rng_w.permutation(m)[:n_zero]] = 0.0
    y = np.where(rng_y.random((m, s)) < density, 3.0 + rng_y.exponential(1.0, (m, s)), 0.0)
    signal = u @ w @ y
    spread = signal.std()
    if spread > 0:
        w *= return_scale / spread
        signal = u @ w @ y
    r = signal + noise_sigma * rng_noise.standard_normal((n, s)) if noise_sigma > 0 else signal
    x0 = 20.0 + 80.0 * rng_px.random(n)
    close = x0[:, None] * np.exp(np.concatenate([np.zeros((n, 1)), np.cumsum(r, axis=1)], axis=1))
    opn = np.concatenate([close[:, :1], close[:, :-1]], axis=1)
    tickers = [f"S{i:03d}" for i in range(n)]
    dates = [f"D{t:05d}" for t in range(s + 1)]
    return SyntheticData(PriceSeries(tickers, dates, opn, close), y, FactorModel(u, w), r)


class SyntheticCorpus(NamedTuple):
    prices: PriceSeries
    counts: ArticleCounts
    model: FactorModel
    y: np.ndarray  # (m, s) intensities of return days 1..s
    r: np.ndarray


def generate_synthetic_corpus(n, m, s, d, sparsity=0.8, noise_sigma=0.0, seed=0, window=60,
                              z_threshold=3.0, base_rate=20.0, spike_prob=0.05,
                              return_scale=0.01) -> SyntheticCorpus:
    """Raw price and article-count tables whose prepared intensities drive the returns.

    Counts are Poisson around ``base_rate`` with occasional spikes of
    several times the base, so the thresholded z-scores are sparse. Returns
    are ``U* W* Y`` (plus noise) where ``Y`` is exactly what
    :func:`compute_word_intensity` derives from the counts. Price days are
    ``0..s``; the first ``window`` days carry no word signal.
    """
    rng_c, rng_rest = (np.random.default_rng(ss) for ss in np.random.SeedSequence([seed, 1]).spawn(2))
    lam = np.full((m, s + 1), float(base_rate))
    spikes = rng_c.random((m, s + 1)) < spike_prob
    lam[spikes] *= 1.0 + rng_c.exponential(2.0, spikes.sum())
    counts = rng_c.poisson(lam).astype(float)
    y = compute_word_intensity(counts, window, z_threshold)[:, 1:]
    base = generate_synthetic(n, m, s, d, sparsity=sparsity, seed=int(rng_rest.integers(2**31)),
                              return_scale=return_scale)
    u, w = base.model.u, base.model.w.copy()
    signal = u @ w @ y
    spread = signal.std()
    if spread > 0:
        w *= return_scale / spread
        signal = u @ w @ y
    r = signal + noise_sigma * rng_rest.standard_normal((n, s)) if noise_sigma > 0 else signal
    x0 = 20.0 + 80.0 * rng_rest.random(n)
    close = x0[:, None] * np.exp(np.concatenate([np.zeros((n, 1)), np.cumsum(r, axis=1)], axis=1))
    opn = np.concatenate([close[:, :1], close[:, :-1]], axis=1)
    tickers = [f"S{i:03d}" for i in range(n)]
    dates = [f"D{t:05d}" for t in range(s + 1)]
    words = [f"w{j:03d}" for j in range(m)]
    return SyntheticCorpus(PriceSeries(tickers, dates, opn, close), ArticleCounts(words, dates, counts),
                           FactorModel(u, w), y, r)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def _rows(path: Path, header: list):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if [h.strip() for h in first] != header:
            raise DataError(f"{path}: expected header {','.join(header)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, [f.strip() for f in row]


def _num(path, lineno, text):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}:{lineno}: non-finite value {text!r}")
    return value


def read_prices_csv(path) -> PriceSeries:
    """Read ``date,ticker,open,close`` rows into a dense :class:`PriceSeries`."""
    path = Path(path)
    records = {}
    for lineno, (date, ticker, o, c) in _rows(path, ["date", "ticker", "open", "close"]):
        o, c = _num(path, lineno, o), _num(path, lineno, c)
        if o <= 0 or c <= 0:
            raise DataError(f"{path}:{lineno}: nonpositive price for {ticker} on {date}")
        if (date, ticker) in records:
            raise DataError(f"{path}:{lineno}: duplicate row for {ticker} on {date}")
        records[(date, ticker)] = (o, c)
    dates = sorted({k[0] for k in records})
    tickers = sorted({k[1] for k in records})
    di = {x: i for i, x in enumerate(dates)}
    ti = {x: i for i, x in enumerate(tickers)}
    opn = np.full((len(tickers), len(dates)), np.nan)
    close = np.full_like(opn, np.nan)
    for (date, ticker), (o, c) in records.items():
        opn[ti[ticker], di[date]] = o
        close[ti[ticker], di[date]] = c
    return PriceSeries(tickers, dates, opn, close)


def write_prices_csv(prices: PriceSeries, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "ticker", "open", "close"])
        for t, date in enumerate(prices.dates):
            for i, ticker in enumerate(prices.tickers):
                if np.isnan(prices.close[i, t]):
                    continue
                out.writerow([date, ticker, repr(float(prices.open[i, t])), repr(float(prices.close[i, t]))])


def read_counts_csv(path, dates=None) -> ArticleCounts:
    """Read ``date,word,doc_count`` rows; absent (word, date) pairs count as 0.

    ``dates`` fixes the day axis (e.g. the trading days of the price file);
    rows on other dates are dropped.
    """
    path = Path(path)
    records = {}
    for lineno, (date, word, cnt) in _rows(path, ["date", "word", "doc_count"]):
        value = _num(path, lineno, cnt)
        if value < 0:
            raise DataError(f"{path}:{lineno}: negative count")
        records[(date, word)] = records.get((date, word), 0.0) + value
    if dates is None:
        dates = sorted({k[0] for k in records})
    words = sorted({k[1] for k in records})
    di = {x: i for i, x in enumerate(dates)}
    wi = {x: i for i, x in enumerate(words)}
    counts = np.zeros((len(words), len(dates)))
    for (date, word), value in records.items():
        if date in di:
            counts[wi[word], di[date]] = value
    return ArticleCounts(words, list(dates), counts)


def write_counts_csv(counts: ArticleCounts, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "word", "doc_count"])
        for t, date in enumerate(counts.dates):
            for j, word in enumerate(counts.words):
                if counts.counts[j, t]:
                    out.writerow([date, word, int(counts.counts[j, t])])
