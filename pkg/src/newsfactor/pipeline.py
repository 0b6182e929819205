"""End-to-end stages operating on directories of CSV files.

Layout under the run directory::

    data/      returns.csv mask.csv intensity.csv open.csv close.csv
    model/     u.csv w.csv meta.txt history.csv
    predict/   predictions.csv accuracy.csv predictions_<baseline>.csv
    backtest/  report.csv values.csv
    report/    w_heatmap.csv u_adjacency.csv stock_accuracy.csv cumulative_returns.csv

Every prediction for day ``t`` uses only that morning's word intensities,
closes up to day ``t-1`` and parameters fitted on the training days.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import baselines as bl
from .admm import FactorModel, SolverConfig, fit
from .data import (PriceSeries, Split, compute_log_returns, compute_word_intensity, make_split,
                   read_counts_csv, read_prices_csv)
from .errors import DataError
from .io import atomic_outputs, load_model, read_keyvalue, read_matrix_csv, save_model, write_matrix_csv
from .predict import correlation_distance, direction_hits, directional_accuracy, predict_returns

__all__ = [
    "RunConfig",
    "Dataset",
    "load_dataset",
    "run_prepare",
    "run_train",
    "run_predict",
    "run_backtest",
    "run_report",
    "BASELINES",
]

log = logging.getLogger(__name__)

BASELINES = ("previous_x", "previous_r", "ar_x", "ar_r", "regress_x", "regress_r")


@dataclass
class RunConfig:
    """Everything a pipeline run needs. Paths default to subdirectories of ``out``."""

    out: str = "run"
    prices: str | None = None
    counts: str | None = None
    data_dir: str | None = None
    model_dir: str | None = None
    reference: str | None = None
    seed: int = 0
    d: int = 10
    lam: float = SolverConfig.lam
    mu: float = SolverConfig.mu
    rho: float = SolverConfig.rho
    max_iters: int = SolverConfig.max_iters
    tol: float = SolverConfig.tol_primal
    window: int = 60
    z_threshold: float = 3.0
    z_mode: str = "threshold"
    split: tuple | None = None
    eval_range: str = "test"
    baselines: tuple = BASELINES
    ar_order: int = bl.AR_ORDER
    mvp_basis: str = "pooled"

    _KEYS = {"lambda": "lam", "max-iters": "max_iters", "z-threshold": "z_threshold", "z-mode": "z_mode",
             "range": "eval_range", "data-dir": "data_dir", "model-dir": "model_dir", "ar-order": "ar_order",
             "mvp-basis": "mvp_basis"}

    def __post_init__(self):
        self.solver  # validates numeric fields
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.z_mode not in ("threshold", "clip"):
            raise ValueError(f"z_mode must be 'threshold' or 'clip', got {self.z_mode!r}")
        if self.eval_range not in ("train", "val", "test"):
            raise ValueError(f"range must be train, val or test, got {self.eval_range!r}")
        unknown = set(self.baselines) - set(BASELINES)
        if unknown:
            raise ValueError(f"unknown baselines: {sorted(unknown)}")

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(d=self.d, lam=self.lam, mu=self.mu, rho=self.rho, max_iters=self.max_iters,
                            tol_primal=self.tol, seed=self.seed)

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir) if self.data_dir else Path(self.out) / "data"

    @property
    def model_path(self) -> Path:
        return Path(self.model_dir) if self.model_dir else Path(self.out) / "model"

    def stage_path(self, stage) -> Path:
        return Path(self.out) / stage

    @classmethod
    def from_mapping(cls, mapping: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Build from string values (config file or flags), on top of ``base``."""
        types = {f.name: f.type for f in fields(cls)}
        updates = {}
        for raw_key, raw in mapping.items():
            key = cls._KEYS.get(raw_key, raw_key.replace("-", "_"))
            if key not in types or key.startswith("_"):
                raise ValueError(f"unknown config key {raw_key!r}")
            updates[key] = _coerce(key, raw)
        return replace(base or cls(), **updates)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        merged = dict(read_keyvalue(path))
        merged.update(overrides or {})
        return cls.from_mapping(merged)


def _coerce(key, raw):
    if not isinstance(raw, str):
        return raw
    if key in ("seed", "d", "max_iters", "window", "ar_order"):
        return int(raw)
    if key in ("lam", "mu", "rho", "tol", "z_threshold"):
        return float(raw)
    if key == "split":
        parts = [int(x) for x in raw.split(",")]
        if len(parts) != 2:
            raise ValueError("split must be two comma-separated day indices")
        return tuple(parts)
    if key == "baselines":
        raw = raw.strip()
        if raw in ("", "none"):
            return ()
        if raw == "all":
            return BASELINES
        return tuple(x.strip() for x in raw.split(","))
    return raw


@dataclass
class Dataset:
    """Prepared matrices. Return-day matrices have ``s`` columns, price matrices ``s + 1``."""

    tickers: list
    words: list
    dates: list  # price days 0..s
    r: np.ndarray
    mask: np.ndarray
    y: np.ndarray
    open: np.ndarray
    close: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def s(self):
        return self.r.shape[1]

    def split(self, boundaries) -> Split:
        if boundaries is None:
            b1 = int(round(0.7 * self.s))
            boundaries = (b1, b1 + (self.s - b1) // 2)
        return make_split(self.s, boundaries)


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------

def build_dataset(prices: PriceSeries, counts, window=60, z_threshold=3.0, z_mode="threshold") -> Dataset:
    r, mask = compute_log_returns(prices)
    if counts.counts.shape[0] == 0:
        warnings.warn("no article counts: word intensities are empty", stacklevel=2)
    y_all = compute_word_intensity(counts.counts.reshape(len(counts.words), len(prices.dates)),
                                   window, z_threshold, z_mode)
    return Dataset(list(prices.tickers), list(counts.words), list(prices.dates), r, mask,
                   y_all[:, 1:], prices.open, prices.close)


def save_dataset(ds: Dataset, directory):
    directory = Path(directory)
    days = ds.dates[1:]
    write_matrix_csv(directory / "returns.csv", ds.r, ds.tickers, days, corner="ticker")
    write_matrix_csv(directory / "mask.csv", ds.mask.astype(float), ds.tickers, days, corner="ticker")
    write_matrix_csv(directory / "intensity.csv", ds.y, ds.words, days, corner="word")
    write_matrix_csv(directory / "open.csv", ds.open, ds.tickers, ds.dates, corner="ticker")
    write_matrix_csv(directory / "close.csv", ds.close, ds.tickers, ds.dates, corner="ticker")


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    for name in ("returns.csv", "mask.csv", "intensity.csv", "open.csv", "close.csv"):
        if not (directory / name).exists():
            raise FileNotFoundError(f"dataset file {directory / name} not found; run prepare first")
    r, tickers, _ = read_matrix_csv(directory / "returns.csv")
    mask, _, _ = read_matrix_csv(directory / "mask.csv")
    y, words, _ = read_matrix_csv(directory / "intensity.csv")
    opn, _, dates = read_matrix_csv(directory / "open.csv")
    close, _, _ = read_matrix_csv(directory / "close.csv")
    if y.shape[0] == 0:
        y = np.zeros((0, r.shape[1]))
    return Dataset(tickers, words, dates, r, mask.astype(bool), y, opn, close)


def run_prepare(cfg: RunConfig) -> Path:
    """Raw CSVs to dataset matrices."""
    prices = read_prices_csv(cfg.prices)
    counts = read_counts_csv(cfg.counts, dates=prices.dates)
    ds = build_dataset(prices, counts, cfg.window, cfg.z_threshold, cfg.z_mode)
    with atomic_outputs(cfg.data_path) as tmp:
        save_dataset(ds, tmp)
    return cfg.data_path


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def run_train(cfg: RunConfig):
    ds = load_dataset(cfg.data_path)
    if len(ds.words) == 0:
        raise DataError("no words in the dataset; cannot fit a word mapping")
    split = ds.split(cfg.split)
    cols = Split.columns(split.train)
    if split.train.stop - split.train.start < 1:
        raise DataError("empty training range")
    solver = cfg.solver
    model, state = fit(ds.r[:, cols], ds.y[:, cols], solver)
    meta = {
        "d": solver.d, "lambda": repr(solver.lam), "mu": repr(solver.mu), "rho": repr(solver.rho),
        "seed": solver.seed, "max_iters": solver.max_iters, "tol": repr(solver.tol_primal),
        "train_start": ds.dates[split.train.start], "train_end": ds.dates[split.train.stop - 1],
        "train_days": f"{split.train.start}-{split.train.stop - 1}",
        "iterations": state.iter, "converged": state.converged,
    }
    with atomic_outputs(cfg.model_path) as tmp:
        save_model(model, tmp, ds.tickers, ds.words, meta)
        with open(tmp / "history.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            keys = list(state.history)
            out.writerow(["iter", *keys])
            for i, row in enumerate(zip(*(state.history[k] for k in keys)), start=1):
                out.writerow([i, *(repr(float(v)) for v in row)])
    return model, state


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def _eval_days(ds: Dataset, cfg: RunConfig) -> range:
    split = ds.split(cfg.split)
    days = getattr(split, cfg.eval_range)
    if len(days) == 0:
        raise DataError(f"the {cfg.eval_range} range is empty")
    return days


def _ffill_close(close):
    out = close.copy()
    for t in range(1, out.shape[1]):
        gap = np.isnan(out[:, t])
        out[gap, t] = out[gap, t - 1]
    return out


def model_forecast(model: FactorModel, ds: Dataset, days: range):
    """``r_hat`` (n, len(days)) from each day's own word intensities."""
    return predict_returns(model, ds.y[:, Split.columns(days)])


def baseline_forecasts(ds: Dataset, split: Split, days: range, which, ar_order=bl.AR_ORDER):
    """Return forecasts (n, len(days)) for each requested baseline."""
    cols = Split.columns(days)
    t0, t1 = days.start, days.stop  # price columns t0..t1-1 are the evaluated days
    close = _ffill_close(ds.close)
    train_cols = Split.columns(split.train)
    out = {}
    if "previous_x" in which:
        out["previous_x"] = np.log(bl.previous_x(close)[:, cols] / close[:, t0 - 1:t1 - 1])
    if "previous_r" in which:
        out["previous_r"] = bl.previous_r(ds.r)[:, cols]
    if "ar_r" in which or "ar_x" in which:
        for kind in ("ar_r", "ar_x"):
            if kind not in which:
                continue
            r_hat = np.zeros((ds.r.shape[0], len(days)))
            for i in range(ds.r.shape[0]):
                if kind == "ar_r":
                    series = ds.r[i]
                    model = bl.ar_fit(series[train_cols], ar_order)
                    r_hat[i] = _ar_days(model, series, cols.start, cols.stop, ar_order)
                else:
                    series = close[i]
                    model = bl.ar_fit(series[: split.train.stop], ar_order)
                    x_hat = _ar_days(model, series, t0, t1, ar_order)
                    r_hat[i] = np.log(np.maximum(x_hat, 1e-300) / series[t0 - 1:t1 - 1])
            out[kind] = r_hat
    for kind, values in (("regress_r", ds.r), ("regress_x", close[:, 1:])):
        if kind not in which:
            continue
        val = values[:, Split.columns(split.val)] if len(split.val) else None
        reg = bl.cross_regress(values[:, train_cols], val)
        prev = values[:, cols.start - 1:cols.stop - 1] if cols.start >= 1 else None
        if prev is None:
            # first return day has no previous return/close in this frame
            prev = np.concatenate([close[:, :1] if kind == "regress_x" else np.zeros((values.shape[0], 1)),
                                   values[:, : cols.stop - 1]], axis=1)
        pred = reg.predict(prev)
        if kind == "regress_r":
            out[kind] = pred
        else:
            out[kind] = np.log(np.maximum(pred, 1e-300) / close[:, t0 - 1:t1 - 1])
    return out


def _ar_days(model, series, start, stop, p):
    """AR forecasts for ``series[start:stop]``.

    Positions with fewer than ``p`` earlier values repeat the last observed
    value (0 when there is none).
    """
    pred = np.zeros(stop - start)
    first = max(start, p)
    if first < stop:
        pred[first - start:] = bl.ar_forecast(model, series[:stop], first)
    for k in range(start, min(first, stop)):
        pred[k - start] = series[k - 1] if k >= 1 else 0.0
    return pred


def _write_predictions(path, ds: Dataset, days: range, r_hat):
    cols = Split.columns(days)
    mask = ds.mask[:, cols]
    prev_close = ds.close[:, days.start - 1:days.stop - 1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "ticker", "r_hat", "x_hat", "direction"])
        for k, t in enumerate(days):
            for i, ticker in enumerate(ds.tickers):
                if not mask[i, k]:
                    continue
                rh = float(r_hat[i, k])
                out.writerow([ds.dates[t], ticker, repr(rh), repr(float(prev_close[i, k] * np.exp(rh))),
                              "up" if rh > 0 else "down"])


def run_predict(cfg: RunConfig):
    """Model and baseline forecasts for the evaluation range, with accuracies."""
    ds = load_dataset(cfg.data_path)
    model, _, _, _ = load_model(cfg.model_path)
    split = ds.split(cfg.split)
    days = _eval_days(ds, cfg)
    cols = Split.columns(days)
    actual, mask = ds.r[:, cols], ds.mask[:, cols]
    forecasts = {"model": model_forecast(model, ds, days)}
    forecasts.update(baseline_forecasts(ds, split, days, cfg.baselines, cfg.ar_order))
    with atomic_outputs(cfg.stage_path("predict")) as tmp:
        _write_predictions(tmp / "predictions.csv", ds, days, forecasts["model"])
        with open(tmp / "accuracy.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["model", "accuracy"])
            for name, r_hat in forecasts.items():
                try:
                    acc = repr(float(directional_accuracy(r_hat, actual, mask)))
                except ValueError:
                    acc = ""
                out.writerow([name, acc])
                if name != "model":
                    _write_predictions(tmp / f"predictions_{name}.csv", ds, days, r_hat)
    return forecasts


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

def _read_reference(path, dates):
    """Reference index levels aligned to ``dates``."""
    levels = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "value"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header date,value")
        for lineno, rec in enumerate(reader, start=2):
            try:
                levels[rec["date"].strip()] = float(rec["value"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: bad value") from None
    missing = [d for d in dates if d not in levels]
    if missing:
        raise DataError(f"{path}: no reference value for {missing[0]}")
    return np.array([levels[d] for d in dates])


def run_backtest(cfg: RunConfig):
    """Signal strategy plus uniform, minimum-variance and reference benchmarks."""
    ds = load_dataset(cfg.data_path)
    model, _, _, _ = load_model(cfg.model_path)
    split = ds.split(cfg.split)
    days = _eval_days(ds, cfg)
    px = slice(days.start, days.stop)
    opn, close = ds.open[:, px], ds.close[:, px]
    r_hat = model_forecast(model, ds, days)
    up = (r_hat > 0) & ds.mask[:, Split.columns(days)]
    value_dates = ds.dates[days.start - 1:days.stop]
    ref_rets = None
    reports = []
    if cfg.reference:
        levels = _read_reference(cfg.reference, value_dates)
        levels = levels / levels[0]
        ref_rets = bt.daily_returns(levels)
        # same returns on both sides, so the excess is exactly zero and Sharpe comes out NaN
        reports.append(bt.build_report("reference", levels, ref_rets, strict=False))
    reports.append(bt.build_report("model", bt.run_signal_strategy(up, opn, close), ref_rets, strict=False))
    n = len(ds.tickers)
    uni = bl.uniform_portfolio(n)
    train_simple = np.expm1(ds.r[:, Split.columns(split.train)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mvp = bl.min_variance_portfolio(train_simple, target_basis=cfg.mvp_basis)
    for name, port in (("U", uni), ("MVP", mvp)):
        reports.append(bt.build_report(f"{name}-BAH", bt.run_bah(port, opn, close), ref_rets, strict=False))
        reports.append(bt.build_report(f"{name}-CBAL", bt.run_cbal(port, opn, close), ref_rets, strict=False))
    with atomic_outputs(cfg.stage_path("backtest")) as tmp:
        bt.write_report_csv(reports, tmp / "report.csv")
        bt.write_values_csv(reports, value_dates, tmp / "values.csv")
        write_matrix_csv(tmp / "weights.csv", np.vstack([uni.weights, mvp.weights]), ["U", "MVP"],
                         ds.tickers, corner="portfolio")
    return reports


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def run_report(cfg: RunConfig):
    """Plot-ready data: W heatmap, U adjacency, per-stock accuracy, cumulative returns."""
    ds = load_dataset(cfg.data_path)
    model, tickers, words, _ = load_model(cfg.model_path)
    values_path = cfg.stage_path("backtest") / "values.csv"
    if not values_path.exists():
        raise FileNotFoundError(f"{values_path} not found; run backtest first")
    days = _eval_days(ds, cfg)
    cols = Split.columns(days)
    hits, eligible = direction_hits(model_forecast(model, ds, days), ds.r[:, cols], ds.mask[:, cols])
    counts = {}
    if cfg.counts and Path(cfg.counts).exists():
        with open(cfg.counts, newline="") as fh:
            for rec in csv.DictReader(fh):
                key = rec["word"].strip().lower()
                counts[key] = counts.get(key, 0.0) + float(rec["doc_count"])
    with atomic_outputs(cfg.stage_path("report")) as tmp:
        factors = [f"f{k}" for k in range(model.d)]
        write_matrix_csv(tmp / "w_heatmap.csv", model.w, factors, words, corner="factor")
        write_matrix_csv(tmp / "u_adjacency.csv", correlation_distance(model.u), tickers, tickers, corner="ticker")
        with open(tmp / "stock_accuracy.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["ticker", "accuracy", "eligible_days", "mentions"])
            for i, ticker in enumerate(ds.tickers):
                n_ok = int(eligible[i].sum())
                acc = repr(float(hits[i].sum() / n_ok)) if n_ok else ""
                out.writerow([ticker, acc, n_ok, int(counts.get(ticker.lower(), 0))])
        with open(values_path, newline="") as src, open(tmp / "cumulative_returns.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["date", "strategy", "cumulative_return"])
            first = {}
            for rec in csv.DictReader(src):
                v = float(rec["value"])
                base = first.setdefault(rec["strategy"], v)
                out.writerow([rec["date"], rec["strategy"], repr(v / base)])
    return cfg.stage_path("report")
