"""Daily trading simulation and performance metrics.

Strategies are long-only and unlevered with no transaction costs or
dividends. Value series start with the initial capital, followed by the
capital after each trading day's close.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .baselines import Portfolio
from .errors import DimensionError, UndefinedMetricError

__all__ = [
    "TradeLedger",
    "BacktestReport",
    "run_signal_strategy",
    "run_bah",
    "run_cbal",
    "daily_returns",
    "worst_day",
    "max_drawdown",
    "cvar",
    "cvar_5",
    "sharpe_vs_reference",
    "build_report",
    "write_report_csv",
    "read_report_csv",
    "write_values_csv",
    "REPORT_COLUMNS",
]

REPORT_COLUMNS = ["strategy", "return", "worst_day", "max_drawdown", "cvar", "sharpe"]


@dataclass
class TradeLedger:
    """Day-by-day record of a strategy.

    ``allocations[t]`` maps stock index to the capital put into it at the
    open of day ``t`` (empty for buy-and-hold and rebalancing runs, which
    are fully invested by construction).
    """

    open_capital: np.ndarray
    close_capital: np.ndarray
    allocations: list = field(default_factory=list)

    @property
    def values(self):
        """Initial capital followed by every day's closing capital."""
        return np.concatenate([self.open_capital[:1], self.close_capital])

    @property
    def multipliers(self):
        return self.close_capital / self.open_capital


def _prices(open_, close):
    open_ = np.asarray(open_, dtype=float)
    close = np.asarray(close, dtype=float)
    if open_.shape != close.shape or open_.ndim != 2:
        raise DimensionError(f"open{open_.shape} and close{close.shape} must be equal 2-D shapes")
    return open_, close


def run_signal_strategy(up, open_, close, capital: float = 1.0) -> TradeLedger:
    """Each morning split capital equally over stocks flagged ``up``; sell at the close.

    Parameters
    ----------
    up : (n, T) bool array
        Buy signal per stock and trading day.
    open_, close : (n, T) arrays
        Prices of the same trading days. A flagged stock with a missing
        (NaN) price is skipped with a warning and its share goes to the
        others.
    capital : float
        Starting capital.
    """
    open_, close = _prices(open_, close)
    up = np.asarray(up, dtype=bool)
    if up.shape != open_.shape:
        raise DimensionError(f"signal shape {up.shape} != price shape {open_.shape}")
    T = up.shape[1]
    opens = np.empty(T)
    closes = np.empty(T)
    allocs = []
    for t in range(T):
        picks = np.flatnonzero(up[:, t])
        priced = np.isfinite(open_[picks, t]) & np.isfinite(close[picks, t])
        if not priced.all():
            warnings.warn(f"day {t}: skipping {int((~priced).sum())} flagged stocks without prices", stacklevel=2)
            picks = picks[priced]
        opens[t] = capital
        if picks.size:
            share = capital / picks.size
            allocs.append({int(i): share for i in picks})
            capital = capital * float(np.mean(close[picks, t] / open_[picks, t]))
        else:
            allocs.append({})
        closes[t] = capital
    return TradeLedger(opens, closes, allocs)


def _ffill(a):
    """Carry the last finite value forward along each row."""
    out = a.copy()
    for t in range(1, out.shape[1]):
        gap = ~np.isfinite(out[:, t])
        out[gap, t] = out[gap, t - 1]
    return out


def run_bah(portfolio: Portfolio, open_, close, capital: float = 1.0) -> TradeLedger:
    """Buy at the first open according to the weights, then hold; marked at each close.

    Stocks without a first-day open are dropped and the remaining weights
    rescaled; missing closes are marked at the last known close.
    """
    open_, close = _prices(open_, close)
    w = portfolio.weights.copy()
    unpriced = (w > 0) & ~np.isfinite(open_[:, 0])
    if unpriced.any():
        warnings.warn(f"dropping {int(unpriced.sum())} holdings without a first-day open", stacklevel=2)
        total = w.sum()
        w[unpriced] = 0.0
        if w.sum() > 0:
            w *= total / w.sum()
    invested = w > 0
    shares = capital * w[invested] / open_[invested, 0]
    marks = _ffill(np.concatenate([open_[invested, :1], close[invested]], axis=1))[:, 1:]
    closes = capital * (1.0 - w.sum()) + shares @ marks
    opens = np.concatenate([[capital], closes[:-1]])
    return TradeLedger(opens, closes, [])


def run_cbal(portfolio: Portfolio, open_, close, capital: float = 1.0) -> TradeLedger:
    """Rebalance to fixed weights every day.

    The first day earns close over open; later days earn close over the
    previous close. On a day where a held stock lacks a price its weight is
    spread over the other holdings.
    """
    open_, close = _prices(open_, close)
    w = portfolio.weights
    invested = w > 0
    base = np.concatenate([open_[:, :1], close[:, :-1]], axis=1)
    growth = close[invested] / base[invested]
    wi = np.broadcast_to(w[invested, None], growth.shape).copy()
    missing = ~np.isfinite(growth)
    if missing.any():
        warnings.warn(f"{int(missing.sum())} holding-days without prices were reallocated", stacklevel=2)
        wi[missing] = 0.0
        growth = np.where(missing, 0.0, growth)
        kept = wi.sum(axis=0)
        scale = np.divide(w.sum(), kept, out=np.zeros_like(kept), where=kept > 0)
        wi *= scale
    mult = (1.0 - wi.sum(axis=0)) + (wi * growth).sum(axis=0)
    closes = capital * np.cumprod(mult)
    opens = np.concatenate([[capital], closes[:-1]])
    return TradeLedger(opens, closes, [])


def daily_returns(values):
    """Simple returns of a value series."""
    v = np.asarray(values, dtype=float)
    return v[1:] / v[:-1] - 1.0


def worst_day(values) -> float:
    """Smallest one-day simple return of a value series."""
    rets = daily_returns(values)
    if rets.size == 0:
        raise UndefinedMetricError("need at least two values")
    return float(rets.min())


def max_drawdown(values) -> float:
    """Largest fall from a running peak, as a fraction of that peak."""
    v = np.asarray(values, dtype=float)
    peak = np.maximum.accumulate(v)
    return float(np.max((peak - v) / peak))


def cvar(returns, level: float = 0.05) -> float:
    """Mean of the worst ``ceil(level * T)`` returns."""
    r = np.sort(np.asarray(returns, dtype=float))
    if r.size == 0:
        raise UndefinedMetricError("no returns")
    k = max(1, math.ceil(level * r.size - 1e-12))
    return float(r[:k].mean())


def cvar_5(returns) -> float:
    return cvar(returns, 0.05)


def sharpe_vs_reference(returns, reference) -> float:
    """Daily (unannualized) Sharpe ratio of returns in excess of a reference."""
    excess = np.asarray(returns, dtype=float) - np.asarray(reference, dtype=float)
    if excess.size < 2:
        raise UndefinedMetricError("need at least two days")
    sd = excess.std(ddof=1)
    if not sd > 1e-12 * float(np.abs(excess).max()):
        raise UndefinedMetricError("excess returns have zero variance")
    return float(excess.mean() / sd)


@dataclass
class BacktestReport:
    strategy: str
    cumulative_return: float
    worst_day: float
    max_drawdown: float
    cvar_5: float
    sharpe: float
    values: np.ndarray

    def row(self):
        return [self.strategy, self.cumulative_return, self.worst_day, self.max_drawdown, self.cvar_5, self.sharpe]


def build_report(name: str, ledger_or_values, reference_returns=None, strict: bool = True) -> BacktestReport:
    """Five-metric summary of one strategy.

    ``reference_returns`` are the benchmark's daily simple returns; without
    them the Sharpe ratio is taken against a zero return. With
    ``strict=False`` an undefined Sharpe ratio (e.g. the benchmark against
    itself) is reported as NaN instead of raising.
    """
    if isinstance(ledger_or_values, TradeLedger):
        values = ledger_or_values.values
    else:
        values = np.asarray(ledger_or_values, dtype=float)
    rets = daily_returns(values)
    ref = np.zeros_like(rets) if reference_returns is None else np.asarray(reference_returns, dtype=float)
    try:
        sharpe = sharpe_vs_reference(rets, ref)
    except UndefinedMetricError:
        if strict:
            raise
        sharpe = math.nan
    return BacktestReport(
        strategy=name,
        cumulative_return=float(values[-1] / values[0]),
        worst_day=worst_day(values),
        max_drawdown=max_drawdown(values),
        cvar_5=cvar_5(rets),
        sharpe=sharpe,
        values=values,
    )


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_report_csv(reports, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_COLUMNS)
        for rep in reports:
            out.writerow([rep.strategy] + [_fmt(x) for x in rep.row()[1:]])


def read_report_csv(path):
    """Rows of a report CSV as dicts of floats (empty cells become NaN)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({k: (v if k == "strategy" else (float(v) if v else math.nan)) for k, v in rec.items()})
    return rows


def write_values_csv(reports, dates, path):
    """Long-format ``date,strategy,value``; ``dates`` labels every entry of the value series."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "strategy", "value"])
        for rep in reports:
            if len(dates) != len(rep.values):
                raise DimensionError(f"{len(dates)} dates for {len(rep.values)} values")
            for date, v in zip(dates, rep.values):
                out.writerow([date, rep.strategy, repr(float(v))])
