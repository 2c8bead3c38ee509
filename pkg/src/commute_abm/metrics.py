"""Output indicators and result files.

Four indicators are tracked per decision period: mode shares, accident rate
per 100,000 people, CO2 in tons for the represented population, and average
peak-hour speed.  The last three are reported overall (``mode="all"``) and
per mode.  Pollution is per simulated peak hour, not cumulative.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import MODES

INDICATORS = ("mode_share", "accident_rate", "co2_tons", "avg_speed")
ALL = "all"
# lower is better for these; higher for avg_speed
LOWER_IS_BETTER = {"accident_rate": True, "co2_tons": True, "avg_speed": False}


def indicator_keys():
    keys = [("mode_share", m) for m in MODES]
    for ind in INDICATORS[1:]:
        keys += [(ind, ALL)] + [(ind, m) for m in MODES]
    return keys


def mode_shares(modes) -> dict[str, float]:
    modes = np.asarray(modes)
    if len(modes) == 0:
        raise ValueError("mode shares of an empty population")
    counts = np.bincount(modes, minlength=len(MODES))
    return {m: counts[k] / len(modes) for k, m in enumerate(MODES)}


def accident_rate(flags, modes, n_agents: int | None = None) -> dict[str, float]:
    """Accidents per 100,000 represented people, overall and by mode.

    Every agent stands for the same number of people, so the scale cancels:
    a mode's rate is its accidents times 1e5 over the whole population, and
    the per-mode rates add up to the overall rate.
    """
    flags = np.asarray(flags, dtype=bool)
    modes = np.asarray(modes)
    n = len(modes) if n_agents is None else n_agents
    per_mode = np.bincount(modes[flags], minlength=len(MODES))
    out = {ALL: flags.sum() * 1e5 / n}
    out.update({m: per_mode[k] * 1e5 / n for k, m in enumerate(MODES)})
    return out


def co2_tons(log, scale: float) -> dict[str, float]:
    grams = np.bincount(log.mode, weights=log.co2_g, minlength=len(MODES))
    out = {ALL: float(log.co2_g.sum()) * scale / 1e6}
    out.update({m: grams[k] * scale / 1e6 for k, m in enumerate(MODES)})
    return out


def avg_speed(log) -> dict[str, float]:
    """Mean over agents of distance over time (km/h); NaN for modes nobody used."""
    moved = log.travel_time_min > 0
    if not moved.any():
        raise ValueError("no agent travelled")
    v = log.km_traveled[moved] / (log.travel_time_min[moved] / 60.0)
    m = log.mode[moved]
    out = {ALL: float(v.mean())}
    for k, name in enumerate(MODES):
        sel = m == k
        out[name] = float(v[sel].mean()) if sel.any() else float("nan")
    return out


@dataclass
class IndicatorRow:
    period: int
    mode_shares: dict[str, float]
    accident_rate_per_100k: dict[str, float]
    co2_tons: dict[str, float]
    avg_speed_kmh: dict[str, float]
    accidents: int = 0

    def values(self) -> dict[tuple[str, str], float]:
        out = {("mode_share", m): v for m, v in self.mode_shares.items()}
        out.update({("accident_rate", m): v for m, v in self.accident_rate_per_100k.items()})
        out.update({("co2_tons", m): v for m, v in self.co2_tons.items()})
        out.update({("avg_speed", m): v for m, v in self.avg_speed_kmh.items()})
        return out


def indicator_row(period: int, log, accidents, scale: float) -> IndicatorRow:
    return IndicatorRow(
        period=period,
        mode_shares=mode_shares(log.mode),
        accident_rate_per_100k=accident_rate(accidents, log.mode),
        co2_tons=co2_tons(log, scale),
        avg_speed_kmh=avg_speed(log),
        accidents=int(np.sum(accidents)),
    )


Z95 = 1.96


@dataclass
class IndicatorSeries:
    """Replicated indicator trajectories of one scenario.

    ``data[(indicator, mode)]`` has shape (replications, periods).
    """

    scenario: str
    data: dict[tuple[str, str], np.ndarray]
    rows: list[list[IndicatorRow]] = field(default_factory=list, repr=False)

    @classmethod
    def from_rows(cls, scenario: str, rows: list[list[IndicatorRow]]) -> "IndicatorSeries":
        if len(rows) < 2:
            raise ValueError("confidence intervals need at least 2 replications")
        data = {key: np.array([[r.values()[key] for r in rep] for rep in rows]) for key in indicator_keys()}
        return cls(scenario=scenario, data=data, rows=rows)

    @property
    def replications(self) -> int:
        return next(iter(self.data.values())).shape[0]

    @property
    def periods(self) -> int:
        return next(iter(self.data.values())).shape[1]

    def mean(self, indicator: str, mode: str = ALL) -> np.ndarray:
        return np.nanmean(self.data[(indicator, mode)], axis=0)

    def half_width(self, indicator: str, mode: str = ALL) -> np.ndarray:
        x = self.data[(indicator, mode)]
        n = np.sum(~np.isnan(x), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            sd = np.nanstd(x, axis=0, ddof=1)
            return Z95 * sd / np.sqrt(n)

    def ci(self, indicator: str, mode: str = ALL) -> tuple[np.ndarray, np.ndarray]:
        mu, hw = self.mean(indicator, mode), self.half_width(indicator, mode)
        return mu - hw, mu + hw


@dataclass
class ComparisonRow:
    period: int
    indicator: str
    mode: str
    base_mean: float
    policy_mean: float
    delta: float
    pct_change: float


def compare(base: IndicatorSeries, policy: IndicatorSeries) -> list[ComparisonRow]:
    if base.periods != policy.periods:
        raise ValueError(f"horizon mismatch: {base.periods} vs {policy.periods} periods")
    if set(base.data) != set(policy.data):
        raise ValueError("indicator sets differ")
    rows = []
    for t in range(base.periods):
        for ind, mode in indicator_keys():
            b = float(base.mean(ind, mode)[t])
            p = float(policy.mean(ind, mode)[t])
            pct = (p - b) / b * 100.0 if b != 0 else float("nan")
            rows.append(ComparisonRow(t, ind, mode, b, p, p - b, pct))
    return rows


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        # mkstemp creates 0600; give the result ordinary file permissions
        os.chmod(tmp, 0o666 & ~_umask())
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def shares_table(series_list):
    header = ["scenario", "period"]
    for m in MODES:
        header += [f"replication_mean_{m}", f"ci_lo_{m}", f"ci_hi_{m}"]
    body = []
    for s in series_list:
        stats = {m: (s.mean("mode_share", m), *s.ci("mode_share", m)) for m in MODES}
        for t in range(s.periods):
            row = [s.scenario, t]
            for m in MODES:
                row += [stats[m][0][t], stats[m][1][t], stats[m][2][t]]
            body.append(row)
    return header, body


def indicators_table(series_list):
    header = ["scenario", "period", "indicator", "mode", "mean", "ci_lo", "ci_hi"]
    body = []
    for s in series_list:
        stats = {k: (s.mean(*k), *s.ci(*k)) for k in indicator_keys()}
        for t in range(s.periods):
            for k in indicator_keys():
                mu, lo, hi = stats[k]
                body.append([s.scenario, t, k[0], k[1], mu[t], lo[t], hi[t]])
    return header, body


def comparison_table(rows: list[ComparisonRow]):
    header = ["period", "indicator", "mode", "base_mean", "policy_mean", "delta", "pct_change"]
    return header, [[r.period, r.indicator, r.mode, r.base_mean, r.policy_mean, r.delta, r.pct_change]
                    for r in rows]


def write_results(series_list, comparison, out_dir, plots: bool = False) -> list[Path]:
    """Write ``shares.csv``, ``indicators.csv`` and (given a comparison) ``comparison.csv``.

    Each file is written to a temporary name and renamed into place.
    Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, (header, body) in [("shares.csv", shares_table(series_list)),
                                     ("indicators.csv", indicators_table(series_list))]:
            _atomic_write(out / name, _csv(header, body))
            written.append(out / name)
        if comparison is not None:
            _atomic_write(out / "comparison.csv", _csv(*comparison_table(comparison)))
            written.append(out / "comparison.csv")
        if plots:
            written += plot_results(series_list, out)
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return written


def plot_results(series_list, out_dir) -> list[Path]:
    """Mode-share trajectories and the three indicator panels as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    styles = ["-", "--", ":", "-."]
    colors = dict(zip(MODES, ["tab:orange", "tab:blue", "tab:green"]))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for s, ls in zip(series_list, styles):
        t = np.arange(s.periods)
        for m in MODES:
            mu = s.mean("mode_share", m)
            lo, hi = s.ci("mode_share", m)
            ax.plot(t, mu, ls, color=colors[m], label=f"{m} ({s.scenario})")
            ax.plot(t, lo, ":", color=colors[m], lw=0.7)
            ax.plot(t, hi, ":", color=colors[m], lw=0.7)
    ax.set_xlabel("year")
    ax.set_ylabel("share of commuters")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    shares_png = out / "shares.png"
    fig.savefig(shares_png, dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    titles = {"accident_rate": "accidents per 100k", "co2_tons": "CO2 (t)", "avg_speed": "speed (km/h)"}
    for ax, ind in zip(axes, titles):
        for s, ls in zip(series_list, styles):
            t = np.arange(s.periods)
            lo, hi = s.ci(ind)
            ax.plot(t, s.mean(ind), ls, label=s.scenario)
            ax.fill_between(t, lo, hi, alpha=0.2)
        ax.set_title(titles[ind])
        ax.set_xlabel("year")
    axes[0].legend(fontsize="small")
    fig.tight_layout()
    ind_png = out / "indicators.png"
    fig.savefig(ind_png, dpi=120)
    plt.close(fig)
    return [shares_png, ind_png]
