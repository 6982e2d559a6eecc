"""Per-period metrics log and its CSV serialization."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class MetricsLog:
    """Time series sampled once per control period.

    Columns are fixed at construction: the common counters plus one dRTT
    column per receiver and one throughput column per flow.
    """

    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)

    def append(self, values: dict[str, float]) -> None:
        self.rows.append([float(values[c]) for c in self.columns])

    def column(self, name: str) -> list[float]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def select(self, name: str, t_lo: float, t_hi: float) -> list[float]:
        """Values of a column for samples with t_lo < time <= t_hi."""
        t_idx = self.columns.index("time")
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows if t_lo < row[t_idx] <= t_hi]


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return format(value, ".6g")


def emit_csv(log: MetricsLog, path: str) -> None:
    """Write the log as UTF-8 CSV, LF line endings, 6 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(log.columns) + "\n")
            for row in log.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metrics CSV to {path!r}: {exc}") from exc
