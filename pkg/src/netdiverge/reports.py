"""Per-window detection reports and their CSV wire format.

CSV schema: ``window_start,window_end,detector,statistic,eta,is_anomaly``
with an infinite statistic spelled ``inf``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import MalformedRow


class Detector(str, Enum):
    MODEL_FREE = "model_free"
    MMP = "mmp"
    MEAN_BASELINE = "mean_baseline"


@dataclass(frozen=True)
class WindowReport:
    window_start: int
    window_end: int
    detector: Detector
    statistic: float  # nats (z-score for the mean baseline); may be inf
    eta: float
    is_anomaly: bool

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ValueError("window_end must exceed window_start")
        if self.statistic < 0 or self.eta < 0:
            raise ValueError("statistic and eta are non-negative")
        if self.is_anomaly != (self.statistic >= self.eta):
            raise ValueError("is_anomaly must equal statistic >= eta")

    @property
    def span(self) -> int:
        return self.window_end - self.window_start


def make_report(start: int, end: int, detector: Detector, statistic: float, eta: float) -> WindowReport:
    return WindowReport(start, end, detector, statistic, eta, statistic >= eta)


def _format_stat(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def write_reports_csv(reports: list[WindowReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", "window_end", "detector", "statistic", "eta", "is_anomaly"])
        for r in reports:
            writer.writerow(
                [
                    r.window_start,
                    r.window_end,
                    r.detector.value,
                    _format_stat(r.statistic),
                    repr(float(r.eta)),
                    "true" if r.is_anomaly else "false",
                ]
            )


def read_reports_csv(path: str | Path) -> list[WindowReport]:
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                reports.append(
                    WindowReport(
                        int(row["window_start"]),
                        int(row["window_end"]),
                        Detector(row["detector"]),
                        float(row["statistic"]),
                        float(row["eta"]),
                        row["is_anomaly"] == "true",
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedRow(lineno, f"bad report row: {exc}") from exc
    return reports
