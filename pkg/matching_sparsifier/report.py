import csv
import json
import logging

from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from matching_sparsifier import __version__
from matching_sparsifier.misc import ReportError


REPORT_SCHEMA_VERSION = 1

TRIAL_COLUMNS = [
    "trial",
    "seed",
    "q_size",
    "q_max_degree",
    "mu_q",
    "mu_full",
    "w_f",
    "w_g",
    "w_h",
    "w_x",
    "w_x_on_n",
    "valid",
    "residual",
    "degree_ok",
    "partition_ok",
    "iterations",
]


class TrialResult:
    """
    One end-to-end pipeline trial. Weights are exact rationals.
    """

    def __init__(
        self,
        trial: int,
        seed: int,
        q_size: int = 0,
        q_max_degree: int = 0,
        mu_q: Fraction = Fraction(0),
        mu_full: Fraction = Fraction(0),
        w_f: Fraction = Fraction(0),
        w_g: Fraction = Fraction(0),
        w_h: Fraction = Fraction(0),
        w_x: Fraction = Fraction(0),
        w_x_on_n: Fraction = Fraction(0),
        valid: bool = True,
        witnesses: Optional[list[str]] = None,
        residual: Fraction = Fraction(0),
        degree_ok: bool = True,
        partition_ok: bool = True,
        iterations: int = 0,
    ) -> None:
        self.trial = trial
        self.seed = seed
        self.q_size = q_size
        self.q_max_degree = q_max_degree
        self.mu_q = Fraction(mu_q)
        self.mu_full = Fraction(mu_full)
        self.w_f = Fraction(w_f)
        self.w_g = Fraction(w_g)
        self.w_h = Fraction(w_h)
        self.w_x = Fraction(w_x)
        self.w_x_on_n = Fraction(w_x_on_n)
        self.valid = valid
        self.witnesses = witnesses if witnesses is not None else []
        self.residual = Fraction(residual)
        self.degree_ok = degree_ok
        self.partition_ok = partition_ok
        self.iterations = iterations

    @property
    def hard_ok(self) -> bool:
        return (
            self.valid
            and self.residual == 0
            and self.degree_ok
            and self.partition_ok
        )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {}
        for column in TRIAL_COLUMNS:
            value = getattr(self, column)
            d[column] = str(value) if isinstance(value, Fraction) else value
        d["witnesses"] = list(self.witnesses)
        return d

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "TrialResult":
        result = TrialResult(int(d["trial"]), int(d["seed"]))
        for column in TRIAL_COLUMNS[2:]:
            current = getattr(result, column)
            value = d[column]
            if isinstance(current, Fraction):
                value = Fraction(value)
            setattr(result, column, value)
        result.witnesses = list(d.get("witnesses", []))
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialResult):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class Criterion:
    """
    A named acceptance check. Hard criteria decide the exit status; soft
    ones are measured and reported.
    """

    def __init__(
        self,
        name: str,
        passed: bool,
        hard: bool = True,
        detail: str = "",
        value: Optional[float] = None,
    ) -> None:
        self.name = name
        self.passed = passed
        self.hard = hard
        self.detail = detail
        self.value = value

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "hard": self.hard,
            "detail": self.detail,
            "value": self.value,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Criterion":
        return Criterion(d["name"], d["passed"], d["hard"], d["detail"], d["value"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Criterion):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class Report:
    def __init__(
        self,
        command: str,
        config: dict[str, Any],
        timestamps: bool = True,
    ) -> None:
        self.command = command
        self.config = config
        self.tool_version = __version__
        self.created: Optional[str] = (
            datetime.now(timezone.utc).isoformat(timespec="seconds")
            if timestamps
            else None
        )
        self.metrics: dict[str, Any] = {}
        self.criteria: list[Criterion] = []
        self.trials: list[TrialResult] = []
        self.series: list[dict[str, Any]] = []
        self.degree_histogram: dict[str, int] = {}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria if c.hard)

    def add_criterion(self, criterion: Criterion) -> None:
        level = logging.INFO if criterion.passed else logging.WARNING
        logging.log(level, f"{criterion.name}: {'pass' if criterion.passed else 'FAIL'}")
        self.criteria.append(criterion)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "command": self.command,
            "created": self.created,
            "config": self.config,
            "passed": self.passed,
            "metrics": self.metrics,
            "criteria": [c.to_dict() for c in self.criteria],
            "series": self.series,
            "degree_histogram": self.degree_histogram,
            "trials": [t.to_dict() for t in self.trials],
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Report":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ReportError(f"Unsupported report schema: {d.get('schema_version')}")
        report = Report(d["command"], d["config"], timestamps=False)
        report.tool_version = d["tool_version"]
        report.created = d["created"]
        report.metrics = d["metrics"]
        report.criteria = [Criterion.from_dict(c) for c in d["criteria"]]
        report.series = d["series"]
        report.degree_histogram = d["degree_histogram"]
        report.trials = [TrialResult.from_dict(t) for t in d["trials"]]
        return report

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Report):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def summary(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.criteria:
            status = "pass" if c.passed else "FAIL"
            kind = "hard" if c.hard else "soft"
            lines.append(f"  [{status}] ({kind}) {c.name} {c.detail}".rstrip())
        return "\n".join(lines)


def trials_path(path: Path) -> Path:
    return path.with_suffix(".csv")


def emit_report(report: Report, path: Path) -> None:
    """
    Writes the report as JSON at `path` and its trials as CSV next to it.
    """
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(trials_path(path), "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(TRIAL_COLUMNS)
            for trial in report.trials:
                row = trial.to_dict()
                writer.writerow([row[column] for column in TRIAL_COLUMNS])
    except OSError as e:
        raise ReportError(f"Cannot write report {path}: {e}") from e
    logging.debug(f"Report written to {path}")


def load_report(path: Path) -> Report:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return Report.from_dict(json.load(f))
    except OSError as e:
        raise ReportError(f"Cannot read report {path}: {e}") from e
    except (KeyError, ValueError) as e:
        raise ReportError(f"Malformed report {path}: {e}") from e


def write_certificate(certificate: dict[str, Any], path: Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(certificate, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise ReportError(f"Cannot write certificate {path}: {e}") from e
