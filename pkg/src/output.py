"""
Result containers for the scenarios and their CSV/JSON writers.

Every number is written with 12 significant digits so that identical
configurations produce byte-identical files.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import io
import json
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

PROBABILITY_LABELS = ("P_e", "P_mu", "P_tau")
SIGNIFICANT_DIGITS = 12
COMPARE_TOLERANCE = 1e-8

Number = Union[int, float, np.integer, np.floating]


def format_number(value: Number) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    # adding 0.0 turns -0.0 into 0.0
    return format(float(value) + 0.0, f".{SIGNIFICANT_DIGITS}g")


def json_number(value: Number) -> Optional[Union[int, float]]:
    """Same rounding as the CSV writer; non-finite values become null."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(format(value + 0.0, f".{SIGNIFICANT_DIGITS}g"))


def _json_value(value: Any) -> Any:
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return json_number(value)
    return value


def _csv_table(header: Sequence[str], rows: Sequence[Sequence[Any]], comments: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    buffer.write(",".join(header) + "\n")
    for row in rows:
        buffer.write(",".join(
            value if isinstance(value, str) else format_number(value) for value in row
        ) + "\n")
    return buffer.getvalue()


def _json_document(meta: Dict[str, Any], header: Sequence[str], rows: Sequence[Sequence[Any]], **extra) -> str:
    document: Dict[str, Any] = {"meta": meta}
    for key, value in extra.items():
        if value is not None:
            document[key] = {name: _json_value(item) for name, item in value.items()}
    document["rows"] = [
        {name: _json_value(value) for name, value in zip(header, row)} for row in rows
    ]
    return json.dumps(document, indent=2) + "\n"


class _Table:
    """Shared writer plumbing: subclasses provide header(), rows() and meta."""

    meta: Dict[str, Any]

    def header(self) -> List[str]:
        raise NotImplementedError

    def rows(self) -> List[List[Any]]:
        raise NotImplementedError

    def comments(self) -> List[str]:
        return []

    def extra(self) -> Dict[str, Optional[Dict[str, Any]]]:
        return {}

    def to_csv(self) -> str:
        return _csv_table(self.header(), self.rows(), self.comments())

    def to_json(self) -> str:
        return _json_document(self.meta, self.header(), self.rows(), **self.extra())

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown output format: {fmt!r}")


@dataclass
class ProbabilitySeries(_Table):
    steps: np.ndarray
    times: np.ndarray
    probabilities: np.ndarray
    norms: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)
    oracle: Optional[Dict[str, Any]] = None

    @property
    def n_flavors(self) -> int:
        return self.probabilities.shape[1]

    @property
    def labels(self) -> List[str]:
        return list(PROBABILITY_LABELS[: self.n_flavors])

    def column(self, label: str) -> np.ndarray:
        return self.probabilities[:, self.labels.index(label)]

    def header(self) -> List[str]:
        return ["step", "time", *self.labels, "norm"]

    def rows(self) -> List[List[Any]]:
        return [
            [int(step), time, *probabilities, norm]
            for step, time, probabilities, norm in zip(self.steps, self.times, self.probabilities, self.norms)
        ]

    def comments(self) -> List[str]:
        if self.oracle is None:
            return []
        return [
            f"{key}={value if isinstance(value, str) else format_number(value)}"
            for key, value in self.oracle.items()
        ]

    def extra(self):
        return {"oracle": self.oracle}


@dataclass
class LevelTable(_Table):
    x: np.ndarray
    rho: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    gap: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def header(self) -> List[str]:
        return ["x", "rho", "E1m", "E2m", "gap"]

    def rows(self) -> List[List[Any]]:
        return [list(row) for row in zip(self.x, self.rho, self.e1, self.e2, self.gap)]

    @property
    def resonance_x(self) -> float:
        """Position of the smallest gap."""
        return float(self.x[int(np.argmin(self.gap))])


@dataclass
class ComparisonReport(_Table):
    labels: List[str]
    deviations: List[float]
    tolerance: float = COMPARE_TOLERANCE
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def header(self) -> List[str]:
        return ["flavor", "max_abs_deviation"]

    def rows(self) -> List[List[Any]]:
        return [[label, deviation] for label, deviation in zip(self.labels, self.deviations)] + [
            ["all", self.max_deviation]
        ]

    def extra(self):
        return {"summary": {"tolerance": self.tolerance, "passed": self.passed}}


@dataclass
class ExperimentMapping(_Table):
    theta1: float
    theta2: float
    kappa: float
    epsilon: float
    steps: int
    target_phase: float
    achieved_phase: float
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def relative_residual(self) -> float:
        if self.target_phase == 0.0:
            return abs(self.achieved_phase)
        return abs(self.achieved_phase - self.target_phase) / abs(self.target_phase)

    def header(self) -> List[str]:
        return [
            "theta1", "theta2", "kappa", "epsilon", "steps",
            "target_phase", "achieved_phase", "relative_residual",
        ]

    def rows(self) -> List[List[Any]]:
        return [[
            self.theta1, self.theta2, self.kappa, self.epsilon, int(self.steps),
            self.target_phase, self.achieved_phase, self.relative_residual,
        ]]


ScenarioResult = Union[ProbabilitySeries, LevelTable, ComparisonReport, ExperimentMapping]


def write_output(result: ScenarioResult, fmt: str, path: Optional[Union[str, Path]] = None) -> str:
    """Render `result` and write it to `path` when given; returns the text."""
    text = result.render(fmt)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        logger.info(f"Wrote {type(result).__name__} to {path}")
    return text
