"""
Serialization of run output.

Records stream line by line (JSONL or CSV) and are flushed after every
line, so an interrupted run leaves a valid prefix. Tables go through pandas.
Floats carry settings.FLOAT_DIGITS significant digits; NaN is written as
null (JSON) or an empty cell (CSV).
"""

import contextlib
import csv
import json
import math
import sys
from fractions import Fraction
from typing import IO, Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from app.config import settings
from app.core.oracle import ExactDistribution, StirlingRow
from app.core.stats import ExperimentPlan, normalize_values


def format_float(value: float) -> str:
    if not math.isfinite(value):
        return ""
    return f"{value:.{settings.FLOAT_DIGITS}g}"


def _encode(obj: Any) -> str:
    if isinstance(obj, np.generic):
        obj = obj.item()
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj) or "null"
    if isinstance(obj, Fraction):
        return json.dumps(f"{obj.numerator}/{obj.denominator}")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any) -> str:
    """JSON text with fixed-digit floats and null for NaN."""
    return _encode(obj)


def _cell(value: Any) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


@contextlib.contextmanager
def open_output(path: Optional[str]) -> Iterator[IO[str]]:
    """Yield a text stream for `path`; None or "-" is stdout."""
    if path is None or path == "-":
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        yield handle


class RecordWriter:
    """Line-flushed writer for flat records."""

    def __init__(self, stream: IO[str], fmt: str = "jsonl"):
        if fmt not in ("jsonl", "csv"):
            raise ValueError(f"Unknown output format: {fmt}")
        self.stream = stream
        self.fmt = fmt
        self._csv: Optional[Any] = None
        self._columns: Optional[List[str]] = None
        self.count = 0

    def write(self, record: Dict[str, Any]) -> None:
        if self.fmt == "jsonl":
            self.stream.write(dumps_json(record) + "\n")
        else:
            if self._csv is None:
                self._columns = list(record)
                self._csv = csv.writer(self.stream, lineterminator="\n")
                self._csv.writerow(self._columns)
            self._csv.writerow([_cell(record[c]) for c in self._columns])
        self.stream.flush()
        self.count += 1

    def write_all(self, records: Iterable[Dict[str, Any]]) -> int:
        for record in records:
            self.write(record)
        return self.count


# =========================================================================
# Tables
# =========================================================================


def _bools_as_text(frame: pd.DataFrame) -> pd.DataFrame:
    out = frame.copy()
    for column in out.columns:
        if out[column].dtype == bool:
            out[column] = out[column].map({True: "true", False: "false"})
    return out


def write_frame(frame: pd.DataFrame, stream: IO[str]) -> None:
    _bools_as_text(frame).to_csv(
        stream,
        index=False,
        float_format=f"%.{settings.FLOAT_DIGITS}g",
        lineterminator="\n",
    )
    stream.flush()


def histogram_frame(
    b: Sequence[int],
    genus: Sequence[int],
    plan: Optional[ExperimentPlan] = None,
) -> pd.DataFrame:
    """
    Joint (B, genus) counts, sorted by B then genus.

    With a normalizable plan the b_hat/g_hat columns place each cell on the
    limit-law scale.
    """
    frame = (
        pd.DataFrame({"B": np.asarray(b, dtype=np.int64), "genus": np.asarray(genus, dtype=np.int64)})
        .value_counts()
        .rename("count")
        .reset_index()
        .sort_values(["B", "genus"], kind="stable")
        .reset_index(drop=True)
    )
    if plan is not None and plan.normalizable:
        b_hat, g_hat = normalize_values(frame["B"].to_numpy(), frame["genus"].to_numpy(), plan)
        frame["b_hat"] = b_hat
        frame["g_hat"] = g_hat
    return frame


def marginal_counts(values: Sequence[int]) -> Dict[int, int]:
    counts = pd.Series(np.asarray(values, dtype=np.int64)).value_counts().sort_index()
    return {int(k): int(v) for k, v in counts.items()}


def exact_frame(distribution: ExactDistribution) -> pd.DataFrame:
    return pd.DataFrame(
        distribution.rows(),
        columns=["B", "genus", "connected", "numerator", "denominator"],
    )


def stirling_frame(row: StirlingRow) -> pd.DataFrame:
    """[m b] and the cycle-count law [m b]/m! for b = 1..m."""
    law = row.law()
    return pd.DataFrame({
        "b": list(range(1, row.m + 1)),
        "stirling": [str(v) for v in row.values],
        "numerator": [str(law[b].numerator) for b in range(1, row.m + 1)],
        "denominator": [str(law[b].denominator) for b in range(1, row.m + 1)],
        "probability": [float(law[b]) for b in range(1, row.m + 1)],
    })
