"""Chain traces and finality reports: data model, parsing and serialization."""

import csv
import io
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np

from .errors import FormatError, GapError, RangeError

logger = logging.getLogger("tipset_finality")

TRACE_HEADER = ("round", "blocks")
REPORT_HEADER = ("round", "settlement", "view", "error_probability", "good_advantage")
TRACE_FORMATS = ("csv", "json")
# Plain ASCII decimal integers, optionally negative.
INTEGER = re.compile(r"-?[0-9]+")

NODE_VIEW = "node"
ACTOR_VIEW = "actor"


@dataclass(frozen=True, eq=False)
class ChainTrace:
    """Blocks per round of the observed heaviest chain, for consecutive rounds."""

    start_round: int
    counts: Tuple[int, ...]
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise FormatError("block counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        prefix = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
        prefix.setflags(write=False)
        object.__setattr__(self, "_prefix", prefix)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChainTrace):
            return NotImplemented
        return self.start_round == other.start_round and self.counts == other.counts

    def __hash__(self) -> int:
        return hash((self.start_round, self.counts))

    @property
    def end_round(self) -> int:
        """Last round covered by the trace."""
        return self.start_round + len(self.counts) - 1

    def covers(self, j: int, m: int) -> bool:
        return self.start_round <= j <= m <= self.end_round

    def require_window(self, j: int, m: int):
        """
        Raises:
            RangeError: If [j, m] is empty or not inside the trace
        """
        if j > m:
            raise RangeError(f"empty window [{j}, {m}]")
        if not self.covers(j, m):
            raise RangeError(
                f"window [{j}, {m}] outside trace rounds "
                f"[{self.start_round}, {self.end_round}]"
            )

    def count(self, r: int) -> int:
        """Blocks in the tipset of round r."""
        self.require_window(r, r)
        return self.counts[r - self.start_round]

    def window_sum(self, j: int, m: int) -> int:
        """
        chain[j, m]: total blocks over rounds j..m inclusive.

        Raises:
            RangeError: If the window is empty or outside the trace
        """
        self.require_window(j, m)
        return int(self._prefix[m - self.start_round + 1] - self._prefix[j - self.start_round])

    def good_advantage(self, s: int, c: int) -> int:
        """G(s, c) = chain[s+1, c]; the target round itself is not counted."""
        return self.window_sum(s + 1, c)

    def mean_tipset_size(self) -> float:
        return float(np.mean(self.counts)) if self.counts else 0.0

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return {"start_round": self.start_round, "counts": list(self.counts)}


def _read_text(source: Union[bytes, str, BinaryIO, TextIO]) -> str:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise FormatError(f"trace is not valid UTF-8: {e}")
    return source


def _parse_int(value: str, what: str, row: int) -> int:
    value = value.strip()
    if not INTEGER.fullmatch(value):
        raise FormatError(f"{what} is not an integer: {value!r}", row=row)
    return int(value)


def _parse_csv(text: str) -> ChainTrace:
    # rows are numbered by physical line, blank lines included
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [(reader.line_num, r) for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise FormatError("empty trace")
    header_line, header_row = rows[0]
    header = tuple(cell.strip().lower() for cell in header_row)
    if header != TRACE_HEADER:
        raise FormatError(f"expected header 'round,blocks', got {','.join(header_row)!r}", row=header_line)

    start_round = None
    counts: List[int] = []
    for line_no, row in rows[1:]:
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", row=line_no)
        rnd = _parse_int(row[0], "round", line_no)
        blocks = _parse_int(row[1], "block count", line_no)
        if blocks < 0:
            raise FormatError(f"negative block count {blocks}", row=line_no)
        if start_round is None:
            start_round = rnd
        else:
            expected = start_round + len(counts)
            if rnd > expected:
                raise GapError(expected, row=line_no)
            if rnd < expected:
                raise FormatError(f"round {rnd} out of order (expected {expected})", row=line_no)
        counts.append(blocks)

    if start_round is None:
        raise FormatError("trace has a header but no rounds")
    return ChainTrace(start_round, tuple(counts))


def _parse_json(text: str) -> ChainTrace:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e}")
    if not isinstance(data, dict) or "start_round" not in data or "counts" not in data:
        raise FormatError("expected an object with 'start_round' and 'counts'")

    start_round = data["start_round"]
    counts = data["counts"]
    if isinstance(start_round, bool) or not isinstance(start_round, int):
        raise FormatError(f"start_round is not an integer: {start_round!r}")
    if not isinstance(counts, list) or not counts:
        raise FormatError("counts must be a non-empty list")
    for i, c in enumerate(counts):
        if isinstance(c, bool) or not isinstance(c, int):
            raise FormatError(f"count for round {start_round + i} is not an integer: {c!r}")
        if c < 0:
            raise FormatError(f"negative block count {c} for round {start_round + i}")
    return ChainTrace(start_round, tuple(counts))


def parse_trace(source: Union[bytes, str, BinaryIO, TextIO], fmt: str = "csv") -> ChainTrace:
    """
    Parse a chain trace.

    Args:
        source: Byte/text stream or its contents
        fmt: 'csv' (header `round,blocks`) or 'json'

    Returns:
        Validated ChainTrace

    Raises:
        GapError: If a round is missing
        FormatError: If the input is empty or malformed
    """
    if fmt not in TRACE_FORMATS:
        raise FormatError(f"unknown trace format: {fmt}")
    text = _read_text(source)
    if not text.strip():
        raise FormatError("empty trace")
    return _parse_csv(text) if fmt == "csv" else _parse_json(text)


def serialize_trace(trace: ChainTrace, fmt: str = "csv") -> str:
    """Render a trace in the CSV or JSON trace format."""
    if fmt == "json":
        return json.dumps(trace.to_dict()) + "\n"
    if fmt != "csv":
        raise FormatError(f"unknown trace format: {fmt}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for i, c in enumerate(trace.counts):
        writer.writerow((trace.start_round + i, c))
    return buf.getvalue()


def infer_format(path: Path, fmt: Optional[str] = None) -> str:
    if fmt:
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def load_trace(path: Path, fmt: Optional[str] = None) -> ChainTrace:
    """Read a trace file; format follows `fmt` or the file suffix."""
    with open(path, "rb") as f:
        trace = parse_trace(f, infer_format(path, fmt))
    logger.debug(f"Loaded {len(trace)} rounds from {path}")
    return trace


def write_trace(trace: ChainTrace, path: Path, fmt: Optional[str] = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(serialize_trace(trace, infer_format(path, fmt)))
    return path


@dataclass(frozen=True)
class ReportEntry:
    """Error-probability bound for target round s seen from current round c."""

    target_round: int
    current_round: int
    good_advantage: int
    error_probability: float
    view: str

    def __post_init__(self):
        if self.current_round <= self.target_round:
            raise RangeError("current round must follow the target round")
        if not 0.0 <= self.error_probability <= 1.0:
            raise RangeError(f"error probability {self.error_probability} outside [0, 1]")

    @property
    def settlement(self) -> int:
        return self.current_round - self.target_round

    def to_row(self) -> Tuple:
        return (
            self.current_round,
            self.settlement,
            self.view,
            format(self.error_probability, ".17g"),
            self.good_advantage,
        )

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)


@dataclass
class FinalityReport:
    """Ordered collection of report entries."""

    entries: List[ReportEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def extend(self, entries: Iterable[ReportEntry]):
        self.entries.extend(entries)

    def sorted(self) -> "FinalityReport":
        """Entries ordered by (round, settlement, view)."""
        return FinalityReport(sorted(
            self.entries,
            key=lambda e: (e.current_round, e.settlement, e.view),
        ))

    def error_probabilities(self) -> np.ndarray:
        return np.array([e.error_probability for e in self.entries])

    def median_error(self) -> float:
        if not self.entries:
            raise RangeError("median of an empty report")
        return float(np.median(self.error_probabilities()))

    def select(self, view: Optional[str] = None, settlement: Optional[int] = None) -> "FinalityReport":
        return FinalityReport([
            e for e in self.entries
            if (view is None or e.view == view)
            and (settlement is None or e.settlement == settlement)
        ])

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return {"entries": [e.to_dict() for e in self.entries]}


def write_report(report: FinalityReport, stream: TextIO, fmt: str = "csv"):
    """Write report rows `round,settlement,view,error_probability,good_advantage`."""
    if fmt == "json":
        json.dump(report.to_dict(), stream)
        stream.write("\n")
        return
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for entry in report.entries:
        writer.writerow(entry.to_row())


def read_report(stream: TextIO, fmt: str = "csv") -> FinalityReport:
    """
    Parse a report written by `write_report`.

    Raises:
        FormatError: If the header or a row is malformed, or the JSON has no
            `entries` list of report rows
    """
    if fmt == "json":
        try:
            data = json.load(stream)
            return FinalityReport([ReportEntry(**e) for e in data["entries"]])
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON report: {e}")
        except (KeyError, TypeError) as e:
            raise FormatError(f"report JSON needs an 'entries' list of report rows: {e}")

    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != REPORT_HEADER:
        raise FormatError(f"unexpected report header: {header}", row=1)
    entries = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            current, settlement, view, prob, advantage = row
            entries.append(ReportEntry(
                target_round=int(current) - int(settlement),
                current_round=int(current),
                good_advantage=int(advantage),
                error_probability=float(prob),
                view=view,
            ))
        except ValueError as e:
            raise FormatError(f"bad report row: {e}", row=line_no)
    return FinalityReport(entries)
