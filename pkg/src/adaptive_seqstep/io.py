"""
File formats.

P-value input
    Either one bare decimal per line, or CSV with a header containing a
    ``pvalue`` column (the first other column, if any, is used as the
    hypothesis id).  Line order is the prior ordering.  Blank lines and
    lines starting with ``#`` are skipped.

Table output
    CSV whose first line is ``# schema: adaptive-seqstep/<table>/v1``,
    optionally followed by further ``#`` comment lines, then a header row.
    Floats are written with 17 significant digits; missing values are
    empty fields.  JSON output is a single object with the same schema
    tag under ``"schema"``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .procedures import PValueSequence, ProcedureSpec, RejectionOutcome

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "ADAPTIVE_SEQSTEP_OUTPUT_DIR"

REJECT_COLUMNS = ("index", "id", "pvalue", "rejected", "fdp_path")


class PValueFileError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def schema_tag(table: str) -> str:
    return f"adaptive-seqstep/{table}/v{SCHEMA_VERSION}"


def resolve_output(path) -> Optional[Path]:
    """Apply the output-directory override to a relative path."""
    if path is None or str(path) == "-":
        return None
    path = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _parse_float(text: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise PValueFileError(f"cannot parse {text!r} as a number", lineno) from None
    if not 0.0 <= v <= 1.0:
        raise PValueFileError(f"p-value {text.strip()} is outside [0, 1]", lineno)
    return v


def parse_pvalue_text(text: str) -> PValueSequence:
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            records.append((lineno, line))
    if not records:
        return PValueSequence([])

    first_line, first = records[0]
    if "," not in first:
        return PValueSequence([_parse_float(line, n) for n, line in records])

    header = [h.strip().lower() for h in next(csv.reader([first]))]
    if "pvalue" not in header:
        raise PValueFileError("CSV header must contain a 'pvalue' column", first_line)
    p_col = header.index("pvalue")
    id_col = next((i for i in range(len(header)) if i != p_col), None)
    values, ids = [], []
    for lineno, line in records[1:]:
        fields = next(csv.reader([line]))
        if len(fields) != len(header):
            raise PValueFileError(
                f"expected {len(header)} fields, found {len(fields)}", lineno)
        values.append(_parse_float(fields[p_col].strip(), lineno))
        if id_col is not None:
            ids.append(fields[id_col].strip())
    return PValueSequence(values, ids if id_col is not None else None)


def parse_pvalue_file(path) -> PValueSequence:
    """Read an ordered p-value file (see module docstring)."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pvalue_text(fh.read())


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def csv_text(table: str, columns: Sequence[str], rows: Iterable[dict],
             comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema_tag(table)}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv_table(text: str) -> tuple:
    """Return ``(schema, rows)`` where rows are dicts of strings."""
    lines = text.splitlines()
    schema = None
    body = []
    for line in lines:
        if line.startswith("#"):
            if schema is None and line.startswith("# schema:"):
                schema = line.split(":", 1)[1].strip()
            continue
        body.append(line)
    reader = csv.DictReader(body)
    return schema, list(reader)


def json_text(table: str, payload: dict) -> str:
    return json.dumps({"schema": schema_tag(table), **payload}, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# rejection outcomes
# ---------------------------------------------------------------------------

def outcome_rows(pvals: PValueSequence, outcome: RejectionOutcome) -> list:
    rejected = set(outcome.rejected)
    rows = []
    for i, p in enumerate(pvals.values, start=1):
        rows.append({
            "index": i,
            "id": pvals.ids[i - 1] if pvals.ids is not None else None,
            "pvalue": p,
            "rejected": 1 if i in rejected else 0,
            "fdp_path": outcome.fdp_path[i - 1] if i <= len(outcome.fdp_path) else None,
        })
    return rows


def outcome_to_dict(outcome: RejectionOutcome) -> dict:
    return {
        "k_hat": outcome.k_hat,
        "rejected": list(outcome.rejected),
        "fdp_path": list(outcome.fdp_path),
        "spec": outcome.spec_used.to_dict(),
    }


def outcome_from_dict(d: dict) -> RejectionOutcome:
    return RejectionOutcome(
        k_hat=int(d["k_hat"]),
        rejected=tuple(int(i) for i in d["rejected"]),
        fdp_path=tuple(float(x) for x in d["fdp_path"]),
        spec_used=ProcedureSpec.from_dict(d["spec"]),
    )


def outcome_to_json(outcome: RejectionOutcome, pvals: Optional[PValueSequence] = None) -> str:
    payload = outcome_to_dict(outcome)
    if pvals is not None:
        payload["pvalues"] = list(pvals.values)
        payload["ids"] = None if pvals.ids is None else list(pvals.ids)
    return json_text("rejection", payload)


def outcome_from_json(text: str) -> RejectionOutcome:
    return outcome_from_dict(json.loads(text))
