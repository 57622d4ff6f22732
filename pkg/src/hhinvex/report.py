"""Byte-stable report serialization.

JSON keys are sorted and every float is written with 17 significant
digits in lowercase exponent form (``2.5000000000000000e-01``), which
round-trips exactly. Non-finite floats become the strings ``"inf"``,
``"-inf"`` and ``"nan"``. CSV uses commas, a decimal point and ``\\n``
line endings.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from typing import Iterable, Optional

import numpy as np

from . import __version__

__all__ = [
    "SCHEMA_VERSION", "TRIALS_COLUMNS", "VERIFY_COLUMNS", "format_float", "dumps",
    "report_document", "load_schema", "validate", "csv_text", "trials_rows",
]

SCHEMA_VERSION = "1.0"
TOOL_NAME = "hhinvex"
TRIALS_COLUMNS = ("seed", "trial", "theorem", "lhs", "rhs", "margin", "verdict")
VERIFY_COLUMNS = ("theorem", "lhs", "rhs", "margin", "error_budget", "verdict")


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".16e")


def _emit(obj, indent: int, level: int, out: list):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        text = format_float(obj)
        out.append(text if text[-1].isdigit() else json.dumps(text))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            out.append(("," if i else "") + pad + json.dumps(str(key), ensure_ascii=False) + ": ")
            _emit(obj[key], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[")
        for i, item in enumerate(items):
            out.append(("," if i else "") + pad)
            _emit(item, indent, level + 1, out)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text, newline-terminated."""
    out = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def report_document(command: dict, inputs: dict, certificates: Iterable = (),
                    evaluations: Iterable = (), summary: Optional[dict] = None) -> dict:
    return {
        "tool": {"name": TOOL_NAME, "version": __version__},
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "certificates": list(certificates),
        "evaluations": list(evaluations),
        "summary": summary if summary is not None else {},
    }


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(document) -> None:
    """Raise ``jsonschema.ValidationError`` if the document breaks the schema."""
    import jsonschema

    if isinstance(document, str):
        document = json.loads(document)
    jsonschema.validate(document, load_schema())


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_text(columns: tuple, rows: Iterable[dict]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_cell(row.get(c)) for c in columns) for row in rows)
    return "\n".join(lines) + "\n"


def trials_rows(reports) -> list:
    """One row per trial x theorem instance; ``theorem`` holds the instance key."""
    return [{"seed": rep.seed, "trial": rep.trial, "theorem": row["key"], "lhs": row["lhs"],
             "rhs": row["rhs"], "margin": row["margin"], "verdict": row["verdict"]}
            for rep in reports for row in rep.evaluations]
