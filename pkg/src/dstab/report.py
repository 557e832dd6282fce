"""Deterministic report assembly and serialization.

Reports are plain JSON documents built from analysis results.  To keep
repeated runs byte-identical, floats are written with 17 significant
digits through a single formatting path instead of the stdlib float
repr, and dictionaries keep their construction order (the builders in
this package construct them deterministically).  Non-finite floats are
rejected outright; JSON has no spelling for them and a report that
needs one indicates a bug upstream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

TOOL_NAME = "dstab"
VERSION = "0.1.0"


def file_digest(path: str) -> str:
    """sha256 of the file content, hex-encoded."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt_float(x: float) -> str:
    if not np.isfinite(x):
        raise NumericError(f"non-finite value {x!r} cannot be serialized")
    return "%.17g" % x


def _render(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _render(obj.tolist(), indent, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise NumericError(f"report keys must be strings, got {k!r}")
            out.append(inner + json.dumps(k) + ": ")
            _render(v, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # short numeric rows stay on one line, everything else stacks
        flat = all(isinstance(v, (int, float, np.integer, np.floating, bool))
                   or v is None for v in obj)
        if flat and len(obj) <= 12:
            parts = []
            for v in obj:
                sub: list = []
                _render(v, 0, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(inner)
            _render(v, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif hasattr(obj, "to_dict"):
        _render(obj.to_dict(), indent, out)
    else:
        raise NumericError(f"cannot serialize {type(obj).__name__} into a report")


def dumps(obj) -> str:
    """Serialize to JSON text with stable float formatting (17 sig. digits)."""
    out: list = []
    _render(obj, 0, out)
    out.append("\n")
    return "".join(out)


@dataclass
class Report:
    """One CLI invocation's structured result."""

    command: str
    inputs: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    versions: str = f"{TOOL_NAME} {VERSION}"
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "verdicts": self.verdicts,
            "versions": self.versions,
            "seed": self.seed,
        }

    def render(self) -> str:
        return dumps(self.to_dict())


def write_text(text: str, path: str | None) -> None:
    """Write to a file, or stdout when path is None."""
    if path is None:
        import sys
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
