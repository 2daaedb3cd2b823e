"""Pair manifests: ``stream_file_a,stream_file_b,label`` per line.

Stream paths are resolved relative to the manifest's directory.
"""
from __future__ import annotations

from pathlib import Path

from .assessment import PairExample
from .events import EventStream, read_stream

MANIFEST_HEADER = "stream_file_a,stream_file_b,label"


class ManifestError(ValueError):
    pass


def format_manifest(rows) -> str:
    lines = [MANIFEST_HEADER] + [f"{a},{b},{int(y)}" for a, b, y in rows]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> list[tuple[str, str, int]]:
    rows = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or (line_no == 1 and line.startswith("stream_file_a")):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or parts[2] not in ("0", "1"):
            raise ManifestError(f"malformed pair at line {line_no}")
        rows.append((parts[0], parts[1], int(parts[2])))
    if not rows:
        raise ManifestError("empty pair manifest")
    return rows


def read_pairs(path, ground_truth_events: bool = False) -> list[PairExample]:
    """Load every pair; each stream file is parsed once and shared between pairs.

    With ``ground_truth_events`` the observed probabilities are replaced by
    the annotation columns.
    """
    path = Path(path)
    rows = parse_manifest(path.read_text(encoding="utf-8"))
    cache: dict[Path, EventStream] = {}

    def load(name: str) -> EventStream:
        p = (path.parent / name).resolve()
        if p not in cache:
            s = read_stream(p)
            cache[p] = s.ground_truth_view() if ground_truth_events else s
        return cache[p]

    return [PairExample(load(a), load(b), y) for a, b, y in rows]
