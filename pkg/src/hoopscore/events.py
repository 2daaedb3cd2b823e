"""Per-frame event streams: ingestion, validation, court zones and segmentation.

A stream holds, for every sampled frame, the detector probabilities of
somebody shooting, the camera wearer possessing the ball and a made shot,
plus the wearer's court position. Optionally it carries the binary
ground-truth annotation of the same three events.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import kernels

HEADER = "frame,p_shoot,p_possess,p_made,x,y"
HEADER_WITH_TRUTH = HEADER + ",y1,y2,y3"

DEFAULT_SEGMENT_LENGTH = 10
DEFAULT_STRIDE = 1


class StreamFormat(enum.Enum):
    CSV = "csv"


class StreamError(ValueError):
    """Invalid stream data."""


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    p_shoot: float
    p_possess: float
    p_made: float
    pos_x: float
    pos_y: float


@dataclass(frozen=True)
class CourtGeometry:
    """Court rectangle in meters with the two basket centres.

    Defaults are a FIBA-sized court: 28 m x 15 m, baskets on the long axis
    1.575 m in from each baseline, 6.75 m three-point radius.
    """

    basket_positions: tuple[tuple[float, float], tuple[float, float]] = ((1.575, 7.5), (26.425, 7.5))
    three_point_radius: float = 6.75
    court_length: float = 28.0
    court_width: float = 15.0

    def __post_init__(self) -> None:
        if not (self.court_length > 0 and self.court_width > 0):
            raise ValueError("court dimensions must be positive")
        if not self.three_point_radius > 0:
            raise ValueError("three_point_radius must be positive")
        if len(self.basket_positions) != 2:
            raise ValueError("exactly two basket positions required")
        for bx, by in self.basket_positions:
            if not (0.0 <= bx <= self.court_length and 0.0 <= by <= self.court_width):
                raise ValueError(f"basket ({bx}, {by}) lies outside the court")

    def to_dict(self) -> dict:
        return {
            "basket_positions": [list(p) for p in self.basket_positions],
            "three_point_radius": self.three_point_radius,
            "court_length": self.court_length,
            "court_width": self.court_width,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CourtGeometry":
        baskets = data.get("basket_positions", cls.basket_positions)
        return cls(
            basket_positions=tuple((float(x), float(y)) for x, y in baskets),
            three_point_radius=float(data.get("three_point_radius", cls.three_point_radius)),
            court_length=float(data.get("court_length", cls.court_length)),
            court_width=float(data.get("court_width", cls.court_width)),
        )


@dataclass(frozen=True, eq=False)
class EventStream:
    """One player's stream, stored column-wise.

    ``probs`` is ``(T, 3)`` in the order shoot, possess, made; ``positions``
    is ``(T, 2)``; ``labels`` is ``(T, 3)`` of 0/1 or ``None``.
    """

    player_id: str
    frames: np.ndarray
    probs: np.ndarray
    positions: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        if frames.ndim != 1 or len(frames) == 0:
            raise StreamError("empty stream")
        n = len(frames)
        if probs.shape != (n, 3) or positions.shape != (n, 2):
            raise StreamError("column lengths disagree")
        if frames[0] < 0 or np.any(np.diff(frames) <= 0):
            raise StreamError("frame indices must be non-negative and strictly increasing")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
            raise StreamError("probability out of range")
        if not np.all(np.isfinite(positions)):
            raise StreamError("non-finite position")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "positions", positions)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n, 3):
                raise StreamError("ground truth length differs from records")
            if not np.all((labels == 0) | (labels == 1)):
                raise StreamError("ground truth values must be 0 or 1")
            object.__setattr__(self, "labels", labels.astype(np.int8))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def has_ground_truth(self) -> bool:
        return self.labels is not None

    @property
    def records(self) -> list[FrameRecord]:
        return [
            FrameRecord(int(f), float(p[0]), float(p[1]), float(p[2]), float(q[0]), float(q[1]))
            for f, p, q in zip(self.frames, self.probs, self.positions)
        ]

    def ground_truth_view(self) -> "EventStream":
        """The same stream with observed probabilities replaced by the annotation."""
        if self.labels is None:
            raise StreamError(f"stream {self.player_id!r} has no ground truth")
        return EventStream(self.player_id, self.frames, self.labels.astype(np.float64),
                           self.positions, self.labels)


# -- ingestion ---------------------------------------------------------------

def _parse_prob(text: str, line_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise StreamError(f"malformed record at line {line_no}") from None
    if not (0.0 <= value <= 1.0):
        raise StreamError(f"probability out of range at line {line_no}")
    return value


def parse_stream(data: bytes | str, format: StreamFormat | str = StreamFormat.CSV,
                 player_id: str = "") -> EventStream:
    """Parse a stream file. The header line is optional.

    Errors carry the 1-based physical line number.
    """
    if StreamFormat(format) is not StreamFormat.CSV:  # pragma: no cover
        raise StreamError(f"unsupported format {format!r}")
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    frames: list[int] = []
    probs: list[tuple[float, float, float]] = []
    positions: list[tuple[float, float]] = []
    labels: list[tuple[int, int, int]] = []
    n_fields: int | None = None
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line_no == 1 and line.startswith("frame"):
            continue
        parts = line.split(",")
        if len(parts) not in (6, 9) or (n_fields is not None and len(parts) != n_fields):
            raise StreamError(f"malformed record at line {line_no}")
        n_fields = len(parts)
        try:
            frame = int(parts[0])
            x, y = float(parts[4]), float(parts[5])
        except ValueError:
            raise StreamError(f"malformed record at line {line_no}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise StreamError(f"malformed record at line {line_no}")
        p = (_parse_prob(parts[1], line_no), _parse_prob(parts[2], line_no),
             _parse_prob(parts[3], line_no))
        if frames and frame <= frames[-1]:
            raise StreamError(f"non-monotone frame index at line {line_no}")
        if frame < 0:
            raise StreamError(f"negative frame index at line {line_no}")
        if n_fields == 9:
            if any(v not in ("0", "1") for v in parts[6:9]):
                raise StreamError(f"ground truth must be 0 or 1 at line {line_no}")
            labels.append((int(parts[6]), int(parts[7]), int(parts[8])))
        frames.append(frame)
        probs.append(p)
        positions.append((x, y))
    if not frames:
        raise StreamError("empty stream")
    return EventStream(
        player_id=player_id,
        frames=np.array(frames, dtype=np.int64),
        probs=np.array(probs, dtype=np.float64),
        positions=np.array(positions, dtype=np.float64),
        labels=np.array(labels, dtype=np.int8) if n_fields == 9 else None,
    )


def format_stream(stream: EventStream) -> bytes:
    """Serialize with shortest round-trip float text; ``parse_stream`` inverts it exactly."""
    lines = [HEADER_WITH_TRUTH if stream.has_ground_truth else HEADER]
    for i in range(len(stream)):
        p = stream.probs[i]
        q = stream.positions[i]
        fields = [str(int(stream.frames[i])), repr(float(p[0])), repr(float(p[1])),
                  repr(float(p[2])), repr(float(q[0])), repr(float(q[1]))]
        if stream.labels is not None:
            fields.extend(str(int(v)) for v in stream.labels[i])
        lines.append(",".join(fields))
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_stream(path, player_id: str | None = None) -> EventStream:
    from pathlib import Path

    path = Path(path)
    return parse_stream(path.read_bytes(), StreamFormat.CSV,
                        player_id=path.stem if player_id is None else player_id)


# -- geometry and segmentation ----------------------------------------------

def zone_indicator(pos, geometry: CourtGeometry = CourtGeometry()) -> int:
    """1 when the point is beyond the three-point radius of the nearest basket.

    A point exactly on the arc counts as 2-point territory.
    """
    x, y = pos
    nearest = min(math.hypot(x - bx, y - by) for bx, by in geometry.basket_positions)
    return int(nearest > geometry.three_point_radius)


def zone_flags(positions: np.ndarray, geometry: CourtGeometry = CourtGeometry()) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    baskets = np.asarray(geometry.basket_positions, dtype=np.float64)
    dist = np.hypot(positions[:, None, 0] - baskets[None, :, 0],
                    positions[:, None, 1] - baskets[None, :, 1]).min(axis=1)
    return (dist > geometry.three_point_radius).astype(np.int8)


def check_segmentation(segment_length: int, stride: int) -> None:
    if int(segment_length) != segment_length or segment_length < 2 or segment_length % 2:
        raise ValueError(f"segment_length must be an even integer >= 2, got {segment_length}")
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride}")


@dataclass(frozen=True, eq=False)
class Segment:
    start_frame: int
    frame_indices: np.ndarray
    probs: np.ndarray
    positions: np.ndarray
    zone_flags: np.ndarray
    labels: np.ndarray | None = field(default=None)

    def __len__(self) -> int:
        return len(self.zone_flags)

    @property
    def frames(self) -> list[FrameRecord]:
        return [FrameRecord(int(f), *map(float, p), *map(float, q))
                for f, p, q in zip(self.frame_indices, self.probs, self.positions)]


def segment_count(n_frames: int, segment_length: int, stride: int) -> int:
    return 0 if n_frames < segment_length else (n_frames - segment_length) // stride + 1


def iter_segments(stream: EventStream, segment_length: int = DEFAULT_SEGMENT_LENGTH,
                  stride: int = DEFAULT_STRIDE,
                  geometry: CourtGeometry = CourtGeometry()) -> Iterator[Segment]:
    check_segmentation(segment_length, stride)
    flags = zone_flags(stream.positions, geometry)
    for start in kernels.window_starts(len(stream), segment_length, stride):
        sl = slice(int(start), int(start) + segment_length)
        yield Segment(
            start_frame=int(stream.frames[start]),
            frame_indices=stream.frames[sl],
            probs=stream.probs[sl],
            positions=stream.positions[sl],
            zone_flags=flags[sl],
            labels=None if stream.labels is None else stream.labels[sl],
        )


def segment_stream(stream: EventStream, segment_length: int = DEFAULT_SEGMENT_LENGTH,
                   stride: int = DEFAULT_STRIDE,
                   geometry: CourtGeometry = CourtGeometry()) -> list[Segment]:
    """All full windows ``[t, t + segment_length)`` at ``stride``; empty if the stream is too short."""
    return list(iter_segments(stream, segment_length, stride, geometry))
