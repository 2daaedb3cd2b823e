"""Pooled atomic-event vectors and the signature-indexed Gaussian mixture encoding.

Each segment is summarised by an 8-vector: the max of each of the four
events (shoot, possess, made, 3-point zone) over the first and the second
half of the window. The binary version of that vector computed from the
ground-truth annotation is the segment's *signature*; it selects one of
256 diagonal Gaussians. A segment is encoded as its posterior
responsibilities under those Gaussians (uniform prior).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .events import (
    DEFAULT_SEGMENT_LENGTH,
    DEFAULT_STRIDE,
    CourtGeometry,
    EventStream,
    Segment,
    check_segmentation,
    zone_flags,
)

EVENTS = ("shoot", "possess", "made", "zone")
N_EVENTS = 4
DIM = 2 * N_EVENTS
N_MIXTURES = 2 ** DIM
BIT_LABELS = tuple(f"{e}_h{h}" for e in EVENTS for h in (1, 2))

DEFAULT_VARIANCE_FLOOR = 1e-6
DEFAULT_MIN_SAMPLES = 2

_POWERS = 2 ** np.arange(DIM, dtype=np.int64)


class FittingError(ValueError):
    pass


def bit_position(event: int, half: int) -> int:
    """Bit/column position of ``(event, half)``; both are 1-based."""
    return 2 * (event - 1) + (half - 1)


@dataclass(frozen=True)
class Signature:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != DIM or any(b not in (0, 1) for b in self.bits):
            raise ValueError("signature needs 8 binary values")

    @property
    def index(self) -> int:
        return sum(b << k for k, b in enumerate(self.bits))

    @classmethod
    def from_index(cls, index: int) -> "Signature":
        if not 0 <= index < N_MIXTURES:
            raise ValueError(f"signature index {index} out of range")
        return cls(tuple((index >> k) & 1 for k in range(DIM)))

    def describe(self) -> str:
        on = [label for label, b in zip(BIT_LABELS, self.bits) if b]
        return "+".join(on) if on else "none"


def signature_indices(bits: np.ndarray) -> np.ndarray:
    """Row-wise little-endian index of an ``(n, 8)`` binary array."""
    return (np.asarray(bits, dtype=np.int64) @ _POWERS).astype(np.int64)


def _event_matrix(probs: np.ndarray, flags: np.ndarray) -> np.ndarray:
    return np.column_stack([np.asarray(probs, dtype=np.float64), np.asarray(flags, dtype=np.float64)])


def pool_segment(segment: Segment) -> np.ndarray:
    """Half-window max pooling of one segment into its 8-vector."""
    n = len(segment)
    if n % 2:
        raise ValueError("segment length must be even")
    return kernels.window_halves_max(_event_matrix(segment.probs, segment.zone_flags), n, n)[0]


def signature_of_labels(labels, zone_flags_) -> Signature:
    labels = np.asarray(labels)
    flags = np.asarray(zone_flags_)
    if labels.ndim != 2 or labels.shape[1] != 3 or len(labels) != len(flags):
        raise ValueError("ground truth and zone flags must have the same length")
    n = len(flags)
    if n < 2 or n % 2:
        raise ValueError("segment length must be even")
    pooled = kernels.window_halves_max(_event_matrix(labels, flags), n, n)[0]
    return Signature(tuple(int(v) for v in pooled))


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    variance: np.ndarray
    sample_count: int
    active: bool


@dataclass(frozen=True, eq=False)
class MixtureBank:
    """256 diagonal Gaussians stored as ``(256, 8)`` arrays."""

    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray
    active: np.ndarray
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    min_samples: int = DEFAULT_MIN_SAMPLES

    def __post_init__(self) -> None:
        if self.means.shape != (N_MIXTURES, DIM) or self.variances.shape != (N_MIXTURES, DIM):
            raise ValueError("bank must hold exactly 256 eight-dimensional components")
        if not np.any(self.active):
            raise FittingError("bank has no active component")
        if np.any(self.variances[self.active] < self.variance_floor):
            raise ValueError("active variance below floor")

    def __len__(self) -> int:
        return N_MIXTURES

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def component(self, n: int) -> GaussianComponent:
        return GaussianComponent(self.means[n].copy(), self.variances[n].copy(),
                                 int(self.counts[n]), bool(self.active[n]))

    @property
    def components(self) -> list[GaussianComponent]:
        return [self.component(n) for n in range(N_MIXTURES)]

    @classmethod
    def from_components(cls, components: Sequence[GaussianComponent],
                        variance_floor: float = DEFAULT_VARIANCE_FLOOR,
                        min_samples: int = DEFAULT_MIN_SAMPLES) -> "MixtureBank":
        if len(components) != N_MIXTURES:
            raise ValueError("bank must hold exactly 256 components")
        return cls(
            means=np.array([c.mean for c in components], dtype=np.float64),
            variances=np.array([c.variance for c in components], dtype=np.float64),
            counts=np.array([c.sample_count for c in components], dtype=np.int64),
            active=np.array([c.active for c in components], dtype=bool),
            variance_floor=variance_floor,
            min_samples=min_samples,
        )

    def to_dict(self) -> dict:
        return {
            "variance_floor": self.variance_floor,
            "min_samples": self.min_samples,
            "components": [
                {"mean": self.means[n].tolist(), "variance": self.variances[n].tolist(),
                 "sample_count": int(self.counts[n]), "active": bool(self.active[n])}
                for n in range(N_MIXTURES)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureBank":
        comps = data["components"]
        return cls(
            means=np.array([c["mean"] for c in comps], dtype=np.float64),
            variances=np.array([c["variance"] for c in comps], dtype=np.float64),
            counts=np.array([c["sample_count"] for c in comps], dtype=np.int64),
            active=np.array([c["active"] for c in comps], dtype=bool),
            variance_floor=float(data["variance_floor"]),
            min_samples=int(data["min_samples"]),
        )


def fit_mixtures(pooled, signatures, variance_floor: float = DEFAULT_VARIANCE_FLOOR,
                 min_samples: int = DEFAULT_MIN_SAMPLES) -> MixtureBank:
    """Per-signature maximum-likelihood diagonal Gaussians.

    ``pooled`` is ``(n, 8)``; ``signatures`` holds ``n`` indices (or
    :class:`Signature` objects). Groups smaller than ``min_samples`` stay
    inactive.
    """
    if not variance_floor > 0:
        raise ValueError("variance_floor must be positive")
    if min_samples < 2:
        raise ValueError("min_samples must be at least 2")
    pooled = np.asarray(pooled, dtype=np.float64).reshape(-1, DIM)
    sig = np.array([s.index if isinstance(s, Signature) else int(s) for s in signatures], dtype=np.int64)
    if len(sig) != len(pooled):
        raise ValueError("one signature per pooled vector required")
    if len(sig) and (sig.min() < 0 or sig.max() >= N_MIXTURES):
        raise ValueError("signature index out of range")

    counts = np.bincount(sig, minlength=N_MIXTURES).astype(np.int64)
    means = np.zeros((N_MIXTURES, DIM))
    variances = np.full((N_MIXTURES, DIM), variance_floor)
    active = counts >= min_samples
    if not np.any(active):
        raise FittingError(f"no signature group reached {min_samples} samples")
    order = np.argsort(sig, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)])
    for n in np.flatnonzero(active):
        group = pooled[order[bounds[n]:bounds[n + 1]]]
        mu = group.mean(axis=0)
        means[n] = mu
        variances[n] = np.maximum(((group - mu) ** 2).mean(axis=0), variance_floor)
    return MixtureBank(means, variances, counts, active, float(variance_floor), int(min_samples))


def log_density(b, component: GaussianComponent) -> float:
    if not component.active:
        raise ValueError("log density of an inactive component")
    b = np.asarray(b, dtype=np.float64)
    var = component.variance
    return float(-0.5 * np.sum(np.log(2.0 * math.pi * var) + (b - component.mean) ** 2 / var))


def encode_batch(pooled: np.ndarray, bank: MixtureBank) -> np.ndarray:
    return kernels.encode_batch(np.asarray(pooled, dtype=np.float64).reshape(-1, DIM),
                                bank.means, bank.variances, bank.active_indices)


def encode(b, bank: MixtureBank) -> np.ndarray:
    """256-dim responsibility vector of one pooled vector; zeros at inactive slots."""
    return encode_batch(np.asarray(b, dtype=np.float64)[None, :], bank)[0]


# -- whole-stream helpers ---------------------------------------------------

def drop_mask(dropped_events: Iterable[int]) -> np.ndarray:
    """Boolean column mask of the pooled components belonging to ``dropped_events``."""
    mask = np.zeros(DIM, dtype=bool)
    for e in dropped_events:
        if not 1 <= e <= N_EVENTS:
            raise ValueError(f"event must be in 1..4, got {e}")
        mask[bit_position(e, 1)] = mask[bit_position(e, 2)] = True
    return mask


def pool_stream(stream: EventStream, segment_length: int = DEFAULT_SEGMENT_LENGTH,
                stride: int = DEFAULT_STRIDE, geometry: CourtGeometry = CourtGeometry(),
                dropped_events: Iterable[int] = ()) -> np.ndarray:
    """Pooled vectors of every segment, ``(n_segments, 8)``, dropped events zeroed."""
    check_segmentation(segment_length, stride)
    flags = zone_flags(stream.positions, geometry)
    pooled = kernels.window_halves_max(_event_matrix(stream.probs, flags), segment_length, stride)
    pooled[:, drop_mask(dropped_events)] = 0.0
    return pooled


def stream_signatures(stream: EventStream, segment_length: int = DEFAULT_SEGMENT_LENGTH,
                      stride: int = DEFAULT_STRIDE, geometry: CourtGeometry = CourtGeometry(),
                      dropped_events: Iterable[int] = ()) -> np.ndarray:
    if stream.labels is None:
        raise ValueError(f"stream {stream.player_id!r} has no ground truth events")
    check_segmentation(segment_length, stride)
    flags = zone_flags(stream.positions, geometry)
    bits = kernels.window_halves_max(_event_matrix(stream.labels, flags), segment_length, stride)
    bits[:, drop_mask(dropped_events)] = 0.0
    return signature_indices(bits)


def fit_bank_from_streams(streams: Iterable[EventStream], segment_length: int = DEFAULT_SEGMENT_LENGTH,
                          stride: int = DEFAULT_STRIDE, geometry: CourtGeometry = CourtGeometry(),
                          dropped_events: Iterable[int] = (),
                          variance_floor: float = DEFAULT_VARIANCE_FLOOR,
                          min_samples: int = DEFAULT_MIN_SAMPLES) -> MixtureBank:
    """Fit the bank on observed pooled vectors grouped by ground-truth signature."""
    dropped_events = tuple(dropped_events)
    pooled, sigs = [], []
    for s in streams:
        pooled.append(pool_stream(s, segment_length, stride, geometry, dropped_events))
        sigs.append(stream_signatures(s, segment_length, stride, geometry, dropped_events))
    if not pooled:
        raise FittingError("no training streams")
    return fit_mixtures(np.concatenate(pooled), np.concatenate(sigs), variance_floor, min_samples)
