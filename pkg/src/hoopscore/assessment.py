"""Relevance-weighted assessment score, pairwise hinge-loss training and evaluation.

A player's score is the average of the per-segment regressor output
``w . phi_t`` weighted by each segment's shooting relevance. Because the
score is linear in ``w``, every stream reduces to one descriptor
``Phi = sum_t r_t phi_t / sum_t r_t`` and ``S = w . Phi``; training and
evaluation work on descriptors.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _io, kernels
from .events import (
    DEFAULT_SEGMENT_LENGTH,
    DEFAULT_STRIDE,
    CourtGeometry,
    EventStream,
    Segment,
    check_segmentation,
)
from .features import (
    DIM,
    DEFAULT_MIN_SAMPLES,
    DEFAULT_VARIANCE_FLOOR,
    N_MIXTURES,
    MixtureBank,
    Signature,
    drop_mask,
    encode_batch,
    fit_bank_from_streams,
    pool_stream,
)

MODEL_VERSION = 1
RELEVANCE_RULES = ("max", "mean")
FEATURE_KINDS = ("gm", "pooled")
WEIGHT_INITS = ("zeros", "small_uniform")
KINK_RULES = ("active", "zero")
DEFAULT_RELEVANCE_EPSILON = 1e-9


class ScoringError(ValueError):
    pass


class NoRelevantSegments(ScoringError):
    def __init__(self, detail: str = "") -> None:
        super().__init__("no relevant segments" + (f" ({detail})" if detail else ""))


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    iterations: int = 100
    seed: int = 0
    weight_init: str = "zeros"
    # Subgradient used for a pair sitting exactly on the hinge kink.
    # "active" takes the violated piece so training can leave w = 0.
    kink: str = "active"
    init_scale: float = 1e-3

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if self.weight_init not in WEIGHT_INITS:
            raise ValueError(f"weight_init must be one of {WEIGHT_INITS}")
        if self.kink not in KINK_RULES:
            raise ValueError(f"kink must be one of {KINK_RULES}")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


@dataclass(frozen=True, eq=False)
class AssessmentModel:
    weights: np.ndarray
    bank: MixtureBank | None
    segment_length: int = DEFAULT_SEGMENT_LENGTH
    stride: int = DEFAULT_STRIDE
    geometry: CourtGeometry = CourtGeometry()
    relevance: str = "max"
    relevance_epsilon: float = DEFAULT_RELEVANCE_EPSILON
    feature: str = "gm"
    dropped_events: tuple[int, ...] = ()
    loss_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dropped_events", tuple(sorted(int(e) for e in self.dropped_events)))
        check_segmentation(self.segment_length, self.stride)
        if self.relevance not in RELEVANCE_RULES:
            raise ValueError(f"relevance must be one of {RELEVANCE_RULES}")
        if self.feature not in FEATURE_KINDS:
            raise ValueError(f"feature must be one of {FEATURE_KINDS}")
        if not self.relevance_epsilon >= 0:
            raise ValueError("relevance_epsilon must be non-negative")
        if self.feature == "gm":
            if self.bank is None:
                raise ValueError("mixture features need a fitted bank")
            expected = len(self.bank)
        else:
            expected = DIM
        if w.shape != (expected,):
            raise ValueError(f"expected {expected} weights, got shape {w.shape}")

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def with_weights(self, weights) -> "AssessmentModel":
        return dataclasses.replace(self, weights=np.asarray(weights, dtype=np.float64), loss_history=())

    def segment_terms(self, stream: EventStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Start frames, relevances and feature rows of every segment."""
        pooled = pool_stream(stream, self.segment_length, self.stride, self.geometry)
        starts = stream.frames[kernels.window_starts(len(stream), self.segment_length, self.stride)]
        if 1 in self.dropped_events:
            relevance = np.ones(len(pooled))
        elif self.relevance == "max":
            relevance = np.maximum(pooled[:, 0], pooled[:, 1])
        else:
            relevance = kernels.window_mean(stream.probs[:, 0], self.segment_length, self.stride)
        if self.dropped_events:
            pooled[:, drop_mask(self.dropped_events)] = 0.0
        feats = encode_batch(pooled, self.bank) if self.feature == "gm" else pooled
        return starts, relevance, feats

    def descriptor(self, stream: EventStream) -> np.ndarray:
        """Relevance-weighted mean feature; ``score(stream).total == weights . descriptor``."""
        _, relevance, feats = self.segment_terms(stream)
        total = relevance.sum()
        if len(relevance) == 0 or not total > self.relevance_epsilon:
            raise NoRelevantSegments(stream.player_id)
        return (relevance @ feats) / total

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "feature": self.feature,
            "weights": self.weights.tolist(),
            "bank": None if self.bank is None else self.bank.to_dict(),
            "segment_length": int(self.segment_length),
            "stride": int(self.stride),
            "relevance": self.relevance,
            "relevance_epsilon": self.relevance_epsilon,
            "dropped_events": list(self.dropped_events),
            "geometry": self.geometry.to_dict(),
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AssessmentModel":
        if data.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        return cls(
            weights=np.array(data["weights"], dtype=np.float64),
            bank=None if data.get("bank") is None else MixtureBank.from_dict(data["bank"]),
            segment_length=int(data["segment_length"]),
            stride=int(data["stride"]),
            geometry=CourtGeometry.from_dict(data.get("geometry", {})),
            relevance=data.get("relevance", "max"),
            relevance_epsilon=float(data.get("relevance_epsilon", DEFAULT_RELEVANCE_EPSILON)),
            feature=data.get("feature", "gm"),
            dropped_events=tuple(data.get("dropped_events", ())),
            loss_history=tuple(float(v) for v in data.get("loss_history", ())),
        )

    def dumps(self) -> str:
        return _io.dumps(self.to_dict())

    def save(self, path) -> None:
        _io.atomic_write(path, self.dumps())

    @classmethod
    def load(cls, path) -> "AssessmentModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True, eq=False)
class PairExample:
    stream_a: EventStream
    stream_b: EventStream
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("pair label must be 0 or 1")


@dataclass(frozen=True)
class SegmentTerm:
    start_frame: int
    relevance: float
    contribution: float
    weighted_term: float


@dataclass(frozen=True)
class ScoreBreakdown:
    total: float
    per_segment: list[SegmentTerm]


def segment_relevance(segment: Segment, rule: str = "max") -> float:
    shoot = np.asarray(segment.probs, dtype=np.float64)[:, 0]
    if rule == "max":
        return float(shoot.max())
    if rule == "mean":
        return float(shoot.mean())
    raise ValueError(f"relevance must be one of {RELEVANCE_RULES}")


def weighted_average(relevance: np.ndarray, contribution: np.ndarray,
                     epsilon: float = DEFAULT_RELEVANCE_EPSILON) -> float:
    relevance = np.asarray(relevance, dtype=np.float64)
    total = relevance.sum()
    if len(relevance) == 0 or not total > epsilon:
        raise NoRelevantSegments()
    return float(relevance @ np.asarray(contribution, dtype=np.float64) / total)


def score(stream: EventStream, model: AssessmentModel) -> ScoreBreakdown:
    starts, relevance, feats = model.segment_terms(stream)
    contribution = feats @ model.weights
    try:
        total = weighted_average(relevance, contribution, model.relevance_epsilon)
    except NoRelevantSegments:
        raise NoRelevantSegments(stream.player_id) from None
    terms = [SegmentTerm(int(s), float(r), float(c), float(r * c))
             for s, r, c in zip(starts, relevance, contribution)]
    return ScoreBreakdown(total, terms)


# -- pairwise loss ------------------------------------------------------------

def pair_descriptors(pairs: Sequence[PairExample], model: AssessmentModel
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Descriptor matrices for both sides of every pair, plus the labels.

    Streams shared between pairs are encoded once.
    """
    cache: dict[int, np.ndarray] = {}

    def get(stream: EventStream, i: int) -> np.ndarray:
        key = id(stream)
        if key not in cache:
            try:
                cache[key] = model.descriptor(stream)
            except ScoringError as exc:
                raise ScoringError(f"pair {i}: {exc}") from None
        return cache[key]

    n = model.n_features
    da = np.empty((len(pairs), n))
    db = np.empty((len(pairs), n))
    for i, pair in enumerate(pairs):
        da[i] = get(pair.stream_a, i)
        db[i] = get(pair.stream_b, i)
    labels = np.array([p.label for p in pairs], dtype=np.float64)
    return da, db, labels


def hinge_terms(weights: np.ndarray, diff: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """``(1/2 - Y_i)(S_a - S_b)`` per pair, before the max with zero."""
    return (0.5 - labels) * (diff @ weights)


def hinge_value(weights: np.ndarray, diff: np.ndarray, labels: np.ndarray) -> float:
    return float(np.maximum(hinge_terms(weights, diff, labels), 0.0).sum())


def hinge_subgradient(weights: np.ndarray, diff: np.ndarray, labels: np.ndarray,
                      kink: str = "zero") -> np.ndarray:
    margins = hinge_terms(weights, diff, labels)
    violated = margins > 0 if kink == "zero" else margins >= 0
    coef = np.where(violated, 0.5 - labels, 0.0)
    return coef @ diff


def hinge_loss(pairs: Sequence[PairExample], model: AssessmentModel) -> float:
    da, db, labels = pair_descriptors(pairs, model)
    return hinge_value(model.weights, da - db, labels)


def _initial_weights(n: int, config: TrainConfig) -> np.ndarray:
    if config.weight_init == "zeros":
        return np.zeros(n)
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-config.init_scale, config.init_scale, size=n)


def fit_weights(diff: np.ndarray, labels: np.ndarray, config: TrainConfig
                ) -> tuple[np.ndarray, list[float]]:
    """Full-batch fixed-step subgradient descent on descriptor differences.

    Returns the final weights and the loss before every step plus the final loss.
    """
    w = _initial_weights(diff.shape[1], config)
    history: list[float] = []
    for _ in range(int(config.iterations)):
        loss = hinge_value(w, diff, labels)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss")
        history.append(loss)
        w = w - config.learning_rate * hinge_subgradient(w, diff, labels, config.kink)
    loss = hinge_value(w, diff, labels)
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss")
    history.append(loss)
    return w, history


def train(pairs: Sequence[PairExample], bank: MixtureBank | None, config: TrainConfig = TrainConfig(),
          *, segment_length: int = DEFAULT_SEGMENT_LENGTH, stride: int = DEFAULT_STRIDE,
          geometry: CourtGeometry = CourtGeometry(), relevance: str = "max",
          relevance_epsilon: float = DEFAULT_RELEVANCE_EPSILON, feature: str = "gm",
          dropped_events: Sequence[int] = ()) -> AssessmentModel:
    if not pairs:
        raise TrainingError("no training pairs")
    n = len(bank) if feature == "gm" else DIM
    template = AssessmentModel(np.zeros(n), bank if feature == "gm" else None, segment_length, stride,
                               geometry, relevance, relevance_epsilon, feature, tuple(dropped_events))
    da, db, labels = pair_descriptors(pairs, template)
    w, history = fit_weights(da - db, labels, config)
    return dataclasses.replace(template, weights=w, loss_history=tuple(history))


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class PairVerdict:
    index: int
    score_a: float
    score_b: float
    label: int
    correct: bool


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    verdicts: list[PairVerdict]


def verdicts_from_scores(score_a: np.ndarray, score_b: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Correct iff the ordering matches the label; exact ties are wrong."""
    labels = np.asarray(labels)
    return ((score_a > score_b) & (labels == 1)) | ((score_a < score_b) & (labels == 0))


def evaluate(pairs: Sequence[PairExample], model: AssessmentModel) -> Evaluation:
    if not pairs:
        raise ValueError("no pairs to evaluate")
    da, db, labels = pair_descriptors(pairs, model)
    sa, sb = da @ model.weights, db @ model.weights
    correct = verdicts_from_scores(sa, sb, labels)
    verdicts = [PairVerdict(i, float(sa[i]), float(sb[i]), int(labels[i]), bool(correct[i]))
                for i in range(len(pairs))]
    return Evaluation(float(correct.mean()), verdicts)


@dataclass(frozen=True)
class MixtureWeight:
    index: int
    weight: float
    bits: tuple[int, ...]


def top_mixtures(model: AssessmentModel, k: int) -> list[MixtureWeight]:
    """The ``k`` active mixtures with the largest ``|w|``; ties go to the lower index."""
    if model.feature != "gm" or model.bank is None:
        raise ValueError("top_mixtures needs a mixture-feature model")
    active = model.bank.active_indices
    if not 1 <= k <= len(active):
        raise ValueError(f"k={k} outside 1..{len(active)} active mixtures")
    w = model.weights
    order = sorted(active.tolist(), key=lambda n: (-abs(w[n]), n))[:k]
    return [MixtureWeight(n, float(w[n]), Signature.from_index(n).bits) for n in order]


def signed_top_mixtures(model: AssessmentModel, k: int, sign: int) -> list[MixtureWeight]:
    """The ``k`` active mixtures with the most positive (``sign=1``) or negative weights."""
    if model.bank is None:
        raise ValueError("signed_top_mixtures needs a mixture-feature model")
    w = model.weights
    active = model.bank.active_indices.tolist()
    order = sorted(active, key=lambda n: (-sign * w[n], n))[:k]
    return [MixtureWeight(n, float(w[n]), Signature.from_index(n).bits) for n in order]


# -- ablations ----------------------------------------------------------------

ABLATIONS = ("full", "no_gm", "drop_event", "unit_weights", "single_top_gm")
ABLATION_TITLES = {
    "full": "Ours",
    "no_gm": "Ours: no GMs",
    "drop_event": "Ours: no p^({})",
    "unit_weights": "Ours: all weights w set to 1",
    "single_top_gm": "Ours: single GM-top{}",
}


def parse_variant(text: str) -> tuple[str, int | None]:
    """``"drop_event:3"`` -> ``("drop_event", 3)``; bare names take no argument."""
    name, _, arg = text.partition(":")
    name = name.strip()
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {text!r}; expected one of {ABLATIONS}")
    if name in ("drop_event", "single_top_gm"):
        if not arg:
            raise ValueError(f"ablation {name} needs an argument, e.g. {name}:1")
        value = int(arg)
        if name == "drop_event" and not 1 <= value <= 4:
            raise ValueError("drop_event takes an event number in 1..4")
        if name == "single_top_gm" and value < 1:
            raise ValueError("single_top_gm takes a rank >= 1")
        return name, value
    if arg:
        raise ValueError(f"ablation {name} takes no argument")
    return name, None


def variant_title(text: str) -> str:
    name, arg = parse_variant(text)
    return ABLATION_TITLES[name].format(arg)


@dataclass(frozen=True, eq=False)
class AblationResult:
    variant: str
    accuracy: float
    model: AssessmentModel


def ablate(variant: str, train_pairs: Sequence[PairExample], test_pairs: Sequence[PairExample],
           config: TrainConfig = TrainConfig(), *, bank: MixtureBank | None = None,
           segment_length: int = DEFAULT_SEGMENT_LENGTH, stride: int = DEFAULT_STRIDE,
           geometry: CourtGeometry = CourtGeometry(), relevance: str = "max",
           variance_floor: float = DEFAULT_VARIANCE_FLOOR,
           min_samples: int = DEFAULT_MIN_SAMPLES) -> AblationResult:
    """Train (where the variant needs it) on ``train_pairs`` and score ``test_pairs``.

    ``bank`` is the full-signature bank; it is fitted from the training
    streams when omitted, and always refitted for ``drop_event``.
    """
    name, arg = parse_variant(variant)
    settings = dict(segment_length=segment_length, stride=stride, geometry=geometry, relevance=relevance)

    def training_streams() -> list[EventStream]:
        seen: dict[int, EventStream] = {}
        for p in train_pairs:
            seen.setdefault(id(p.stream_a), p.stream_a)
            seen.setdefault(id(p.stream_b), p.stream_b)
        return list(seen.values())

    def full_bank() -> MixtureBank:
        if bank is not None:
            return bank
        return fit_bank_from_streams(training_streams(), segment_length, stride, geometry,
                                     variance_floor=variance_floor, min_samples=min_samples)

    if name == "no_gm":
        model = train(train_pairs, None, config, feature="pooled", **settings)
    elif name == "drop_event":
        reduced = fit_bank_from_streams(training_streams(), segment_length, stride, geometry, (arg,),
                                        variance_floor, min_samples)
        model = train(train_pairs, reduced, config, dropped_events=(arg,), **settings)
    else:
        b = full_bank()
        if name == "unit_weights":
            model = AssessmentModel(np.ones(N_MIXTURES), b, **settings)
        else:
            model = train(train_pairs, b, config, **settings)
            if name == "single_top_gm":
                chosen = top_mixtures(model, arg)[arg - 1].index
                w = np.zeros_like(model.weights)
                w[chosen] = model.weights[chosen]
                model = model.with_weights(w)
    return AblationResult(variant, evaluate(test_pairs, model).accuracy, model)
