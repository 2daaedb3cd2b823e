"""Synthetic players, streams and expert pair labels.

Every simulated game is a timeline of shot attempts. The camera wearer's
own attempts arrive as a Poisson process at ``shoot_rate`` and are
preceded by possession; the other nine players shoot at the game-wide
``others_shot_rate``. Extra possession spells fill the wearer's
``possession_rate``. Observed detector probabilities are the ground truth
plus truncated Gaussian noise, clamped to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.stats import truncnorm

from . import _io
from .events import CourtGeometry, EventStream, format_stream

STAT_NAMES = ("made_2pt_rate", "made_3pt_rate", "missed_2pt_rate", "missed_3pt_rate", "possession_share")
DEFAULT_CRITERION_WEIGHTS = {
    "made_2pt_rate": 2.0,
    "made_3pt_rate": 3.0,
    "missed_2pt_rate": -1.0,
    "missed_3pt_rate": -1.0,
    "possession_share": 0.0,
}
NOISE_TRUNCATION = 3.0  # in standard deviations


class InsufficientPairs(ValueError):
    pass


@dataclass(frozen=True)
class PlayerProfile:
    shoot_rate: float = 1.0
    make_prob_2pt: float = 0.5
    make_prob_3pt: float = 0.35
    three_pt_tendency: float = 0.3
    possession_rate: float = 0.15
    noise_level: float = 0.1

    def __post_init__(self) -> None:
        if not self.shoot_rate > 0:
            raise ValueError("shoot_rate must be positive")
        for name in ("make_prob_2pt", "make_prob_3pt", "three_pt_tendency", "possession_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not self.noise_level >= 0:
            raise ValueError("noise_level must be non-negative")


@dataclass(frozen=True)
class ExpertCriterion:
    weights: dict = field(default_factory=lambda: dict(DEFAULT_CRITERION_WEIGHTS))
    tie_margin: float = 0.05

    def __post_init__(self) -> None:
        unknown = set(self.weights) - set(STAT_NAMES)
        if unknown:
            raise ValueError(f"unknown statistics {sorted(unknown)}")
        if not any(self.weights.values()):
            raise ValueError("criterion needs at least one nonzero weight")
        if not self.tie_margin > 0:
            raise ValueError("tie_margin must be positive")


@dataclass(frozen=True)
class SimConfig:
    duration: float = 25.0
    frame_rate: float = 5.0
    seed: int = 0
    geometry: CourtGeometry = CourtGeometry()
    others_shot_rate: float = 2.5
    others_make_prob: float = 0.45
    # gamma shape of the gaps between other players' shots; 1 is a Poisson process
    others_pace_shape: float = 1.0
    shot_frames: int = 5
    made_frames: int = 3

    def __post_init__(self) -> None:
        if not (self.duration > 0 and self.frame_rate > 0):
            raise ValueError("duration and frame_rate must be positive")
        if self.others_shot_rate < 0 or not 0 <= self.others_make_prob <= 1:
            raise ValueError("invalid shot rate or make probability for other players")
        if not self.others_pace_shape > 0:
            raise ValueError("others_pace_shape must be positive")
        if self.shot_frames < 1 or self.made_frames < 1:
            raise ValueError("event windows must span at least one frame")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * 60.0 * self.frame_rate))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        return d


@dataclass(frozen=True)
class RealizedStats:
    made_2pt: int
    made_3pt: int
    missed_2pt: int
    missed_3pt: int
    possession_frames: int
    n_frames: int
    duration: float

    def rates(self) -> dict[str, float]:
        return {
            "made_2pt_rate": self.made_2pt / self.duration,
            "made_3pt_rate": self.made_3pt / self.duration,
            "missed_2pt_rate": self.missed_2pt / self.duration,
            "missed_3pt_rate": self.missed_3pt / self.duration,
            "possession_share": self.possession_frames / self.n_frames,
        }


@dataclass(frozen=True, eq=False)
class SimulatedPlayer:
    player_id: str
    profile: PlayerProfile
    stream: EventStream
    stats: RealizedStats


def _shot_spot(rng: np.random.Generator, geometry: CourtGeometry, three: bool) -> np.ndarray:
    r = geometry.three_point_radius
    lo, hi = (r + 0.25, r + 1.75) if three else (0.8, r - 0.45)
    basket_id = int(rng.integers(2))
    bx, by = geometry.basket_positions[basket_id]
    toward = 1.0 if bx < geometry.court_length / 2 else -1.0
    for _ in range(1000):
        d = rng.uniform(lo, hi)
        theta = rng.uniform(-0.45 * math.pi, 0.45 * math.pi)
        x, y = bx + toward * d * math.cos(theta), by + d * math.sin(theta)
        if 0.2 <= x <= geometry.court_length - 0.2 and 0.2 <= y <= geometry.court_width - 0.2:
            return np.array([x, y])
    raise RuntimeError("could not place a shot inside the court")  # pragma: no cover


def _random_walk(rng: np.random.Generator, n: int, geometry: CourtGeometry) -> np.ndarray:
    steps = rng.normal(0.0, 0.25, size=(n, 2))
    pos = np.empty((n, 2))
    p = np.array([rng.uniform(0, geometry.court_length), rng.uniform(0, geometry.court_width)])
    hi = np.array([geometry.court_length, geometry.court_width])
    for i in range(n):
        p = p + steps[i]
        p = np.where(p < 0, -p, p)
        p = np.where(p > hi, 2 * hi - p, p)
        pos[i] = p
    return pos


def _renewal_times(rng: np.random.Generator, config: SimConfig, lo: int, hi: int) -> np.ndarray:
    if config.others_shot_rate == 0:
        return np.empty(0, dtype=np.int64)
    mean_gap = 60.0 * config.frame_rate / config.others_shot_rate
    k = config.others_pace_shape
    n_max = int((hi - lo) / mean_gap * 3 + 20)
    gaps = rng.gamma(k, mean_gap / k, size=n_max)
    t = lo + rng.uniform(0, mean_gap) + np.cumsum(gaps) - gaps[0]
    return np.floor(t[t < hi]).astype(np.int64)


def simulate_player(profile: PlayerProfile, config: SimConfig = SimConfig(), player_id: str = "player",
                    seed: int | np.random.SeedSequence | None = None) -> SimulatedPlayer:
    """Simulate one game from the wearer's viewpoint; deterministic in ``seed``."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = config.n_frames
    geometry = config.geometry
    tail = config.shot_frames + config.made_frames + 1
    lo_t, hi_t = 12, max(13, n - tail - 1)

    n_own = rng.poisson(profile.shoot_rate * config.duration)
    other_t = _renewal_times(rng, config, lo_t, hi_t)
    n_other = len(other_t)
    own_t = rng.integers(lo_t, hi_t, size=n_own)
    # attempt attributes are drawn up front so acceptance never shifts the stream
    own_three = rng.random(n_own) < profile.three_pt_tendency
    own_u = rng.random(n_own)
    own_lead = rng.integers(3, 11, size=n_own)
    other_made = rng.random(n_other) < config.others_make_prob

    candidates = sorted([(int(t), 0, i) for i, t in enumerate(own_t)] +
                        [(int(t), 1, i) for i, t in enumerate(other_t)])
    labels = np.zeros((n, 3), dtype=np.int8)
    blocked = np.zeros(n, dtype=bool)
    positions = _random_walk(rng, n, geometry)
    made = {"2": 0, "3": 0}
    missed = {"2": 0, "3": 0}
    last_end = 0
    for t, who, i in candidates:
        lead = int(own_lead[i]) if who == 0 else 2
        start, end = t - lead, t + tail
        if start < last_end or end > n:
            continue
        last_end = end
        blocked[start:end] = True
        labels[t:t + config.shot_frames, 0] = 1
        if who == 0:
            three = bool(own_three[i])
            success = own_u[i] < (profile.make_prob_3pt if three else profile.make_prob_2pt)
            labels[start:t + 1, 1] = 1
            positions[start:end] = _shot_spot(rng, geometry, three)
            key = "3" if three else "2"
            (made if success else missed)[key] += 1
        else:
            success = bool(other_made[i])
        if success:
            m0 = t + config.shot_frames - 1
            labels[m0:m0 + config.made_frames, 2] = 1

    target = int(round(profile.possession_rate * n))
    for _ in range(20000):
        if labels[:, 1].sum() >= target:
            break
        s = int(rng.integers(0, n))
        e = min(n, s + int(rng.integers(5, 26)))
        labels[s:e, 1] |= (~blocked[s:e]).astype(np.int8)

    if profile.noise_level > 0:
        noise = truncnorm.rvs(-NOISE_TRUNCATION, NOISE_TRUNCATION, scale=profile.noise_level,
                              size=(n, 3), random_state=rng)
        probs = np.clip(labels + noise, 0.0, 1.0)
    else:
        probs = labels.astype(np.float64)

    stream = EventStream(player_id, np.arange(n, dtype=np.int64), probs, positions, labels)
    stats = RealizedStats(made["2"], made["3"], missed["2"], missed["3"],
                          int(labels[:, 1].sum()), n, config.duration)
    return SimulatedPlayer(player_id, profile, stream, stats)


def criterion_value(stats: RealizedStats, criterion: ExpertCriterion) -> float:
    rates = stats.rates()
    return float(sum(w * rates[k] for k, w in criterion.weights.items()))


def label_pair(stats_a: RealizedStats, stats_b: RealizedStats, criterion: ExpertCriterion) -> int | None:
    """1 if player a is better, 0 if worse, ``None`` when within the tie margin."""
    ca, cb = criterion_value(stats_a, criterion), criterion_value(stats_b, criterion)
    if abs(ca - cb) <= criterion.tie_margin:
        return None
    return int(ca > cb)


PROFILE_RANGES = {
    "shoot_rate": (0.2, 3.0),
    "make_prob_2pt": (0.1, 0.9),
    "make_prob_3pt": (0.05, 0.7),
    "three_pt_tendency": (0.05, 0.6),
    "possession_rate": (0.12, 0.2),
}


def sample_profile(rng: np.random.Generator, noise_level: float = 0.1, ranges: dict | None = None) -> PlayerProfile:
    """Draw each profile field uniformly from ``ranges`` (default ``PROFILE_RANGES``)."""
    ranges = {**PROFILE_RANGES, **(ranges or {})}
    values = {name: float(rng.uniform(*ranges[name])) for name in PROFILE_RANGES}
    return PlayerProfile(noise_level=noise_level, **values)


@dataclass(frozen=True, eq=False)
class Split:
    players: list[SimulatedPlayer]
    pairs: list[tuple[int, int, int]]


@dataclass(frozen=True, eq=False)
class Dataset:
    config: SimConfig
    criterion: ExpertCriterion
    noise_level: float
    train: Split
    test: Split


def make_pairs(players: list[SimulatedPlayer], n_pairs: int, criterion: ExpertCriterion,
               rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Distinct unordered pairs in random order and orientation, ties rejected."""
    candidates = list(combinations(range(len(players)), 2))
    pairs = []
    for k in rng.permutation(len(candidates)):
        i, j = candidates[k]
        if rng.random() < 0.5:
            i, j = j, i
        y = label_pair(players[i].stats, players[j].stats, criterion)
        if y is None:
            continue
        pairs.append((i, j, y))
        if len(pairs) == n_pairs:
            return pairs
    raise InsufficientPairs(f"only {len(pairs)} untied pairs available, {n_pairs} requested")


def generate_dataset(config: SimConfig = SimConfig(), n_players: int = 48, n_pairs: int = 250,
                     criterion: ExpertCriterion | None = None, noise_level: float = 0.1,
                     profile_ranges: dict | None = None) -> Dataset:
    """Disjoint train/test players (first half / second half) with labeled pairs in each."""
    if n_players < 4:
        raise ValueError("need at least 4 players")
    if n_pairs < 1:
        raise ValueError("need at least 1 pair per split")
    criterion = criterion or ExpertCriterion()
    root = np.random.SeedSequence(config.seed)
    profile_seq, pair_seq, player_seq = root.spawn(3)
    profile_rng = np.random.default_rng(profile_seq)
    profiles = [sample_profile(profile_rng, noise_level, profile_ranges) for _ in range(n_players)]
    players = [simulate_player(p, config, f"p{i:03d}", seed)
               for i, (p, seed) in enumerate(zip(profiles, player_seq.spawn(n_players)))]
    n_train = n_players // 2
    pair_rngs = [np.random.default_rng(s) for s in pair_seq.spawn(2)]
    splits = []
    for rng, group in zip(pair_rngs, (players[:n_train], players[n_train:])):
        splits.append(Split(group, make_pairs(group, n_pairs, criterion, rng)))
    return Dataset(config, criterion, noise_level, splits[0], splits[1])


def dataset_metadata(dataset: Dataset) -> dict:
    players = []
    for split_name, split in (("train", dataset.train), ("test", dataset.test)):
        for p in split.players:
            players.append({
                "player_id": p.player_id,
                "split": split_name,
                "profile": asdict(p.profile),
                "stats": asdict(p.stats),
                "criterion_value": criterion_value(p.stats, dataset.criterion),
            })
    return {
        "config": dataset.config.to_dict(),
        "criterion": {"weights": dict(dataset.criterion.weights), "tie_margin": dataset.criterion.tie_margin},
        "noise_level": dataset.noise_level,
        "players": players,
    }


def write_dataset(dataset: Dataset, out_dir) -> None:
    """Write ``metadata.json`` and per-split ``streams/*.csv`` + ``pairs.csv`` under ``out_dir``."""
    from .manifest import format_manifest

    out = Path(out_dir)
    for split_name, split in (("train", dataset.train), ("test", dataset.test)):
        base = out / split_name
        (base / "streams").mkdir(parents=True, exist_ok=True)
        for p in split.players:
            (base / "streams" / f"{p.player_id}.csv").write_bytes(format_stream(p.stream))
        rows = [(f"streams/{split.players[i].player_id}.csv", f"streams/{split.players[j].player_id}.csv", y)
                for i, j, y in split.pairs]
        (base / "pairs.csv").write_text(format_manifest(rows), encoding="utf-8")
    (out / "metadata.json").write_text(_io.dumps(dataset_metadata(dataset)), encoding="utf-8")
