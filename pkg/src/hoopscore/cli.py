"""``hoopscore`` command line: simulate, train, score, evaluate, ablate, inspect.

Every subcommand accepts ``--config PATH`` (a JSON object whose keys are the
long option names with dashes turned into underscores), ``--seed`` and
``--out``. Explicit flags override the config file.

Exit status is 0 on success, 1 when arguments fail validation before any
work starts and 2 when the work itself fails. Failures print one line to
stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Callable

from . import _io
from .assessment import (
    AssessmentModel,
    TrainConfig,
    ablate,
    evaluate,
    parse_variant,
    score,
    signed_top_mixtures,
    top_mixtures,
    train,
    variant_title,
)
from .events import CourtGeometry, check_segmentation, read_stream
from .features import BIT_LABELS, DEFAULT_MIN_SAMPLES, DEFAULT_VARIANCE_FLOOR, fit_bank_from_streams
from .manifest import read_pairs
from .simulator import ExpertCriterion, PROFILE_RANGES, SimConfig, generate_dataset, write_dataset

DEFAULT_ABLATIONS = ("full", "no_gm", "unit_weights", "drop_event:1", "drop_event:2", "drop_event:3",
                     "drop_event:4", "single_top_gm:1", "single_top_gm:2")


class ValidationError(Exception):
    pass


# -- option plumbing ---------------------------------------------------------

_DEFAULTS: dict[str, dict] = {}
_PATHS: dict[str, set] = {}


def _opt(parser: argparse.ArgumentParser, command: str, flag: str, default=None, **kw) -> None:
    """Add an option whose default is resolved later so the config file can fill it."""
    dest = flag.lstrip("-").replace("-", "_")
    _DEFAULTS.setdefault(command, {})[dest] = default
    if kw.get("type") is Path:
        _PATHS.setdefault(command, set()).add(dest)
    if default is not None and "help" in kw and kw.get("action") != "store_true":
        kw["help"] += f" (default {default})"
    if kw.get("action") == "store_true":
        kw["default"] = None
    parser.add_argument(flag, dest=dest, **kw)


def _common(p: argparse.ArgumentParser, command: str) -> None:
    p.add_argument("--config", type=Path, help="JSON file of option values; flags win")
    _opt(p, command, "--seed", 0, type=int, help="random seed")
    _opt(p, command, "--out", None, type=Path, help="output directory")


def _segmentation(p: argparse.ArgumentParser, command: str) -> None:
    _opt(p, command, "--segment-length", 10, type=int, help="frames per segment, even")
    _opt(p, command, "--stride", 1, type=int, help="frames between segment starts")


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    config: dict = {}
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ValidationError("config file must hold a JSON object")
    known = _DEFAULTS[args.command]
    extra = {k for k in config if k not in known and k not in ("criterion", "profile_ranges", "geometry")}
    if extra:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(extra))}")
    for dest, default in known.items():
        if getattr(args, dest) is None:
            value = config.get(dest, default)
            if dest in _PATHS.get(args.command, ()) and value is not None:
                value = Path(value)
            setattr(args, dest, value)
    args.extra_config = {k: config[k] for k in ("criterion", "profile_ranges", "geometry") if k in config}
    return args


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def _geometry(args: argparse.Namespace) -> CourtGeometry:
    try:
        return CourtGeometry.from_dict(args.extra_config.get("geometry", {}))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid geometry: {exc}") from None


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(learning_rate=args.learning_rate, iterations=args.iterations, seed=args.seed,
                       weight_init=args.weight_init, kink=args.kink)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit(args: argparse.Namespace, files: dict[str, str]) -> None:
    """Write report files atomically into ``--out``, or print them when no directory is given."""
    if args.out is None:
        for text in files.values():
            sys.stdout.write(text)
        return
    for name, text in files.items():
        _io.atomic_write(args.out / name, text)


# -- subcommands -------------------------------------------------------------

def _check_simulate(args):
    _require(args, "out")
    if args.players < 4:
        raise ValidationError("need at least 4 players")
    if args.pairs < 1:
        raise ValidationError("need at least 1 pair per split")
    if args.noise < 0:
        raise ValidationError("noise must be non-negative")
    if args.out.exists() and (not args.out.is_dir() or any(args.out.iterdir())):
        raise ValidationError(f"output directory {args.out} is not empty")
    ranges = args.extra_config.get("profile_ranges", {})
    unknown = set(ranges) - set(PROFILE_RANGES)
    if unknown:
        raise ValidationError(f"unknown profile ranges: {', '.join(sorted(unknown))}")
    crit = args.extra_config.get("criterion", {})
    criterion = ExpertCriterion(weights=crit.get("weights", ExpertCriterion().weights),
                                tie_margin=float(crit.get("tie_margin", 0.05)))
    config = SimConfig(duration=args.duration, frame_rate=args.frame_rate, seed=args.seed, geometry=_geometry(args))
    return config, criterion, {k: tuple(v) for k, v in ranges.items()}


def cmd_simulate(args):
    config, criterion, ranges = _check_simulate(args)
    yield
    dataset = generate_dataset(config, args.players, args.pairs, criterion, args.noise, ranges)
    with _io.staged_directory(args.out) as tmp:
        write_dataset(dataset, tmp)
    print(f"wrote {args.players} players, {len(dataset.train.pairs)} train and "
          f"{len(dataset.test.pairs)} test pairs to {args.out}")


def cmd_train(args):
    _require(args, "pairs", "out")
    check_segmentation(args.segment_length, args.stride)
    config = _train_config(args)
    geometry = _geometry(args)
    yield
    pairs = read_pairs(args.pairs, args.ground_truth_events)
    streams = list({id(s): s for p in pairs for s in (p.stream_a, p.stream_b)}.values())
    bank = fit_bank_from_streams(streams, args.segment_length, args.stride, geometry,
                                 variance_floor=args.variance_floor, min_samples=args.min_samples)
    model = train(pairs, bank, config, segment_length=args.segment_length, stride=args.stride,
                  geometry=geometry, relevance=args.relevance)
    trace = _csv(("iteration", "hinge_loss"), ((i, _fmt(v)) for i, v in enumerate(model.loss_history)))
    _io.atomic_write(args.out / "trace.csv", trace)
    model.save(args.out / "model.json")
    step = max(1, (len(model.loss_history) - 1) // 10)
    for i in range(0, len(model.loss_history), step):
        print(f"iteration {i} hinge loss {model.loss_history[i]:.6g}")
    print(f"final hinge loss {model.loss_history[-1]:.6g}")


def cmd_score(args):
    _require(args, "model", "stream")
    yield
    model = AssessmentModel.load(args.model)
    stream = read_stream(args.stream)
    if args.ground_truth_events:
        stream = stream.ground_truth_view()
    result = score(stream, model)
    rows = [(t.start_frame, _fmt(t.relevance), _fmt(t.contribution), _fmt(t.weighted_term))
            for t in result.per_segment]
    table = _csv(("start_frame", "relevance", "contribution", "weighted_term"), rows)
    _emit(args, {"contributions.csv": table})
    print(f"total {_fmt(result.total)}", file=sys.stderr if args.out is None else sys.stdout)


def cmd_evaluate(args):
    _require(args, "pairs")
    variant = args.ablation
    if variant is not None:
        parse_variant(variant)
        if variant != "full":
            _require(args, "train_pairs")
    if variant in (None, "full") and args.train_pairs is None:
        _require(args, "model")
    check_segmentation(args.segment_length, args.stride)
    config = _train_config(args)
    geometry = _geometry(args)
    yield
    test_pairs = read_pairs(args.pairs, args.ground_truth_events)
    if args.train_pairs is None:
        model = AssessmentModel.load(args.model)
    else:
        train_pairs = read_pairs(args.train_pairs, args.ground_truth_events)
        bank = AssessmentModel.load(args.model).bank if args.model is not None else None
        model = ablate(variant or "full", train_pairs, test_pairs, config, bank=bank,
                       segment_length=args.segment_length, stride=args.stride, geometry=geometry,
                       relevance=args.relevance, variance_floor=args.variance_floor,
                       min_samples=args.min_samples).model
    result = evaluate(test_pairs, model)
    rows = [(v.index, _fmt(v.score_a), _fmt(v.score_b), v.label, int(v.correct)) for v in result.verdicts]
    _emit(args, {"verdicts.csv": _csv(("pair", "score_a", "score_b", "label", "correct"), rows)})
    print(f"accuracy {result.accuracy:.4f}", file=sys.stderr if args.out is None else sys.stdout)


def cmd_ablate(args):
    _require(args, "train_pairs", "test_pairs")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise ValidationError("no ablation variants given")
    for v in variants:
        parse_variant(v)
    check_segmentation(args.segment_length, args.stride)
    config = _train_config(args)
    geometry = _geometry(args)
    yield
    train_pairs = read_pairs(args.train_pairs, args.ground_truth_events)
    test_pairs = read_pairs(args.test_pairs, args.ground_truth_events)
    streams = list({id(s): s for p in train_pairs for s in (p.stream_a, p.stream_b)}.values())
    bank = fit_bank_from_streams(streams, args.segment_length, args.stride, geometry,
                                 variance_floor=args.variance_floor, min_samples=args.min_samples)
    rows = []
    for v in variants:
        res = ablate(v, train_pairs, test_pairs, config, bank=bank, segment_length=args.segment_length,
                     stride=args.stride, geometry=geometry, relevance=args.relevance,
                     variance_floor=args.variance_floor, min_samples=args.min_samples)
        rows.append((v, variant_title(v), f"{res.accuracy:.4f}"))
    _emit(args, {"ablation.csv": _csv(("variant", "method", "accuracy"), rows)})


def cmd_inspect(args):
    _require(args, "model")
    if args.top < 1:
        raise ValidationError("--top must be at least 1")
    if args.sign not in ("abs", "positive", "negative"):
        raise ValidationError("--sign must be abs, positive or negative")
    yield
    model = AssessmentModel.load(args.model)
    if args.sign == "abs":
        chosen = top_mixtures(model, args.top)
    else:
        n_active = len(model.bank.active_indices)
        if args.top > n_active:
            raise ValueError(f"k={args.top} outside 1..{n_active} active mixtures")
        chosen = signed_top_mixtures(model, args.top, 1 if args.sign == "positive" else -1)
    rows = [(m.index, _fmt(m.weight), *m.bits) for m in chosen]
    _emit(args, {"top_mixtures.csv": _csv(("index", "weight", *BIT_LABELS), rows)})


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    _DEFAULTS.clear()
    _PATHS.clear()
    parser = argparse.ArgumentParser(prog="hoopscore", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _common(p, "simulate")
    _opt(p, "simulate", "--players", 48, type=int, help="number of players, split in half")
    _opt(p, "simulate", "--pairs", 250, type=int, help="labeled pairs per split")
    _opt(p, "simulate", "--noise", 0.1, type=float, help="detector noise std")
    _opt(p, "simulate", "--duration", SimConfig.duration, type=float, help="minutes of play per player")
    _opt(p, "simulate", "--frame-rate", SimConfig.frame_rate, type=float, help="frames per second")

    def learner(p, name):
        _segmentation(p, name)
        _opt(p, name, "--learning-rate", 0.001, type=float, help="step size")
        _opt(p, name, "--iterations", 100, type=int, help="gradient steps")
        _opt(p, name, "--weight-init", "zeros", choices=("zeros", "small_uniform"), help="initial weights")
        _opt(p, name, "--kink", "active", choices=("active", "zero"), help="subgradient at zero margin")
        _opt(p, name, "--relevance", "max", choices=("max", "mean"), help="segment relevance rule")
        _opt(p, name, "--min-samples", DEFAULT_MIN_SAMPLES, type=int, help="samples to activate a mixture")
        _opt(p, name, "--variance-floor", DEFAULT_VARIANCE_FLOOR, type=float, help="minimum variance")
        _opt(p, name, "--ground-truth-events", False, action="store_true",
             help="use annotated events instead of detector probabilities")

    p = sub.add_parser("train", help="fit the mixture bank and the weights")
    _common(p, "train")
    _opt(p, "train", "--pairs", type=Path, help="training pair manifest")
    learner(p, "train")

    p = sub.add_parser("score", help="per-segment contributions of one stream")
    _common(p, "score")
    _opt(p, "score", "--model", type=Path, help="model.json")
    _opt(p, "score", "--stream", type=Path, help="stream CSV")
    _opt(p, "score", "--ground-truth-events", False, action="store_true", help="score the annotation")

    p = sub.add_parser("evaluate", help="pairwise accuracy on labeled pairs")
    _common(p, "evaluate")
    _opt(p, "evaluate", "--model", type=Path, help="model.json")
    _opt(p, "evaluate", "--pairs", type=Path, help="test pair manifest")
    _opt(p, "evaluate", "--ablation", None, help="variant to train and evaluate, e.g. no_gm")
    _opt(p, "evaluate", "--train-pairs", type=Path, help="training manifest for --ablation")
    learner(p, "evaluate")

    p = sub.add_parser("ablate", help="accuracy table over model variants")
    _common(p, "ablate")
    _opt(p, "ablate", "--train-pairs", type=Path, help="training pair manifest")
    _opt(p, "ablate", "--test-pairs", type=Path, help="test pair manifest")
    _opt(p, "ablate", "--variants", ",".join(DEFAULT_ABLATIONS), help="comma separated variants")
    learner(p, "ablate")

    p = sub.add_parser("inspect", help="largest-weight mixtures of a model")
    _common(p, "inspect")
    _opt(p, "inspect", "--model", type=Path, help="model.json")
    _opt(p, "inspect", "--top", 4, type=int, help="number of mixtures")
    _opt(p, "inspect", "--sign", "abs", help="rank by abs, positive or negative weight")
    return parser


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "inspect": cmd_inspect,
}


def _one_line(exc: BaseException) -> str:
    text = str(exc) or type(exc).__name__
    return " ".join(text.split())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    # Each command is a generator: the code before its ``yield`` validates, the rest does the work.
    try:
        args = _resolve(args)
        steps = COMMANDS[args.command](args)
        next(steps)
    except (ValidationError, ValueError, TypeError) as exc:
        print(f"hoopscore {args.command}: error: {_one_line(exc)}", file=sys.stderr)
        return 1
    try:
        next(steps, None)
    except Exception as exc:
        print(f"hoopscore {args.command}: error: {_one_line(exc)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
