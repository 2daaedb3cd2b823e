"""Player skill assessment from per-frame basketball event probabilities."""
from .assessment import (
    AssessmentModel,
    Evaluation,
    NoRelevantSegments,
    PairExample,
    ScoreBreakdown,
    TrainConfig,
    ablate,
    evaluate,
    hinge_loss,
    score,
    segment_relevance,
    top_mixtures,
    train,
)
from .events import (
    CourtGeometry,
    EventStream,
    FrameRecord,
    Segment,
    StreamError,
    StreamFormat,
    parse_stream,
    read_stream,
    segment_stream,
    zone_indicator,
)
from .features import (
    GaussianComponent,
    MixtureBank,
    Signature,
    encode,
    fit_mixtures,
    pool_segment,
    signature_of_labels,
)
from .kernels import BACKEND
from .simulator import (
    ExpertCriterion,
    PlayerProfile,
    SimConfig,
    generate_dataset,
    label_pair,
    simulate_player,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
