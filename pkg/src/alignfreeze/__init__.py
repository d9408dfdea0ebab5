"""Cross-lingual realignment of a small transformer encoder with layer freezing."""

__version__ = "0.1.0"

from .align_extract import (
    AlignmentSet,
    BilingualDictionary,
    SentencePair,
    dictionary_align,
    format_pharaoh,
    parse_pharaoh,
    select_word_reps,
    symmetrize_gdfa,
)
from .encoder import (
    EncoderConfig,
    EncoderModel,
    FreezeMask,
    FreezeStrategy,
    apply_freeze,
    backward,
    forward,
    init_model,
    train_step,
)
from .evalstats import RunStats, SignificanceVerdict, aggregate, count_verdicts, significance
from .pipeline import (
    ExperimentReport,
    ExperimentSpec,
    TaskHead,
    TrainConfig,
    run_experiment,
    run_finetune,
    run_realignment,
)
from .qe_filter import ScoredPair, filter_corpus, percentile_threshold
from .realign_loss import LossConfig, RealignBatch, build_batch, contrastive_loss, cosine_sim
from .tasks import SyntheticSpec, evaluate_sentence_task, evaluate_token_task, generate_bundle
