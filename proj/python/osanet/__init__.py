"""EDF sleep-study ingestion and 1D-CNN OSA severity classification."""

from ._core import (
    Cohort,
    ConfigError,
    CohortError,
    CurvePoint,
    EdfError,
    MetricsError,
    Model,
    ModelConfig,
    NnError,
    PipelineError,
    SegmentTensor,
    SeverityLabel,
    SignalTrace,
    SplitPlan,
    Subject,
    SynthError,
    SynthSpec,
    TrainConfig,
    TrainError,
    build_model,
    compact_architecture,
    confusion,
    edf_signal_labels,
    evaluate,
    generate_cohort,
    label_from_oahi3,
    load_checkpoint,
    load_manifest,
    load_tensor,
    normalize,
    out_length,
    full_architecture,
    preprocess,
    read_edf_signals,
    report,
    save_checkpoint,
    save_tensor,
    segment,
    stratified_split,
    train,
    undersample,
)

__all__ = [
    "Cohort",
    "ConfigError",
    "CohortError",
    "CurvePoint",
    "EdfError",
    "MetricsError",
    "Model",
    "ModelConfig",
    "NnError",
    "PipelineError",
    "SegmentTensor",
    "SeverityLabel",
    "SignalTrace",
    "SplitPlan",
    "Subject",
    "SynthError",
    "SynthSpec",
    "TrainConfig",
    "TrainError",
    "build_model",
    "compact_architecture",
    "confusion",
    "edf_signal_labels",
    "evaluate",
    "generate_cohort",
    "label_from_oahi3",
    "load_checkpoint",
    "load_manifest",
    "load_tensor",
    "normalize",
    "out_length",
    "full_architecture",
    "preprocess",
    "read_edf_signals",
    "report",
    "save_checkpoint",
    "save_tensor",
    "segment",
    "stratified_split",
    "train",
    "undersample",
]
