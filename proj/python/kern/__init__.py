"""Fashion-trend forecasting: synthetic corpora, the KERN model, baselines
and the benchmark harness. Thin python surface over the C++ core."""

from kern._core import (
    Checkpoint,
    Corpus,
    ElementKind,
    ExperimentSetting,
    FashionElement,
    KernError,
    SynthConfig,
    TimeSeries,
    TrainConfig,
    TrainRecord,
    UserGroup,
    ar_forecast,
    basis_forecast,
    checkpoint_to_json,
    es_forecast,
    generate_synthetic_corpus,
    impute_missing,
    last_forecast,
    load_checkpoint,
    load_corpus,
    load_taxonomy_edges,
    mae,
    make_samples,
    mape,
    mean_forecast,
    message_pass,
    odd_even_split,
    popularity_series,
    run_benchmark,
    save_checkpoint,
    save_corpus,
    setting_by_name,
    synthetic_taxonomy_edges,
    timestep_position,
    train,
    trend_report,
    var_forecast,
)

__all__ = [
    "Checkpoint",
    "Corpus",
    "ElementKind",
    "ExperimentSetting",
    "FashionElement",
    "KernError",
    "SynthConfig",
    "TimeSeries",
    "TrainConfig",
    "TrainRecord",
    "UserGroup",
    "ar_forecast",
    "basis_forecast",
    "checkpoint_to_json",
    "es_forecast",
    "generate_synthetic_corpus",
    "impute_missing",
    "last_forecast",
    "load_checkpoint",
    "load_corpus",
    "load_taxonomy_edges",
    "mae",
    "make_samples",
    "mape",
    "mean_forecast",
    "message_pass",
    "odd_even_split",
    "popularity_series",
    "run_benchmark",
    "save_checkpoint",
    "save_corpus",
    "setting_by_name",
    "synthetic_taxonomy_edges",
    "timestep_position",
    "train",
    "trend_report",
    "var_forecast",
]
