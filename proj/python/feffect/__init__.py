"""Causal text-feature effect estimation and effect-controlled training.

Thin python surface over the C++ core: synthetic corpus generators with known
ground truth, direct / propensity-DR / Riesz-DR effect estimators, label-flip
counterfactual augmentation, and group-wise evaluation.
"""

from ._core import (  # noqa: F401
    BiasReport,
    BiasRow,
    BiasScanOptions,
    CfProvenance,
    Classifier,
    ConfigError,
    ConsistencyError,
    Corpus,
    CorpusMeta,
    CounterfactualCorpus,
    Document,
    EffectEstimate,
    EffectEstimateSet,
    EffectTokenConfig,
    EstimateOptions,
    EstimatorMethod,
    FeatureSpec,
    FeaturizerConfig,
    FlipOptions,
    GenConfigSS,
    GenConfigSub,
    GenerationError,
    Generator,
    GroupMetrics,
    InfeasibleError,
    ModelMode,
    ParseError,
    PropensityModel,
    SchemaError,
    SplitError,
    TrainConfig,
    TrainingError,
    TwoHeadModel,
    apply_counterfactual,
    ate_direct,
    ate_direct_fn,
    ate_dr,
    ate_dr_propensity,
    ate_dr_riesz,
    bce_loss,
    bias_report_csv,
    bias_report_json,
    bias_report_table,
    bias_scan,
    build_augmented,
    default_vocab,
    effect_estimates_csv,
    estimate_feature_effect,
    featurize,
    flip_labels,
    generate_ss,
    generate_subsampled,
    group_metrics,
    group_metrics_csv,
    group_metrics_json,
    group_metrics_table,
    group_of,
    hash_token,
    learned_effect,
    load_classifier,
    multiplier_propensity,
    oracle_ate_enumerated,
    read_jsonl,
    remove_token_baseline,
    riesz_loss,
    save_classifier,
    split,
    strip_feature_tokens,
    subsample_baseline,
    train_classifier,
    train_feag,
    train_propensity,
    train_regularized,
    train_two_head,
    with_feature_forced,
    write_augmented_jsonl,
    write_jsonl,
)

__version__ = "0.1.0"
