//! False-label classifier ensembles: an original naive Bayes classifier plus
//! members trained on annealed relabellings of held-out data, combined by
//! majority vote.

pub mod anneal;
pub mod dataset;
pub mod diversity;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod hmrf;
pub mod naive_bayes;
pub mod rng;
pub mod stats;
pub mod synth;

pub use anneal::{anneal, AnnealResult, AnnealSchedule, AnnealTraceRow, InitMode};
pub use dataset::{Dataset, Label, SplitPair};
pub use diversity::{decompose, majority_vote, DecompositionReport, VoteProfile};
pub use ensemble::{
    build_adaboost, build_bagging, build_false_label_ensemble, BaselineEnsemble, EnsembleModel,
    FalseLabelConfig, FalseLabelEnsemble,
};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, RunRecord};
pub use hmrf::{EnergyContext, EnergySettings, EnergyWeights, LabelMatrix, ReferenceMode, VoteMode};
pub use naive_bayes::NaiveBayesModel;
pub use stats::{diff_vs_best, friedman_test, summarize, FriedmanResult, MethodScores};
pub use synth::generate_synthetic;
