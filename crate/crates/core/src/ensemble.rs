//! Ensemble construction: false-label ensembles plus bagging and AdaBoost
//! baselines over the same naive Bayes base learner.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, initial_state, AnnealResult, AnnealSchedule, InitMode};
use crate::dataset::{Dataset, Label};
use crate::diversity::{majority_vote, VoteProfile};
use crate::error::{Error, Result};
use crate::hmrf::{EnergyContext, EnergySettings};
use crate::naive_bayes::NaiveBayesModel;
use crate::rng::{derive_seed, rng_from_seed};

pub const ENSEMBLE_FORMAT: &str = "falselabel-ensemble";
pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// A trained ensemble member. Training sets that end up with a single class
/// (possible after relabelling or resampling) produce a constant predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Member {
    NaiveBayes(NaiveBayesModel),
    Constant { label: Label },
}

impl Member {
    pub fn train(d: &Dataset) -> Result<Member> {
        match d.class_counts() {
            (0, 0) => Err(Error::NoInstances),
            (_, 0) => Ok(Member::Constant {
                label: Label::Positive,
            }),
            (0, _) => Ok(Member::Constant {
                label: Label::Negative,
            }),
            _ => Ok(Member::NaiveBayes(NaiveBayesModel::train(d)?)),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            Member::NaiveBayes(m) => m.predict(x),
            Member::Constant { label } => Ok(*label),
        }
    }
}

fn check_dims(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FalseLabelConfig {
    pub energy: EnergySettings,
    pub schedule: AnnealSchedule,
    pub init_mode: InitMode,
    /// Extra split attempts when a half misses a class.
    pub max_resplits: usize,
}

impl Default for FalseLabelConfig {
    fn default() -> Self {
        FalseLabelConfig {
            energy: EnergySettings::default(),
            schedule: AnnealSchedule::default(),
            init_mode: InitMode::default(),
            max_resplits: 10,
        }
    }
}

/// Seeds and settings a false-label ensemble was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub split_seed: u64,
    pub split_attempts: usize,
    pub anneal_seed: u64,
    pub init_seed: u64,
    pub config: FalseLabelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseLabelEnsemble {
    pub size: usize,
    pub feature_count: usize,
    /// Member 0 is the original classifier.
    pub members: Vec<Member>,
    pub provenance: Provenance,
}

impl FalseLabelEnsemble {
    pub fn votes(&self, x: &[f64]) -> Result<Vec<Label>> {
        check_dims(self.feature_count, x)?;
        self.members.iter().map(|m| m.predict(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        majority_vote(&self.votes(x)?)
    }

    pub fn predict_all(&self, d: &Dataset) -> Result<Vec<Label>> {
        d.rows().map(|(x, _)| self.predict(x)).collect()
    }

    pub fn vote_profiles(&self, d: &Dataset) -> Result<Vec<VoteProfile>> {
        d.rows()
            .map(|(x, y)| Ok(VoteProfile::new(self.votes(x)?, y)))
            .collect()
    }
}

/// A trained false-label ensemble with the intermediate artefacts of its
/// construction.
#[derive(Debug, Clone)]
pub struct EnsembleBuild {
    pub ensemble: FalseLabelEnsemble,
    pub anneal: AnnealResult,
    /// Balanced half the original classifier was trained on.
    pub orig_half: Dataset,
    /// Balanced half the annealed labels were assigned to.
    pub label_half: Dataset,
    pub energy: EnergyContext,
}

pub fn relabel(d: &Dataset, labels: &[Label]) -> Result<Dataset> {
    d.relabel(labels)
}

pub fn build_false_label_ensemble(t: &Dataset, size: usize, config: &FalseLabelConfig, seed: u64) -> Result<FalseLabelEnsemble> {
    build_false_label_ensemble_traced(t, size, config, seed, None).map(|b| b.ensemble)
}

/// Splits `t`, trains the original classifier on one half, anneals `size - 1`
/// labellings of the other half and trains one member per labelling.
pub fn build_false_label_ensemble_traced(
    t: &Dataset,
    size: usize,
    config: &FalseLabelConfig,
    seed: u64,
    hook: Option<crate::anneal::TraceHook<'_>>,
) -> Result<EnsembleBuild> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::InvalidEnsembleSize(size));
    }
    if !t.has_both_classes() {
        return Err(Error::SingleClass);
    }
    config.energy.validate()?;
    config.schedule.validate()?;

    let attempts = config.max_resplits + 1;
    let mut chosen = None;
    for attempt in 0..attempts {
        let split_seed = derive_seed(seed, "split", attempt as u64);
        let split = t.random_split(split_seed)?;
        if split.part0.has_both_classes() && split.part1.has_both_classes() {
            chosen = Some((split, split_seed, attempt + 1));
            break;
        }
    }
    let (split, split_seed, split_attempts) = chosen.ok_or(Error::ClassCoverage(attempts))?;

    let orig_half = split.part0.bootstrap_balance(derive_seed(seed, "balance", 0))?;
    let label_half = split.part1.bootstrap_balance(derive_seed(seed, "balance", 1))?;

    let orig = NaiveBayesModel::train(&orig_half)?;
    let predicted = orig.predict_all(&label_half)?;
    let energy = EnergyContext::new(predicted, label_half.labels().to_vec(), config.energy.clone())?;

    let init_seed = derive_seed(seed, "init", 0);
    let anneal_seed = derive_seed(seed, "anneal", config.schedule.seed);
    let init = initial_state(size - 1, label_half.len(), config.init_mode, &energy, init_seed)?;
    let schedule = AnnealSchedule {
        seed: anneal_seed,
        ..config.schedule.clone()
    };
    let result = anneal(&energy, &schedule, init, hook)?;

    let mut members = Vec::with_capacity(size);
    members.push(Member::NaiveBayes(orig));
    for row in result.best_state.row_vectors() {
        members.push(Member::train(&relabel(&label_half, row)?)?);
    }

    Ok(EnsembleBuild {
        ensemble: FalseLabelEnsemble {
            size,
            feature_count: t.feature_count(),
            members,
            provenance: Provenance {
                seed,
                split_seed,
                split_attempts,
                anneal_seed,
                init_seed,
                config: config.clone(),
            },
        },
        anneal: result,
        orig_half,
        label_half,
        energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Bagging,
    Adaboost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEnsemble {
    pub kind: BaselineKind,
    pub feature_count: usize,
    pub members: Vec<Member>,
    pub member_weights: Vec<f64>,
}

impl BaselineEnsemble {
    /// Sign of the weighted vote sum; zero goes to +1.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        check_dims(self.feature_count, x)?;
        let mut score = 0.0;
        for (m, w) in self.members.iter().zip(&self.member_weights) {
            score += w * m.predict(x)?.as_f64();
        }
        Ok(Label::from_sign(score >= 0.0))
    }

    pub fn predict_all(&self, d: &Dataset) -> Result<Vec<Label>> {
        d.rows().map(|(x, _)| self.predict(x)).collect()
    }
}

/// `size` members, each trained on a bootstrap sample of `|t|` rows.
pub fn build_bagging(t: &Dataset, size: usize, seed: u64) -> Result<BaselineEnsemble> {
    if size < 1 {
        return Err(Error::InvalidConfig("bagging needs at least one member".into()));
    }
    if !t.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let mut rng = rng_from_seed(seed);
    let mut members = Vec::with_capacity(size);
    for _ in 0..size {
        let sample: Vec<usize> = (0..t.len()).map(|_| rng.random_range(0..t.len())).collect();
        members.push(Member::train(&t.subset(&sample))?);
    }
    Ok(BaselineEnsemble {
        kind: BaselineKind::Bagging,
        feature_count: t.feature_count(),
        member_weights: vec![1.0; size],
        members,
    })
}

const EPS_CLAMP: f64 = 1e-10;

/// Per-round diagnostics of an AdaBoost run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostingRounds {
    pub errors: Vec<f64>,
    pub weight_sums: Vec<f64>,
}

pub fn build_adaboost(t: &Dataset, rounds: usize, seed: u64) -> Result<BaselineEnsemble> {
    build_adaboost_with_rounds(t, rounds, seed).map(|(e, _)| e)
}

/// Discrete AdaBoost.M1 with weight-proportional resampling. A round whose
/// weighted error reaches 0.5 is discarded and stops boosting; a perfect
/// round also stops it. With no surviving round the result is a single
/// unweighted learner trained on `t`.
pub fn build_adaboost_with_rounds(t: &Dataset, rounds: usize, seed: u64) -> Result<(BaselineEnsemble, BoostingRounds)> {
    if rounds < 1 {
        return Err(Error::InvalidConfig("adaboost needs at least one round".into()));
    }
    if !t.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n = t.len();
    let mut rng = rng_from_seed(seed);
    let mut weights = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut alphas = Vec::new();
    let mut diag = BoostingRounds::default();

    for _ in 0..rounds {
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidConfig(format!("boosting weights: {e}")))?;
        let sample: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let member = Member::train(&t.subset(&sample))?;
        let hits: Vec<bool> = t
            .rows()
            .map(|(x, y)| member.predict(x).map(|p| p == y))
            .collect::<Result<_>>()?;
        let eps: f64 = weights
            .iter()
            .zip(&hits)
            .filter(|&(_, &hit)| !hit)
            .map(|(w, _)| w)
            .sum();
        diag.errors.push(eps);
        if eps >= 0.5 {
            break;
        }
        let e = eps.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        members.push(member);
        alphas.push(alpha);
        if eps == 0.0 {
            break;
        }
        for (w, &hit) in weights.iter_mut().zip(&hits) {
            *w *= if hit { (-alpha).exp() } else { alpha.exp() };
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        diag.weight_sums.push(weights.iter().sum());
    }

    if members.is_empty() {
        members.push(Member::train(t)?);
        alphas.push(1.0);
    }
    Ok((
        BaselineEnsemble {
            kind: BaselineKind::Adaboost,
            feature_count: t.feature_count(),
            members,
            member_weights: alphas,
        },
        diag,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EnsembleModel {
    FalseLabel(FalseLabelEnsemble),
    Baseline(BaselineEnsemble),
}

impl EnsembleModel {
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            EnsembleModel::FalseLabel(e) => e.predict(x),
            EnsembleModel::Baseline(e) => e.predict(x),
        }
    }

    /// Unweighted member votes per instance, for the diversity
    /// decomposition. Boosted ensembles vote with weights and have none.
    pub fn vote_profiles(&self, d: &Dataset) -> Result<Vec<VoteProfile>> {
        match self {
            EnsembleModel::FalseLabel(e) => e.vote_profiles(d),
            EnsembleModel::Baseline(e) if e.kind == BaselineKind::Bagging => {
                check_dims(e.feature_count, d.features(0))?;
                d.rows()
                    .map(|(x, y)| {
                        let votes = e.members.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
                        Ok(VoteProfile::new(votes, y))
                    })
                    .collect()
            }
            EnsembleModel::Baseline(_) => Err(Error::UnsupportedDocument(
                "boosted ensembles use weighted votes; no majority-vote decomposition".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = EnsembleDocument {
            format: ENSEMBLE_FORMAT.to_string(),
            version: ENSEMBLE_FORMAT_VERSION,
            ensemble: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnsembleDocument = serde_json::from_str(text)?;
        if doc.format != ENSEMBLE_FORMAT || doc.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::UnsupportedDocument(format!(
                "{} version {}",
                doc.format, doc.version
            )));
        }
        Ok(doc.ensemble)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleDocument {
    format: String,
    version: u32,
    ensemble: EnsembleModel,
}
